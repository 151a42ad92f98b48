"""exp() of non-positive arguments via power-of-two decomposition.

exp(x) = 2**(x*log2(e)) = 2**(n+f) with integer n <= 0 handled by a right
shift and f in (-1, 0] handled by a 32-entry table plus linear
interpolation: the top 5 fractional bits of |f| select the table cell, the
remaining 12 bits interpolate within it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp
from .fxp import FRAC, FxpDomainError, rshift_rne

LOG2E_RAW = fxp.from_real(np.log2(np.e))

LUT_BITS = 5
LUT_SIZE = 1 << LUT_BITS          # 32 cells over |f| in [0, 1)
G_BITS = FRAC - LUT_BITS          # 12 low bits interpolate within a cell
G_MASK = (1 << G_BITS) - 1

# The interpolation slope is tilted slightly below the chord between
# adjacent entries.  A pure chord leaves the whole interpolation error on
# one side (the chord of 2**-u lies above the curve), peaking mid-cell at
# ~(ln2/32)**2/8 = 5.87e-5 relative; centering the error keeps the worst
# case near 4e-5 even after Q15.17 rounding.  The tilt constant solves the
# one-sided equioscillation condition for a line pinned at the cell's left
# entry.
_TILT = 0.0858 * (np.log(2) / LUT_SIZE) ** 2


@dataclass(frozen=True)
class ExpLut:
    entries: np.ndarray   # 32 raw Q15.17 values, entries[i] = 2**(-i/32)
    slopes: np.ndarray    # 32 raw Q15.17 values, all negative


def build_lut() -> ExpLut:
    i = np.arange(LUT_SIZE, dtype=np.float64)
    entries = fxp.from_real_vec(2.0 ** (-i / LUT_SIZE))
    chord = LUT_SIZE * (2.0 ** (-(i + 1) / LUT_SIZE) - 2.0 ** (-i / LUT_SIZE))
    slopes = fxp.from_real_vec(chord - LUT_SIZE * _TILT * 2.0 ** (-i / LUT_SIZE))
    entries.flags.writeable = False
    slopes.flags.writeable = False
    return ExpLut(entries=entries, slopes=slopes)


def exp2_frac(f_raw: int, lut: ExpLut) -> int:
    """2**f for f in (-1, 0], one table lookup plus one multiply."""
    if f_raw > 0 or f_raw <= -fxp.SCALE:
        raise FxpDomainError(f"exp2_frac argument {f_raw} outside (-1, 0]")
    mag = -f_raw
    i = mag >> G_BITS
    g = mag & G_MASK
    return int(lut.entries[i]) + rshift_rne(int(lut.slopes[i]) * g, FRAC)


def exp2_frac_vec(f_raw: np.ndarray, lut: ExpLut) -> np.ndarray:
    f_raw = np.asarray(f_raw, dtype=np.int64)
    if np.any((f_raw > 0) | (f_raw <= -fxp.SCALE)):
        raise FxpDomainError("exp2_frac argument outside (-1, 0]")
    mag = -f_raw
    i = mag >> G_BITS
    g = mag & G_MASK
    return lut.entries[i] + rshift_rne(lut.slopes[i] * g, FRAC)


# Shifts at or beyond this count land below Q15.17 resolution; return 0.
UNDERFLOW_SHIFT = 31


def exp_nonpos(x_raw: int, lut: ExpLut) -> int:
    """exp(x) for x <= 0, in [0, 1], exactly 1.0 iff x == 0."""
    if x_raw > 0:
        raise FxpDomainError("exp_nonpos requires x <= 0")
    y = rshift_rne(x_raw * LOG2E_RAW, FRAC)   # x * log2(e)
    mag = -y
    n_mag = mag >> FRAC
    if n_mag >= UNDERFLOW_SHIFT:
        return 0
    f_raw = -(mag & (fxp.SCALE - 1))
    return rshift_rne(exp2_frac(f_raw, lut), n_mag)


def exp_nonpos_vec(x_raw: np.ndarray, lut: ExpLut) -> np.ndarray:
    x_raw = np.asarray(x_raw, dtype=np.int64)
    if np.any(x_raw > 0):
        raise FxpDomainError("exp_nonpos requires x <= 0")
    y = rshift_rne(x_raw * LOG2E_RAW, FRAC)
    mag = -y
    n_mag = mag >> FRAC
    f_raw = -(mag & (fxp.SCALE - 1))
    frac_val = exp2_frac_vec(f_raw, lut)
    shift = np.minimum(n_mag, UNDERFLOW_SHIFT)
    sh = np.maximum(shift, 1)     # avoid a negative shift count when shift == 0
    half = np.int64(1) << (sh - 1)
    mask = (np.int64(1) << sh) - 1
    q = frac_val >> sh
    r = frac_val & mask
    out = q + ((r > half) | ((r == half) & ((q & 1) == 1))).astype(np.int64)
    out = np.where(shift == 0, frac_val, out)
    out = np.where(n_mag >= UNDERFLOW_SHIFT, 0, out)
    return out


def lut_rows(lut: ExpLut):
    """(index, raw_entry, raw_slope) rows for the constant-dump CSV."""
    return [(i, int(lut.entries[i]), int(lut.slopes[i])) for i in range(LUT_SIZE)]
