"""Non-MAC vector ops: elementwise add, Hadamard, SiLU, RMSNorm, casts.

Everything runs in Q15.17 except em_add, which is an exact INT32 sum of
GEMV partials.  SiLU builds the sigmoid from the shared exp path; RMSNorm
uses a table-seeded 2-iteration Newton inverse square root.
"""

from __future__ import annotations

import numpy as np

from . import fxp
from .expo import ExpLut, exp_nonpos_vec
from .fxp import FRAC, ONE, FxpDomainError, FxpStatus, rshift_rne

INT32_MAX = (1 << 31) - 1
INT8_MAX = 127

DEFAULT_EPS_RAW = 1  # one ulp


class IntOverflowError(Exception):
    pass


def em_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    out = a + b
    if np.any(np.abs(out) > INT32_MAX):
        raise IntOverflowError("INT32 elementwise add overflow")
    return out


def hadamard(a: np.ndarray, b: np.ndarray, status: FxpStatus | None = None) -> np.ndarray:
    return fxp.mul_vec(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64), status)


# 64-entry inverse-sqrt seed table over mantissa values in [1, 4).
_ISQRT_CELLS = 64
_ISQRT_SEED = fxp.from_real_vec(
    1.0 / np.sqrt(1.0 + 3.0 * (np.arange(_ISQRT_CELLS) + 0.5) / _ISQRT_CELLS))


def inv_sqrt_vec(x_raw: np.ndarray, status: FxpStatus | None = None) -> np.ndarray:
    """1/sqrt(x) for x > 0: normalize to [1, 4), seed from the table,
    two Newton iterations r <- r*(3 - x*r^2)/2, then undo the scaling."""
    x_raw = np.asarray(x_raw, dtype=np.int64)
    if np.any(x_raw <= 0):
        raise FxpDomainError("inv_sqrt requires positive input")
    # x = m * 4**k with m in [1, 4); shift raw by even amounts.
    k = np.zeros_like(x_raw)
    m = x_raw.copy()
    while np.any(m >= 4 * fxp.SCALE):
        big = m >= 4 * fxp.SCALE
        m = np.where(big, m >> 2, m)
        k = np.where(big, k + 1, k)
    while np.any(m < fxp.SCALE):
        small = m < fxp.SCALE
        m = np.where(small, m << 2, m)
        k = np.where(small, k - 1, k)
    idx = np.clip((m - fxp.SCALE) * _ISQRT_CELLS // (3 * fxp.SCALE), 0, _ISQRT_CELLS - 1)
    r = _ISQRT_SEED[idx]
    for _ in range(2):
        t = rshift_rne(rshift_rne(m * r, FRAC) * r, FRAC)
        r = rshift_rne(r * (3 * ONE - t), FRAC + 1)
    # 1/sqrt(x) = 1/sqrt(m) * 2**-k
    pos = np.maximum(-k, 0)
    out = np.where(k > 0, _rshift_rne_var(r, np.maximum(k, 0)), r << pos)
    return fxp.saturate_vec(out, status)


def _rshift_rne_var(p: np.ndarray, k: np.ndarray) -> np.ndarray:
    kk = np.maximum(k, 1)
    half = np.int64(1) << (kk - 1)
    mask = (np.int64(1) << kk) - 1
    q = p >> kk
    r = p & mask
    out = q + ((r > half) | ((r == half) & ((q & 1) == 1))).astype(np.int64)
    return np.where(k == 0, p, out)


def sigmoid(x_raw: np.ndarray, lut: ExpLut, status: FxpStatus | None = None) -> np.ndarray:
    """1/(1 + exp(-|x|)), reflected for negative x."""
    x_raw = np.asarray(x_raw, dtype=np.int64)
    e = exp_nonpos_vec(-np.abs(x_raw), lut)
    pos = fxp.div_vec(np.full_like(x_raw, ONE), ONE + e, status)
    return np.where(x_raw >= 0, pos, ONE - pos)


def silu(x_raw: np.ndarray, lut: ExpLut, status: FxpStatus | None = None) -> np.ndarray:
    return fxp.mul_vec(x_raw, sigmoid(x_raw, lut, status), status)


def rms_norm(x_raw: np.ndarray, gamma_raw: np.ndarray, eps_raw: int = DEFAULT_EPS_RAW,
             status: FxpStatus | None = None) -> np.ndarray:
    x_raw = np.asarray(x_raw, dtype=np.int64)
    d = x_raw.shape[0]
    if d < 1:
        raise ValueError("empty vector")
    # Exact wide sum of squares, one rounded division by d.
    acc = int(np.sum(x_raw * x_raw)) if np.abs(x_raw).max(initial=0) < (1 << 27) \
        else sum(int(v) * int(v) for v in x_raw.tolist())
    mean_raw = fxp.saturate(rshift_rne(fxp.div_rne(acc, d), FRAC), status)
    inv = inv_sqrt_vec(np.array([mean_raw + eps_raw]), status)[0]
    return fxp.mul_vec(fxp.mul_vec(x_raw, gamma_raw, status), inv, status)


def cast(x: np.ndarray, from_fmt: str, to_fmt: str, scale_raw: int = ONE,
         status: FxpStatus | None = None) -> np.ndarray:
    """Scale-multiply, round-half-to-even into the target grid.

    Formats: FXP32 (17 fractional bits), INT32 and INT8 (integer grids);
    INT8 saturates at +-127.
    """
    frac = {"FXP32": FRAC, "INT32": 0, "INT8": 0}
    if from_fmt not in frac or to_fmt not in frac:
        raise ValueError(f"unknown format {from_fmt}/{to_fmt}")
    x = np.asarray(x, dtype=np.int64)
    prod = [int(v) * scale_raw for v in x.tolist()] if np.abs(x).max(initial=0) >= (1 << 40) \
        else x * scale_raw
    shift = frac[from_fmt] + FRAC - frac[to_fmt]
    if isinstance(prod, list):
        out = np.array([fxp.rshift_rne(p, shift) for p in prod], dtype=np.int64)
    else:
        out = rshift_rne(prod, shift)
    if to_fmt == "INT8":
        if np.any(np.abs(out) > INT8_MAX):
            if status is not None:
                status.flag()
            out = np.clip(out, -INT8_MAX, INT8_MAX)
        return out
    return fxp.saturate_vec(out, status)
