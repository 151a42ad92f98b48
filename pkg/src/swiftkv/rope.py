"""Rotary positional embedding: float64 reference and incremental update.

The reference path rotates channel pairs by m*theta_i directly.  The
decode path caches (cos m*theta_i, sin m*theta_i) and advances them one
position at a time by angle addition with stored constants
a_i = cos(theta_i), b_i = sin(theta_i): four multiplies per pair for the
angle update, four more to rotate the vector.

The angle state and constants live in 32-bit words with 30 fractional
bits: angle-addition accumulates the constant-rounding error linearly in
m, and 17 fractional bits would drift past 1e-2 by m = 4096.  At 30 bits
the drift stays below 1e-5 over 4K positions.  The rotated vectors
themselves are plain Q15.17.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp
from .fxp import FRAC, FxpStatus, rshift_rne

ANGLE_FRAC = 30
ANGLE_ONE = 1 << ANGLE_FRAC
DEFAULT_BASE = 10000.0
DEFAULT_RENORM_PERIOD = 1024


def frequencies(d: int, base: float = DEFAULT_BASE) -> np.ndarray:
    """theta_j = base**(-2j/d), j = 0..d/2-1 (zero-based, theta_0 = 1)."""
    if d % 2:
        raise ValueError("head dim must be even")
    j = np.arange(d // 2, dtype=np.float64)
    return base ** (-2.0 * j / d)


def rope_reference(x: np.ndarray, m: int, base: float = DEFAULT_BASE) -> np.ndarray:
    """Float64 block-diagonal rotation of each channel pair by m*theta_j."""
    x = np.asarray(x, dtype=np.float64)
    theta = frequencies(x.shape[0], base)
    ang = m * theta
    c, s = np.cos(ang), np.sin(ang)
    out = np.empty_like(x)
    out[0::2] = x[0::2] * c - x[1::2] * s
    out[1::2] = x[0::2] * s + x[1::2] * c
    return out


@dataclass
class RopeCache:
    """Per-head cached rotation state at position m."""
    a: np.ndarray          # raw Q2.30 cos(theta_j) constants
    b: np.ndarray          # raw Q2.30 sin(theta_j) constants
    cos_m: np.ndarray      # raw Q2.30 cos(m*theta_j)
    sin_m: np.ndarray      # raw Q2.30 sin(m*theta_j)
    m: int
    base: float
    renorm_period: int = DEFAULT_RENORM_PERIOD
    # multiply counters for the op-budget tests (scalar multiplies)
    angle_mults: int = 0
    rotate_mults: int = 0
    steps: int = 0

    @property
    def n_pairs(self) -> int:
        return self.a.shape[0]


def _angle_raw(x: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(x, dtype=np.float64) * ANGLE_ONE).astype(np.int64)


def make_cache(d: int, base: float = DEFAULT_BASE, m: int = 0,
               renorm_period: int = DEFAULT_RENORM_PERIOD) -> RopeCache:
    """Cache at position m; m > 0 seeds the angle state from float64."""
    theta = frequencies(d, base)
    ang = m * theta
    return RopeCache(
        a=_angle_raw(np.cos(theta)),
        b=_angle_raw(np.sin(theta)),
        cos_m=_angle_raw(np.cos(ang)),
        sin_m=_angle_raw(np.sin(ang)),
        m=m, base=base, renorm_period=renorm_period,
    )


def _renormalize(cache: RopeCache):
    # Pull (cos, sin) back to the unit circle: 2-iteration Newton inverse
    # sqrt seeded at 1 (the norm is always within a few ulp of 1 here).
    c, s = cache.cos_m, cache.sin_m
    n = rshift_rne(c * c + s * s, ANGLE_FRAC)
    r = np.full_like(n, ANGLE_ONE)
    for _ in range(2):
        t = rshift_rne(rshift_rne(n * r, ANGLE_FRAC) * r, ANGLE_FRAC)
        r = rshift_rne(r * (3 * ANGLE_ONE - t), ANGLE_FRAC + 1)
    cache.cos_m = rshift_rne(c * r, ANGLE_FRAC)
    cache.sin_m = rshift_rne(s * r, ANGLE_FRAC)


def _advance(cache: RopeCache):
    a, b, c, s = cache.a, cache.b, cache.cos_m, cache.sin_m
    # Angle addition: exactly four multiplies per pair, products summed
    # wide, one narrowing per output.
    c_new = rshift_rne(a * c - b * s, ANGLE_FRAC)
    s_new = rshift_rne(a * s + b * c, ANGLE_FRAC)
    cache.angle_mults += 4 * cache.n_pairs
    cache.cos_m, cache.sin_m = c_new, s_new
    cache.m += 1
    cache.steps += 1
    if cache.renorm_period and cache.m % cache.renorm_period == 0:
        _renormalize(cache)


def _rotate(cache: RopeCache, x_raw: np.ndarray,
            status: FxpStatus | None = None) -> np.ndarray:
    x_raw = np.asarray(x_raw, dtype=np.int64)
    if x_raw.shape[0] != 2 * cache.n_pairs:
        raise ValueError("vector length does not match cache")
    # Narrow the advanced angles to Q15.17 for the datapath rotation.
    c17 = rshift_rne(cache.cos_m, ANGLE_FRAC - FRAC)
    s17 = rshift_rne(cache.sin_m, ANGLE_FRAC - FRAC)
    xe, xo = x_raw[0::2], x_raw[1::2]
    out = np.empty_like(x_raw)
    out[0::2] = rshift_rne(xe * c17 - xo * s17, FRAC)
    out[1::2] = rshift_rne(xe * s17 + xo * c17, FRAC)
    cache.rotate_mults += 4 * cache.n_pairs
    return fxp.saturate_vec(out, status)


def rope_step(cache: RopeCache, q_raw: np.ndarray,
              status: FxpStatus | None = None):
    """Advance the cache to m+1 and rotate q by the new angles."""
    _advance(cache)
    return _rotate(cache, q_raw, status), cache


def rope_pair(cache: RopeCache, q_raw: np.ndarray, k_raw: np.ndarray,
              status: FxpStatus | None = None):
    """One advance, shared by q (for the scan) and k (for the cache)."""
    _advance(cache)
    return _rotate(cache, q_raw, status), _rotate(cache, k_raw, status), cache


def constants_rows(cache: RopeCache):
    """(index, raw a_i, raw b_i) rows for the constant-dump CSV."""
    return [(i, int(cache.a[i]), int(cache.b[i])) for i in range(cache.n_pairs)]
