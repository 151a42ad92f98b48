"""Q15.17 fixed-point arithmetic: 32-bit two's complement, 17 fractional bits.

Raw values are plain ints (or int64 numpy arrays for the vector helpers);
value = raw / 2**17.  All narrowing uses round-half-to-even.  Overflow
saturates to the format limits and sets a sticky flag on the FxpStatus the
caller passed in; no global state.
"""

from __future__ import annotations

import numpy as np

FRAC = 17
SCALE = 1 << FRAC
ONE = SCALE
RAW_MAX = (1 << 31) - 1
RAW_MIN = -(1 << 31)
# Accumulator format for dot products: 64-bit, 2*FRAC fractional bits.
ACC_FRAC = 2 * FRAC

VALUE_MAX = RAW_MAX / SCALE   # 2**14 - 2**-17
VALUE_MIN = RAW_MIN / SCALE   # -2**14


class FxpError(Exception):
    pass


class FxpOverflowError(FxpError):
    pass


class FxpDomainError(FxpError):
    pass


class FxpStatus:
    """Sticky saturation flag accumulator, local to a call chain."""

    __slots__ = ("saturated",)

    def __init__(self):
        self.saturated = False

    def flag(self):
        self.saturated = True

    def merge(self, other: "FxpStatus"):
        if other.saturated:
            self.saturated = True


def rshift_rne(p, k):
    """Arithmetic right shift by k bits with round-half-to-even.

    Works on ints and int64 ndarrays alike (k >= 0; k == 0 is identity).
    """
    if k == 0:
        return p
    half = 1 << (k - 1)
    q = p >> k
    r = p & ((1 << k) - 1)
    inc = (r > half) | ((r == half) & ((q & 1) == 1))
    if isinstance(q, np.ndarray):
        return q + inc.astype(np.int64)
    return q + int(inc)


def div_rne(n: int, d: int) -> int:
    """Integer n/d rounded half-to-even (exact, arbitrary precision)."""
    if d < 0:
        n, d = -n, -d
    q, r = divmod(n, d)
    twice = 2 * r
    if twice > d or (twice == d and q & 1):
        q += 1
    return q


def saturate(raw: int, status: FxpStatus | None = None) -> int:
    if raw > RAW_MAX:
        if status is not None:
            status.flag()
        return RAW_MAX
    if raw < RAW_MIN:
        if status is not None:
            status.flag()
        return RAW_MIN
    return raw


def saturate_vec(raw: np.ndarray, status: FxpStatus | None = None) -> np.ndarray:
    over = (raw > RAW_MAX) | (raw < RAW_MIN)
    if over.any():
        if status is not None:
            status.flag()
        return np.clip(raw, RAW_MIN, RAW_MAX)
    return raw


def from_real(x: float) -> int:
    if not np.isfinite(x) or abs(x) >= 1 << (31 - FRAC):
        raise FxpOverflowError(f"{x!r} outside Q15.17 range")
    raw = int(np.rint(x * SCALE))
    if raw > RAW_MAX or raw < RAW_MIN:
        raise FxpOverflowError(f"{x!r} outside Q15.17 range")
    return raw


def to_real(raw: int) -> float:
    return raw / SCALE


def from_real_vec(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) >= 1 << (31 - FRAC)):
        raise FxpOverflowError("input outside Q15.17 range")
    return np.rint(x * SCALE).astype(np.int64)


def to_real_vec(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / SCALE


def add(a: int, b: int, status: FxpStatus | None = None) -> int:
    return saturate(a + b, status)


def sub(a: int, b: int, status: FxpStatus | None = None) -> int:
    return saturate(a - b, status)


def mul(a: int, b: int, status: FxpStatus | None = None) -> int:
    return saturate(rshift_rne(a * b, FRAC), status)


def div(num: int, den: int, status: FxpStatus | None = None) -> int:
    if den == 0:
        raise FxpDomainError("division by zero")
    return saturate(div_rne(num << FRAC, den), status)


def add_vec(a: np.ndarray, b: np.ndarray, status: FxpStatus | None = None) -> np.ndarray:
    return saturate_vec(a + b, status)


def mul_vec(a, b, status: FxpStatus | None = None) -> np.ndarray:
    # Products of two in-range raws fit int64 (|a*b| < 2**62).
    p = np.multiply(a, b, dtype=np.int64)
    return saturate_vec(rshift_rne(p, FRAC), status)


def div_vec(num, den, status: FxpStatus | None = None) -> np.ndarray:
    num = np.asarray(num, dtype=np.int64)
    den = np.asarray(den, dtype=np.int64)
    if np.any(den == 0):
        raise FxpDomainError("division by zero")
    sign = np.where(den < 0, -1, 1)
    n = num * sign
    d = den * sign
    shifted = n << FRAC
    q = shifted // d          # floor division
    r = shifted - q * d       # remainder in [0, d)
    twice = 2 * r
    q = q + ((twice > d) | ((twice == d) & ((q & 1) == 1))).astype(np.int64)
    return saturate_vec(q, status)


def dot(a: np.ndarray, b: np.ndarray, scale_raw: int = ONE,
        status: FxpStatus | None = None) -> int:
    """Exact wide-accumulator dot product, scaled and narrowed once.

    Sum of raw products accumulates in a 34-fraction accumulator with no
    intermediate rounding; the scale multiply and the single narrowing to
    Q15.17 happen at the end.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.size == 0:
        return 0
    ma = int(np.abs(a).max())
    mb = int(np.abs(b).max())
    if ma and mb and ma * mb * a.size < (1 << 62):
        acc = int(a @ b)
    else:  # int64 could overflow; fall back to exact Python ints
        acc = sum(int(x) * int(y) for x, y in zip(a.tolist(), b.tolist()))
    return saturate(rshift_rne(acc * scale_raw, ACC_FRAC), status)
