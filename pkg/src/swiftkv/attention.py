"""Single-pass decode attention over a KV cache in Q15.17 fixed point.

Each cached (k_t, v_t) is read exactly once.  The scan keeps a running
maximum mu of the scaled scores, a normalizer Z, and a weighted value sum
Y; the division by Z happens once, after the scan.  No score vector is
ever materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fxp
from .expo import ExpLut, exp_nonpos
from .fxp import FRAC, ONE, FxpStatus, rshift_rne


class EmptyCacheError(Exception):
    pass


class KvCache:
    """Append-only per-head store of rotated keys and values (raw Q15.17).

    Read counters back the single-pass property tests.
    """

    def __init__(self, d: int):
        self.d = d
        self.keys: list[np.ndarray] = []
        self.values: list[np.ndarray] = []
        self.key_reads = 0
        self.value_reads = 0

    def __len__(self) -> int:
        return len(self.keys)

    def append(self, k_raw: np.ndarray, v_raw: np.ndarray):
        if k_raw.shape != (self.d,) or v_raw.shape != (self.d,):
            raise ValueError("vector length does not match head dim")
        self.keys.append(np.asarray(k_raw, dtype=np.int64))
        self.values.append(np.asarray(v_raw, dtype=np.int64))

    def read_key(self, t: int) -> np.ndarray:
        self.key_reads += 1
        return self.keys[t]

    def read_value(self, t: int) -> np.ndarray:
        self.value_reads += 1
        return self.values[t]

    def reset_counters(self):
        self.key_reads = 0
        self.value_reads = 0


@dataclass
class SwiftKvState:
    """Running (mu, Z, Y) triple plus token counter."""
    d: int
    mu: int | None = None          # raw; unset until the first token
    z: int = 0                     # raw
    y: np.ndarray = None           # raw, shape (d,)
    t: int = 0

    def __post_init__(self):
        if self.y is None:
            self.y = np.zeros(self.d, dtype=np.int64)


def inv_sqrt_d_raw(d: int) -> int:
    return fxp.from_real(1.0 / np.sqrt(d))


def score(q_raw: np.ndarray, k_raw: np.ndarray, inv_sqrt_d: int,
          status: FxpStatus | None = None) -> int:
    return fxp.dot(q_raw, k_raw, inv_sqrt_d, status)


def step(state: SwiftKvState, s_raw: int, v_raw: np.ndarray, lut: ExpLut,
         status: FxpStatus | None = None, trace: list | None = None) -> SwiftKvState:
    """Fold one (score, value) pair into the running state.

    Ties (s == mu) take the non-rescaling branch with weight 1; both
    branches agree analytically at equality.
    """
    if state.t == 0:
        state.mu = s_raw
        state.z = ONE
        state.y = np.asarray(v_raw, dtype=np.int64).copy()
        state.t = 1
        if trace is not None:
            trace.append({"t": 1, "s_raw": int(s_raw), "branch": "init",
                          "weight_raw": ONE, "z_raw": ONE})
        return state

    if s_raw <= state.mu:
        beta = exp_nonpos(s_raw - state.mu, lut)
        state.z = fxp.add(state.z, beta, status)
        state.y = fxp.saturate_vec(state.y + rshift_rne(beta * v_raw, FRAC), status)
        branch, weight = "beta", beta
    else:
        alpha = exp_nonpos(state.mu - s_raw, lut)
        state.z = fxp.add(fxp.mul(alpha, state.z, status), ONE, status)
        # Scale Y first, then add v, one rounding each.
        state.y = fxp.saturate_vec(rshift_rne(alpha * state.y, FRAC) + v_raw, status)
        state.mu = s_raw
        branch, weight = "alpha", alpha
    state.t += 1
    if trace is not None:
        trace.append({"t": state.t, "s_raw": int(s_raw), "branch": branch,
                      "weight_raw": int(weight), "z_raw": int(state.z)})
    return state


def finalize(state: SwiftKvState, status: FxpStatus | None = None) -> np.ndarray:
    if state.t == 0:
        raise EmptyCacheError("no tokens processed")
    return fxp.div_vec(state.y, state.z, status)


def attend(q_raw: np.ndarray, cache: KvCache, lut: ExpLut,
           inv_sqrt_d: int | None = None, status: FxpStatus | None = None,
           trace: list | None = None) -> np.ndarray:
    """Forward scan: score -> step per cached token, then one division."""
    if len(cache) == 0:
        raise EmptyCacheError("empty KV cache")
    if inv_sqrt_d is None:
        inv_sqrt_d = inv_sqrt_d_raw(cache.d)
    q_raw = np.asarray(q_raw, dtype=np.int64)
    state = SwiftKvState(d=cache.d)
    for t in range(len(cache)):
        s = score(q_raw, cache.read_key(t), inv_sqrt_d, status)
        step(state, s, cache.read_value(t), lut, status, trace)
    return finalize(state, status)
