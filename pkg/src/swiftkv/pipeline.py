"""One decode step through a multi-head transformer layer, functionally.

Dataflow per step: RMSNorm -> quantize -> Q/K/V GEMV -> dequantize to
Q15.17 -> per-head rotary update + cache append + single-pass attention
-> concat -> quantize -> output GEMV -> residual -> RMSNorm -> FFN
(gate/up GEMV, SiLU, Hadamard, down GEMV) -> residual.  Pre-norm residual
placement follows the LLaMA-style layer.

Positions are 1-based: the first decoded token is rotated by one angle
step from the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attention, fxp, quant, rope, sfu
from .attention import KvCache
from .expo import ExpLut, build_lut
from .fxp import FxpStatus
from .quant import QuantizedMatrix
from .rope import RopeCache


@dataclass(frozen=True)
class LayerConfig:
    d_model: int
    n_heads: int
    ffn_dim: int
    rope_base: float = 10000.0
    n_processors: int = 32
    chunk_width: int = 128

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def validate(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must divide evenly into heads")
        if self.d_head % 2:
            raise ValueError("head dim must be even")
        for dim in (self.d_model, self.ffn_dim):
            if dim % self.gemv_chunks(dim):
                raise ValueError(f"dim {dim} not divisible into GEMV chunks")

    def gemv_chunks(self, in_dim: int) -> int:
        """Chunk count for a GEMV of this input width.

        Full-size geometries use one chunk_width slice per processor;
        small toy dims fall back to the largest chunk count that divides.
        """
        n = min(self.n_processors, max(1, in_dim // self.chunk_width))
        while in_dim % n:
            n -= 1
        return n


@dataclass
class LayerWeights:
    w_q: QuantizedMatrix
    w_k: QuantizedMatrix
    w_v: QuantizedMatrix
    w_o: QuantizedMatrix
    w_gate: QuantizedMatrix
    w_up: QuantizedMatrix
    w_down: QuantizedMatrix
    gamma_attn: np.ndarray    # raw Q15.17, (d_model,)
    gamma_ffn: np.ndarray


@dataclass
class LayerState:
    config: LayerConfig
    weights: LayerWeights
    kv: list[KvCache] = field(default_factory=list)
    rope_caches: list[RopeCache] = field(default_factory=list)
    lut: ExpLut = field(default_factory=build_lut)

    def __post_init__(self):
        cfg = self.config
        cfg.validate()
        if not self.kv:
            self.kv = [KvCache(cfg.d_head) for _ in range(cfg.n_heads)]
        if not self.rope_caches:
            self.rope_caches = [rope.make_cache(cfg.d_head, cfg.rope_base)
                                for _ in range(cfg.n_heads)]
        self._inv_sqrt_d = attention.inv_sqrt_d_raw(cfg.d_head)

    def cache_len(self) -> int:
        return len(self.kv[0])


def dispatch_split(x: np.ndarray, n: int) -> list[np.ndarray]:
    """Contiguous equal chunks; concatenation restores x bit-exactly."""
    x = np.asarray(x)
    if x.shape[0] % n:
        raise ValueError(f"length {x.shape[0]} not divisible by {n}")
    return list(x.reshape(n, -1))


def dispatch_concat(chunks: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(chunks)


def _gemv_to_fxp(w: QuantizedMatrix, x_raw: np.ndarray, cfg: LayerConfig,
                 status: FxpStatus | None) -> np.ndarray:
    act = quant.quantize_activation(fxp.to_real_vec(x_raw))
    acc = quant.gemv_chunked(w, act, cfg.gemv_chunks(w.in_dim))
    return quant.dequantize_to_fxp(acc, w.scales_raw, act.scale_raw, status)


def decode_step(state: LayerState, x_raw: np.ndarray,
                status_map: dict[str, FxpStatus] | None = None,
                trace: list | None = None) -> np.ndarray:
    """Run one token through the layer; appends one (k, v) per head."""
    cfg = state.config
    w = state.weights
    x_raw = np.asarray(x_raw, dtype=np.int64)

    def st(stage: str) -> FxpStatus:
        if status_map is None:
            return None
        return status_map.setdefault(stage, FxpStatus())

    h = sfu.rms_norm(x_raw, w.gamma_attn, status=st("attn_norm"))
    q = _gemv_to_fxp(w.w_q, h, cfg, st("gemv_qkv"))
    k = _gemv_to_fxp(w.w_k, h, cfg, st("gemv_qkv"))
    v = _gemv_to_fxp(w.w_v, h, cfg, st("gemv_qkv"))

    head_outs = []
    for hd in range(cfg.n_heads):
        sl = slice(hd * cfg.d_head, (hd + 1) * cfg.d_head)
        q_h, k_h, _ = rope.rope_pair(state.rope_caches[hd], q[sl], k[sl],
                                     st("rope"))
        state.kv[hd].append(k_h, v[sl])
        head_trace = trace if hd == 0 else None
        head_outs.append(attention.attend(q_h, state.kv[hd], state.lut,
                                          state._inv_sqrt_d, st("attend"),
                                          head_trace))
    attn = dispatch_concat(head_outs)

    o = _gemv_to_fxp(w.w_o, attn, cfg, st("gemv_o"))
    x2 = fxp.add_vec(x_raw, o, st("residual"))

    h2 = sfu.rms_norm(x2, w.gamma_ffn, status=st("ffn_norm"))
    gate = _gemv_to_fxp(w.w_gate, h2, cfg, st("gemv_ffn"))
    up = _gemv_to_fxp(w.w_up, h2, cfg, st("gemv_ffn"))
    act = sfu.hadamard(sfu.silu(gate, state.lut, st("silu")), up, st("hadamard"))
    down = _gemv_to_fxp(w.w_down, act, cfg, st("gemv_ffn"))
    return fxp.add_vec(x2, down, st("residual"))


def prefill(state: LayerState, k_float: np.ndarray, v_float: np.ndarray):
    """Load precomputed float K/V rows (one per position, 1-based) into the
    caches via the reference rotation; advances the rotary caches to match."""
    cfg = state.config
    n_tok = k_float.shape[0]
    start = state.cache_len()
    for t in range(n_tok):
        pos = start + t + 1
        for hd in range(cfg.n_heads):
            sl = slice(hd * cfg.d_head, (hd + 1) * cfg.d_head)
            k_rot = rope.rope_reference(k_float[t, sl], pos, cfg.rope_base)
            state.kv[hd].append(fxp.from_real_vec(k_rot),
                                fxp.from_real_vec(v_float[t, sl]))
    for hd in range(cfg.n_heads):
        state.rope_caches[hd] = rope.make_cache(cfg.d_head, cfg.rope_base,
                                                m=start + n_tok)


@dataclass
class Model:
    layers: list[LayerState]

    @property
    def config(self) -> LayerConfig:
        return self.layers[0].config


def run_decode(model: Model, x0_raw: np.ndarray, n_tokens: int,
               status_map: dict[str, FxpStatus] | None = None,
               trace: list | None = None) -> list[np.ndarray]:
    """Repeat decode_step, feeding each step's output as the next input."""
    outs = []
    x = np.asarray(x0_raw, dtype=np.int64)
    for _ in range(n_tokens):
        for layer in model.layers:
            x = decode_step(layer, x, status_map, trace)
        outs.append(x)
    return outs
