"""Float64 reference implementations used as ground truth in tests and the
verify CLI.  Nothing in the fixed-point kernels imports this module."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pipeline import LayerConfig
from .rope import rope_reference


def softmax_attention_ref(q: np.ndarray, K: np.ndarray, V: np.ndarray,
                          d: int | None = None) -> np.ndarray:
    """Numerically stable two-pass softmax(q K^T / sqrt(d)) V."""
    q = np.asarray(q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if d is None:
        d = q.shape[0]
    s = K @ q / np.sqrt(d)
    w = np.exp(s - s.max())
    return (w @ V) / w.sum()


def online_softmax_ref(q, K, V, d: int | None = None) -> np.ndarray:
    """Classic single-pass online softmax with per-step rescaling."""
    q = np.asarray(q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if d is None:
        d = q.shape[0]
    mu = -np.inf
    z = 0.0
    y = np.zeros(V.shape[1])
    for k_t, v_t in zip(K, V):
        s = k_t @ q / np.sqrt(d)
        m_new = max(mu, s)
        r = np.exp(mu - m_new) if np.isfinite(mu) else 0.0
        w = np.exp(s - m_new)
        z = z * r + w
        y = y * r + w * v_t
        mu = m_new
    return y / z


def flash_decode_ref(q, K, V, d: int | None = None, B: int = 32) -> np.ndarray:
    """Blockwise two-level online softmax over blocks of B."""
    q = np.asarray(q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if d is None:
        d = q.shape[0]
    if B < 1:
        raise ValueError("block size must be >= 1")
    mu = -np.inf
    z = 0.0
    y = np.zeros(V.shape[1])
    for b0 in range(0, K.shape[0], B):
        Kb, Vb = K[b0:b0 + B], V[b0:b0 + B]
        s = Kb @ q / np.sqrt(d)
        m_b = s.max()
        w = np.exp(s - m_b)
        m_new = max(mu, m_b)
        r_old = np.exp(mu - m_new) if np.isfinite(mu) else 0.0
        r_b = np.exp(m_b - m_new)
        z = z * r_old + w.sum() * r_b
        y = y * r_old + (w @ Vb) * r_b
        mu = m_new
    return y / z


@dataclass
class ReferenceLayer:
    """Float64 twin of pipeline.decode_step with unquantized weights."""
    config: LayerConfig
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    w_gate: np.ndarray
    w_up: np.ndarray
    w_down: np.ndarray
    gamma_attn: np.ndarray
    gamma_ffn: np.ndarray
    keys: list[list[np.ndarray]] = field(default_factory=list)
    values: list[list[np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not self.keys:
            self.keys = [[] for _ in range(self.config.n_heads)]
            self.values = [[] for _ in range(self.config.n_heads)]


def _rms_norm_ref(x, gamma, eps):
    return x * gamma / np.sqrt(np.mean(x * x) + eps)


def _silu_ref(x):
    return x / (1.0 + np.exp(-x))


def reference_decode_step(layer: ReferenceLayer, x: np.ndarray,
                          eps: float = 2.0 ** -17) -> np.ndarray:
    cfg = layer.config
    x = np.asarray(x, dtype=np.float64)
    h = _rms_norm_ref(x, layer.gamma_attn, eps)
    q, k, v = layer.w_q @ h, layer.w_k @ h, layer.w_v @ h
    pos = len(layer.keys[0]) + 1
    head_outs = []
    for hd in range(cfg.n_heads):
        sl = slice(hd * cfg.d_head, (hd + 1) * cfg.d_head)
        q_h = rope_reference(q[sl], pos, cfg.rope_base)
        k_h = rope_reference(k[sl], pos, cfg.rope_base)
        layer.keys[hd].append(k_h)
        layer.values[hd].append(v[sl])
        head_outs.append(softmax_attention_ref(
            q_h, np.array(layer.keys[hd]), np.array(layer.values[hd])))
    attn = np.concatenate(head_outs)
    x2 = x + layer.w_o @ attn
    h2 = _rms_norm_ref(x2, layer.gamma_ffn, eps)
    act = _silu_ref(layer.w_gate @ h2) * (layer.w_up @ h2)
    return x2 + layer.w_down @ act


def reference_run_decode(layers: list[ReferenceLayer], x0: np.ndarray,
                         n_tokens: int) -> list[np.ndarray]:
    outs = []
    x = np.asarray(x0, dtype=np.float64)
    for _ in range(n_tokens):
        for layer in layers:
            x = reference_decode_step(layer, x)
        outs.append(x)
    return outs
