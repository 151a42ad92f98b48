"""Seeded verification suites backing the `verify` CLI command.

Each suite runs a set of oracle-backed checks and returns rows of
(check, measured error, bound, pass).  All randomness flows from the
caller's seed, so reports are byte-reproducible.
"""

from __future__ import annotations

import numpy as np

from . import attention, bundle, fxp, oracle, rope
from .attention import KvCache
from .expo import build_lut, exp2_frac_vec, exp_nonpos_vec
from .fxp import SCALE


def _row(check: str, value: float, bound: float, larger_ok: bool = False) -> dict:
    passed = value >= bound if larger_ok else value <= bound
    return {"check": check, "measured": float(value), "bound": float(bound),
            "passed": bool(passed)}


def suite_exp(seed: int = 0) -> list[dict]:
    lut = build_lut()
    raw = np.arange(0, SCALE, dtype=np.int64)       # f in (-1, 0]
    got = exp2_frac_vec(-raw, lut) / SCALE
    exact = 2.0 ** (-(raw / SCALE))
    rel = np.abs(got - exact) / exact
    rows = [_row("exp2_frac dense-sweep max relative error", rel.max(), 5.86e-5)]

    xs = -np.arange(0, 20 * SCALE, 37, dtype=np.int64)
    got = exp_nonpos_vec(xs, lut).astype(float)
    exact = np.exp(xs / SCALE) * SCALE
    # relative table error plus half an ulp from the final shift
    ratio = (np.abs(got - exact) / (5.86e-5 * exact + 0.75)).max()
    rows.append(_row("exp_nonpos sweep error vs table+shift bound", ratio, 1.0))
    return rows


def suite_fxp(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    a = fxp.from_real_vec(rng.uniform(-4, 4, 4096))
    b = fxp.from_real_vec(rng.uniform(-4, 4, 4096))
    err = np.abs(fxp.mul_vec(a, b) / SCALE - (a / SCALE) * (b / SCALE)).max()
    rows.append(_row("mul error vs float64", err, 2.0 ** -18))
    worst = 0.0
    for _ in range(200):
        q = fxp.from_real_vec(rng.uniform(-4, 4, 8))
        k = fxp.from_real_vec(rng.uniform(-4, 4, 8))
        s = fxp.from_real(rng.uniform(0.1, 1.0))
        got = fxp.dot(q, k, s) / SCALE
        exact = float(q / SCALE @ (k / SCALE)) * (s / SCALE)
        worst = max(worst, abs(got - exact))
    rows.append(_row("dot (d=8) error vs float64", worst, 2.0 ** -15))
    return rows


def suite_rope(seed: int = 0, d: int = 128, m_max: int = 4096) -> list[dict]:
    rng = np.random.default_rng(seed)
    q = rng.uniform(-2, 2, d)
    q_raw = fxp.from_real_vec(q)
    cache = rope.make_cache(d)
    worst = 0.0
    for m in range(1, m_max + 1):
        out_raw, _ = rope.rope_step(cache, q_raw)
        ref = rope.rope_reference(q_raw / SCALE, m)
        worst = max(worst, np.abs(out_raw / SCALE - ref).max())
    rows = [_row(f"incremental vs direct rotation, m<={m_max}", worst, 1e-3)]
    per_pair = cache.angle_mults / (cache.steps * cache.n_pairs)
    rows.append({"check": "angle-update multiplies per pair", "measured": per_pair,
                 "bound": 4.0, "passed": per_pair == 4.0})
    return rows


def attention_instance(rng, d: int, t: int, lo: float = -8.0, hi: float = 8.0):
    q = fxp.from_real_vec(rng.uniform(lo, hi, d))
    cache = KvCache(d)
    for _ in range(t):
        cache.append(fxp.from_real_vec(rng.uniform(lo, hi, d)),
                     fxp.from_real_vec(rng.uniform(lo, hi, d)))
    return q, cache


def suite_attention(seed: int = 0, n_instances: int = 50, d: int = 64,
                    t_max: int = 512) -> list[dict]:
    rng = np.random.default_rng(seed)
    lut = build_lut()
    worst = 0.0
    reads_ok = True
    for i in range(n_instances):
        t = int(np.rint(t_max ** (rng.uniform(0, 1)))) or 1
        q, cache = attention_instance(rng, d, t)
        out = attention.attend(q, cache, lut) / SCALE
        reads_ok &= (cache.key_reads == t and cache.value_reads == t)
        K = np.array(cache.keys) / SCALE
        V = np.array(cache.values) / SCALE
        ref = oracle.softmax_attention_ref(q / SCALE, K, V)
        worst = max(worst, np.abs(out - ref).max())
    rows = [_row(f"attend vs softmax oracle, {n_instances} instances", worst, 1e-4),
            {"check": "single-pass KV reads", "measured": float(reads_ok),
             "bound": 1.0, "passed": reads_ok}]
    return rows


def suite_pipeline(seed: int = 0, n_tokens: int = 16, tmpdir=None) -> list[dict]:
    import tempfile
    with tempfile.TemporaryDirectory() as td:
        root = tmpdir or td
        path = bundle.make_toy_bundle(f"{root}/toy", seed=seed)
        model = bundle.load_bundle(path)
        ref_layers = bundle.load_reference_layers(path)
        rng = np.random.default_rng(seed + 1)
        x0 = rng.uniform(-1, 1, model.config.d_model)
        outs = bundle_run(model, x0, n_tokens)
        refs = oracle.reference_run_decode(ref_layers, x0, n_tokens)
    cos_min = min(_cosine(o / SCALE, r) for o, r in zip(outs, refs))
    agree = np.mean([np.argmax(o) == np.argmax(r) for o, r in zip(outs, refs)])
    return [_row(f"decode cosine similarity over {n_tokens} steps", cos_min, 0.99,
                 larger_ok=True),
            _row("decode argmax agreement", agree, 0.95, larger_ok=True)]


def bundle_run(model, x0_float, n_tokens):
    from .pipeline import run_decode
    return run_decode(model, fxp.from_real_vec(x0_float), n_tokens)


def _cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(a @ b / (na * nb))


SUITES = {
    "exp": suite_exp,
    "fxp": suite_fxp,
    "rope": suite_rope,
    "attention": suite_attention,
    "pipeline": suite_pipeline,
}
