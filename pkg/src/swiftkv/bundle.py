"""Model bundle directory format and the deterministic toy generator.

A bundle holds config.json (LayerConfig fields plus n_layers and seed),
one .skvw weight file per matrix per layer, raw Q15.17 norm gains, and
float64 copies of the unquantized weights (weights_ref.npz) for the
reference comparison path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import fxp, quant
from .oracle import ReferenceLayer
from .pipeline import LayerConfig, LayerState, LayerWeights, Model

_MATRICES = ("w_q", "w_k", "w_v", "w_o", "w_gate", "w_up", "w_down")


def _matrix_shapes(cfg: LayerConfig) -> dict[str, tuple[int, int]]:
    d, f = cfg.d_model, cfg.ffn_dim
    return {"w_q": (d, d), "w_k": (d, d), "w_v": (d, d), "w_o": (d, d),
            "w_gate": (f, d), "w_up": (f, d), "w_down": (d, f)}


def _snapped_matrix(rng, out_dim: int, in_dim: int, weight_scale: float):
    """Random matrix whose entries sit exactly on their own INT4 grid.

    Entries are code * s with codes in [-7, 7] and s a representable Q15.17
    scale; quantize_weights then recovers the matrix losslessly, so the
    quantized pipeline and its float twin run the same weights and the
    comparison isolates activation-quantization and fixed-point effects.
    """
    codes = np.clip(np.rint(rng.normal(0.0, 7 / 3, (out_dim, in_dim))), -7, 7)
    codes = codes.astype(np.int64)
    # Pin one full-scale code per row so the recovered per-row scale is s.
    codes[:, 0] = np.where(codes[:, 0] >= 0, 7, -7)
    s_raw = max(fxp.from_real(weight_scale * 3 / (7 * np.sqrt(in_dim))), 1)
    return codes * (s_raw / fxp.SCALE)


def make_toy_bundle(path, seed: int = 0, n_layers: int = 2, d_model: int = 64,
                    n_heads: int = 4, ffn_dim: int = 128,
                    weight_scale: float = 0.25) -> Path:
    """Random small model, reproducible from the seed.

    Weights are drawn at roughly weight_scale/sqrt(fan_in) so the layer map
    stays near-contractive and free-running decodes remain bounded.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cfg = LayerConfig(d_model=d_model, n_heads=n_heads, ffn_dim=ffn_dim)
    cfg.validate()
    rng = np.random.default_rng(seed)
    ref_arrays = {}
    for li in range(n_layers):
        for name, (out_dim, in_dim) in _matrix_shapes(cfg).items():
            w = _snapped_matrix(rng, out_dim, in_dim, weight_scale)
            ref_arrays[f"layer{li}.{name}"] = w
            quant.save_skvw(path / f"layer{li}.{name}.skvw", quant.quantize_weights(w))
        for gname in ("gamma_attn", "gamma_ffn"):
            g = np.ones(d_model)
            ref_arrays[f"layer{li}.{gname}"] = g
            (path / f"layer{li}.{gname}.bin").write_bytes(
                fxp.from_real_vec(g).astype("<i4").tobytes())
    np.savez(path / "weights_ref.npz", **ref_arrays)
    config = {"d_model": d_model, "n_heads": n_heads, "ffn_dim": ffn_dim,
              "rope_base": 10000.0, "n_processors": 32, "chunk_width": 128,
              "n_layers": n_layers, "seed": seed}
    (path / "config.json").write_text(json.dumps(config, indent=2))
    return path


class BundleError(Exception):
    pass


def load_bundle(path) -> Model:
    path = Path(path)
    cfg_path = path / "config.json"
    if not cfg_path.is_file():
        raise BundleError(f"{path}: missing config.json")
    try:
        raw = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as e:
        raise BundleError(f"{cfg_path}: invalid JSON ({e})") from e
    try:
        n_layers = raw["n_layers"]
        cfg = LayerConfig(d_model=raw["d_model"], n_heads=raw["n_heads"],
                          ffn_dim=raw["ffn_dim"],
                          rope_base=raw.get("rope_base", 10000.0),
                          n_processors=raw.get("n_processors", 32),
                          chunk_width=raw.get("chunk_width", 128))
    except KeyError as e:
        raise BundleError(f"{cfg_path}: missing field {e}") from e
    layers = []
    for li in range(n_layers):
        mats = {}
        for name in _MATRICES:
            f = path / f"layer{li}.{name}.skvw"
            if not f.is_file():
                raise BundleError(f"{path}: missing {f.name}")
            try:
                mats[name] = quant.load_skvw(f)
            except ValueError as e:
                raise BundleError(str(e)) from e
        gammas = {}
        for gname in ("gamma_attn", "gamma_ffn"):
            f = path / f"layer{li}.{gname}.bin"
            if not f.is_file():
                raise BundleError(f"{path}: missing {f.name}")
            gammas[gname] = np.frombuffer(f.read_bytes(), dtype="<i4").astype(np.int64)
            if gammas[gname].shape[0] != cfg.d_model:
                raise BundleError(f"{f}: wrong gain vector length")
        weights = LayerWeights(**mats, gamma_attn=gammas["gamma_attn"],
                               gamma_ffn=gammas["gamma_ffn"])
        layers.append(LayerState(config=cfg, weights=weights))
    return Model(layers=layers)


def load_reference_layers(path) -> list[ReferenceLayer]:
    """Float64 twin of the bundle for agreement metrics."""
    path = Path(path)
    raw = json.loads((path / "config.json").read_text())
    cfg = LayerConfig(d_model=raw["d_model"], n_heads=raw["n_heads"],
                      ffn_dim=raw["ffn_dim"],
                      rope_base=raw.get("rope_base", 10000.0))
    npz_path = path / "weights_ref.npz"
    if not npz_path.is_file():
        raise BundleError(f"{path}: missing weights_ref.npz")
    arrays = np.load(npz_path)
    layers = []
    for li in range(raw["n_layers"]):
        kw = {name: arrays[f"layer{li}.{name}"] for name in _MATRICES}
        layers.append(ReferenceLayer(
            config=cfg, **kw,
            gamma_attn=arrays[f"layer{li}.gamma_attn"],
            gamma_ffn=arrays[f"layer{li}.gamma_ffn"]))
    return layers
