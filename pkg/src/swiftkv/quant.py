"""W4A8 quantization, nibble-packed weight storage, and chunked GEMV.

Weights quantize symmetrically per output channel to 4-bit codes in
[-7, 7]; activations per tensor to 8-bit codes in [-127, 127].  Scales
are stored as Q15.17 raws, and quantization rounds against the stored
(already-rounded) scale so a file round-trip is lossless.

Weight file format ("SKVW"): magic + u32 version + u32 out_dim +
u32 in_dim, then row-major packed nibbles (low nibble = even column),
then per-channel scales as signed 32-bit little-endian raws.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fxp
from .fxp import FxpStatus

MAGIC = b"SKVW"
VERSION = 1
W_CODE_MAX = 7
A_CODE_MAX = 127


@dataclass
class QuantizedMatrix:
    packed: np.ndarray        # uint8, shape (out_dim, in_dim//2)
    scales_raw: np.ndarray    # int64 Q15.17, shape (out_dim,)
    out_dim: int
    in_dim: int
    _codes: np.ndarray | None = None

    def codes(self) -> np.ndarray:
        """Unpacked int8 codes, shape (out_dim, in_dim); cached."""
        if self._codes is None:
            lo = (self.packed & 0x0F).astype(np.int8)
            hi = (self.packed >> 4).astype(np.int8)
            lo = np.where(lo >= 8, lo - 16, lo)
            hi = np.where(hi >= 8, hi - 16, hi)
            out = np.empty((self.out_dim, self.in_dim), dtype=np.int8)
            out[:, 0::2] = lo
            out[:, 1::2] = hi
            self._codes = out
        return self._codes


@dataclass
class QuantizedActivation:
    codes: np.ndarray         # int8
    scale_raw: int            # Q15.17


def _pack_codes(codes: np.ndarray) -> np.ndarray:
    lo = codes[:, 0::2].astype(np.int64) & 0x0F
    hi = codes[:, 1::2].astype(np.int64) & 0x0F
    return (lo | (hi << 4)).astype(np.uint8)


def quantize_weights(w: np.ndarray) -> QuantizedMatrix:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] % 2:
        raise ValueError("weights must be 2-D with even in_dim")
    amax = np.abs(w).max(axis=1)
    scale = np.where(amax > 0, amax / W_CODE_MAX, 1.0)
    scales_raw = np.maximum(fxp.from_real_vec(scale), 1)
    eff = scales_raw / fxp.SCALE
    codes = np.clip(np.rint(w / eff[:, None]), -W_CODE_MAX, W_CODE_MAX).astype(np.int8)
    return QuantizedMatrix(packed=_pack_codes(codes), scales_raw=scales_raw,
                           out_dim=w.shape[0], in_dim=w.shape[1])


def quantize_activation(x: np.ndarray) -> QuantizedActivation:
    x = np.asarray(x, dtype=np.float64)
    amax = np.abs(x).max() if x.size else 0.0
    scale = amax / A_CODE_MAX if amax > 0 else 1.0
    scale_raw = max(fxp.from_real(scale), 1)
    eff = scale_raw / fxp.SCALE
    codes = np.clip(np.rint(x / eff), -A_CODE_MAX, A_CODE_MAX).astype(np.int8)
    return QuantizedActivation(codes=codes, scale_raw=scale_raw)


def dequantize_weights(w: QuantizedMatrix) -> np.ndarray:
    return w.codes().astype(np.float64) * (w.scales_raw / fxp.SCALE)[:, None]


def dequantize_activation(a: QuantizedActivation) -> np.ndarray:
    return a.codes.astype(np.float64) * (a.scale_raw / fxp.SCALE)


def gemv_chunked(w: QuantizedMatrix, x: QuantizedActivation,
                 n_chunks: int = 32) -> np.ndarray:
    """INT8 x INT4 GEMV: per-chunk exact INT32 dots, partials summed exactly.

    Bit-identical to the unchunked integer dot product; INT32 cannot
    overflow (4096 * 127 * 7 < 2**31).
    """
    if x.codes.shape[0] != w.in_dim:
        raise ValueError("dimension mismatch")
    if w.in_dim % n_chunks:
        raise ValueError("in_dim not divisible by chunk count")
    codes = w.codes().astype(np.int64)
    xv = x.codes.astype(np.int64)
    width = w.in_dim // n_chunks
    acc = np.zeros(w.out_dim, dtype=np.int64)
    for c in range(n_chunks):
        sl = slice(c * width, (c + 1) * width)
        acc += codes[:, sl] @ xv[sl]
    return acc.astype(np.int32)


def dequantize_to_fxp(acc: np.ndarray, w_scales_raw: np.ndarray, x_scale_raw: int,
                      status: FxpStatus | None = None) -> np.ndarray:
    """INT32 accumulators -> Q15.17, one rounding per multiply.

    acc * w_scale is exact (integer times Q15.17 raw is a Q15.17 raw);
    only the activation-scale multiply rounds.
    """
    t = fxp.saturate_vec(acc.astype(np.int64) * np.asarray(w_scales_raw, dtype=np.int64),
                         status)
    return fxp.mul_vec(t, x_scale_raw, status)


def save_skvw(path, w: QuantizedMatrix):
    path = Path(path)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, w.out_dim, w.in_dim))
        f.write(w.packed.tobytes())
        f.write(w.scales_raw.astype("<i4").tobytes())


def load_skvw(path) -> QuantizedMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    version, out_dim, in_dim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 16
    n_packed = out_dim * (in_dim // 2)
    packed = np.frombuffer(data, dtype=np.uint8, count=n_packed, offset=off)
    off += n_packed
    scales = np.frombuffer(data, dtype="<i4", count=out_dim, offset=off).astype(np.int64)
    if off + out_dim * 4 != len(data):
        raise ValueError(f"{path}: truncated or trailing bytes")
    return QuantizedMatrix(packed=packed.reshape(out_dim, in_dim // 2).copy(),
                           scales_raw=scales, out_dim=out_dim, in_dim=in_dim)
