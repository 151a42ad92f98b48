"""Single-pass decode attention in Q15.17 fixed point, with W4A8 GEMV and
a parametric accelerator cycle model."""

from . import attention, bundle, cyclemodel, expo, fxp, oracle, pipeline, quant, rope, sfu
from .attention import KvCache, SwiftKvState, attend
from .cyclemodel import HwConfig, cycles_swiftkv
from .expo import ExpLut, build_lut, exp_nonpos
from .fxp import FxpStatus
from .pipeline import LayerConfig, decode_step, run_decode

__version__ = "0.1.0"
