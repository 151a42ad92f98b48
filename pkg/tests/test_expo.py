import numpy as np
from hypothesis import given, strategies as st

from swiftkv import fxp
from swiftkv.expo import (LOG2E_RAW, UNDERFLOW_SHIFT, build_lut, exp2_frac,
                          exp2_frac_vec, exp_nonpos, exp_nonpos_vec, lut_rows)

LUT = build_lut()


def test_table_shape_and_anchors():
    assert len(LUT.entries) == 32 and len(LUT.slopes) == 32
    assert LUT.entries[0] == fxp.ONE          # 2^0 pinned exactly
    assert LUT.entries[31] == 66971           # round(2^(-31/32) * 2^17)
    assert np.all(LUT.slopes < 0)             # 2^f decreasing in |f|
    # entries themselves are the rounded segment endpoints
    exact = np.rint(2.0 ** (-np.arange(32) / 32) * fxp.SCALE).astype(np.int64)
    assert np.array_equal(LUT.entries, exact)


def test_lut_rows():
    rows = lut_rows(LUT)
    assert len(rows) == 32
    assert rows[0][1] == fxp.ONE


def test_exp2_frac_golden():
    assert exp2_frac(0, LUT) == fxp.ONE
    assert exp2_frac(-fxp.ONE // 2, LUT) == 92682   # 2^-0.5


def test_exp2_frac_dense_sweep():
    raw = np.arange(0, fxp.SCALE, dtype=np.int64)
    got = exp2_frac_vec(-raw, LUT) / fxp.SCALE
    exact = 2.0 ** (-(raw / fxp.SCALE))
    rel = np.abs(got - exact) / exact
    assert rel.max() <= 5.86e-5


def test_exp2_frac_monotone_within_segments():
    # inside each 4096-point interpolation segment the output never rises
    raw = np.arange(0, fxp.SCALE, dtype=np.int64)
    got = exp2_frac_vec(-raw, LUT)
    seg = raw >> 12
    d = np.diff(got)
    same_seg = seg[1:] == seg[:-1]
    assert np.all(d[same_seg] <= 0)


def test_exp_nonpos_identity_and_golden():
    assert exp_nonpos(0, LUT) == fxp.ONE
    assert exp_nonpos(-1, LUT) < fxp.ONE      # strictly below 1 for any x<0
    assert exp_nonpos(-fxp.ONE, LUT) == 48220
    assert exp_nonpos(-fxp.ONE // 2, LUT) == 79500


def test_exp_nonpos_underflow():
    cutoff = -(UNDERFLOW_SHIFT + 1) * fxp.ONE   # e^x far below one ulp
    assert exp_nonpos(cutoff, LUT) == 0
    assert exp_nonpos(fxp.RAW_MIN, LUT) == 0


def test_exp_nonpos_sweep_accuracy():
    # table error is relative, the final shift adds at most half an ulp of
    # absolute error; the combined bound holds over the whole sweep
    xs = -np.arange(0, 20 * fxp.SCALE, 37, dtype=np.int64)
    got = exp_nonpos_vec(xs, LUT).astype(float)
    exact = np.exp(xs / fxp.SCALE) * fxp.SCALE
    err = np.abs(got - exact)
    assert np.all(err <= 5.86e-5 * exact + 0.75)


def test_exp_nonpos_shift_exactness():
    # exp(x - k ln2) equals exp(x) >> k up to rounding of the shift
    ln2 = fxp.from_real(np.log(2.0))
    for x in range(0, -3 * fxp.SCALE, -997):
        base = exp_nonpos(x, LUT)
        for k in (1, 2, 5):
            shifted = exp_nonpos(x - k * ln2, LUT)
            assert abs(shifted - fxp.rshift_rne(base, k)) <= 2


@given(st.integers(min_value=fxp.RAW_MIN, max_value=0))
def test_exp_nonpos_vec_matches_scalar(x):
    got = exp_nonpos_vec(np.array([x], dtype=np.int64), LUT)
    assert got[0] == exp_nonpos(x, LUT)


@given(st.integers(min_value=-fxp.SCALE + 1, max_value=0))
def test_exp2_frac_vec_matches_scalar(f):
    got = exp2_frac_vec(np.array([f], dtype=np.int64), LUT)
    assert got[0] == exp2_frac(f, LUT)


def test_log2e_constant():
    assert LOG2E_RAW == fxp.from_real(np.log2(np.e))
    assert LOG2E_RAW > fxp.ONE   # guarantees exp(x) == 1 only at x == 0
