import numpy as np
import pytest

from swiftkv import fxp, rope


def test_frequencies_zero_based():
    f = rope.frequencies(8)
    assert f[0] == 1.0
    assert f[1] == pytest.approx(10000.0 ** (-2 / 8))
    assert len(f) == 4


def test_reference_preserves_norm():
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, 64)
    for m in (1, 17, 4096):
        assert np.linalg.norm(rope.rope_reference(x, m)) == pytest.approx(
            np.linalg.norm(x))


def test_reference_angle_additivity():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 16)
    a = rope.rope_reference(rope.rope_reference(x, 3), 5)
    b = rope.rope_reference(x, 8)
    assert np.abs(a - b).max() < 1e-12


def test_cache_initial_position():
    cache = rope.make_cache(8)
    assert cache.m == 0
    assert np.all(cache.cos_m == 1 << 30)   # angle 0 in Q2.30
    assert np.all(cache.sin_m == 0)


def test_step_golden():
    cache = rope.make_cache(4)
    x = fxp.from_real_vec(np.array([1.0, 0.5, -0.25, 2.0]))
    out, _ = rope.rope_step(cache, x)
    assert out.tolist() == [15672, 145702, -35388, 261802]
    assert cache.m == 1


def test_four_multiplies_per_pair():
    cache = rope.make_cache(64)
    x = fxp.from_real_vec(np.zeros(64))
    for _ in range(10):
        rope.rope_step(cache, x)
    assert cache.angle_mults == 4 * cache.n_pairs * cache.steps
    assert cache.steps == 10


def test_incremental_tracks_reference_short():
    rng = np.random.default_rng(2)
    x = rng.uniform(-2, 2, 32)
    x_raw = fxp.from_real_vec(x)
    cache = rope.make_cache(32)
    worst = 0.0
    for m in range(1, 257):
        out, _ = rope.rope_step(cache, x_raw)
        ref = rope.rope_reference(x_raw / fxp.SCALE, m)
        worst = max(worst, np.abs(out / fxp.SCALE - ref).max())
    assert worst < 5e-4


def test_renormalization_bounds_drift():
    # after many periods the cached angles still sit on the unit circle
    cache = rope.make_cache(8, renorm_period=512)
    x = fxp.from_real_vec(np.zeros(8))
    for _ in range(2048):
        rope.rope_step(cache, x)
    norm = (cache.cos_m.astype(float) ** 2 + cache.sin_m.astype(float) ** 2) / (1 << 60)
    assert np.abs(norm - 1.0).max() < 1e-6


def test_seeded_cache_matches_stepped():
    stepped = rope.make_cache(16)
    x = fxp.from_real_vec(np.arange(16, dtype=float) / 8)
    for _ in range(40):
        rope.rope_step(stepped, x)
    seeded = rope.make_cache(16, m=40)
    drift = np.abs(stepped.cos_m - seeded.cos_m).max()
    assert drift <= 64   # Q2.30 ulps after 40 incremental updates
    out_a, _ = rope.rope_step(stepped, x)
    out_b, _ = rope.rope_step(seeded, x)
    assert np.abs(out_a - out_b).max() <= 1


def test_rope_pair_single_advance():
    cache = rope.make_cache(8)
    q = fxp.from_real_vec(np.ones(8))
    k = fxp.from_real_vec(-np.ones(8))
    q_rot, k_rot, _ = rope.rope_pair(cache, q, k)
    assert cache.m == 1
    assert np.array_equal(k_rot, -q_rot)   # rotation is linear


def test_length_mismatch_raises():
    cache = rope.make_cache(8)
    with pytest.raises(ValueError):
        rope.rope_step(cache, fxp.from_real_vec(np.zeros(6)))


def test_constants_rows():
    cache = rope.make_cache(8)
    rows = rope.constants_rows(cache)
    assert len(rows) == 4
    assert rows[0][1] == pytest.approx(np.cos(1.0) * (1 << 30), abs=1)
