import numpy as np
import pytest

from swiftkv import bundle
from swiftkv.expo import build_lut


@pytest.fixture(scope="session")
def lut():
    return build_lut()


@pytest.fixture(scope="session")
def toy_bundle(tmp_path_factory):
    """Deterministic 2-layer toy model, shared across tests."""
    path = tmp_path_factory.mktemp("bundle") / "toy"
    bundle.make_toy_bundle(path, seed=0)
    return path


def random_cache(rng, d, t, lo=-8.0, hi=8.0):
    from swiftkv import fxp
    from swiftkv.attention import KvCache
    cache = KvCache(d)
    for _ in range(t):
        cache.append(fxp.from_real_vec(rng.uniform(lo, hi, d)),
                     fxp.from_real_vec(rng.uniform(lo, hi, d)))
    return cache


def instance_grid(n_instances, seed=0):
    """The shared attention-accuracy instance distribution: dims drawn from
    {16, 64, 128}, context lengths log-spaced over [1, 4096]."""
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        d = int(rng.choice([16, 64, 128]))
        t = int(np.rint(4096.0 ** rng.uniform(0.0, 1.0)))
        yield rng, d, max(t, 1)
