"""Crossing-scanner tests: brute force oracle plus backend parity.

The scanners exist in a compiled and a pure numpy variant with identical
semantics; every case below runs the naive per-step scan as the oracle and
then checks both backends against it and against each other.
"""

import numpy as np
import pytest

from divseq import _slowpath
from divseq._engine import BACKEND
from divseq.estimators import ks_one_sample, ks_two_sample

try:
    from divseq import _fastpath

    _BACKENDS = [_slowpath, _fastpath]
except ImportError:
    _fastpath = None
    _BACKENDS = [_slowpath]


def _uniform_cdf(q):
    return np.clip(q, 0.0, 1.0)


def _naive_ks1(u, gamma):
    for t in range(1, u.size + 1):
        if ks_one_sample(u[:t], _uniform_cdf) > gamma[t - 1]:
            return t
    return 0


def _naive_ks2(xu, yu, gamma):
    t = s = 0
    for step in range(1, xu.size + yu.size + 1):
        if step % 2 == 1:
            t += 1
        else:
            s += 1
        if t and s and ks_two_sample(xu[:t], yu[:s]) > gamma[step - 1]:
            return step
    return 0


@pytest.mark.parametrize("impl", _BACKENDS, ids=lambda m: m.BACKEND)
class TestKs1:
    @pytest.mark.parametrize("scale", [0.3, 0.8, 1.2, 2.0])
    @pytest.mark.parametrize("seed", [0, 7])
    def test_matches_naive(self, impl, scale, seed):
        rng = np.random.default_rng(seed)
        u = rng.uniform(size=200)
        ts = np.arange(1, 201)
        gamma = scale / np.sqrt(ts)
        assert impl.ks1_first_crossing(u, gamma) == _naive_ks1(u, gamma)

    def test_never_crosses_on_huge_boundary(self, impl):
        rng = np.random.default_rng(3)
        u = rng.uniform(size=500)
        assert impl.ks1_first_crossing(u, np.full(500, 2.0)) == 0

    def test_immediate_crossing(self, impl):
        u = np.array([0.95, 0.1, 0.2])
        gamma = np.array([0.5, 0.5, 0.5])
        # at t=1 the distance is max(0.95, 0.05) = 0.95 > 0.5
        assert impl.ks1_first_crossing(u, gamma) == 1

    def test_block_boundaries_exact(self, impl):
        # boundary drops just below the statistic right at a block edge
        rng = np.random.default_rng(11)
        u = rng.uniform(size=300)
        gamma = np.full(300, 2.0)
        for at in (63, 64, 65, 127, 128, 129):
            g = gamma.copy()
            g[at:] = 0.0
            want = _naive_ks1(u, g)
            assert impl.ks1_first_crossing(u, g) == want

    def test_length_mismatch(self, impl):
        with pytest.raises(ValueError):
            impl.ks1_first_crossing(np.zeros(5), np.zeros(4))


@pytest.mark.parametrize("impl", _BACKENDS, ids=lambda m: m.BACKEND)
class TestKs2:
    @pytest.mark.parametrize("scale", [0.3, 0.8, 1.5])
    @pytest.mark.parametrize("seed", [1, 13])
    def test_matches_naive(self, impl, scale, seed):
        rng = np.random.default_rng(seed)
        xu = rng.uniform(size=120)
        yu = rng.uniform(size=120)
        steps = np.arange(1, 241)
        gamma = scale / np.sqrt(np.maximum(steps // 2, 1))
        assert impl.ks2_first_crossing(xu, yu, gamma) == _naive_ks2(xu, yu, gamma)

    def test_odd_total_length(self, impl):
        rng = np.random.default_rng(5)
        xu = rng.uniform(size=61)
        yu = rng.uniform(size=60)
        gamma = np.full(121, 0.4)
        assert impl.ks2_first_crossing(xu, yu, gamma) == _naive_ks2(xu, yu, gamma)

    def test_never_crosses(self, impl):
        rng = np.random.default_rng(9)
        xu = rng.uniform(size=80)
        yu = rng.uniform(size=80)
        assert impl.ks2_first_crossing(xu, yu, np.full(160, 2.0)) == 0

    def test_bad_lengths(self, impl):
        with pytest.raises(ValueError):
            impl.ks2_first_crossing(np.zeros(3), np.zeros(5), np.zeros(8))
        with pytest.raises(ValueError):
            impl.ks2_first_crossing(np.zeros(4), np.zeros(4), np.zeros(7))


@pytest.mark.skipif(_fastpath is None, reason="compiled backend not built")
class TestBackendParity:
    def test_ks1_bitwise_equal(self):
        rng = np.random.default_rng(21)
        for trial in range(20):
            u = rng.uniform(size=1500)
            scale = rng.uniform(0.2, 2.5)
            gamma = scale / np.sqrt(np.arange(1, 1501))
            assert _fastpath.ks1_first_crossing(
                u, gamma
            ) == _slowpath.ks1_first_crossing(u, gamma)

    def test_ks2_bitwise_equal(self):
        rng = np.random.default_rng(22)
        for trial in range(12):
            xu = rng.uniform(size=700)
            yu = rng.uniform(size=700)
            scale = rng.uniform(0.2, 2.5)
            steps = np.arange(1, 1401)
            gamma = scale / np.sqrt(np.maximum(steps // 2, 1))
            assert _fastpath.ks2_first_crossing(
                xu, yu, gamma
            ) == _slowpath.ks2_first_crossing(xu, yu, gamma)

    def test_dispatch_names_active_backend(self):
        assert BACKEND in ("compiled", "python")
