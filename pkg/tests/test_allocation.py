import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iscc_partition.allocation import alloc_local, alloc_mec, energy


def mec_time(s, alpha, f):
    return sum(si / (a * fi) for si, a, fi in zip(s, alpha, f) if si > 0)


def test_alloc_mec_example():
    assert np.allclose(alloc_mec([4.0, 1.0], [1.0, 1.0], 12e9), [8e9, 4e9])


def test_alloc_mec_zero_workloads():
    assert np.array_equal(alloc_mec([0.0, 0.0], 4.0, 12e9), [0.0, 0.0])
    f = alloc_mec([0.0, 9.0, 1.0], 4.0, 12e9)
    assert f[0] == 0.0 and math.isclose(f.sum(), 12e9)


def test_alloc_mec_rowwise():
    s = np.array([[4.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    f = alloc_mec(s, 4.0, 12e9)
    assert np.allclose(f, [[8e9, 4e9], [0, 0], [6e9, 6e9]])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(1e6, 1e10), min_size=2, max_size=5), st.floats(1e9, 2e10))
def test_alloc_mec_kkt(s, F_M):
    alpha = np.full(len(s), 4.0)
    f = alloc_mec(s, alpha, F_M)
    assert math.isclose(f.sum(), F_M, rel_tol=1e-12)
    # equal marginal value s_k / (alpha f_k^2) across devices
    marg = np.asarray(s) / (alpha * f**2)
    assert marg.max() - marg.min() <= 1e-9 * marg.max()


def test_alloc_mec_beats_grid_search():
    rng = np.random.default_rng(7)
    F_M = 12e9
    steps = np.linspace(0.0, 1.0, 401)[1:-1]
    for _ in range(20):
        K = int(rng.integers(2, 4))
        s = rng.uniform(1e8, 5e9, K)
        alpha = rng.uniform(1.0, 8.0, K)
        best = math.inf
        for frac in itertools.product(steps, repeat=K - 1):
            if sum(frac) >= 1:
                continue
            f = np.array([*frac, 1 - sum(frac)]) * F_M
            best = min(best, mec_time(s, alpha, f))
        got = mec_time(s, alpha, alloc_mec(s, alpha, F_M))
        assert got <= best * (1 + 1e-9)
        assert got >= best * (1 - 1e-3)


def test_alloc_local_branches():
    # energy budget slack: the CPU cap binds
    assert alloc_local(1e9, 2.0, 0.8e9, 300.0, 1e-28) == 0.8e9
    # energy budget tight: sqrt(300 * 2 / (1e-28 * 1e27)) = sqrt(6000)
    assert math.isclose(alloc_local(1e27, 2.0, 0.8e9, 300.0, 1e-28), math.sqrt(6000.0))
    assert math.isclose(alloc_local(1e27, 2.0, 0.8e9, 300.0, 1e-28), 77.46, rel_tol=1e-4)
    assert alloc_local(0.0, 2.0, 0.8e9, 300.0, 1e-28) == 0.8e9


def test_alloc_local_vectorized_respects_budget():
    s = np.array([0.0, 1e9, 1e25, 1e27])
    f = alloc_local(s, 2.0, 0.8e9, 300.0, 1e-28)
    assert f.shape == (4,)
    assert np.all(f <= 0.8e9)
    assert np.all(energy(s, f, 2.0, 1e-28) <= 300.0 * (1 + 1e-12))


def test_energy_examples():
    assert math.isclose(energy(1e9, 0.8e9, 2.0, 1e-28), 0.032)
    assert math.isclose(energy(1e9, 1.6e9, 2.0, 1e-28), 4 * 0.032)
    assert energy(0.0, 0.8e9, 2.0, 1e-28) == 0.0


@pytest.mark.parametrize("s", [1e20, 1e24, 1e28])
def test_tight_budget_spends_exactly_the_budget(s):
    f = alloc_local(s, 2.0, 0.8e9, 300.0, 1e-28)
    if f < 0.8e9:
        assert math.isclose(energy(s, f, 2.0, 1e-28), 300.0)
