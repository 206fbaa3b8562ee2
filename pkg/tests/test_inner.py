import math
from dataclasses import replace

import numpy as np
import pytest

from iscc_partition.harness import prepare_trial, trial_seed
from iscc_partition.inner import Evaluator, SolverOptions, solve_inner
from iscc_partition.profile import PartitionPair, enumerate_partitions
from iscc_partition.scenario import Scenario


# Short iteration caps keep the per-assignment solves cheap; the cached and
# strict paths run identical iterations whatever the caps are.
FAST = SolverOptions(it_max=3, inner_max=10)


@pytest.fixture(scope="module")
def ev(small_trial):
    return small_trial[0]


@pytest.fixture(scope="module")
def fast(ev):
    return Evaluator(ev.scenario, ev.channels, ev.targets, FAST)


@pytest.fixture(scope="module")
def strict(ev):
    return Evaluator(ev.scenario, ev.channels, ev.targets, replace(FAST, no_rate_cache=True))


def _random_assignments(rng, L, K, n):
    pairs = enumerate_partitions(L)
    idx = rng.integers(0, len(pairs), (n, K))
    return [[pairs[i] for i in row] for row in idx]


def test_cached_rates_match_strict_solves(fast, strict):
    rng = np.random.default_rng(0)
    for parts in _random_assignments(rng, fast.profile.L, fast.scenario.K, 20):
        a = fast.solve(parts)
        b = strict.solve(parts)
        active = strict.offload_bits(parts) > 0
        assert np.allclose(a.rates[active], b.rates[active], rtol=1e-6, atol=0)
        assert math.isclose(a.objective, b.objective, rel_tol=1e-5)


def test_batch_matches_scalar(ev):
    pairs = enumerate_partitions(ev.profile.L)
    grid = np.array([[p, q] for p in pairs for q in pairs])  # (n, K, 2)
    batch = ev.batch_objective(grid[:, :, 0], grid[:, :, 1])
    scalar = np.array([ev.solve([tuple(x) for x in row]).objective for row in grid])
    assert batch.shape == (len(pairs) ** 2,)
    assert np.allclose(batch, scalar, rtol=1e-12, atol=0)


def test_strict_batch_goes_through_scalar_path(strict):
    l1 = np.array([[1, 2], [5, 0]])
    l2 = np.array([[3, 2], [5, 4]])
    got = strict.batch_objective(l1, l2)
    want = [strict.solve(list(zip(a, b))).objective for a, b in zip(l1, l2)]
    assert np.allclose(got, want, rtol=1e-12)


def test_all_local_closed_form(ev):
    L = ev.profile.L
    sol = ev.solve([PartitionPair(L, L)] * ev.scenario.K)
    total = ev.profile.total_flops
    assert math.isclose(sol.objective, ev.scenario.K * total / (2.0 * 0.8e9), rel_tol=1e-12)
    assert np.all(sol.f_mec == 0.0)


def test_single_device_cloud_chain(run_opts):
    sc = Scenario(K=1)
    ev1, _ = prepare_trial(sc, trial_seed(3, 0), run_opts)
    sol = ev1.solve([PartitionPair(0, 0)])
    bits = sc.profile.out_bits(0)
    want = bits / sol.rates[0] + bits / sc.backhaul_bps + sc.profile.total_flops / (8.0 * 20e9)
    assert math.isclose(sol.objective, want, rel_tol=1e-12)
    one_off = solve_inner([PartitionPair(0, 0)], sc, ev1.channels, ev1.targets)
    assert math.isclose(one_off.objective, sol.objective, rel_tol=1e-12)


def test_objective_is_sum_of_device_latencies(ev):
    sol = ev.solve([(1, 3), (2, 5)])
    assert sol.objective == math.fsum(b.total for b in sol.per_device)
    assert math.isclose(sum(sol.f_mec), ev.scenario.F_mec_cps)


def test_deterministic(small_scenario, run_opts, ev):
    again, _ = prepare_trial(small_scenario, trial_seed(0, 0), run_opts)
    parts = [(0, 2), (3, 4)]
    assert again.solve(parts).objective == ev.solve(parts).objective
    assert np.array_equal(again.cached_rates, ev.cached_rates)


def test_changing_one_device_leaves_others_rates(strict):
    base = strict.solve([(0, 2), (1, 3)])
    moved = strict.solve([(0, 2), (4, 4)])
    assert math.isclose(base.rates[0], moved.rates[0], rel_tol=1e-6)


def test_wrong_number_of_pairs(ev):
    with pytest.raises(ValueError):
        ev.solve([(0, 0)])
