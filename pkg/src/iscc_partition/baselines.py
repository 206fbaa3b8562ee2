"""Benchmark schemes and the exhaustive-search optimality oracle."""

from __future__ import annotations

import enum
import itertools
import logging
import math
from typing import Sequence

import numpy as np

from .ce import pair_table
from .inner import Evaluator, InnerSolution
from .profile import PartitionPair

__all__ = [
    "SchemeId",
    "BudgetExceeded",
    "run_local_only",
    "run_ed_dp",
    "run_ced_wdp",
    "run_exhaustive",
    "search_options",
]

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 1_000_000
CED_WDP_EXHAUSTIVE_MAX_K = 12
_CHUNK = 8192


class SchemeId(str, enum.Enum):
    LOCAL_ONLY = "LocalOnly"
    ED_DP = "EdDp"
    CED_WDP = "CedWdp"
    EXHAUSTIVE = "Exhaustive"
    PROPOSED_CE = "ProposedCE"


class BudgetExceeded(RuntimeError):
    pass


def run_local_only(evaluator: Evaluator) -> InnerSolution:
    L = evaluator.profile.L
    return evaluator.solve([PartitionPair(L, L)] * evaluator.scenario.K)


def search_options(
    evaluator: Evaluator,
    options: np.ndarray,
    budget: int = DEFAULT_BUDGET,
    batched: bool = True,
) -> InnerSolution:
    """Best joint assignment when every device picks a row of ``options``.

    ``options`` is an ``(n, 2)`` array of pairs shared by all devices. Joint
    assignments are visited in lexicographic order of option index, and the
    first minimum wins ties. ``batched=False`` evaluates one assignment at a
    time through the scalar inner solve.
    """
    K = evaluator.scenario.K
    n = len(options)
    total = n**K
    if total > budget:
        raise BudgetExceeded(
            f"exhaustive search needs {n}^{K} = {total:.3e} evaluations, over the budget of {budget:.0e}"
        )
    best_obj = math.inf
    best_idx: tuple[int, ...] = (0,) * K
    if not batched:
        for combo in itertools.product(range(n), repeat=K):
            obj = evaluator.solve([tuple(options[i]) for i in combo]).objective
            if obj < best_obj:
                best_obj, best_idx = obj, combo
    else:
        radix = n ** np.arange(K - 1, -1, -1)
        for start in range(0, total, _CHUNK):
            flat = np.arange(start, min(start + _CHUNK, total))
            idx = (flat[:, None] // radix) % n
            obj = evaluator.batch_objective(options[idx, 0], options[idx, 1])
            i = int(np.argmin(obj))
            if obj[i] < best_obj:
                best_obj, best_idx = float(obj[i]), tuple(int(v) for v in idx[i])
    return evaluator.solve([tuple(options[i]) for i in best_idx])


def run_exhaustive(
    evaluator: Evaluator,
    restrict_l1_ge_1: bool = False,
    budget: int = DEFAULT_BUDGET,
    batched: bool = True,
) -> InnerSolution:
    """Global optimum over every joint partition assignment.

    ``restrict_l1_ge_1`` drops pairs that send the raw input off the device.
    """
    options = pair_table(evaluator.profile.L)
    if restrict_l1_ge_1:
        options = options[options[:, 0] >= 1]
    return search_options(evaluator, options, budget, batched)


def _coordinate_descent(evaluator: Evaluator, options: np.ndarray, start: Sequence[int]) -> InnerSolution:
    """Cycle devices, giving each its best option with the others fixed, until stable."""
    K = evaluator.scenario.K
    choice = np.array(start, dtype=np.intp)
    n = len(options)
    current = math.inf
    while True:
        changed = False
        for k in range(K):
            idx = np.tile(choice, (n, 1))
            idx[:, k] = np.arange(n)
            obj = evaluator.batch_objective(options[idx, 0], options[idx, 1])
            j = int(np.argmin(obj))
            # move only on strict improvement so the loop terminates
            if obj[j] < current and j != choice[k]:
                choice[k] = j
                changed = True
            current = min(current, float(obj[j]))
        if not changed:
            break
    return evaluator.solve([tuple(options[i]) for i in choice])


def run_ed_dp(evaluator: Evaluator, exact: bool = False) -> InnerSolution:
    """Device/edge split only (``l2 = L``).

    Coordinate descent from all-local by default; ``exact=True`` runs the
    restricted exhaustive oracle over ``(L+1)^K`` assignments instead.
    """
    L = evaluator.profile.L
    options = np.array([(l1, L) for l1 in range(L + 1)], dtype=np.intp)
    if exact:
        return search_options(evaluator, options)
    return _coordinate_descent(evaluator, options, [L] * evaluator.scenario.K)


def run_ced_wdp(evaluator: Evaluator, force_exhaustive: bool = False) -> InnerSolution:
    """Whole-model placement: each device runs locally, at the edge or in the cloud."""
    L = evaluator.profile.L
    K = evaluator.scenario.K
    options = np.array([(L, L), (0, L), (0, 0)], dtype=np.intp)
    if K <= CED_WDP_EXHAUSTIVE_MAX_K or force_exhaustive:
        return search_options(evaluator, options, budget=max(DEFAULT_BUDGET, 3**K))
    log.warning("K=%d exceeds %d; whole-model placement falls back to coordinate descent", K, CED_WDP_EXHAUSTIVE_MAX_K)
    return _coordinate_descent(evaluator, options, [0] * K)
