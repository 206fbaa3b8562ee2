"""Cross-entropy search over per-device partition pairs.

Each device keeps a vector ``omega`` of per-layer Bernoulli probabilities.
A partition pair corresponds to a bit vector with one set bit (``l1 == l2``)
or two (``l1 < l2``); samples are drawn from the Bernoulli product
distribution conditioned on that feasibility pattern, by enumerating the
pair masses exactly.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .inner import Evaluator, InnerSolution
from .profile import PartitionPair, enumerate_partitions

__all__ = [
    "CeParams",
    "CeState",
    "SampleEval",
    "CeResult",
    "pair_table",
    "pair_probabilities",
    "sample_feasible",
    "sample_batch",
    "update_omega",
    "smooth",
    "omega_entropy",
    "optimize",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CeParams:
    samples_per_iter: int = 1000
    elite_count: int = 50
    rho: float = 0.9
    max_iters: int = 50
    stall_iters: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.elite_count <= self.samples_per_iter:
            raise ValueError("need 1 <= elite_count <= samples_per_iter")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.max_iters < 1 or self.stall_iters < 1:
            raise ValueError("max_iters and stall_iters must be >= 1")


@dataclass(frozen=True)
class SampleEval:
    partitions: tuple[PartitionPair, ...]
    objective: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.objective)


@dataclass
class CeState:
    omega: np.ndarray
    iteration: int = 0
    best: SampleEval | None = None
    history: list[float] = field(default_factory=list)
    trace: list[dict[str, float]] = field(default_factory=list)


@dataclass
class CeResult:
    partitions: list[PartitionPair]
    solution: InnerSolution
    state: CeState
    evaluations: int


def pair_table(L: int) -> np.ndarray:
    """All feasible pairs for ``L`` layers as an ``(n, 2)`` array in enumeration order."""
    return np.array(enumerate_partitions(L), dtype=np.intp)


def pair_probabilities(omega_row, pairs: np.ndarray | None = None) -> np.ndarray:
    """Exact conditional probability of every pair under ``omega_row``.

    The mass of a pair is the product of ``omega`` over its set bits and
    ``1 - omega`` over all other layers. Computed without division so that
    entries at exactly 0 or 1 are handled.
    """
    w = np.asarray(omega_row, dtype=np.float64)
    if pairs is None:
        pairs = pair_table(w.size - 1)
    n = w.size
    factors = np.broadcast_to(1.0 - w, (len(pairs), n)).copy()
    rows = np.arange(len(pairs))
    factors[rows, pairs[:, 0]] = w[pairs[:, 0]]
    factors[rows, pairs[:, 1]] = w[pairs[:, 1]]
    mass = factors.prod(axis=1)
    total = mass.sum()
    if not total > 0:
        log.warning("degenerate omega with no feasible support; sampling pairs uniformly")
        return np.full(len(pairs), 1.0 / len(pairs))
    return mass / total


def sample_feasible(omega_row, rng: np.random.Generator) -> PartitionPair:
    pairs = pair_table(len(omega_row) - 1)
    i = rng.choice(len(pairs), p=pair_probabilities(omega_row, pairs))
    return PartitionPair(int(pairs[i, 0]), int(pairs[i, 1]))


def sample_batch(omega: np.ndarray, n: int, rng: np.random.Generator, pairs: np.ndarray | None = None):
    """Draw ``n`` joint assignments; returns ``(l1, l2)`` arrays of shape ``(n, K)``."""
    K, width = omega.shape
    if pairs is None:
        pairs = pair_table(width - 1)
    idx = np.empty((n, K), dtype=np.intp)
    for k in range(K):
        idx[:, k] = rng.choice(len(pairs), size=n, p=pair_probabilities(omega[k], pairs))
    return pairs[idx, 0], pairs[idx, 1]


def _bits(l1: np.ndarray, l2: np.ndarray, width: int) -> np.ndarray:
    """Binary form of assignments: shape ``(n, K, width)``; one bit when ``l1 == l2``."""
    n, K = l1.shape
    b = np.zeros((n, K, width))
    ii, kk = np.meshgrid(np.arange(n), np.arange(K), indexing="ij")
    b[ii, kk, l1] = 1.0
    b[ii, kk, l2] = 1.0
    return b


def update_omega(elites, width: int | None = None) -> np.ndarray:
    """Mean bit vector of the elite samples, shape ``(K, width)``.

    ``elites`` is a non-empty list of :class:`SampleEval` (``width`` then
    required) or a pair of ``(n, K)`` arrays ``(l1, l2)`` with ``width``
    defaulting to ``max + 1``.
    """
    if isinstance(elites, tuple) and len(elites) == 2 and isinstance(elites[0], np.ndarray):
        l1, l2 = elites
    else:
        elites = list(elites)
        if not elites:
            raise ValueError("need at least one elite sample")
        l1 = np.array([[p[0] for p in e.partitions] for e in elites], dtype=np.intp)
        l2 = np.array([[p[1] for p in e.partitions] for e in elites], dtype=np.intp)
    if width is None:
        width = int(l2.max()) + 1
    return _bits(l1, l2, width).mean(axis=0)


def smooth(omega, upsilon, rho: float) -> np.ndarray:
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    return rho * np.asarray(upsilon) + (1.0 - rho) * np.asarray(omega)


def omega_entropy(omega: np.ndarray) -> float:
    """Summed binary entropy of the Bernoulli parameters, in bits."""
    w = np.clip(omega, 1e-300, 1.0)
    q = np.clip(1.0 - omega, 1e-300, 1.0)
    h = -(omega * np.log2(w) + (1.0 - omega) * np.log2(q))
    return float(h.sum())


def _all_assignments(pairs: np.ndarray, K: int):
    idx = np.array(list(itertools.product(range(len(pairs)), repeat=K)), dtype=np.intp).reshape(-1, K)
    return pairs[idx, 0], pairs[idx, 1]


def optimize(evaluator: Evaluator, params: CeParams | None = None, enumerate_all: bool = False) -> CeResult:
    """Run the CE loop and return the best assignment ever sampled.

    Iteration ``t`` draws its samples from a generator seeded with
    ``(params.seed, t)``, so a run is reproducible and independent of how
    evaluation is scheduled. ``enumerate_all`` replaces sampling by every
    joint assignment (a test hook that reduces CE to exhaustive search).
    """
    params = params or CeParams()
    K = evaluator.scenario.K
    L = evaluator.profile.L
    pairs = pair_table(L)
    state = CeState(omega=np.full((K, L + 1), 0.5))
    evaluations = 0
    stall = 0
    all_l1 = all_l2 = None
    if enumerate_all:
        all_l1, all_l2 = _all_assignments(pairs, K)

    for t in range(params.max_iters):
        if enumerate_all:
            l1, l2 = all_l1, all_l2
        else:
            rng = np.random.default_rng(np.random.SeedSequence([params.seed, t]))
            l1, l2 = sample_batch(state.omega, params.samples_per_iter, rng, pairs)
        obj = evaluator.batch_objective(l1, l2)
        evaluations += len(obj)
        order = np.argsort(obj, kind="stable")
        n_elite = min(params.elite_count, len(obj))
        elite = order[:n_elite]

        i0 = int(order[0])
        cand = SampleEval(tuple(PartitionPair(int(a), int(b)) for a, b in zip(l1[i0], l2[i0])), float(obj[i0]))
        prev = state.best.objective if state.best is not None else math.inf
        if cand.objective < prev:
            state.best = cand
        # A change below 1e-9 relative counts as a stalled iteration.
        if math.isinf(prev):
            improved = math.isfinite(cand.objective)
        else:
            improved = prev - cand.objective > 1e-9 * abs(prev)
        if state.best is None:
            state.best = cand
        stall = 0 if improved else stall + 1

        upsilon = update_omega((l1[elite], l2[elite]), L + 1)
        state.omega = np.clip(smooth(state.omega, upsilon, params.rho), 0.0, 1.0)
        state.iteration = t + 1
        state.history.append(state.best.objective)
        elite_obj = obj[elite]
        state.trace.append(
            {
                "iteration": t + 1,
                "best_objective": state.best.objective,
                "mean_elite_objective": float(np.mean(elite_obj)) if np.all(np.isfinite(elite_obj)) else math.inf,
                "omega_entropy": omega_entropy(state.omega),
            }
        )
        if enumerate_all or stall >= params.stall_iters:
            break

    best = list(state.best.partitions)
    return CeResult(best, evaluator.solve(best), state, evaluations)
