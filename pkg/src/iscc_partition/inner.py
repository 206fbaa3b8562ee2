"""Inner-layer solve: allocations, beamforming and latency for fixed partitions.

``Evaluator`` binds the immutable inputs of one trial (scenario, channels,
sensing covariances) and owns the rate cache. Under the fixed-covariance
constraint each device's rate-maximizing precoder does not depend on the
other devices' weights, so one beamforming solve with every device active
serves every partition assignment. ``no_rate_cache=True`` disables the cache
and reruns the beamforming solve for each assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import beamforming as bfm
from .allocation import alloc_local, alloc_mec
from .beampattern import CovarianceTarget
from .cost import LatencyBreakdown, latency
from .profile import PartitionPair, WorkloadSplit, workload_split
from .radio import ChannelSet
from .scenario import Scenario

__all__ = ["SolverOptions", "InnerSolution", "Evaluator", "solve_inner"]


@dataclass(frozen=True)
class SolverOptions:
    no_rate_cache: bool = False  # rerun beamforming per assignment instead of caching rates
    charge_terminal_transfers: bool = False  # charge o(L) transfers for terminal partitions
    tol: float = 1e-6
    it_max: int = 50
    inner_tol: float = 1e-6
    inner_max: int = 100


@dataclass
class InnerSolution:
    partitions: list[PartitionPair]
    splits: list[WorkloadSplit]
    f_mec: np.ndarray
    f_local: np.ndarray
    beamformers: bfm.BeamformerSet
    rates: np.ndarray
    per_device: list[LatencyBreakdown]
    objective: float
    feasible: bool
    mm_history: list[float] = field(default_factory=list)


class Evaluator:
    def __init__(
        self,
        scenario: Scenario,
        channels: ChannelSet,
        targets: Sequence[CovarianceTarget],
        opts: SolverOptions | None = None,
    ):
        if channels.K != scenario.K or len(targets) != scenario.K:
            raise ValueError("channels and covariance targets must have one entry per device")
        self.scenario = scenario
        self.channels = channels
        self.targets = list(targets)
        self.opts = opts or SolverOptions()
        self.profile = scenario.profile
        self._cached: bfm.BeamformingResult | None = None

        sc = scenario
        self._alpha_local = sc.device_array("alpha_local")
        self._F_local = sc.device_array("F_local_cps")
        self._E_th = sc.device_array("E_th_j")
        self._kappa = sc.device_array("kappa")
        self._cum = sc.profile.cum_flops.astype(np.float64)
        self._out_bits = sc.profile.out_bits_array

    # -- beamforming -----------------------------------------------------
    def beamform(self, weights: np.ndarray, record: bool = False) -> bfm.BeamformingResult:
        o = self.opts
        return bfm.solve(
            weights,
            self.channels,
            self.targets,
            self.scenario.d_streams,
            self.scenario.bandwidth_hz,
            tol=o.tol,
            it_max=o.it_max,
            inner_tol=o.inner_tol,
            inner_max=o.inner_max,
            record=record,
        )

    @property
    def cached_beamforming(self) -> bfm.BeamformingResult:
        """Beamforming with every device weighted by its raw input size."""
        if self._cached is None:
            self._cached = self.beamform(np.full(self.scenario.K, self._out_bits[0]))
        return self._cached

    @property
    def cached_rates(self) -> np.ndarray:
        return self.cached_beamforming.rates

    def offload_bits(self, partitions: Sequence[PartitionPair]) -> np.ndarray:
        L = self.profile.L
        strict = self.opts.charge_terminal_transfers
        return np.array([self.profile.out_bits(l1) if (l1 < L or strict) else 0.0 for l1, _ in partitions])

    # -- scalar path -----------------------------------------------------
    def solve(self, partitions: Sequence[PartitionPair]) -> InnerSolution:
        sc = self.scenario
        partitions = [PartitionPair(int(a), int(b)) for a, b in partitions]
        if len(partitions) != sc.K:
            raise ValueError(f"expected {sc.K} partition pairs, got {len(partitions)}")
        splits = [workload_split(self.profile, p) for p in partitions]
        f_mec = alloc_mec([s.s_mec for s in splits], sc.alpha_mec, sc.F_mec_cps)
        f_local = np.array(
            [
                alloc_local(s.s_local, dev.alpha_local, dev.F_local_cps, dev.E_th_j, dev.kappa)
                for s, dev in zip(splits, sc.devices)
            ]
        )
        if self.opts.no_rate_cache:
            bf = self.beamform(self.offload_bits(partitions))
        else:
            bf = self.cached_beamforming
        per_device = [
            latency(
                splits[k],
                partitions[k],
                self.profile,
                bf.rates[k],
                f_local[k],
                f_mec[k],
                sc,
                k,
                self.opts.charge_terminal_transfers,
            )
            for k in range(sc.K)
        ]
        objective = math.fsum(b.total for b in per_device)
        feasible = math.isfinite(objective)
        return InnerSolution(
            partitions=partitions,
            splits=splits,
            f_mec=f_mec,
            f_local=f_local,
            beamformers=bf.beamformers,
            rates=bf.rates,
            per_device=per_device,
            objective=objective if feasible else math.inf,
            feasible=feasible,
            mm_history=bf.mm_history,
        )

    # -- batched path ----------------------------------------------------
    def batch_objective(self, l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
        """Total latency for many assignments at once.

        ``l1`` and ``l2`` have shape ``(n, K)``; returns shape ``(n,)`` with
        ``inf`` for infeasible assignments. Uses cached rates; with ``no_rate_cache``
        each row goes through :meth:`solve` instead.
        """
        l1 = np.asarray(l1, dtype=np.intp)
        l2 = np.asarray(l2, dtype=np.intp)
        if self.opts.no_rate_cache:
            return np.array([self.solve(list(zip(a, b))).objective for a, b in zip(l1, l2)])
        sc = self.scenario
        L = self.profile.L
        cum = self._cum
        s_local = cum[l1]
        s_mec = cum[l2] - s_local
        s_cloud = cum[L] - cum[l2]

        f_mec = alloc_mec(s_mec, sc.alpha_mec, sc.F_mec_cps)
        f_local = alloc_local(s_local, self._alpha_local, self._F_local, self._E_th, self._kappa)
        rates = self.cached_rates

        with np.errstate(divide="ignore", invalid="ignore"):
            t_local = np.where(s_local > 0, s_local / (self._alpha_local * f_local), 0.0)
            t_mec = np.where(s_mec > 0, s_mec / (sc.alpha_mec * f_mec), 0.0)
            t_cloud = s_cloud / (sc.alpha_cloud * sc.f_cloud_cps)
            bits_up = self._out_bits[l1]
            up = l1 < L if not self.opts.charge_terminal_transfers else np.ones_like(l1, dtype=bool)
            t_up = np.where(up, np.where(rates > bfm.RATE_FLOOR, bits_up / rates, np.inf), 0.0)
            bh = l2 < L if not self.opts.charge_terminal_transfers else np.ones_like(l2, dtype=bool)
            t_bh = np.where(bh, self._out_bits[l2] / sc.backhaul_bps, 0.0)
        total = (t_local + t_up + t_mec + t_bh + t_cloud).sum(axis=1)
        total[~np.isfinite(total)] = np.inf
        return total


def solve_inner(
    partitions: Sequence[PartitionPair],
    scenario: Scenario,
    channels: ChannelSet,
    covariance_targets: Sequence[CovarianceTarget],
    solver_opts: SolverOptions | None = None,
) -> InnerSolution:
    """One-off inner solve; reuse an :class:`Evaluator` to share the rate cache."""
    return Evaluator(scenario, channels, covariance_targets, solver_opts).solve(partitions)
