"""Per-device inference latency and computation energy."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .allocation import energy
from .beamforming import RATE_FLOOR
from .profile import DnnProfile, PartitionPair, WorkloadSplit
from .scenario import Scenario

__all__ = ["LatencyBreakdown", "latency", "INFEASIBLE"]


@dataclass(frozen=True)
class LatencyBreakdown:
    t_local: float
    t_offload_dev_mec: float
    t_mec: float
    t_offload_mec_cloud: float
    t_cloud: float
    total: float
    energy_j: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.total)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


INFEASIBLE = LatencyBreakdown(math.inf, math.inf, math.inf, math.inf, math.inf, math.inf, math.inf)


def _ratio(work: float, speed: float) -> float:
    if work == 0:
        return 0.0
    return work / speed if speed > 0 else math.inf


def latency(
    split: WorkloadSplit,
    p: PartitionPair,
    profile: DnnProfile,
    rate_bps: float,
    f_local: float,
    f_mec: float,
    scenario: Scenario,
    k: int = 0,
    charge_terminal_transfers: bool = False,
) -> LatencyBreakdown:
    """Five-term latency of device ``k`` for one partition.

    Device-to-BS transfer of ``o(l1)`` is skipped when ``l1 == L`` and the
    backhaul transfer of ``o(l2)`` when ``l2 == L``: only a classification
    result would travel, which is negligible. ``charge_terminal_transfers=True``
    charges both transfers unconditionally.

    Any positive workload or transfer facing a zero speed yields the
    infinite sentinel total.
    """
    dev = scenario.devices[k]
    l1, l2 = p
    L = profile.L
    t_local = _ratio(split.s_local, dev.alpha_local * f_local)
    charge = charge_terminal_transfers
    t_up = _ratio(profile.out_bits(l1), rate_bps if rate_bps > RATE_FLOOR else 0.0) if (l1 < L or charge) else 0.0
    t_mec = _ratio(split.s_mec, scenario.alpha_mec * f_mec)
    t_bh = _ratio(profile.out_bits(l2), scenario.backhaul_bps) if (l2 < L or charge) else 0.0
    t_cloud = _ratio(split.s_cloud, scenario.alpha_cloud * scenario.f_cloud_cps)
    parts = [float(t) for t in (t_local, t_up, t_mec, t_bh, t_cloud)]
    e = float(energy(split.s_local, f_local, dev.alpha_local, dev.kappa))
    return LatencyBreakdown(*parts, sum(parts), e)
