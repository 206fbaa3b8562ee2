"""System configuration shared by every module, with JSON round-tripping.

Defaults follow the simulation table of the reference setup: 5 devices,
12 BS antennas, 8 device antennas, 5 MHz, -174 dBm/Hz, 30 dBm and the
compute figures listed in ``DeviceParams`` / ``Scenario``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .profile import DnnProfile, alexnet, load_profile

__all__ = [
    "ConfigError",
    "PathLoss",
    "DeviceParams",
    "SensingSpec",
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "DEFAULT_SCENARIO_PATH",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathLoss:
    exponent: float = 2.7
    reference_db: float = 30.0
    reference_m: float = 1.0

    def gain(self, dist_m: float) -> float:
        """Linear power gain at ``dist_m`` (no clamping here)."""
        pl_db = self.reference_db + 10.0 * self.exponent * math.log10(dist_m / self.reference_m)
        return 10.0 ** (-pl_db / 10.0)


@dataclass(frozen=True)
class DeviceParams:
    alpha_local: float = 2.0  # FLOPs/cycle
    F_local_cps: float = 0.8e9
    E_th_j: float = 300.0
    kappa: float = 1e-28


@dataclass(frozen=True)
class SensingSpec:
    target_angles_deg: tuple[float, ...] = (-25.0, 25.0)
    mainlobe_width_deg: float = 10.0


@dataclass(frozen=True)
class Scenario:
    K: int = 5
    M: int = 12
    Nt: int = 8
    d_streams: int = 4
    bandwidth_hz: float = 5e6
    noise_psd_dbm_hz: float = -174.0
    tx_power_dbm: float = 30.0
    antenna_spacing: float = 0.5
    bs_position: tuple[float, float] = (0.0, 0.0)
    area_half_width_m: float = 200.0
    device_positions: tuple[tuple[float, float], ...] | None = None
    pathloss: PathLoss = field(default_factory=PathLoss)
    devices: tuple[DeviceParams, ...] = ()
    alpha_mec: float = 4.0
    F_mec_cps: float = 12e9
    alpha_cloud: float = 8.0
    f_cloud_cps: float = 20e9
    backhaul_bps: float = 2e6
    sensing: tuple[SensingSpec, ...] = ()
    profile: DnnProfile = field(default_factory=alexnet)

    def __post_init__(self) -> None:
        # scalar-style defaults expand to one entry per device
        devices = tuple(self.devices) or (DeviceParams(),)
        sensing = tuple(self.sensing) or (SensingSpec(),)
        object.__setattr__(self, "devices", _fit(devices, self.K, "devices"))
        object.__setattr__(self, "sensing", _fit(sensing, self.K, "sensing"))
        if self.device_positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.device_positions)
            if len(pos) != self.K:
                raise ConfigError(f"device_positions has {len(pos)} entries, expected K={self.K}")
            object.__setattr__(self, "device_positions", pos)
        self.validate()

    def validate(self) -> None:
        if self.K < 1 or self.M < 1 or self.Nt < 1:
            raise ConfigError("K, M and Nt must all be >= 1")
        if not 1 <= self.d_streams <= self.Nt:
            raise ConfigError(f"d_streams must lie in [1, Nt={self.Nt}]")
        positive = {
            "bandwidth_hz": self.bandwidth_hz,
            "alpha_mec": self.alpha_mec,
            "F_mec_cps": self.F_mec_cps,
            "alpha_cloud": self.alpha_cloud,
            "f_cloud_cps": self.f_cloud_cps,
            "backhaul_bps": self.backhaul_bps,
            "area_half_width_m": self.area_half_width_m,
            "pathloss.reference_m": self.pathloss.reference_m,
        }
        for k, dev in enumerate(self.devices):
            for name in ("alpha_local", "F_local_cps", "E_th_j", "kappa"):
                positive[f"devices[{k}].{name}"] = getattr(dev, name)
        bad = [k for k, v in positive.items() if not v > 0]
        if bad:
            raise ConfigError(f"must be strictly positive: {', '.join(bad)}")
        for k, sens in enumerate(self.sensing):
            if not sens.mainlobe_width_deg > 0:
                raise ConfigError(f"sensing[{k}].mainlobe_width_deg must be > 0")
            if not sens.target_angles_deg:
                raise ConfigError(f"sensing[{k}] needs at least one target angle")
            if any(abs(t) > 90 for t in sens.target_angles_deg):
                raise ConfigError(f"sensing[{k}] target angles must lie in [-90, 90] degrees")

    @property
    def tx_power_w(self) -> float:
        return 10.0 ** ((self.tx_power_dbm - 30.0) / 10.0)

    @property
    def noise_var(self) -> float:
        """Receiver noise power in watts over the signal bandwidth."""
        return 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz

    def device_array(self, name: str) -> np.ndarray:
        return np.array([getattr(dev, name) for dev in self.devices], dtype=np.float64)

    def with_updates(self, **changes: Any) -> "Scenario":
        """Copy with fields replaced; per-device tuples are refitted when K changes."""
        if "K" in changes and changes["K"] != self.K and "device_positions" not in changes:
            changes["device_positions"] = None
        return replace(self, **changes)

    def with_mainlobe_width(self, width_deg: float) -> "Scenario":
        return replace(self, sensing=tuple(replace(s, mainlobe_width_deg=width_deg) for s in self.sensing))

    def with_device_field(self, name: str, value: float) -> "Scenario":
        return replace(self, devices=tuple(replace(d, **{name: value}) for d in self.devices))

    def to_dict(self) -> dict[str, Any]:
        out = {
            k: v
            for k, v in asdict(self).items()
            if k not in ("profile", "devices", "sensing", "pathloss", "device_positions")
        }
        out["bs_position"] = list(self.bs_position)
        out["device_positions"] = None if self.device_positions is None else [list(p) for p in self.device_positions]
        out["pathloss"] = asdict(self.pathloss)
        out["devices"] = [asdict(d) for d in self.devices]
        out["sensing"] = [
            {"target_angles_deg": list(s.target_angles_deg), "mainlobe_width_deg": s.mainlobe_width_deg}
            for s in self.sensing
        ]
        out["profile"] = self.profile.to_dict()
        return out


def _fit(items: tuple[Any, ...], K: int, name: str) -> tuple[Any, ...]:
    if len(items) == K:
        return items
    if len(items) == 1 or len(set(items)) == 1:
        return (items[0],) * K
    raise ConfigError(f"{name} has {len(items)} entries; expected 1 or K={K}")


def _as_list(value: Any) -> list[Any]:
    return value if isinstance(value, list) else [value]


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    doc = dict(doc)
    kwargs: dict[str, Any] = {}
    try:
        if "profile" in doc:
            kwargs["profile"] = load_profile(doc.pop("profile"))
        truncate = doc.pop("truncate_layers", None)
        if "pathloss" in doc:
            kwargs["pathloss"] = PathLoss(**doc.pop("pathloss"))
        if "devices" in doc:
            kwargs["devices"] = tuple(DeviceParams(**d) for d in _as_list(doc.pop("devices")))
        if "sensing" in doc:
            kwargs["sensing"] = tuple(
                SensingSpec(
                    target_angles_deg=tuple(float(t) for t in _as_list(s.get("target_angles_deg", [-25.0, 25.0]))),
                    mainlobe_width_deg=float(s.get("mainlobe_width_deg", 10.0)),
                )
                for s in _as_list(doc.pop("sensing"))
            )
        if "bs_position" in doc:
            kwargs["bs_position"] = tuple(float(v) for v in doc.pop("bs_position"))
        if doc.get("device_positions") is not None:
            kwargs["device_positions"] = tuple(tuple(p) for p in doc.pop("device_positions"))
        else:
            doc.pop("device_positions", None)
        kwargs.update(doc)
        scenario = Scenario(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad scenario field: {exc}") from None
    if truncate is not None:
        scenario = replace(scenario, profile=scenario.profile.truncated(int(truncate)))
    return scenario


DEFAULT_SCENARIO_PATH = Path(__file__).with_name("data") / "default_scenario.json"


def load_scenario(path: str | Path | None) -> Scenario:
    """Read a scenario JSON file; ``None`` reads the bundled default scenario."""
    if path is None:
        path = DEFAULT_SCENARIO_PATH
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    return scenario_from_dict(doc)
