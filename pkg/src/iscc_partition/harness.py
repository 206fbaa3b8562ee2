"""Monte-Carlo trials, parameter sweeps and result files.

Seeding: trial ``i`` of master seed ``m`` uses the 64-bit seed drawn from
``SeedSequence([m, i])``. The trial seed in turn spawns independent streams
for device positions, channels and the CE sampler, so every record can be
replayed from ``(config, trial seed)`` alone and adding trials never
changes earlier ones.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import baselines
from .baselines import SchemeId
from .beampattern import CovarianceCache, default_grid, desired_pattern, pattern_gains, synth_covariance
from .ce import CeParams, optimize
from .cost import LatencyBreakdown
from .inner import Evaluator, InnerSolution, SolverOptions
from .profile import PartitionPair
from .radio import gen_channels
from .scenario import ConfigError, Scenario

__all__ = [
    "SWEEP_AXES",
    "DEFAULT_SCHEMES",
    "TrialError",
    "RunOptions",
    "TrialResult",
    "SweepSpec",
    "trial_seed",
    "draw_positions",
    "prepare_trial",
    "run_trial",
    "run_trials",
    "apply_parameter",
    "run_sweep",
    "load_sweep_spec",
    "write_results",
    "write_device_rows",
    "summarize",
    "emit_beampattern",
    "write_traces",
]

SWEEP_AXES = ("F_M", "F_k", "mainlobe_width", "bandwidth", "K", "d_streams", "r_b")
DEFAULT_SCHEMES = (SchemeId.PROPOSED_CE, SchemeId.LOCAL_ONLY, SchemeId.ED_DP, SchemeId.CED_WDP)


class TrialError(RuntimeError):
    """A module error raised inside a trial, tagged with the trial index and seed."""

    def __init__(self, trial_index: int, seed: int, cause: BaseException):
        super().__init__(f"trial {trial_index} (seed {seed}): {type(cause).__name__}: {cause}")
        self.trial_index = trial_index
        self.seed = seed
        self.cause = cause

    def __reduce__(self):
        return (TrialError, (self.trial_index, self.seed, self.cause))


@dataclass(frozen=True)
class RunOptions:
    solver: SolverOptions = field(default_factory=SolverOptions)
    ce: CeParams = field(default_factory=CeParams)
    ed_dp_exact: bool = False  # restricted exhaustive oracle instead of coordinate descent
    exhaustive_budget: int = baselines.DEFAULT_BUDGET
    cache_dir: str | None = None
    record_trace: bool = False


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    scheme: SchemeId
    partitions: list[PartitionPair]
    per_device: list[LatencyBreakdown]
    objective: float
    wallclock: float
    rates: list[float]
    trace: list[dict[str, float]] | None = None

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.objective)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    trials: int = 20
    schemes: tuple[SchemeId, ...] = DEFAULT_SCHEMES
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}; choose from {', '.join(SWEEP_AXES)}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(SchemeId(s) for s in self.schemes))


def trial_seed(master_seed: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1, np.uint64)[0])


def draw_positions(scenario: Scenario, rng: np.random.Generator) -> tuple[tuple[float, float], ...]:
    """Uniform positions in the square of half-width ``area_half_width_m`` around the BS."""
    a = scenario.area_half_width_m
    xy = rng.uniform(-a, a, size=(scenario.K, 2)) + np.asarray(scenario.bs_position)
    return tuple((float(x), float(y)) for x, y in xy)


_COV_CACHES: dict[str | None, CovarianceCache] = {}


def _cov_cache(directory: str | None) -> CovarianceCache:
    if directory not in _COV_CACHES:
        _COV_CACHES[directory] = CovarianceCache(directory)
    return _COV_CACHES[directory]


def prepare_trial(scenario: Scenario, seed: int, opts: RunOptions | None = None) -> tuple[Evaluator, int]:
    """Positions, channels and covariance targets for one trial.

    Returns the evaluator (rate cache warmed) and the derived CE seed.
    """
    opts = opts or RunOptions()
    pos_ss, chan_ss, ce_ss = np.random.SeedSequence(seed).spawn(3)
    if scenario.device_positions is None:
        scenario = replace(scenario, device_positions=draw_positions(scenario, np.random.default_rng(pos_ss)))
    channels = gen_channels(scenario, chan_ss)
    cache = _cov_cache(opts.cache_dir)
    targets = [
        cache.get(
            np.deg2rad(s.target_angles_deg),
            np.deg2rad(s.mainlobe_width_deg),
            scenario.tx_power_w,
            scenario.Nt,
            delta=scenario.antenna_spacing,
        )
        for s in scenario.sensing
    ]
    evaluator = Evaluator(scenario, channels, targets, opts.solver)
    if not opts.solver.no_rate_cache:
        evaluator.cached_rates  # shared by every scheme in the trial
    return evaluator, int(ce_ss.generate_state(1, np.uint64)[0])


def _run_scheme(
    scheme: SchemeId, evaluator: Evaluator, ce_seed: int, opts: RunOptions
) -> tuple[InnerSolution, list[dict[str, float]] | None]:
    if scheme is SchemeId.PROPOSED_CE:
        res = optimize(evaluator, replace(opts.ce, seed=ce_seed))
        return res.solution, res.state.trace
    runners: dict[SchemeId, Callable[[], InnerSolution]] = {
        SchemeId.LOCAL_ONLY: lambda: baselines.run_local_only(evaluator),
        SchemeId.ED_DP: lambda: baselines.run_ed_dp(evaluator, exact=opts.ed_dp_exact),
        SchemeId.CED_WDP: lambda: baselines.run_ced_wdp(evaluator),
        SchemeId.EXHAUSTIVE: lambda: baselines.run_exhaustive(evaluator, budget=opts.exhaustive_budget),
    }
    return runners[scheme](), None


def run_trial(
    scenario: Scenario,
    seed: int,
    schemes: Sequence[SchemeId | str] = DEFAULT_SCHEMES,
    opts: RunOptions | None = None,
    trial_index: int = 0,
) -> list[TrialResult]:
    """Run every scheme on the same positions, channels and covariance targets."""
    opts = opts or RunOptions()
    try:
        evaluator, ce_seed = prepare_trial(scenario, seed, opts)
        results = []
        for scheme in map(SchemeId, schemes):
            t0 = time.perf_counter()
            sol, trace = _run_scheme(scheme, evaluator, ce_seed, opts)
            elapsed = time.perf_counter() - t0
            results.append(
                TrialResult(
                    trial_index=trial_index,
                    seed=seed,
                    scheme=scheme,
                    partitions=list(sol.partitions),
                    per_device=list(sol.per_device),
                    objective=sol.objective,
                    wallclock=elapsed,
                    rates=[float(r) for r in sol.rates],
                    trace=trace if opts.record_trace else None,
                )
            )
        return results
    except Exception as exc:
        raise TrialError(trial_index, seed, exc) from exc


def _trial_job(args: tuple) -> list[TrialResult]:
    scenario, seed, schemes, opts, index = args
    return run_trial(scenario, seed, schemes, opts, index)


def run_trials(
    scenario: Scenario,
    master_seed: int,
    trials: int,
    schemes: Sequence[SchemeId | str] = DEFAULT_SCHEMES,
    opts: RunOptions | None = None,
    workers: int = 1,
) -> list[TrialResult]:
    """Independent trials, returned in trial order whatever the worker count."""
    opts = opts or RunOptions()
    jobs = [(scenario, trial_seed(master_seed, i), tuple(schemes), opts, i) for i in range(trials)]
    if workers <= 1:
        batches = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_trial_job, jobs))
    return [r for batch in batches for r in batch]


def apply_parameter(base: Scenario, parameter: str, value: float) -> Scenario:
    if parameter == "F_M":
        return replace(base, F_mec_cps=value)
    if parameter == "F_k":
        return base.with_device_field("F_local_cps", value)
    if parameter == "mainlobe_width":
        return base.with_mainlobe_width(value)
    if parameter == "bandwidth":
        return replace(base, bandwidth_hz=value)
    if parameter == "K":
        return base.with_updates(K=int(value))
    if parameter == "d_streams":
        return replace(base, d_streams=int(value))
    if parameter == "r_b":
        return replace(base, backhaul_bps=value)
    raise ConfigError(f"unknown sweep parameter {parameter!r}")


def _partition_text(parts: Sequence[PartitionPair]) -> str:
    return ";".join(f"{a}-{b}" for a, b in parts)


RESULT_FIELDS = [
    "param",
    "param_value",
    "scheme",
    "trial",
    "seed",
    "objective",
    "feasible",
    "wallclock_s",
    "partitions",
    "t_local",
    "t_offload_dev_mec",
    "t_mec",
    "t_offload_mec_cloud",
    "t_cloud",
    "energy_j",
]


def _result_row(r: TrialResult, param: str, value: Any) -> dict[str, Any]:
    row = {
        "param": param,
        "param_value": value,
        "scheme": r.scheme.value,
        "trial": r.trial_index,
        "seed": r.seed,
        "objective": repr(r.objective),
        "feasible": int(r.feasible),
        "wallclock_s": f"{r.wallclock:.6f}",
        "partitions": _partition_text(r.partitions),
    }
    for name in ("t_local", "t_offload_dev_mec", "t_mec", "t_offload_mec_cloud", "t_cloud", "energy_j"):
        row[name] = repr(math.fsum(getattr(b, name) for b in r.per_device))
    return row


def _check_writable(out: Path) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def write_results(path: Path, rows: list[tuple[str, Any, TrialResult]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        for param, value, r in rows:
            writer.writerow(_result_row(r, param, value))


DEVICE_FIELDS = ["param", "param_value", "scheme", "trial", "seed", "device", "l1", "l2", "rate_bps"] + [
    "t_local",
    "t_offload_dev_mec",
    "t_mec",
    "t_offload_mec_cloud",
    "t_cloud",
    "total",
    "energy_j",
]


def write_device_rows(path: Path, rows: list[tuple[str, Any, TrialResult]]) -> None:
    """One row per device per trial and scheme with the full latency breakdown."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DEVICE_FIELDS)
        writer.writeheader()
        for param, value, r in rows:
            for k, (part, b) in enumerate(zip(r.partitions, r.per_device)):
                row = {"param": param, "param_value": value, "scheme": r.scheme.value, "trial": r.trial_index}
                row.update(seed=r.seed, device=k, l1=part[0], l2=part[1], rate_bps=repr(r.rates[k]))
                row.update({name: repr(v) for name, v in b.as_dict().items()})
                writer.writerow(row)


def summarize(results: Sequence[TrialResult]) -> dict[str, dict[str, float]]:
    """Per-scheme mean objective, standard error and counts (infeasible trials excluded from the mean)."""
    out: dict[str, dict[str, float]] = {}
    for scheme in dict.fromkeys(r.scheme for r in results):
        vals = np.array([r.objective for r in results if r.scheme is scheme])
        ok = vals[np.isfinite(vals)]
        out[scheme.value] = {
            "mean": float(ok.mean()) if ok.size else math.inf,
            "stderr": float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0,
            "trials": int(vals.size),
            "infeasible": int(vals.size - ok.size),
            "mean_wallclock_s": float(np.mean([r.wallclock for r in results if r.scheme is scheme])),
        }
    return out


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def run_sweep(
    spec: SweepSpec,
    base: Scenario,
    out: str | Path,
    opts: RunOptions | None = None,
    workers: int = 1,
) -> dict[str, Any]:
    """Run ``spec`` and write ``sweep.csv`` and ``summary.json`` under ``out``.

    The same trial seeds are used at every sweep value, so differences
    between values are not masked by different channel draws.
    """
    out = _check_writable(Path(out))
    rows: list[tuple[str, Any, TrialResult]] = []
    points = []
    for value in spec.values:
        scenario = apply_parameter(base, spec.parameter, value)
        results = run_trials(scenario, spec.master_seed, spec.trials, spec.schemes, opts, workers)
        rows.extend((spec.parameter, value, r) for r in results)
        points.append({"value": value, "schemes": summarize(results)})
    write_results(out / "sweep.csv", rows)
    write_device_rows(out / "sweep_devices.csv", rows)
    summary = {
        "parameter": spec.parameter,
        "values": list(spec.values),
        "trials": spec.trials,
        "master_seed": spec.master_seed,
        "schemes": [s.value for s in spec.schemes],
        "points": points,
    }
    (out / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2))
    return summary


def load_sweep_spec(path: str | Path) -> SweepSpec:
    try:
        doc = json.loads(Path(path).read_text())
        return SweepSpec(
            parameter=doc["parameter"],
            values=tuple(doc["values"]),
            trials=int(doc.get("trials", 20)),
            schemes=tuple(doc.get("schemes", [s.value for s in DEFAULT_SCHEMES])),
            master_seed=int(doc.get("master_seed", 0)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad sweep spec {path}: {exc}") from None


def emit_beampattern(
    scenario: Scenario,
    widths: Sequence[float],
    out: str | Path,
    grid_step_deg: float = 1.0,
) -> dict[float, dict[str, float]]:
    """Write ``(width, theta_deg, gain_db, residual)`` rows for each mainlobe width.

    Uses the first device's target angles. ``residual`` is the least-squares
    mismatch between the scaled desired pattern and the synthesized one.
    """
    out = Path(out)
    if out.parent:
        _check_writable(out.parent)
    grid = default_grid(grid_step_deg)
    targets = np.deg2rad(scenario.sensing[0].target_angles_deg)
    info: dict[float, dict[str, float]] = {}
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["width", "theta_deg", "gain_db", "residual"])
        for width in widths:
            w = np.deg2rad(width)
            res = synth_covariance(targets, w, scenario.tx_power_w, scenario.Nt, grid=grid, delta=scenario.antenna_spacing)
            gains = pattern_gains(res.target, grid, delta=scenario.antenna_spacing)
            residual = float(np.sum((res.gamma * desired_pattern(targets, w, grid) - gains) ** 2))
            info[float(width)] = {"peak_gain": float(gains.max()), "residual": residual, "gamma": res.gamma}
            for theta, g in zip(np.rad2deg(grid), gains):
                writer.writerow([width, f"{theta:.4f}", f"{10 * np.log10(max(g, 1e-12)):.6f}", f"{residual:.6e}"])
    return info


def write_traces(scenario: Scenario, seed: int, out: str | Path, opts: RunOptions | None = None) -> dict[str, Path]:
    """Convergence traces for one trial: beamforming (MM and WMMSE blocks) and CE."""
    opts = opts or RunOptions()
    out = _check_writable(Path(out))
    evaluator, ce_seed = prepare_trial(scenario, seed, opts)
    weights = np.full(scenario.K, scenario.profile.out_bits(0))
    bf = evaluator.beamform(weights, record=True)
    bf_path = out / "beamforming_trace.csv"
    with open(bf_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["outer_iteration", "block_step", "objective", "kind"])
        for i, v in enumerate(bf.mm_history):
            writer.writerow([i, "", repr(v), "mm"])
        for i, blocks in enumerate(bf.wmmse_history, start=1):
            for j, v in enumerate(blocks):
                writer.writerow([i, j, repr(v), "wmmse"])
    res = optimize(evaluator, replace(opts.ce, seed=ce_seed))
    ce_path = out / "ce_trace.csv"
    with open(ce_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["iteration", "best_objective", "mean_elite_objective", "omega_entropy"])
        writer.writeheader()
        writer.writerows(res.state.trace)
    return {"beamforming": bf_path, "ce": ce_path}
