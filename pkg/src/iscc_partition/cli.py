"""Command-line entry point: ``iscc-partition <subcommand> [options]``.

Failures print one line ``error: <kind>: <message>`` on stderr and exit
with status 2 (configuration or input problems) or 1 (anything else).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .baselines import BudgetExceeded, SchemeId
from .ce import CeParams
from .inner import SolverOptions
from .profile import ProfileError
from .scenario import ConfigError, load_scenario

SCHEME_NAMES = [s.value for s in SchemeId]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario JSON (defaults to the built-in scenario)")
    p.add_argument("--seed", type=int, help="master seed (default 0, or the sweep spec's own)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    p.add_argument("--no-rate-cache", action="store_true", help="rerun beamforming per assignment (no rate cache)")
    p.add_argument("--charge-terminal-transfers", action="store_true", help="charge transfers even for terminal partitions")
    p.add_argument("--cache-dir", help="directory for synthesized covariance files")
    p.add_argument("--it-max", type=int, default=50, help="beamforming outer (MM) iteration cap")
    p.add_argument("--inner-max", type=int, default=100, help="beamforming inner (WMMSE) iteration cap")
    p.add_argument("--samples", type=int, default=1000, help="CE samples per iteration")
    p.add_argument("--elites", type=int, default=50, help="CE elite count")
    p.add_argument("--rho", type=float, default=0.9, help="CE smoothing factor")
    p.add_argument("--ed-dp-exact", action="store_true", help="restricted exhaustive search for EdDp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iscc-partition", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte-Carlo trials of one scenario")
    _common(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--scheme", action="append", choices=SCHEME_NAMES, help="repeat to select several")

    p = sub.add_parser("sweep", help="parameter sweep from a JSON spec")
    _common(p)
    p.add_argument("spec", type=Path, help='JSON like {"parameter": "F_M", "values": [4e9, 8e9], "trials": 20}')
    p.add_argument("--trials", type=int, help="override the spec's trial count")

    p = sub.add_parser("beampattern", help="synthesized beampatterns for several mainlobe widths")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--widths", type=float, nargs="+", default=[10.0, 20.0, 30.0], help="degrees")
    p.add_argument("--grid-step", type=float, default=1.0, help="grid spacing in degrees")

    p = sub.add_parser("compare", help="every scheme on one seed")
    _common(p)
    p.add_argument("--with-exhaustive", action="store_true", help="include the exhaustive oracle")

    p = sub.add_parser("trace", help="convergence traces for one seed")
    _common(p)
    return parser


def _options(args: argparse.Namespace) -> harness.RunOptions:
    return harness.RunOptions(
        solver=SolverOptions(
            no_rate_cache=args.no_rate_cache,
            charge_terminal_transfers=args.charge_terminal_transfers,
            it_max=args.it_max,
            inner_max=args.inner_max,
        ),
        ce=CeParams(samples_per_iter=args.samples, elite_count=args.elites, rho=args.rho),
        ed_dp_exact=args.ed_dp_exact,
        cache_dir=args.cache_dir,
    )


def _fmt(x: float) -> str:
    return f"{x:.6g}" if math.isfinite(x) else "inf"


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    out = harness._check_writable(args.out)
    schemes = [SchemeId(s) for s in (args.scheme or [s.value for s in harness.DEFAULT_SCHEMES])]
    results = harness.run_trials(scenario, args.seed or 0, args.trials, schemes, _options(args), args.workers)
    rows = [("none", "", r) for r in results]
    harness.write_results(out / "results.csv", rows)
    harness.write_device_rows(out / "devices.csv", rows)
    summary = {"master_seed": args.seed or 0, "trials": args.trials, "schemes": harness.summarize(results)}
    (out / "summary.json").write_text(json.dumps(harness._json_safe(summary), indent=2))
    for name, row in summary["schemes"].items():
        print(f"{name:12s} mean={_fmt(row['mean'])} s  stderr={_fmt(row['stderr'])}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = harness.load_sweep_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    if args.trials:
        spec = replace(spec, trials=args.trials)
    summary = harness.run_sweep(spec, load_scenario(args.config), args.out, _options(args), args.workers)
    for point in summary["points"]:
        cells = "  ".join(f"{k}={_fmt(v['mean'])}" for k, v in point["schemes"].items())
        print(f"{spec.parameter}={point['value']:g}  {cells}")
    return 0


def _cmd_beampattern(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    info = harness.emit_beampattern(scenario, args.widths, args.out / "beampattern.csv", args.grid_step)
    for width, row in info.items():
        print(f"width={width:g} deg  peak_gain={row['peak_gain']:.4f}  residual={row['residual']:.4e}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    out = harness._check_writable(args.out)
    schemes = list(harness.DEFAULT_SCHEMES) + ([SchemeId.EXHAUSTIVE] if args.with_exhaustive else [])
    seed = harness.trial_seed(args.seed or 0, 0)
    results = harness.run_trial(scenario, seed, schemes, _options(args))
    rows = [("none", "", r) for r in results]
    harness.write_results(out / "compare.csv", rows)
    harness.write_device_rows(out / "compare_devices.csv", rows)
    for r in results:
        parts = harness._partition_text(r.partitions)
        print(f"{r.scheme.value:12s} objective={_fmt(r.objective)} s  wallclock={r.wallclock:.3f} s  partitions={parts}")
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    paths = harness.write_traces(load_scenario(args.config), harness.trial_seed(args.seed or 0, 0), args.out, _options(args))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "beampattern": _cmd_beampattern,
    "compare": _cmd_compare,
    "trace": _cmd_trace,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ProfileError, BudgetExceeded) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except harness.TrialError as exc:
        kind = "config" if isinstance(exc.cause, (ConfigError, ProfileError, BudgetExceeded)) else "trial"
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return 2 if kind == "config" else 1
    except OSError as exc:
        print(f"error: OSError: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the CLI
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
