"""Command line harness: run experiments, list scenarios, dump comparators."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import emit_csv, emit_plot, hindsight_comparator, run_experiment
from .policies import ALGORITHMS
from .simulator import BUILTIN_SCENARIOS, resolve_scenario


def _scenario_label(spec: str) -> str:
    if spec in BUILTIN_SCENARIOS:
        return spec
    return Path(spec).stem


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit = {fmt.strip() for fmt in args.emit.split(",") if fmt.strip()}
    unknown = emit - {"csv", "svg"}
    if unknown:
        raise ValueError(f"unknown emit formats: {sorted(unknown)}")
    traces = []
    for algo in args.algo:
        trace = run_experiment(
            algo, scenario, trials=args.trials, seed=args.seed, n_jobs=args.jobs
        )
        traces.append(trace)
        stem = f"{algo}_{_scenario_label(args.scenario)}"
        if "csv" in emit:
            csv_path = out_dir / f"{stem}.csv"
            emit_csv(trace, csv_path)
            print(f"wrote {csv_path}")
        final = trace.mean_cum[-1]
        print(f"{algo}: mean final cumulative reward {final:.2f} over {args.trials} trials")
    if "svg" in emit:
        svg_path = out_dir / f"{_scenario_label(args.scenario)}.svg"
        emit_plot(traces, svg_path, title=_scenario_label(args.scenario))
        print(f"wrote {svg_path}")
    return 0


def _cmd_scenarios(args: argparse.Namespace) -> int:
    if args.action == "list":
        for name in sorted(BUILTIN_SCENARIOS):
            scenario = BUILTIN_SCENARIOS[name](0)
            dims = scenario.dims
            print(
                f"{name}: venues={dims.n_venues} max_volume={dims.max_volume} "
                f"horizon={dims.horizon} kind={scenario.kind}"
            )
    return 0


def _cmd_comparator(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario, args.seed)
    stream = scenario.environment_stream(args.trial)
    comparator = hindsight_comparator(stream.table, stream.volumes)
    if args.dump:
        counts = comparator.unit_counts(scenario.dims.n_venues)
        print("unit -> venue (1-based):", " ".join(str(v + 1) for v in comparator.assignment))
        print("units per venue:", " ".join(str(int(c)) for c in counts))
    print(f"comparator value: {comparator.value!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darkalloc",
        description="Censored-feedback venue allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more algorithms on a scenario")
    run.add_argument(
        "--algo",
        action="append",
        required=True,
        choices=sorted(ALGORITHMS),
        help="algorithm id (repeatable)",
    )
    run.add_argument("--scenario", required=True, help="builtin name or config file")
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="out")
    run.add_argument("--emit", default="csv", help="comma list from {csv,svg}")
    run.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    run.set_defaults(func=_cmd_run)

    scenarios = sub.add_parser("scenarios", help="inspect builtin scenarios")
    scenarios.add_argument("action", choices=["list"])
    scenarios.set_defaults(func=_cmd_scenarios)

    comparator = sub.add_parser(
        "comparator", help="hindsight-optimal fixed assignment for a scenario"
    )
    comparator.add_argument("--scenario", required=True)
    comparator.add_argument("--seed", type=int, default=0)
    comparator.add_argument("--trial", type=int, default=0)
    comparator.add_argument("--dump", action="store_true")
    comparator.set_defaults(func=_cmd_comparator)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
