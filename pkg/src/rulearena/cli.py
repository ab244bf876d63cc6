"""Command-line entry point.

Every subcommand reads a JSON experiment config (``--config``); census,
scan, search, frontier and project fall back to built-in defaults when no
config is given.  On failure a JSON error record goes to stderr and the exit
code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Sequence

from .errors import ArenaError
from .harness import ExperimentConfig, report, run_experiment

# subcommand -> experiment name
SUBCOMMANDS = {
    "run": "compare",
    "ablate": "ablate-budget",
    "multi": "multi-run",
    "search": "search",
    "scan": "scan",
    "census": "taxonomy",
    "frontier": "frontier",
    "project": "project",
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "taxonomy": {"game_set": [{"recipe": "census"}], "budget_threshold": 50},
    "scan": {"game_set": [{"recipe": "census"}]},
    "search": {"game_set": [{"recipe": "census"}], "depth": 3},
    "frontier": {
        "game_set": [{"recipe": "estar", "k": 5, "M": 100}],
        "policy_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
        "episodes": 10000,
        "agents": [{"budget_mode": "fixed:0", "label": "B1"}, {"budget_mode": "adaptive"}],
    },
    "project": {"game_set": [], "projection": {"n_public": 25, "solves": 4, "n_private": 55, "per_solve_score": 1.3225}},
}


def _seeds(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulearena", description="Hidden-rule arena experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"{experiment} experiment")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seeds", type=_seeds, help="comma list or ranges, e.g. 0-7")
        p.add_argument("--out", help="campaign output directory")
        p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
        if name == "ablate":
            p.add_argument("--budgets", type=_seeds, help="budgets to sweep, e.g. 0,1,3,5")
        if name == "multi":
            p.add_argument("--runs", type=int, help="number of runs")
    p = sub.add_parser("report", help="recompute a campaign's aggregates and check its traces")
    p.add_argument("campaign", help="campaign directory")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    experiment = SUBCOMMANDS[args.command]
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        data.setdefault("experiment", experiment)
        if data["experiment"] != experiment:
            raise ArenaError(f"config is for {data['experiment']!r}, not {experiment!r}")
    elif experiment in DEFAULTS:
        data = {"experiment": experiment, **json.loads(json.dumps(DEFAULTS[experiment]))}
    else:
        raise ArenaError(f"{args.command} needs --config")
    if args.seeds:
        data["seeds"] = args.seeds
    if args.out:
        data["output_dir"] = args.out
    if args.jobs is not None:
        data["jobs"] = args.jobs
    if getattr(args, "budgets", None):
        data["budgets"] = args.budgets
    if getattr(args, "runs", None) is not None:
        data["n_runs"] = args.runs
    return ExperimentConfig.from_dict(data)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            result = report(args.campaign)
        else:
            config = load_config(args)
            record = run_experiment(config)
            result = {
                "experiment": record.experiment,
                "output_dir": config.output_dir,
                "record_digest": record.digest,
                "aggregates": {a: v["rhae"] for a, v in record.aggregates.items()},
                "report": {k: v for k, v in record.report.items() if k not in ("labels", "rows", "points", "runs")},
            }
    except (ArenaError, ValueError, OSError, KeyError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    if args.command == "report" and (not result["matches_record"] or result["trace_problems"]):
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
