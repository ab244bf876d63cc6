"""Experiment campaigns: configs, per-cell execution, persistence and reports.

A campaign directory holds ``config.json``, the game specs it ran on
(``games/``), one JSONL trace per cell (``traces/``), the run record
(``run_record.json``), the report files, and ``meta.json``.  Wall times and
timestamps only appear in ``meta.json``, so every other file is byte-identical
across reruns of the same config.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .agent import AgentConfig, EpisodeTrace, StepRecord, aera_label, run_episode
from .env import (
    Action,
    EnvironmentSpec,
    census_specs,
    estar_spec,
    load_spec,
    oracle_baseline,
    random_taxonomy_spec,
    replay,
    reset,
    save_spec,
    simulate_estar_episode,
    taxonomy_spec,
    uis_spec,
)
from .errors import ArenaError, SpecValidationError, UndefinedMetricError
from .scoring import (
    LN2,
    FrontierPoint,
    LevelResult,
    binomial_projection,
    estar_A_of_p,
    estar_curve,
    estar_S_of_D,
    frontier_csv,
    level_csv,
    multi_run_ci,
    pareto_frontier,
    rhae_aggregate,
    speed_depth,
)
from .search import (
    bfs_presolve,
    exhaustive_search,
    null_probe_agent,
    random_agent,
    repeated_action_agent,
    taxonomy_classify,
    vuln_scan,
    write_report,
)

EXPERIMENTS = ("compare", "ablate-budget", "multi-run", "search", "scan", "taxonomy", "frontier", "project")
BASELINE_TYPES = ("random", "repeat", "null-probe", "bfs")
RANDOM_SEED = 42


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha(obj: Any) -> str:
    return hashlib.sha256(_canonical(obj).encode()).hexdigest()


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    experiment: str
    game_set: list[dict[str, Any]]
    agents: list[dict[str, Any]] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    cap: int = 200
    output_dir: str = "runs/campaign"
    budgets: list[int] = field(default_factory=list)
    n_runs: int | None = None
    policy_grid: list[float] = field(default_factory=list)
    episodes: int = 10_000
    depth: int = 3
    budget_threshold: int | None = None
    projection: dict[str, Any] = field(default_factory=dict)
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise SpecValidationError(f"experiment must be one of {EXPERIMENTS}")
        if not self.seeds:
            raise SpecValidationError("seeds must be non-empty")
        if self.cap < 1:
            raise SpecValidationError("cap must be positive")
        needs_games = self.experiment not in ("project", "taxonomy", "scan", "search")
        if needs_games and not self.game_set:
            raise SpecValidationError(f"{self.experiment} needs a non-empty game_set")
        for a in self.agents:
            _check_agent(a)
        if self.experiment == "compare":
            kinds = {a.get("type", "aera") for a in self.agents}
            if "aera" not in kinds or not kinds & set(BASELINE_TYPES):
                raise SpecValidationError("compare needs at least one aera agent and one baseline")
        if self.experiment == "ablate-budget":
            if not self.budgets:
                raise SpecValidationError("ablate-budget needs a non-empty budgets list")
            if not any(a.get("type", "aera") == "aera" for a in self.agents):
                raise SpecValidationError("ablate-budget needs an aera agent")
        if self.experiment == "multi-run" and (self.n_runs is None or self.n_runs < 2):
            raise SpecValidationError("multi-run needs n_runs >= 2")
        if self.experiment == "frontier" and not (self.policy_grid or self.agents):
            raise SpecValidationError("frontier needs a policy_grid or agents")
        if self.experiment == "search" and not 1 <= self.depth <= 4:
            raise SpecValidationError("search depth must be in 1..4")
        if self.experiment == "project":
            missing = {"n_public", "solves", "n_private", "per_solve_score"} - set(self.projection)
            if missing:
                raise SpecValidationError(f"project needs projection fields {sorted(missing)}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecValidationError(f"unknown config fields {sorted(unknown)}")
        return cls(**data).validate()

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @property
    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("jobs")
        return _sha(d)[:16]


def _check_agent(desc: dict[str, Any]) -> None:
    kind = desc.get("type", "aera")
    if kind == "aera":
        agent_config(desc)
    elif kind == "repeat":
        Action.parse(desc["action"])
    elif kind not in BASELINE_TYPES:
        raise SpecValidationError(f"unknown agent type {kind!r}")


def agent_config(desc: dict[str, Any]) -> AgentConfig:
    known = {f.name for f in fields(AgentConfig)}
    return AgentConfig(**{k: v for k, v in desc.items() if k in known}).validate()


def agent_label(desc: dict[str, Any]) -> str:
    if "label" in desc:
        return desc["label"]
    kind = desc.get("type", "aera")
    if kind == "aera":
        return aera_label(agent_config(desc))
    if kind == "repeat":
        return f"repeat-{desc['action']}"
    return kind


# ---------------------------------------------------------------------------
# game sets


def expand_games(entries: Sequence[dict[str, Any]], base: Path | None = None) -> list[EnvironmentSpec]:
    """Turn ``game_set`` entries into specs.

    Entries are ``{"path": ...}`` or a recipe: ``census`` (seed, n_fault,
    prior), ``estar`` (k, M), ``uis`` (branching, digits, k, M),
    ``taxonomy`` (tier, winning_action, repeat, target, seed, fault) or
    ``random-taxonomy`` (tiers, seeds, fault).
    """
    specs: list[EnvironmentSpec] = []
    for e in entries:
        e = dict(e)
        if "path" in e:
            p = Path(e["path"])
            specs.append(load_spec(p if p.is_absolute() or base is None else base / p))
            continue
        recipe = e.pop("recipe", None)
        if recipe == "census":
            specs.extend(census_specs(**e))
        elif recipe == "estar":
            specs.append(estar_spec(**e))
        elif recipe == "uis":
            specs.append(uis_spec(**e))
        elif recipe == "taxonomy":
            if "target" in e and e["target"] is not None:
                e["target"] = tuple(e["target"])
            specs.append(taxonomy_spec(**e))
        elif recipe == "random-taxonomy":
            for tier in e["tiers"]:
                for s in e["seeds"]:
                    specs.append(random_taxonomy_spec(tier, s, fault=e.get("fault", False)))
        else:
            raise SpecValidationError(f"unknown game recipe {recipe!r}")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SpecValidationError("game names in a game_set must be unique")
    return specs


# ---------------------------------------------------------------------------
# cells


def run_agent(desc: dict[str, Any], spec: EnvironmentSpec, seed: int, cap: int = 200) -> EpisodeTrace:
    """One episode of the agent described by ``desc`` on ``(spec, seed)``."""
    kind = desc.get("type", "aera")
    label = agent_label(desc)
    if kind == "aera":
        cfg = agent_config({"action_cap": cap, **desc})
        return run_episode(reset(spec, seed), cfg, label=label)
    if kind == "random":
        # action RNG defaults to 42 + cell seed, so seed 0 is the seed-42 protocol
        trace = random_agent(spec, seed=desc.get("seed", RANDOM_SEED + seed), cap=desc.get("cap", cap), env_seed=seed)
    elif kind == "repeat":
        trace = repeated_action_agent(spec, Action.parse(desc["action"]), desc.get("n_max", cap), env_seed=seed)
    elif kind == "null-probe":
        trace = null_probe_agent(spec, env_seed=seed)
    else:
        found = bfs_presolve(spec, desc.get("depth_limit", 3), desc.get("time_limit", 180.0))
        trace = _replay_trace(spec, seed, found.plan or [], "bfs")
    trace.agent = label
    return trace


def null_trace(spec: EnvironmentSpec, seed: int, label: str = "") -> EpisodeTrace:
    return EpisodeTrace(env_id=spec.name, seed=seed, config_digest="", agent=label)


def _replay_trace(spec: EnvironmentSpec, seed: int, actions: Sequence[Action], label: str) -> EpisodeTrace:
    observations, state = replay(spec, seed, actions)
    trace = null_trace(spec, seed, label)
    trace.steps = [StepRecord("plan", a.label, o.digest, None, None) for a, o in zip(actions, observations)]
    trace.final_status = state.status.value
    trace.outcome = "crash-win" if state.crash_win else ("solved" if state.status.value == "solved" else "unsolved")
    return trace


def level_of(trace: EpisodeTrace, spec: EnvironmentSpec) -> LevelResult:
    H = oracle_baseline(spec)
    solved = trace.outcome in ("solved", "crash-win")
    return LevelResult(
        H=H,
        A=trace.action_count if solved else None,
        solved=solved,
        crash_win=trace.crash_win,
        game=spec.name,
    )


def _cell(args: tuple[dict, dict, int, int]) -> dict[str, Any]:
    desc, spec_dict, seed, cap = args
    spec = EnvironmentSpec.from_dict(spec_dict)
    try:
        trace = run_agent(desc, spec, seed, cap)
    except (ArenaError, ValueError, KeyError, TypeError) as exc:
        return {"failure": f"{type(exc).__name__}: {exc}"}
    return {"trace": trace.to_jsonl()}


@dataclass
class CellResult:
    agent: str
    game: str
    seed: int
    level: LevelResult | None
    trace: EpisodeTrace | None
    failure: str | None = None

    def row(self) -> dict[str, Any]:
        lv = self.level
        return {
            "agent": self.agent,
            "game": self.game,
            "seed": self.seed,
            "H": lv.H if lv else None,
            "A": lv.A if lv else None,
            "solved": lv.solved if lv else False,
            "crash_win": lv.crash_win if lv else False,
            "score": None if lv is None or lv.crash_win else lv.score,
            "outcome": self.trace.outcome if self.trace else None,
            "trace": trace_name(self.agent, self.game, self.seed) if self.trace else None,
            "failure": self.failure,
        }


def trace_name(agent: str, game: str, seed: int) -> str:
    return f"traces/{agent}__{game}__s{seed}.jsonl"


def run_cells(
    agents: Sequence[dict[str, Any]],
    specs: Sequence[EnvironmentSpec],
    seeds: Sequence[int],
    cap: int,
    jobs: int = 1,
) -> list[CellResult]:
    """Every agent × game × seed.  A failing cell is recorded, not raised."""
    work = [(a, s, seed) for a in agents for s in specs for seed in seeds]
    args = [(a, s.to_dict(), seed, cap) for a, s, seed in work]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_cell, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        outs = [_cell(a) for a in args]
    cells = []
    for (desc, spec, seed), out in zip(work, outs):
        label = agent_label(desc)
        if "failure" in out:
            cells.append(CellResult(label, spec.name, seed, None, None, out["failure"]))
            continue
        trace = EpisodeTrace.from_jsonl(out["trace"])
        cells.append(CellResult(label, spec.name, seed, level_of(trace, spec), trace))
    return cells


# ---------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    experiment: str
    config_digest: str
    levels: list[dict[str, Any]]
    aggregates: dict[str, Any]
    report: dict[str, Any] = field(default_factory=dict)
    tool_version: str = __version__
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("wall_time")
        return d

    @property
    def digest(self) -> str:
        return _sha(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunRecord":
        return cls(**{k: v for k, v in d.items() if k in {f.name for f in fields(cls)}})


def aggregate(cells: Sequence[CellResult]) -> dict[str, Any]:
    """RHAE per agent from the persisted level rows.  Crash-wins and failed
    cells never enter the mean."""
    by_agent: dict[str, list[CellResult]] = {}
    for c in cells:
        by_agent.setdefault(c.agent, []).append(c)
    out = {}
    for agent, cs in by_agent.items():
        levels = [c.level for c in cs if c.level is not None]
        try:
            rhae: float | None = rhae_aggregate(levels)
        except UndefinedMetricError:
            rhae = None
        solved = sorted({c.game for c in cs if c.level and c.level.solved and not c.level.crash_win})
        out[agent] = {
            "rhae": rhae,
            "solved": sum(1 for c in cs if c.level and c.level.solved and not c.level.crash_win),
            "episodes": len(cs),
            "crash_wins": sum(1 for c in cs if c.level and c.level.crash_win),
            "failures": sum(1 for c in cs if c.failure),
            "solved_games": solved,
        }
    return out


def levels_from_rows(rows: Sequence[dict[str, Any]]) -> list[LevelResult]:
    return [
        LevelResult(H=r["H"], A=r["A"], solved=r["solved"], crash_win=r["crash_win"], game=r["game"])
        for r in rows
        if not r.get("failure")
    ]


def recompute_aggregates(rows: Sequence[dict[str, Any]]) -> dict[str, float | None]:
    """RHAE per agent using only the scoring module and the level rows."""
    out: dict[str, float | None] = {}
    for agent in sorted({r["agent"] for r in rows}):
        try:
            out[agent] = rhae_aggregate(levels_from_rows([r for r in rows if r["agent"] == agent]))
        except UndefinedMetricError:
            out[agent] = None
    return out


class Campaign:
    """Writes one campaign directory."""

    def __init__(self, config: ExperimentConfig, output_dir: str | Path | None = None) -> None:
        self.config = config
        self.root = Path(output_dir or config.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()
        (self.root / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")

    def save_games(self, specs: Sequence[EnvironmentSpec]) -> None:
        d = self.root / "games"
        d.mkdir(exist_ok=True)
        for s in specs:
            save_spec(s, d / f"{s.name}.json")

    def save_cells(self, cells: Sequence[CellResult]) -> None:
        (self.root / "traces").mkdir(exist_ok=True)
        for c in cells:
            if c.trace is not None:
                c.trace.write(self.root / trace_name(c.agent, c.game, c.seed))
        levels = [c.level for c in cells if c.level is not None]
        names = [f"{c.agent}/{c.game}/s{c.seed}" for c in cells if c.level is not None]
        renamed = [LevelResult(lv.H, lv.A, lv.solved, lv.crash_win, n) for lv, n in zip(levels, names)]
        (self.root / "levels.csv").write_text(level_csv(renamed))

    def write_json(self, name: str, obj: Any) -> None:
        (self.root / name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def finish(self, record: RunRecord) -> RunRecord:
        record.wall_time = time.perf_counter() - self.t0
        self.write_json("run_record.json", record.to_dict())
        self.write_json(
            "meta.json",
            {
                "wall_time_s": record.wall_time,
                "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "record_digest": record.digest,
            },
        )
        return record


def _json_default(o: Any) -> Any:
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def verify_campaign(root: str | Path) -> list[str]:
    """Replay every persisted trace and compare with the recorded outcome.

    Returns a list of problems (empty when everything checks out).
    """
    root = Path(root)
    record = json.loads((root / "run_record.json").read_text())
    problems = []
    for row in record["levels"]:
        if row.get("failure") or not row.get("trace"):
            continue
        path = root / row["trace"]
        if not path.exists():
            problems.append(f"missing trace {row['trace']}")
            continue
        trace = EpisodeTrace.read(path)
        spec = load_spec(root / "games" / f"{row['game']}.json")
        actions = [Action.parse(s.action) for s in trace.steps]
        _, state = replay(spec, trace.seed, actions)
        outcome = "crash-win" if state.crash_win else ("solved" if state.status.value == "solved" else "unsolved")
        if outcome != row["outcome"]:
            problems.append(f"{row['trace']}: replay gives {outcome}, record says {row['outcome']}")
    return problems


# ---------------------------------------------------------------------------
# experiments


def _campaign_cells(config: ExperimentConfig, campaign: Campaign, agents=None, seeds=None, specs=None):
    specs = specs if specs is not None else expand_games(config.game_set)
    campaign.save_games(specs)
    cells = run_cells(agents or config.agents, specs, seeds or config.seeds, config.cap, config.jobs)
    return specs, cells


def run_compare(config: ExperimentConfig, output_dir: str | Path | None = None) -> RunRecord:
    """Every agent over every game and seed; RHAE per agent."""
    config.validate()
    campaign = Campaign(config, output_dir)
    _, cells = _campaign_cells(config, campaign)
    campaign.save_cells(cells)
    aggregates = aggregate(cells)
    table = [
        {"agent": a, "rhae": v["rhae"], "solved": v["solved"], "episodes": v["episodes"], "crash_wins": v["crash_wins"]}
        for a, v in aggregates.items()
    ]
    campaign.write_json("summary.json", {"experiment": "compare", "table": table})
    record = RunRecord("compare", config.digest, [c.row() for c in cells], aggregates, {"table": table})
    return campaign.finish(record)


def run_ablate_budget(config: ExperimentConfig, budgets: Sequence[int] | None = None, output_dir=None) -> RunRecord:
    """Fixed exploration budgets applied to the first aera agent."""
    config.validate()
    budgets = list(budgets if budgets is not None else config.budgets)
    if not budgets:
        raise SpecValidationError("budgets must be non-empty")
    base = next(a for a in config.agents if a.get("type", "aera") == "aera")
    agents = []
    for b in budgets:
        desc = {k: v for k, v in base.items() if k != "label"}
        desc["budget_mode"] = f"fixed:{b}"
        desc["label"] = f"budget-{b}"
        agents.append(desc)
    campaign = Campaign(config, output_dir)
    _, cells = _campaign_cells(config, campaign, agents=agents)
    campaign.save_cells(cells)
    aggregates = aggregate(cells)
    rows = []
    for b in budgets:
        a = aggregates[f"budget-{b}"]
        rows.append({"budget": b, "rhae": a["rhae"], "solved": a["solved"], "solved_games": a["solved_games"]})
    report = {"table": rows, "equal_score_different_games": _score_ties(rows)}
    campaign.write_json("summary.json", {"experiment": "ablate-budget", **report})
    record = RunRecord("ablate-budget", config.digest, [c.row() for c in cells], aggregates, report)
    return campaign.finish(record)


def _score_ties(rows: Sequence[dict[str, Any]]) -> list[dict[str, Any]]:
    """Budget pairs with equal aggregates but different solved games."""
    ties = []
    for i, r in enumerate(rows):
        for s in rows[i + 1 :]:
            if r["rhae"] == s["rhae"] and r["solved_games"] != s["solved_games"]:
                ties.append({"budgets": [r["budget"], s["budget"]], "rhae": r["rhae"], "solved_games": [r["solved_games"], s["solved_games"]]})
    return ties


def run_multi(config: ExperimentConfig, n_runs: int | None = None, output_dir=None) -> RunRecord:
    """``n_runs`` repeated campaigns of the first agent, one seed each."""
    config.validate()
    n_runs = n_runs if n_runs is not None else config.n_runs
    if n_runs is None or n_runs < 2:
        raise SpecValidationError("run_multi needs n_runs >= 2")
    seeds = [config.seeds[i % len(config.seeds)] for i in range(n_runs)]
    warnings = []
    if len(set(seeds)) < len(seeds):
        warnings.append("duplicate seeds across runs: variance reflects the seed configuration, not the agent")
    agent = config.agents[0]
    campaign = Campaign(config, output_dir)
    specs = expand_games(config.game_set)
    campaign.save_games(specs)
    all_cells: list[CellResult] = []
    per_run = []
    for run, seed in enumerate(seeds):
        cells = run_cells([agent], specs, [seed], config.cap, config.jobs)
        for c in cells:
            c.agent = f"{agent_label(agent)}-run{run}"
        all_cells.extend(cells)
        levels = [c.level for c in cells if c.level is not None]
        try:
            score = rhae_aggregate(levels)
        except UndefinedMetricError:
            score = float("nan")
        solved = sorted(c.game for c in cells if c.level and c.level.solved and not c.level.crash_win)
        per_run.append({"run": run, "seed": seed, "rhae": score, "solved": solved})
    campaign.save_cells(all_cells)
    scores = [r["rhae"] for r in per_run]
    stats = multi_run_ci(scores)
    if stats.std == 0.0 and not warnings:
        warnings.append("zero variance across runs")
    freq = {s.name: sum(s.name in r["solved"] for r in per_run) for s in specs}
    report = {
        "runs": per_run,
        "mean": stats.mean,
        "std": stats.std,
        "ci95": list(stats.ci95),
        "solve_frequency": {g: f"{n}/{n_runs}" for g, n in freq.items()},
        "warnings": warnings,
    }
    campaign.write_json("summary.json", {"experiment": "multi-run", **report})
    record = RunRecord("multi-run", config.digest, [c.row() for c in all_cells], aggregate(all_cells), report)
    return campaign.finish(record)


@dataclass(frozen=True)
class EpisodeSummary:
    """Just the fields Speed/Depth and RHAE need, for large Monte-Carlo sweeps."""

    action_count: int
    terminated: bool
    explore_actions: int
    explore_entropy_drop: float
    solved: bool = True


def estar_policy_summaries(spec: EnvironmentSpec, p: float, episodes: int, seed0: int = 0) -> list[EpisodeSummary]:
    """Monte-Carlo episodes of the explore-with-probability-``p`` policy."""
    out = []
    for i in range(episodes):
        seed = seed0 + i
        n, solved = simulate_estar_episode(spec, seed, p)
        explored = _estar_explored(seed, p)
        out.append(EpisodeSummary(n, True, int(explored), LN2 if explored else 0.0, solved))
    return out


def summaries_rhae(summaries: Sequence[EpisodeSummary], H: int) -> float:
    """RHAE with one level per episode."""
    return rhae_aggregate(LevelResult(H, e.action_count if e.solved else None, e.solved) for e in summaries)


def estar_policy_rhae(spec: EnvironmentSpec, p: float, episodes: int, seed0: int = 0, H: int | None = None) -> float:
    """RHAE of the explore-with-probability-``p`` policy, one level per episode."""
    H = H if H is not None else oracle_baseline(spec)
    return summaries_rhae(estar_policy_summaries(spec, p, episodes, seed0), H)


def _estar_explored(seed: int, p: float) -> bool:
    # same first draw the simulator uses to decide whether to probe
    return bool(np.random.default_rng([int(seed), 2]).random() < p)


def run_frontier(config: ExperimentConfig, policy_grid: Sequence[float] | None = None, output_dir=None) -> RunRecord:
    """Speed/Depth points for an E* policy sweep and for configured agents.

    For toy games the analytic curve is overlaid.  Agreement is judged on
    the mean action count, whose analytic value is A(D); the empirical
    Speed is the mean of 1/A, which differs from 1/A(D) by Jensen's gap.
    """
    config.validate()
    grid = list(policy_grid if policy_grid is not None else config.policy_grid)
    specs = expand_games(config.game_set)
    campaign = Campaign(config, output_dir)
    campaign.save_games(specs)
    points: list[FrontierPoint] = []
    overlay = []
    toy = [s for s in specs if s.family == "toy-estar"]
    for spec in toy:
        curve = estar_curve(spec.params["k"], spec.params["M"])
        for p in grid:
            summaries = estar_policy_summaries(spec, p, config.episodes, seed0=config.seeds[0] * config.episodes)
            pt = speed_depth(summaries, cap=config.cap, label=f"{spec.name}:p={p:g}")
            D = p * LN2
            mean_a, sem = pt.stats["mean_actions"], pt.stats["sem_actions"]
            analytic_a = estar_A_of_p(curve, p)
            z = abs(mean_a - analytic_a) / sem if sem > 0 else (0.0 if math.isclose(mean_a, analytic_a) else math.inf)
            pt.stats.update(
                analytic_depth=D,
                analytic_speed=estar_S_of_D(curve, D),
                analytic_actions=analytic_a,
                z_actions=z,
                within_3se=z <= 3.0,
                rhae=summaries_rhae(summaries, oracle_baseline(spec)),
            )
            points.append(pt)
    cells: list[CellResult] = []
    if config.agents:
        cells = run_cells(config.agents, specs, config.seeds, config.cap, config.jobs)
        by_agent: dict[str, list[EpisodeTrace]] = {}
        for c in cells:
            if c.trace is not None:
                by_agent.setdefault(c.agent, []).append(c.trace)
        for agent, traces in by_agent.items():
            points.append(speed_depth(traces, cap=config.cap, label=agent))
        campaign.save_cells(cells)
    front = {id(p) for p in pareto_frontier(points)}
    for p in points:
        overlay.append({"policy": p.label, "speed": p.speed, "depth": p.depth, "on_frontier": id(p) in front, **p.stats})
    extra = ("analytic_speed", "analytic_depth", "analytic_actions", "mean_actions", "sem_actions", "z_actions", "rhae")
    (campaign.root / "frontier.csv").write_text(frontier_csv(points, extra))
    report = {"points": overlay}
    campaign.write_json("summary.json", {"experiment": "frontier", **report})
    record = RunRecord("frontier", config.digest, [c.row() for c in cells], aggregate(cells), report)
    return campaign.finish(record)


def run_census(config: ExperimentConfig, output_dir=None) -> RunRecord:
    """Taxonomy label and null-coordinate scan for every game."""
    config.validate()
    specs = expand_games(config.game_set)
    campaign = Campaign(config, output_dir)
    campaign.save_games(specs)
    labels = [taxonomy_classify(s, budget=config.cap, budget_threshold=config.budget_threshold) for s in specs]
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab.tier] = counts.get(lab.tier, 0) + 1
    crash = sum(lab.crash_win_reachable for lab in labels)
    write_report(campaign.root / "census.jsonl", labels)
    report = {
        "games": len(specs),
        "tier_counts": dict(sorted(counts.items())),
        "crash_win_reachable": crash,
        "labels": [lab.to_dict() for lab in labels],
    }
    campaign.write_json("summary.json", {"experiment": "taxonomy", **report})
    return campaign.finish(RunRecord("taxonomy", config.digest, [], {}, report))


def run_search(config: ExperimentConfig, output_dir=None) -> RunRecord:
    config.validate()
    specs = expand_games(config.game_set)
    campaign = Campaign(config, output_dir)
    campaign.save_games(specs)
    results = [exhaustive_search(s, config.depth) for s in specs]
    write_report(campaign.root / "search.jsonl", [_no_time(r.to_dict()) for r in results])
    report = {
        "depth": config.depth,
        "sequences_per_game": results[0].sequences_enumerated if results else 0,
        "new_at_max_depth": results[0].per_depth[-1] if results else 0,
        "solved": [r.game_id for r in results if r.winning_sequences],
        "shortest": {r.game_id: min(r.winning_sequences, key=len) for r in results if r.winning_sequences},
    }
    campaign.write_json("summary.json", {"experiment": "search", **report})
    return campaign.finish(RunRecord("search", config.digest, [], {}, report))


def _no_time(d: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in d.items() if k != "wall_time_s"}


def run_scan(config: ExperimentConfig, output_dir=None) -> RunRecord:
    config.validate()
    specs = expand_games(config.game_set)
    campaign = Campaign(config, output_dir)
    campaign.save_games(specs)
    rows = []
    for s in specs:
        reachable, steps = vuln_scan(s)
        rows.append({"game": s.name, "crash_win_reachable": reachable, "steps": steps})
    write_report(campaign.root / "scan.jsonl", rows)
    report = {"games": len(rows), "crash_win_reachable": sum(r["crash_win_reachable"] for r in rows), "rows": rows}
    campaign.write_json("summary.json", {"experiment": "scan", **report})
    return campaign.finish(RunRecord("scan", config.digest, [], {}, report))


def run_project(config: ExperimentConfig, output_dir=None) -> RunRecord:
    config.validate()
    p = config.projection
    proj = binomial_projection(int(p["n_public"]), int(p["solves"]), int(p["n_private"]), float(p["per_solve_score"]))
    campaign = Campaign(config, output_dir)
    report = {"inputs": dict(p), "expected_rhae": proj.expected_rhae, "ci95": list(proj.ci95), "p_hat": proj.p_hat}
    campaign.write_json("summary.json", {"experiment": "project", **report})
    return campaign.finish(RunRecord("project", config.digest, [], {}, report))


RUNNERS = {
    "compare": run_compare,
    "ablate-budget": run_ablate_budget,
    "multi-run": run_multi,
    "frontier": run_frontier,
    "taxonomy": run_census,
    "search": run_search,
    "scan": run_scan,
    "project": run_project,
}


def run_experiment(config: ExperimentConfig, output_dir=None) -> RunRecord:
    return RUNNERS[config.experiment](config, output_dir=output_dir)


def report(root: str | Path) -> dict[str, Any]:
    """Re-derive a campaign's aggregates from its persisted level rows."""
    root = Path(root)
    record = json.loads((root / "run_record.json").read_text())
    recomputed = recompute_aggregates(record["levels"])
    stored = {a: v["rhae"] for a, v in record["aggregates"].items()}
    return {
        "experiment": record["experiment"],
        "config_digest": record["config_digest"],
        "rhae": recomputed,
        "matches_record": all(
            (recomputed[a] is None and stored.get(a) is None) or math.isclose(recomputed[a], stored[a], abs_tol=1e-12)
            for a in recomputed
        ),
        "trace_problems": verify_campaign(root) if record["levels"] else [],
        "report": record["report"],
    }
