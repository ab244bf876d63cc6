"""Reference agents and offline searches over the simulated games.

None of these agents track a belief.  Their traces use the ``plan`` phase
with no entropy, so they have no exploration phase and Depth 0.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .agent import EpisodeTrace, StepRecord
from .env import (
    A1,
    A2,
    A3,
    A4,
    A5,
    A7,
    MARKER,
    Action,
    EnvironmentSpec,
    EpisodeState,
    Status,
    reset,
    search_seed,
    step,
)
from .errors import InvalidActionError, SpecValidationError

TIERS = ("blind-1", "probe-gated", "repeated-action", "coordinate-click", "budget-constrained", "unclassified")
MAX_EXHAUSTIVE_DEPTH = 4


# ---------------------------------------------------------------------------
# baseline agents


def _finish(trace: EpisodeTrace, state: EpisodeState) -> EpisodeTrace:
    trace.final_status = state.status.value
    if state.crash_win:
        trace.outcome = "crash-win"
    elif state.status is Status.SOLVED:
        trace.outcome = "solved"
    else:
        trace.outcome = "unsolved"
    return trace


def _new_trace(spec: EnvironmentSpec, seed: int, label: str, config: dict) -> EpisodeTrace:
    digest = json.dumps(config, sort_keys=True)
    return EpisodeTrace(
        env_id=spec.name,
        seed=seed,
        config_digest=hashlib.sha1(digest.encode()).hexdigest()[:12],
        agent=label,
    )


def _play(state: EpisodeState, actions, trace: EpisodeTrace, cap: int) -> EpisodeState:
    for action in actions:
        if state.terminal or trace.action_count >= cap:
            break
        obs, state = step(state, action)
        trace.steps.append(StepRecord("plan", action.label, obs.digest, None, None))
    return state


def random_agent(spec: EnvironmentSpec, seed: int = 42, cap: int = 200, *, env_seed: int | None = None) -> EpisodeTrace:
    """Uniformly random legal actions; cell-select gets uniform in-bounds coordinates."""
    env_seed = search_seed(spec) if env_seed is None else env_seed
    rng = np.random.default_rng(seed)
    rows, cols = spec.grid_dims

    def actions():
        while True:
            kind = int(rng.integers(1, 8))
            if kind == 6:
                yield Action.select(int(rng.integers(rows)), int(rng.integers(cols)))
            else:
                yield Action(kind)

    trace = _new_trace(spec, env_seed, "random", {"agent": "random", "seed": seed, "cap": cap})
    return _finish(trace, _play(reset(spec, env_seed), actions(), trace, cap))


def repeated_action_agent(spec: EnvironmentSpec, action: Action, n_max: int, *, env_seed: int | None = None) -> EpisodeTrace:
    """Emit ``action`` until solved or ``n_max`` actions."""
    if n_max < 1:
        raise SpecValidationError("n_max must be >= 1")
    env_seed = search_seed(spec) if env_seed is None else env_seed
    trace = _new_trace(spec, env_seed, f"repeat-{action.label}", {"agent": "repeat", "action": action.label, "n_max": n_max})
    return _finish(trace, _play(reset(spec, env_seed), itertools.repeat(action), trace, n_max))


def null_probe_agent(spec: EnvironmentSpec, *, env_seed: int | None = None) -> EpisodeTrace:
    """Issue the null-coordinate cell-select once and stop.

    On a fault-free game the probe is rejected and the trace is empty.
    """
    env_seed = search_seed(spec) if env_seed is None else env_seed
    state = reset(spec, env_seed)
    trace = _new_trace(spec, env_seed, "null-probe", {"agent": "null-probe"})
    try:
        state = _play(state, [Action.null_select()], trace, 1)
    except InvalidActionError:
        pass
    return _finish(trace, state)


# ---------------------------------------------------------------------------
# searches


def search_alphabet(spec: EnvironmentSpec, coords: Sequence[tuple[int, int]] = ()) -> list[Action]:
    """Directional/control moves, cell-select at the centre (plus ``coords``), undo."""
    cells = [spec.center] + [tuple(c) for c in coords if tuple(c) != spec.center]
    return [A1, A2, A3, A4, A5] + [Action.select(*c) for c in cells] + [A7]


def _marked_cells(state: EpisodeState) -> list[tuple[int, int]]:
    return sorted((int(r), int(c)) for r, c in np.argwhere(state.base == MARKER))


@dataclass
class BfsResult:
    plan: list[Action] | None
    cache: dict[str, str]
    expanded: int
    timed_out: bool
    wall_time: float

    @property
    def found(self) -> bool:
        return self.plan is not None


def bfs_presolve(
    spec: EnvironmentSpec,
    depth_limit: int,
    time_limit: float = 180.0,
    *,
    coords: Sequence[tuple[int, int]] | None = None,
) -> BfsResult:
    """Shortest winning sequence of length <= ``depth_limit`` from reset.

    Cell-select is tried at the centre, every marked cell and any extra
    ``coords``.  ``cache`` maps each visited state digest to its status.  On
    timeout the plan is None and the cache holds what was explored.
    """
    if depth_limit < 1:
        raise SpecValidationError("depth_limit must be >= 1")
    t0 = time.perf_counter()
    root = reset(spec, search_seed(spec))
    extra = list(coords or []) + _marked_cells(root)
    alphabet = search_alphabet(spec, extra)
    cache = {root.digest: root.status.value}
    frontier: deque[tuple[EpisodeState, tuple[Action, ...]]] = deque([(root, ())])
    expanded = 0
    while frontier:
        state, path = frontier.popleft()
        if len(path) >= depth_limit:
            continue
        for action in alphabet:
            if time.perf_counter() - t0 > time_limit:
                return BfsResult(None, cache, expanded, True, time.perf_counter() - t0)
            _, nxt = step(state, action)
            expanded += 1
            d = nxt.digest
            if d in cache:
                continue
            cache[d] = nxt.status.value
            if nxt.status is Status.SOLVED and not nxt.crash_win:
                return BfsResult(list(path + (action,)), cache, expanded, False, time.perf_counter() - t0)
            if not nxt.terminal:
                frontier.append((nxt, path + (action,)))
    return BfsResult(None, cache, expanded, False, time.perf_counter() - t0)


@dataclass
class SearchResult:
    game_id: str
    sequences_enumerated: int
    winning_sequences: list[list[str]]
    max_depth: int
    wall_time: float
    per_depth: list[int] = field(default_factory=list)

    @property
    def cumulative(self) -> int:
        return self.sequences_enumerated

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["wall_time_s"] = d.pop("wall_time")
        return d


def exhaustive_search(spec: EnvironmentSpec, max_depth: int) -> SearchResult:
    """Every sequence of length 1..``max_depth`` over the 7-action alphabet.

    Cell-select uses the grid centre only.  Sequences are walked depth first
    and share prefix states, which is equivalent to replaying each one from
    reset because the dynamics are deterministic.  A sequence extending an
    already-finished prefix still counts as enumerated but cannot win.
    """
    if not 1 <= max_depth <= MAX_EXHAUSTIVE_DEPTH:
        raise SpecValidationError(f"max_depth must be in 1..{MAX_EXHAUSTIVE_DEPTH}")
    t0 = time.perf_counter()
    alphabet = search_alphabet(spec)
    n = len(alphabet)
    winners: list[list[str]] = []

    def walk(state: EpisodeState, path: list[Action]) -> None:
        if len(path) == max_depth:
            return
        for action in alphabet:
            _, nxt = step(state, action)
            seq = path + [action]
            if nxt.status is Status.SOLVED and not nxt.crash_win:
                winners.append([a.label for a in seq])
            if not nxt.terminal:
                walk(nxt, seq)

    walk(reset(spec, search_seed(spec)), [])
    per_depth = [n**d for d in range(1, max_depth + 1)]
    return SearchResult(
        game_id=spec.name,
        sequences_enumerated=sum(per_depth),
        winning_sequences=winners,
        max_depth=max_depth,
        wall_time=time.perf_counter() - t0,
        per_depth=per_depth,
    )


def vuln_scan(spec: EnvironmentSpec) -> tuple[bool, int | None]:
    """Null-coordinate probe at reset: (crash-win reachable, steps taken)."""
    trace = null_probe_agent(spec)
    if trace.crash_win:
        return True, trace.action_count
    return False, None


# ---------------------------------------------------------------------------
# taxonomy


@dataclass
class TaxonomyLabel:
    game_id: str
    tier: str
    evidence: dict[str, Any]
    crash_win_reachable: bool

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.tier != "unclassified" and not self.evidence:
            raise ValueError("classified games need evidence")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _wins(spec: EnvironmentSpec, actions: Sequence[Action]) -> int | None:
    """Step count at which ``actions`` wins from reset (legitimately), else None."""
    state = reset(spec, search_seed(spec))
    for i, action in enumerate(actions, 1):
        _, state = step(state, action)
        if state.terminal:
            return i if state.status is Status.SOLVED and not state.crash_win else None
    return None


def _evidence(strategy: str, actions: Sequence[Action], steps: int) -> dict[str, Any]:
    shown = [a.label for a in actions[:steps]]
    if steps > 4 and len(set(shown)) == 1:
        shown = [f"{shown[0]} x{steps}"]
    return {"strategy": strategy, "actions": shown, "steps": steps}


def taxonomy_classify(spec: EnvironmentSpec, budget: int = 200, *, budget_threshold: int | None = None) -> TaxonomyLabel:
    """Weakest strategy class that wins the game, tried in a fixed order.

    1. each single action from reset; 2. exhaustive search to depth 3;
    3. each action repeated up to ``budget`` (cell-select at marked cells
    gives coordinate-click); 4. a probe followed by cell-select.  The
    null-coordinate scan runs regardless.  With ``budget_threshold`` set,
    repeat wins needing at least that many steps are labelled
    budget-constrained.
    """
    crash, _ = vuln_scan(spec)
    root = reset(spec, search_seed(spec))
    markers = _marked_cells(root)

    def label(tier: str, evidence: dict[str, Any]) -> TaxonomyLabel:
        return TaxonomyLabel(spec.name, tier, evidence, crash)

    for action in search_alphabet(spec):
        if _wins(spec, [action]) == 1:
            return label("blind-1", _evidence("single action", [action], 1))

    found = exhaustive_search(spec, 3)
    if found.winning_sequences:
        seq = [Action.parse(s) for s in min(found.winning_sequences, key=len)]
        tier = "repeated-action" if len(set(seq)) == 1 else "probe-gated"
        return label(tier, _evidence("exhaustive depth 3", seq, len(seq)))

    repeats = [(a, "repeated-action") for a in (A1, A2, A3, A4, A5, Action.select(*spec.center))]
    repeats += [(Action.select(*c), "coordinate-click") for c in markers]
    for action, tier in repeats:
        steps = _wins(spec, [action] * budget)
        if steps is not None:
            if budget_threshold is not None and steps >= budget_threshold:
                tier = "budget-constrained"
            return label(tier, _evidence(f"{action.label} repeated", [action] * steps, steps))

    for probe in (A1, A2, A3, A4, A5):
        for cell in [spec.center] + markers:
            seq = [probe, Action.select(*cell)]
            if _wins(spec, seq) == 2:
                return label("probe-gated", _evidence("probe then cell-select", seq, 2))

    return label("unclassified", {})


# ---------------------------------------------------------------------------
# reports


def write_report(path: str | Path, records: Sequence[SearchResult | TaxonomyLabel | dict]) -> None:
    """Line-delimited JSON, one record per game."""
    lines = []
    for r in records:
        d = r if isinstance(r, dict) else r.to_dict()
        lines.append(json.dumps(d, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_report(path: str | Path) -> list[dict[str, Any]]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


__all__ = [
    "BfsResult",
    "SearchResult",
    "TaxonomyLabel",
    "bfs_presolve",
    "exhaustive_search",
    "null_probe_agent",
    "random_agent",
    "repeated_action_agent",
    "taxonomy_classify",
    "vuln_scan",
    "write_report",
]
