"""Deterministic hidden-rule environments.

Three families share one step function:

* ``toy-estar``: two hidden rules, a probe action that reveals the rule, a
  committed plan that costs ``k`` actions when right and ``M`` when wrong.
* ``uis``: ``b**m`` equiprobable rules; every probe reveals one base-``b``
  digit of the rule index, so each probe gains exactly ``ln b`` nats.
* ``taxonomy-game``: synthetic games whose hidden rule is the winning action
  kind, played under one of four public rule templates (blind-1,
  probe-gated, repeated, coordinate-click).

States are immutable values.  ``step`` returns a new state and never mutates
its input, which is what lets agents keep one counterfactual copy of the
environment per hypothesis and lets the searches replay freely.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import InvalidActionError, ProtocolError, SpecValidationError

N_VALUES = 16
DEFAULT_GRID = (64, 64)
UNDO_DEPTH = 64

MARKER = 15
CURSOR = 14
CURSOR_ALT = 12
METER = 13
SLOT = 15
PROGRESS = 2
COMMITTED = 3


class ActionKind(enum.IntEnum):
    ACTION1 = 1
    ACTION2 = 2
    ACTION3 = 3
    ACTION4 = 4
    ACTION5 = 5
    ACTION6 = 6
    ACTION7 = 7


DIRECTIONAL = (1, 2, 3, 4)
PROBE = 5
CELL_SELECT = 6
UNDO = 7
LEGAL_KINDS = frozenset(range(1, 8))


class Status(str, enum.Enum):
    NOT_FINISHED = "not-finished"
    SOLVED = "solved"
    FAILED = "failed"


FAMILIES = ("toy-estar", "uis", "taxonomy-game")
TIERS = ("blind-1", "probe-gated", "repeated", "coordinate-click")


@dataclass(frozen=True)
class Action:
    """One move.  ``kind`` is kept as a plain int so illegal kinds can be
    constructed (and rejected by :func:`step`)."""

    kind: int
    coords: tuple[int, int] | None = None
    null_coords: bool = False

    @classmethod
    def select(cls, row: int, col: int) -> "Action":
        return cls(CELL_SELECT, (int(row), int(col)))

    @classmethod
    def null_select(cls) -> "Action":
        """Cell-select with coordinates attempted but absent."""
        return cls(CELL_SELECT, None, null_coords=True)

    @property
    def label(self) -> str:
        if self.kind == CELL_SELECT and self.null_coords:
            return "ACTION6@null"
        if self.coords is not None:
            return f"ACTION{self.kind}@{self.coords[0]},{self.coords[1]}"
        return f"ACTION{self.kind}"

    @classmethod
    def parse(cls, label: str) -> "Action":
        head, _, tail = label.partition("@")
        if not head.startswith("ACTION"):
            raise ValueError(f"not an action label: {label!r}")
        kind = int(head[6:])
        if not tail:
            return cls(kind)
        if tail == "null":
            return cls(kind, None, null_coords=True)
        r, c = tail.split(",")
        return cls(kind, (int(r), int(c)))

    def sort_key(self) -> tuple[int, int, int]:
        r, c = self.coords if self.coords is not None else (-1, -1)
        return (self.kind, r, c)

    def __str__(self) -> str:
        return self.label


A1, A2, A3, A4, A5, A7 = (Action(k) for k in (1, 2, 3, 4, 5, 7))


@dataclass(frozen=True)
class EnvironmentSpec:
    family: str
    hypotheses: tuple[tuple[str, float], ...]
    params: Mapping[str, Any] = field(default_factory=dict)
    grid_dims: tuple[int, int] = DEFAULT_GRID
    null_coord_fault: bool = False
    human_baseline_override: int | None = None
    name: str = ""

    @property
    def hypothesis_ids(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.hypotheses)

    @property
    def prior(self) -> dict[str, float]:
        return {h: float(w) for h, w in self.hypotheses}

    @property
    def center(self) -> tuple[int, int]:
        return (self.grid_dims[0] // 2, self.grid_dims[1] // 2)

    def validate(self) -> "EnvironmentSpec":
        _validate(self)
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "family": self.family,
            "hypotheses": [[h, w] for h, w in self.hypotheses],
            "params": dict(self.params),
            "grid_dims": list(self.grid_dims),
            "null_coord_fault": self.null_coord_fault,
            "human_baseline_override": self.human_baseline_override,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EnvironmentSpec":
        params = dict(data.get("params", {}))
        if "target" in params and params["target"] is not None:
            params["target"] = tuple(params["target"])
        return cls(
            family=data["family"],
            hypotheses=tuple((str(h), float(w)) for h, w in data["hypotheses"]),
            params=params,
            grid_dims=tuple(data.get("grid_dims", DEFAULT_GRID)),
            null_coord_fault=bool(data.get("null_coord_fault", False)),
            human_baseline_override=data.get("human_baseline_override"),
            name=data.get("name", ""),
        ).validate()


def _fail(msg: str) -> None:
    raise SpecValidationError(msg)


def _validate(spec: EnvironmentSpec) -> None:
    if spec.family not in FAMILIES:
        _fail(f"family must be one of {FAMILIES}, got {spec.family!r}")
    if not spec.hypotheses:
        _fail("hypothesis_space must be non-empty")
    ids = spec.hypothesis_ids
    if len(set(ids)) != len(ids):
        _fail("hypothesis identifiers must be unique")
    weights = np.array([w for _, w in spec.hypotheses], dtype=float)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        _fail("prior weights must be nonnegative")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        _fail(f"prior weights must sum to 1 within 1e-12 (sum={math.fsum(weights)!r})")
    rows, cols = spec.grid_dims
    if rows < 3 or cols < 3:
        _fail("grid_dims must be at least 3x3")
    if spec.human_baseline_override is not None and spec.human_baseline_override < 1:
        _fail("human_baseline_override must be a positive integer")
    p = spec.params
    if "k" in p or "M" in p:
        k, m = p.get("k"), p.get("M")
        if k is None or m is None or not (m > k >= 1):
            _fail(f"require M > k >= 1 (k={k}, M={m})")
    if spec.family == "toy-estar":
        if len(ids) != 2 or any(abs(w - 0.5) > 1e-12 for _, w in spec.hypotheses):
            _fail("toy-estar requires exactly two hypotheses with weights (1/2, 1/2)")
        if "k" not in p:
            _fail("toy-estar requires k and M")
        if len(ids) > rows * cols:
            _fail("grid too small for hypothesis slots")
    elif spec.family == "uis":
        for key in ("delta_h", "k", "M", "digits"):
            if key not in p:
                _fail(f"uis requires param {key!r}")
        b = round(math.exp(p["delta_h"]))
        if b < 2 or abs(math.log(b) - p["delta_h"]) > 1e-9:
            _fail("uis delta_h must equal ln(b) for an integer branching b >= 2")
        if len(ids) != b ** int(p["digits"]):
            _fail("uis hypothesis count must equal b**digits")
        if len(ids) > rows * cols:
            _fail("grid too small for hypothesis slots")
        if any(abs(w - 1.0 / len(ids)) > 1e-12 for _, w in spec.hypotheses):
            _fail("uis prior must be uniform")
    else:
        tier = p.get("tier")
        if tier not in TIERS:
            _fail(f"taxonomy tier must be one of {TIERS}, got {tier!r}")
        for h in ids:
            if h not in {f"ACTION{k}" for k in range(1, 7)}:
                _fail(f"taxonomy hypotheses are winning action kinds ACTION1..ACTION6, got {h!r}")
        win = p.get("winning_action")
        if win is not None and spec.prior.get(win, 0.0) <= 0:
            _fail("planted winning_action must have positive prior weight")
        n = p.get("repeat")
        if tier == "repeated" and (n is None or n < 2):
            _fail("repeated tier requires repeat >= 2")
        if tier == "coordinate-click" and (n is None or n < 1):
            _fail("coordinate-click tier requires repeat >= 1")
        if tier in ("probe-gated", "coordinate-click"):
            t = p.get("target")
            if t is None or not (0 <= t[0] < rows and 0 <= t[1] < cols):
                _fail("probe-gated/coordinate-click tiers require in-bounds target coordinates")


# ---------------------------------------------------------------------------
# state


@dataclass(frozen=True)
class Core:
    """Hashable internal game state (everything undo restores)."""

    pristine: bool = True
    cursor: tuple[int, int] = (0, 0)
    cursor_value: int = CURSOR
    streak: int = 0
    probe_seen: bool = False
    committed: int | None = None
    progress: int = 0
    revealed: tuple[int, ...] = ()


@dataclass(frozen=True)
class Observation:
    grid: np.ndarray = field(compare=False, repr=False)
    status: Status
    level: int
    step_index: int
    signal: tuple = ()
    crash_win: bool = False

    @property
    def digest(self) -> str:
        h = hashlib.sha1(np.ascontiguousarray(self.grid, dtype=np.uint8).tobytes())
        h.update(repr((self.status.value, self.level, self.step_index, self.signal, self.crash_win)).encode())
        return h.hexdigest()[:16]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Observation):
            return NotImplemented
        return self.digest == other.digest

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class EpisodeState:
    spec: EnvironmentSpec = field(repr=False)
    seed: int
    true_hypothesis: str
    core: Core
    base: np.ndarray = field(compare=False, repr=False)
    action_count: int = 0
    status: Status = Status.NOT_FINISHED
    undo_stack: tuple[Core, ...] = ()
    crash_win: bool = False

    @property
    def digest(self) -> str:
        key = (
            self.spec.name,
            self.true_hypothesis,
            self.core,
            self.action_count,
            self.status.value,
            self.undo_stack,
            self.crash_win,
        )
        return hashlib.sha1(repr(key).encode()).hexdigest()[:16]

    @property
    def terminal(self) -> bool:
        return self.status is not Status.NOT_FINISHED


def _hypothesis_index(spec: EnvironmentSpec, h: str) -> int:
    return spec.hypothesis_ids.index(h)


def sample_hypothesis(spec: EnvironmentSpec, seed: int) -> str:
    """Draw the hidden rule for an episode.

    Taxonomy games with a planted ``winning_action`` always use it; the prior
    is then only the candidate set the agent is told about.
    """
    planted = spec.params.get("winning_action") if spec.family == "taxonomy-game" else None
    if planted is not None:
        return planted
    rng = np.random.default_rng([int(seed), 0])
    weights = np.array([w for _, w in spec.hypotheses], dtype=float)
    idx = int(rng.choice(len(weights), p=weights / weights.sum()))
    return spec.hypothesis_ids[idx]


def _base_grid(spec: EnvironmentSpec) -> tuple[np.ndarray, tuple[int, int]]:
    rows, cols = spec.grid_dims
    grid = np.zeros((rows, cols), dtype=np.uint8)
    if spec.family in ("toy-estar", "uis"):
        for i in range(len(spec.hypotheses)):
            grid[divmod(i, cols)] = SLOT
        cursor = (rows - 1, 0)
    else:
        rng = np.random.default_rng([int(spec.params.get("seed", 0)), 1])
        for _ in range(int(rng.integers(3, 8))):
            r0, c0 = int(rng.integers(1, rows - 2)), int(rng.integers(1, cols - 2))
            h, w = int(rng.integers(1, max(2, rows // 6))), int(rng.integers(1, max(2, cols // 6)))
            grid[r0 : r0 + h, c0 : c0 + w] = int(rng.integers(1, 11))
        cursor = (int(rng.integers(1, rows - 1)), int(rng.integers(1, cols - 1)))
        if spec.params["tier"] in ("probe-gated", "coordinate-click"):
            grid[tuple(spec.params["target"])] = MARKER
    grid.flags.writeable = False
    return grid, cursor


def reset(spec: EnvironmentSpec, seed: int) -> EpisodeState:
    """Fresh episode.  Identical ``(spec, seed)`` gives identical states."""
    spec.validate()
    base, cursor = _base_grid(spec)
    return EpisodeState(
        spec=spec,
        seed=int(seed),
        true_hypothesis=sample_hypothesis(spec, seed),
        core=Core(cursor=cursor),
        base=base,
    )


def with_hypothesis(state: EpisodeState, hypothesis: str) -> EpisodeState:
    """Counterfactual copy of ``state`` in which ``hypothesis`` is the truth."""
    if hypothesis not in state.spec.hypothesis_ids:
        raise KeyError(hypothesis)
    return replace(state, true_hypothesis=hypothesis)


def render(state: EpisodeState) -> np.ndarray:
    spec, core = state.spec, state.core
    grid = state.base.copy()
    rows, cols = spec.grid_dims
    if spec.family == "taxonomy-game":
        grid[core.cursor] = core.cursor_value
        if spec.params["tier"] == "repeated" and core.streak:
            grid[rows - 1, : min(core.streak, cols)] = METER
    else:
        if core.committed is not None:
            grid[divmod(core.committed, cols)] = COMMITTED
        if core.progress:
            grid[rows - 1, : min(core.progress, cols)] = PROGRESS
    grid.flags.writeable = False
    return grid


def observe(state: EpisodeState) -> Observation:
    signal: tuple = ()
    if state.spec.family != "taxonomy-game":
        signal = state.core.revealed
    return Observation(
        grid=render(state),
        status=state.status,
        level=0,
        step_index=state.action_count,
        signal=signal,
        crash_win=state.crash_win,
    )


# ---------------------------------------------------------------------------
# dynamics


def _check_action(spec: EnvironmentSpec, action: Action) -> None:
    if not isinstance(action, Action) or action.kind not in LEGAL_KINDS:
        raise InvalidActionError(f"unknown action kind: {action!r}")
    if action.kind == CELL_SELECT:
        if action.null_coords:
            return
        if action.coords is None:
            raise InvalidActionError("cell-select requires coordinates")
        r, c = action.coords
        if not (0 <= r < spec.grid_dims[0] and 0 <= c < spec.grid_dims[1]):
            raise InvalidActionError(f"coordinates {action.coords} out of bounds {spec.grid_dims}")
    elif action.coords is not None or action.null_coords:
        raise InvalidActionError(f"ACTION{action.kind} takes no coordinates")


def _commit_dynamics(state: EpisodeState, action: Action) -> tuple[Core, Status]:
    spec, core = state.spec, state.core
    k, m = int(spec.params["k"]), int(spec.params["M"])
    truth = _hypothesis_index(spec, state.true_hypothesis)
    n = len(spec.hypotheses)
    cols = spec.grid_dims[1]
    if action.kind == PROBE:
        if spec.family == "toy-estar":
            core = replace(core, revealed=(truth,))
        else:
            b = round(math.exp(spec.params["delta_h"]))
            digits = int(spec.params["digits"])
            j = len(core.revealed)
            if j < digits:
                digit = (truth // b ** (digits - 1 - j)) % b
                core = replace(core, revealed=core.revealed + (digit,))
    elif action.kind == CELL_SELECT:
        r, c = action.coords  # type: ignore[misc]
        slot = r * cols + c
        if core.committed is None and slot < n:
            core = replace(core, committed=slot, progress=1)
    elif action.kind == 1 and core.committed is not None:
        core = replace(core, progress=core.progress + 1)
    core = replace(core, pristine=False)
    status = Status.NOT_FINISHED
    if core.committed is not None:
        if core.committed == truth and core.progress >= k:
            status = Status.SOLVED
        elif core.committed != truth and core.progress >= m:
            status = Status.FAILED
    return core, status


_MOVES = {1: (-1, 0), 2: (1, 0), 3: (0, -1), 4: (0, 1)}


def _is_win_action(spec: EnvironmentSpec, win_kind: int, action: Action) -> bool:
    if action.kind != win_kind:
        return False
    if win_kind == CELL_SELECT and spec.params["tier"] in ("probe-gated", "coordinate-click"):
        return tuple(action.coords) == tuple(spec.params["target"])  # type: ignore[arg-type]
    return True


def _taxonomy_dynamics(state: EpisodeState, action: Action) -> tuple[Core, Status]:
    spec, core = state.spec, state.core
    tier = spec.params["tier"]
    win_kind = int(state.true_hypothesis[6:])
    rows, cols = spec.grid_dims
    new = core
    if action.kind in _MOVES:
        dr, dc = _MOVES[action.kind]
        r = min(max(core.cursor[0] + dr, 0), rows - 1)
        c = min(max(core.cursor[1] + dc, 0), cols - 1)
        new = replace(new, cursor=(r, c))
    elif action.kind == PROBE:
        new = replace(new, cursor_value=CURSOR_ALT if core.cursor_value == CURSOR else CURSOR)
    visual_change = (new.cursor, new.cursor_value) != (core.cursor, core.cursor_value)
    winning = _is_win_action(spec, win_kind, action)
    if tier == "repeated":
        new = replace(new, streak=core.streak + 1 if winning else 0)
        visual_change = visual_change or new.streak != core.streak
    if action.kind != win_kind and visual_change:
        new = replace(new, probe_seen=True)
    new = replace(new, pristine=False)

    if tier == "blind-1":
        solved = winning and core.pristine
    elif tier == "probe-gated":
        solved = winning and core.probe_seen
    elif tier == "repeated":
        solved = new.streak >= int(spec.params["repeat"])
    else:
        solved = winning and state.action_count >= int(spec.params["repeat"])
    return new, (Status.SOLVED if solved else Status.NOT_FINISHED)


def _apply(state: EpisodeState, action: Action) -> tuple[Core, Status]:
    if action.kind == CELL_SELECT and action.coords is None:
        # Mirrors an engine that indexes into the grid with missing coordinates.
        row, col = action.coords  # type: ignore[misc]  # raises TypeError
    if state.spec.family == "taxonomy-game":
        return _taxonomy_dynamics(state, action)
    return _commit_dynamics(state, action)


def step(state: EpisodeState, action: Action) -> tuple[Observation, EpisodeState]:
    """Apply one action.

    Raises :class:`ProtocolError` on a finished episode and
    :class:`InvalidActionError` for illegal actions.  A null-coordinate
    cell-select is invalid unless the spec carries the null-coordinate fault,
    in which case the internal fault is converted into a crash-win.
    """
    if state.terminal:
        raise ProtocolError(f"episode already {state.status.value}")
    spec = state.spec
    _check_action(spec, action)
    if action.null_coords and not spec.null_coord_fault:
        raise InvalidActionError("cell-select with absent coordinates")
    count = state.action_count + 1

    if action.kind == UNDO:
        if state.undo_stack:
            new = replace(state, core=state.undo_stack[-1], undo_stack=state.undo_stack[:-1], action_count=count)
        else:
            new = replace(state, action_count=count)
        return observe(new), new

    try:
        core, status = _apply(state, action)
    except TypeError:
        if not spec.null_coord_fault:
            raise
        new = replace(state, action_count=count, status=Status.SOLVED, crash_win=True)
        return observe(new), new

    stack = (state.undo_stack + (state.core,))[-UNDO_DEPTH:]
    new = replace(state, core=core, status=status, action_count=count, undo_stack=stack)
    return observe(new), new


def replay(spec: EnvironmentSpec, seed: int, actions: Sequence[Action]) -> tuple[list[Observation], EpisodeState]:
    """Reset and apply ``actions``; stops early if the episode ends."""
    state = reset(spec, seed)
    observations = [observe(state)]
    for action in actions:
        if state.terminal:
            break
        obs, state = step(state, action)
        observations.append(obs)
    return observations, state


def candidate_actions(state: EpisodeState) -> list[Action]:
    """Every action worth considering from ``state``, in tie-break order.

    Cell-select is offered at the grid centre plus every marked cell.
    """
    coords = {state.spec.center}
    marked = np.argwhere(state.base == MARKER)
    coords.update((int(r), int(c)) for r, c in marked)
    actions = [Action(k) for k in (1, 2, 3, 4, 5)]
    actions += [Action.select(r, c) for r, c in sorted(coords)]
    actions.append(A7)
    return actions


# ---------------------------------------------------------------------------
# planning under a known hypothesis


def _direct_plan(state: EpisodeState) -> list[Action] | None:
    spec, core = state.spec, state.core
    if state.status is Status.SOLVED:
        return []
    if state.terminal:
        return None
    if spec.family != "taxonomy-game":
        k = int(spec.params["k"])
        truth = _hypothesis_index(spec, state.true_hypothesis)
        if core.committed is None:
            r, c = divmod(truth, spec.grid_dims[1])
            return [Action.select(r, c)] + [A1] * (k - 1)
        if core.committed == truth:
            return [A1] * (k - core.progress)
        return None

    tier = spec.params["tier"]
    w = int(state.true_hypothesis[6:])
    if w == CELL_SELECT:
        target = spec.params.get("target") if tier in ("probe-gated", "coordinate-click") else None
        win = Action.select(*(target if target is not None else spec.center))
    else:
        win = Action(w)
    if tier == "blind-1":
        return [win] if core.pristine else None
    if tier == "repeated":
        return [win] * (int(spec.params["repeat"]) - core.streak)
    if tier == "coordinate-click":
        return [win] * max(1, int(spec.params["repeat"]) - state.action_count + 1)
    if core.probe_seen:
        return [win]
    for kind in (1, 2, 3, 4, 5):
        if kind == w:
            continue
        _, nxt = step(state, Action(kind))
        if nxt.core.probe_seen:
            return [Action(kind), win]
    return None


def winning_plan(state: EpisodeState) -> list[Action] | None:
    """Shortest known winning sequence under ``state.true_hypothesis``.

    When the current state cannot win directly, undo is used to walk back
    through history to the most recent state that can.
    """
    plan = _direct_plan(state)
    if plan is not None:
        return plan
    stack = state.undo_stack
    for j in range(1, len(stack) + 1):
        earlier = replace(state, core=stack[-j], undo_stack=stack[:-j], action_count=state.action_count + j)
        plan = _direct_plan(earlier)
        if plan is not None:
            return [A7] * j + plan
    return None


def planted_strategy(spec: EnvironmentSpec) -> list[Action]:
    """Winning sequence from reset for the episode searches replay."""
    state = reset(spec, search_seed(spec))
    plan = winning_plan(state)
    assert plan is not None
    return plan


def search_seed(spec: EnvironmentSpec) -> int:
    return int(spec.params.get("seed", 0))


# ---------------------------------------------------------------------------
# toy environment helpers


def simulate_estar_episode(spec: EnvironmentSpec, seed: int, p: float) -> tuple[int, bool]:
    """One episode of the randomised explore-with-probability-``p`` policy.

    Returns ``(action_count, solved)``.  Counts follow the environment's own
    dynamics; :func:`estar_policy_script` produces the matching action list.
    """
    spec.validate()
    if spec.family != "toy-estar":
        raise SpecValidationError("simulate_estar_episode requires a toy-estar spec")
    if not 0.0 <= p <= 1.0:
        raise SpecValidationError(f"p must lie in [0, 1], got {p}")
    k, m = int(spec.params["k"]), int(spec.params["M"])
    truth = _hypothesis_index(spec, sample_hypothesis(spec, seed))
    rng = np.random.default_rng([int(seed), 2])
    if rng.random() < p:
        return 1 + k, True
    guess = int(rng.integers(2))
    return (k, True) if guess == truth else (m, False)


def estar_policy_script(spec: EnvironmentSpec, seed: int, p: float) -> list[Action]:
    """Actions :func:`simulate_estar_episode` stands for, for replay checks."""
    k, m = int(spec.params["k"]), int(spec.params["M"])
    truth = _hypothesis_index(spec, sample_hypothesis(spec, seed))
    rng = np.random.default_rng([int(seed), 2])
    cols = spec.grid_dims[1]
    if rng.random() < p:
        return [A5, Action.select(*divmod(truth, cols))] + [A1] * (k - 1)
    guess = int(rng.integers(2))
    n_plan = k if guess == truth else m
    return [Action.select(*divmod(guess, cols))] + [A1] * (n_plan - 1)


def oracle_baseline(spec: EnvironmentSpec) -> int:
    """Reference action count standing in for the human median."""
    spec.validate()
    if spec.human_baseline_override is not None:
        return int(spec.human_baseline_override)
    p = spec.params
    if spec.family == "toy-estar":
        k, m = p["k"], p["M"]
        return math.ceil(min(1 + k, (k + m) / 2) - 1e-9)
    if spec.family == "uis":
        k, m, digits = p["k"], p["M"], int(p["digits"])
        b = round(math.exp(p["delta_h"]))
        costs = []
        for j in range(digits + 1):
            correct = float(b) ** (j - digits)
            costs.append(j + correct * k + (1 - correct) * m)
        return math.ceil(min(costs) - 1e-9)
    return len(planted_strategy(spec))


# ---------------------------------------------------------------------------
# generators


def estar_spec(k: int = 5, M: int = 100, *, grid_dims: tuple[int, int] = DEFAULT_GRID, name: str = "") -> EnvironmentSpec:
    return EnvironmentSpec(
        family="toy-estar",
        hypotheses=(("h1", 0.5), ("h2", 0.5)),
        params={"k": k, "M": M},
        grid_dims=grid_dims,
        name=name or f"estar-k{k}-M{M}",
    ).validate()


def uis_spec(
    branching: int = 2,
    digits: int = 2,
    k: int = 5,
    M: int = 100,
    *,
    grid_dims: tuple[int, int] = DEFAULT_GRID,
    name: str = "",
) -> EnvironmentSpec:
    """UIS game with ``branching**digits`` rules.

    ``alpha``/``beta`` record the secant of the correctness curve between
    depth 0 and full depth; it is exact when ``digits == 1``.
    """
    n = branching**digits
    dh = math.log(branching)
    alpha = 1.0 / n
    beta = (1.0 - alpha) / (digits * dh)
    return EnvironmentSpec(
        family="uis",
        hypotheses=tuple((f"h{i}", 1.0 / n) for i in range(n)),
        params={"delta_h": dh, "alpha": alpha, "beta": beta, "k": k, "M": M, "digits": digits},
        grid_dims=grid_dims,
        name=name or f"uis-b{branching}-m{digits}",
    ).validate()


CANDIDATE_KINDS = tuple(f"ACTION{k}" for k in range(1, 7))


def taxonomy_spec(
    tier: str,
    winning_action: str = "ACTION6",
    *,
    repeat: int | None = None,
    target: tuple[int, int] | None = None,
    seed: int = 0,
    prior: str = "uniform",
    fault: bool = False,
    grid_dims: tuple[int, int] = DEFAULT_GRID,
    name: str = "",
) -> EnvironmentSpec:
    """Planted taxonomy game.  ``prior='uniform'`` declares all six winning
    kinds as candidates; ``prior='planted'`` declares only the planted one."""
    if prior == "uniform":
        hyps = tuple((h, 1.0 / len(CANDIDATE_KINDS)) for h in CANDIDATE_KINDS)
    elif prior == "planted":
        hyps = ((winning_action, 1.0),)
    else:
        raise SpecValidationError(f"unknown prior {prior!r}")
    params: dict[str, Any] = {"tier": tier, "winning_action": winning_action, "seed": seed}
    if repeat is not None:
        params["repeat"] = repeat
    if target is not None:
        params["target"] = tuple(target)
    return EnvironmentSpec(
        family="taxonomy-game",
        hypotheses=hyps,
        params=params,
        grid_dims=grid_dims,
        null_coord_fault=fault,
        name=name or f"{tier}-{winning_action}-s{seed}",
    ).validate()


def random_taxonomy_spec(tier: str, seed: int, *, fault: bool = False, prior: str = "uniform") -> EnvironmentSpec:
    """Random planted game of ``tier``; targets never sit at the grid centre."""
    rng = np.random.default_rng([int(seed), 3])
    rows, cols = DEFAULT_GRID
    center = (rows // 2, cols // 2)
    target = center
    while target == center:
        target = (int(rng.integers(rows)), int(rng.integers(cols)))
    if tier == "blind-1":
        return taxonomy_spec(tier, f"ACTION{int(rng.integers(1, 7))}", seed=seed, fault=fault, prior=prior)
    if tier == "probe-gated":
        return taxonomy_spec(tier, "ACTION6", target=target, seed=seed, fault=fault, prior=prior)
    if tier == "repeated":
        return taxonomy_spec(
            tier, f"ACTION{int(rng.integers(1, 6))}", repeat=int(rng.integers(2, 201)), seed=seed, fault=fault, prior=prior
        )
    if tier == "coordinate-click":
        return taxonomy_spec(
            tier, "ACTION6", repeat=int(rng.integers(1, 120)), target=target, seed=seed, fault=fault, prior=prior
        )
    raise SpecValidationError(f"unknown tier {tier!r}")


# (tier, winning action, repeat, target) for the 25-game census; fault on the first 18.
CENSUS_LAYOUT: tuple[tuple[str, str, int | None, tuple[int, int] | None], ...] = (
    *(("blind-1", "ACTION6", None, None),) * 5,
    ("blind-1", "ACTION1", None, None),
    ("blind-1", "ACTION2", None, None),
    ("blind-1", "ACTION3", None, None),
    ("blind-1", "ACTION4", None, None),
    ("blind-1", "ACTION5", None, None),
    ("probe-gated", "ACTION6", None, (10, 12)),
    ("probe-gated", "ACTION6", None, (50, 7)),
    ("probe-gated", "ACTION6", None, (5, 40)),
    ("probe-gated", "ACTION6", None, (60, 60)),
    ("probe-gated", "ACTION6", None, (21, 45)),
    ("coordinate-click", "ACTION6", 8, (16, 16)),
    ("repeated", "ACTION1", 30, None),
    ("repeated", "ACTION1", 50, None),
    ("repeated", "ACTION1", 100, None),
    ("repeated", "ACTION1", 128, None),
    ("coordinate-click", "ACTION6", 99, (32, 32)),
    ("repeated", "ACTION2", 129, None),
    ("coordinate-click", "ACTION6", 51, (24, 48)),
    ("repeated", "ACTION1", 130, None),
    ("repeated", "ACTION1", 200, None),
)


def census_specs(seed: int = 0, n_fault: int = 18, *, prior: str = "uniform") -> list[EnvironmentSpec]:
    """Synthetic 25-game set with the public-set tier proportions."""
    specs = []
    for i, (tier, win, repeat, target) in enumerate(CENSUS_LAYOUT):
        specs.append(
            taxonomy_spec(
                tier,
                win,
                repeat=repeat,
                target=target,
                seed=seed * 100 + i,
                prior=prior,
                fault=i < n_fault,
                name=f"G{i:02d}-{tier}",
            )
        )
    return specs


# ---------------------------------------------------------------------------
# spec files and golden traces


def save_spec(spec: EnvironmentSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def load_spec(path: str | Path) -> EnvironmentSpec:
    return EnvironmentSpec.from_dict(json.loads(Path(path).read_text()))


def observation_record(obs: Observation, action: Action | None = None) -> dict[str, Any]:
    return {
        "action": None if action is None else action.label,
        "digest": obs.digest,
        "status": obs.status.value,
        "step_index": obs.step_index,
        "signal": list(obs.signal),
        "crash_win": obs.crash_win,
        "nonzero_cells": int(np.count_nonzero(obs.grid)),
    }


def write_observation_trace(path: str | Path, spec: EnvironmentSpec, seed: int, actions: Sequence[Action]) -> None:
    observations, _ = replay(spec, seed, actions)
    labels = [None, *actions]
    with Path(path).open("w") as fh:
        for obs, act in zip(observations, labels):
            fh.write(json.dumps(observation_record(obs, act), sort_keys=True) + "\n")


def read_observation_trace(path: str | Path) -> list[dict[str, Any]]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
