"""Three-phase EXPLORE / VERIFY / PLAN agent with entropy-gated commitment.

The agent never sees the hidden rule.  It keeps one counterfactual copy of
the environment per hypothesis still in its support and, after every real
step, keeps exactly those hypotheses whose copy produced the same
observation.  Because the environments are deterministic, that is the exact
Bayes update with 0/1 likelihoods.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import belief as bl
from .env import (
    A1,
    A2,
    A3,
    A4,
    A5,
    CELL_SELECT,
    Action,
    EpisodeState,
    Observation,
    Status,
    candidate_actions,
    oracle_baseline,
    step,
    winning_plan,
    with_hypothesis,
)
from .errors import ArenaError, SpecValidationError

GAIN_TOL = 1e-12
MEMORY_SIZE = 10
SOURCES = ("oracle-bayes", "scripted-bias")
PHASES = ("explore", "verify", "plan")
REENTRY_EVENTS = ("surprise", "falsified")


# ---------------------------------------------------------------------------
# configuration


def budget(H: int, mode: str) -> int:
    """Exploration budget for an environment whose baseline is ``H`` actions.

    ``mode`` is ``"fixed:<b>"``, ``"adaptive"`` (40% of H clamped to
    [5, 30]) or ``"adaptive-small"`` (20% of H clamped to [2, 5]).
    """
    if H < 1:
        raise SpecValidationError("H must be >= 1")
    if mode.startswith("fixed:"):
        b = int(mode.split(":", 1)[1])
        if b < 0:
            raise SpecValidationError("fixed budget must be >= 0")
        return b
    if mode == "adaptive":
        return max(5, min(30, math.floor(0.4 * H)))
    if mode == "adaptive-small":
        return max(2, min(5, math.floor(0.2 * H)))
    raise SpecValidationError(f"unknown budget mode {mode!r}")


@dataclass(frozen=True)
class AgentConfig:
    budget_mode: str = "adaptive"
    theta: float = 0.1
    verify_steps: int = 1
    action_cap: int = 200
    hypothesis_source: str = "oracle-bayes"
    action6_first_override: bool = False
    seed: int = 0
    # MAP weight above which the scripted source trusts its hypothesis
    strong_evidence: float = 0.9

    def validate(self) -> "AgentConfig":
        budget(1, self.budget_mode)
        if self.theta < 0:
            raise SpecValidationError("theta must be >= 0")
        if self.verify_steps not in (1, 2, 3):
            raise SpecValidationError("verify_steps must be 1, 2 or 3")
        if self.action_cap < 1:
            raise SpecValidationError("action_cap must be positive")
        if self.hypothesis_source not in SOURCES:
            raise SpecValidationError(f"hypothesis_source must be one of {SOURCES}")
        return self

    @property
    def digest(self) -> str:
        return hashlib.sha1(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class StepRecord:
    phase: str
    action: str
    obs_digest: str
    entropy_before: float | None
    entropy: float | None


@dataclass
class EpisodeTrace:
    env_id: str
    seed: int
    config_digest: str
    steps: list[StepRecord] = field(default_factory=list)
    outcome: str = "unsolved"
    final_status: str = Status.NOT_FINISHED.value
    initial_entropy: float | None = None
    budget: int | None = None
    events: list[dict[str, Any]] = field(default_factory=list)
    agent: str = ""

    @property
    def action_count(self) -> int:
        return len(self.steps)

    @property
    def solved(self) -> bool:
        return self.outcome == "solved"

    @property
    def crash_win(self) -> bool:
        return self.outcome == "crash-win"

    @property
    def terminated(self) -> bool:
        return self.final_status != Status.NOT_FINISHED.value

    @property
    def explore_actions(self) -> int:
        return sum(1 for s in self.steps if s.phase == "explore")

    @property
    def explore_entropy_drop(self) -> float:
        return math.fsum(
            s.entropy_before - s.entropy
            for s in self.steps
            if s.phase == "explore" and s.entropy is not None and s.entropy_before is not None
        )

    @property
    def phases(self) -> list[str]:
        return [s.phase for s in self.steps]

    def summary(self) -> dict[str, Any]:
        return {
            "type": "summary",
            "env_id": self.env_id,
            "agent": self.agent,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "outcome": self.outcome,
            "final_status": self.final_status,
            "action_count": self.action_count,
            "initial_entropy_nats": self.initial_entropy,
            "budget": self.budget,
            "explore_actions": self.explore_actions,
            "explore_entropy_drop_nats": self.explore_entropy_drop,
            "events": self.events,
        }

    def to_jsonl(self) -> str:
        lines = []
        for i, s in enumerate(self.steps):
            rec = {
                "type": "step",
                "index": i,
                "phase": s.phase,
                "action": s.action,
                "obs_digest": s.obs_digest,
                "entropy_before_nats": s.entropy_before,
                "entropy_nats": s.entropy,
            }
            lines.append(json.dumps(rec, sort_keys=True))
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        steps, summary = [], None
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["type"] == "step":
                steps.append(
                    StepRecord(rec["phase"], rec["action"], rec["obs_digest"], rec["entropy_before_nats"], rec["entropy_nats"])
                )
            else:
                summary = rec
        if summary is None:
            raise ValueError("trace has no summary record")
        return cls(
            env_id=summary["env_id"],
            seed=summary["seed"],
            config_digest=summary["config_digest"],
            steps=steps,
            outcome=summary["outcome"],
            final_status=summary["final_status"],
            initial_entropy=summary["initial_entropy_nats"],
            budget=summary["budget"],
            events=summary["events"],
            agent=summary.get("agent", ""),
        )

    @classmethod
    def read(cls, path: str | Path) -> "EpisodeTrace":
        return cls.from_jsonl(Path(path).read_text())


def phase_order_ok(trace: EpisodeTrace) -> bool:
    """explore* verify* plan*, going back only after a surprise or falsification."""
    event_at = sorted(e["at"] for e in trace.events if e["kind"] in REENTRY_EVENTS)
    rank = {p: i for i, p in enumerate(PHASES)}
    prev = None
    for i, s in enumerate(trace.steps):
        if prev is not None and rank[s.phase] < rank[prev]:
            # some event must have been recorded after the previous step
            if not any(i - 1 < at <= i for at in event_at):
                return False
        prev = s.phase
    return True


# ---------------------------------------------------------------------------
# memory


class EpisodicMemory:
    """Ring of the last ten (state digest, action) pairs."""

    def __init__(self, size: int = MEMORY_SIZE) -> None:
        self._ring: deque[tuple[str, str]] = deque(maxlen=size)

    def record(self, state_digest: str, action: Action | str) -> None:
        self._ring.append((state_digest, str(action)))

    def __contains__(self, pair: tuple[str, Action | str]) -> bool:
        return (pair[0], str(pair[1])) in self._ring

    def __len__(self) -> int:
        return len(self._ring)


def memory_lookup(memory: EpisodicMemory, state_digest: str, action: Action | str) -> bool:
    return (state_digest, action) in memory


# ---------------------------------------------------------------------------
# world tracking


class _Worlds:
    """Real state, belief and one counterfactual state per live hypothesis."""

    def __init__(self, state: EpisodeState) -> None:
        self.state = state
        self.obs: Observation | None = None
        self.belief = bl.init_belief(state.spec)
        self.copies = {h: with_hypothesis(state, h) for h in self.belief.support}

    @property
    def entropy(self) -> float:
        return bl.entropy(self.belief)

    @property
    def map(self) -> str:
        return bl.map_hypothesis(self.belief)

    def predict(self, action: Action) -> dict[str, tuple[str | None, EpisodeState | None]]:
        out = {}
        for h in self.belief.support:
            try:
                o, s = step(self.copies[h], action)
                out[h] = (o.digest, s)
            except ArenaError:
                out[h] = (None, None)
        return out

    def info_gain(self, action: Action, pred=None) -> float:
        pred = pred if pred is not None else self.predict(action)
        return bl.expected_info_gain(self.belief, action, lambda h, _a: {pred[h][0]: 1.0})

    def act(self, action: Action, pred=None) -> Observation:
        pred = pred if pred is not None else self.predict(action)
        obs, self.state = step(self.state, action)
        self.obs = obs
        lik = {h: 1.0 if d == obs.digest else 0.0 for h, (d, _) in pred.items()}
        self.belief = bl.update(self.belief, lik)
        self.copies = {h: pred[h][1] for h in self.belief.support}
        return obs


# ---------------------------------------------------------------------------
# hypothesis / action sources


class OracleBayes:
    """Exact information-gain action selection."""

    name = "oracle-bayes"
    gated = True

    def __init__(self, config: AgentConfig) -> None:
        self.config = config

    def explore_ranking(self, w: _Worlds) -> list[tuple[float, Action]]:
        ranked = []
        for a in candidate_actions(w.state):
            ranked.append((w.info_gain(a), a))
        ranked.sort(key=lambda t: (-round(t[0], 12), t[1].sort_key()))
        return ranked

    def explore_action(self, w: _Worlds, memory: EpisodicMemory) -> Action:
        ranked = self.explore_ranking(w)
        informative = [a for g, a in ranked if g > GAIN_TOL]
        if not informative and w.state.undo_stack:
            # nothing left to learn here: back out of the last exploratory move
            return Action(7)
        order = informative or [a for _, a in ranked if a.kind != 7]
        digest = w.obs.digest if w.obs is not None else ""
        for a in order:
            if not memory_lookup(memory, digest, a):
                return a
        return order[0]

    def verify_action(self, w: _Worlds) -> Action | None:
        return _falsification_action(w, candidate_actions(w.state))

    def plan(self, w: _Worlds) -> list[Action] | None:
        return winning_plan(w.copies[w.map])


class ScriptedBias(OracleBayes):
    """Stand-in for a biased action generator.

    Absent strong evidence it presses the first directional action; cell-select
    stays out of its vocabulary until it has been observed in this episode.
    """

    name = "scripted-bias"
    gated = False
    preference = (A1, A2, A3, A4, A5)

    def __init__(self, config: AgentConfig) -> None:
        super().__init__(config)
        self.seen_select = False

    def _allowed(self, a: Action) -> bool:
        return a.kind != CELL_SELECT or self.seen_select

    def _strong(self, w: _Worlds) -> bool:
        return w.belief[w.map] >= self.config.strong_evidence

    def explore_action(self, w: _Worlds, memory: EpisodicMemory) -> Action:
        if self._strong(w):
            a = super().explore_action(w, memory)
            if self._allowed(a):
                return a
        digest = w.obs.digest if w.obs is not None else ""
        for a in self.preference:
            if not memory_lookup(memory, digest, a):
                return a
        return self.preference[0]

    def verify_action(self, w: _Worlds) -> Action | None:
        cands = [a for a in candidate_actions(w.state) if self._allowed(a)]
        return _falsification_action(w, cands)

    def plan(self, w: _Worlds) -> list[Action] | None:
        plan = super().plan(w)
        if self._strong(w) and plan is not None and all(self._allowed(a) for a in plan):
            return plan
        return [self.preference[0]]


def _falsification_action(w: _Worlds, candidates: Iterable[Action]) -> Action | None:
    """Action most likely to tell the MAP hypothesis apart from the rest."""
    h_map = w.map
    rest = 1.0 - w.belief[h_map]
    if rest <= 0:
        return None
    best, best_score = None, GAIN_TOL
    for a in sorted(candidates, key=Action.sort_key):
        pred = w.predict(a)
        o_map = pred[h_map][0]
        score = math.fsum(w.belief[h] for h, (o, _) in pred.items() if h != h_map and o != o_map) / rest
        if score > best_score:
            best, best_score = a, score
    return best


def make_source(config: AgentConfig):
    return OracleBayes(config) if config.hypothesis_source == "oracle-bayes" else ScriptedBias(config)


# ---------------------------------------------------------------------------
# episode loop


def run_episode(env_state: EpisodeState, config: AgentConfig, *, H: int | None = None, label: str = "aera") -> EpisodeTrace:
    """Run one episode from a freshly reset ``env_state``."""
    config.validate()
    if env_state.action_count != 0 or env_state.terminal:
        raise SpecValidationError("run_episode needs a freshly reset environment state")
    spec = env_state.spec
    H = oracle_baseline(spec) if H is None else H
    b_max = budget(H, config.budget_mode)
    source = make_source(config)
    w = _Worlds(env_state)
    memory = EpisodicMemory()
    trace = EpisodeTrace(
        env_id=spec.name,
        seed=env_state.seed,
        config_digest=config.digest,
        initial_entropy=w.entropy,
        budget=b_max,
        agent=label,
    )
    prior = w.belief
    cap = config.action_cap

    def emit(phase: str, action: Action, pred=None) -> Observation:
        before = w.entropy
        pre_digest = w.obs.digest if w.obs is not None else ""
        obs = w.act(action, pred)
        memory.record(pre_digest, action)
        if action.kind == CELL_SELECT and isinstance(source, ScriptedBias):
            source.seen_select = True
        trace.steps.append(StepRecord(phase, action.label, obs.digest, before, w.entropy))
        return obs

    def event(kind: str, **info) -> None:
        trace.events.append({"kind": kind, "at": trace.action_count, **info})

    def done() -> bool:
        return w.state.terminal or trace.action_count >= cap

    explored = 0
    try:
        while not done():
            start = trace.action_count

            # EXPLORE
            while explored < b_max and w.entropy > config.theta and not done():
                if config.action6_first_override and w.belief == prior and explored == 0:
                    action = Action.select(*spec.center)
                else:
                    action = source.explore_action(w, memory)
                emit("explore", action)
                explored += 1
            if done():
                break
            if b_max == 0 and w.entropy > config.theta:
                event("plan-refused", reason="no hypothesis formed")
                break

            # VERIFY
            falsified = False
            for _ in range(config.verify_steps):
                if w.belief.support_size <= 1 or done():
                    break
                action = source.verify_action(w)
                if action is None:
                    break
                h_map, live = w.map, w.belief.support
                emit("verify", action)
                dropped = [h for h in live if w.belief[h] == 0.0]
                if dropped:
                    event("falsified", hypotheses=dropped, map_rejected=h_map in dropped)
                if h_map in dropped:
                    falsified = True
                    break
            if done():
                break
            if falsified:
                continue

            # PLAN
            if source.gated and w.entropy > config.theta:
                # no committed hypothesis and nothing left to explore with
                event("plan-refused", reason="entropy above threshold")
                break
            plan = source.plan(w)
            if not plan:
                event("plan-refused", reason="no winning plan under MAP", hypothesis=w.map)
                break
            h_map = w.map
            surprised = False
            for action in plan:
                if done():
                    break
                if source.gated and w.entropy > config.theta:
                    event("surprise", reason="entropy rose above threshold", hypothesis=h_map)
                    surprised = True
                    break
                pred = w.predict(action)
                expected = pred.get(h_map, (None, None))[0]
                obs = emit("plan", action, pred)
                if obs.digest != expected:
                    event("surprise", reason="observation mismatch", hypothesis=h_map)
                    surprised = True
                    break
            if not surprised and not w.state.terminal:
                event("surprise", reason="plan exhausted without a win", hypothesis=h_map)
            if trace.action_count == start:
                break
    except bl.ContradictionError as exc:
        event("contradiction", detail=str(exc))

    trace.final_status = w.state.status.value
    if w.state.crash_win:
        trace.outcome = "crash-win"
    elif w.state.status is Status.SOLVED:
        trace.outcome = "solved"
    else:
        trace.outcome = "unsolved"
    return trace


def entropy_gate_ok(trace: EpisodeTrace, theta: float) -> bool:
    return all(s.entropy_before <= theta + 1e-12 for s in trace.steps if s.phase == "plan")


def aera_label(config: AgentConfig) -> str:
    tag = config.budget_mode.replace("fixed:", "b")
    extra = "+a6" if config.action6_first_override else ""
    return f"aera-{tag}-{config.hypothesis_source}{extra}"


__all__: Sequence[str] = (
    "AgentConfig",
    "EpisodeTrace",
    "EpisodicMemory",
    "StepRecord",
    "budget",
    "entropy_gate_ok",
    "memory_lookup",
    "phase_order_ok",
    "run_episode",
)
