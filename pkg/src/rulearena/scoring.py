"""Action-efficiency scoring, Speed/Depth frontiers and the toy-environment
analysis.

All functions are pure.  Depth is measured in nats; Speed in reciprocal
actions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import SpecValidationError, UndefinedMetricError

CAP_RATIO = 1.15
MAX_LEVEL_SCORE = CAP_RATIO**2
LN2 = math.log(2.0)

# Two-tailed 95% critical values of Student's t (0.975 quantile), df = 1..29.
T_975 = (
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045,
)  # fmt: skip


@dataclass(frozen=True)
class LevelResult:
    H: float
    A: float | None
    solved: bool
    crash_win: bool = False
    game: str = ""

    def __post_init__(self) -> None:
        if self.H < 1:
            raise SpecValidationError("H must be >= 1")
        if self.A is not None and self.A < 1:
            raise SpecValidationError("A must be >= 1 when present")
        if self.solved and self.A is None:
            raise SpecValidationError("a solved level needs an action count")

    @property
    def score(self) -> float:
        if self.crash_win:
            raise UndefinedMetricError("RHAE is undefined for crash-wins")
        return rhae_level(self.H, self.A) if self.solved else 0.0


def rhae_level(H: float, A: float) -> float:
    """min(H/A, 1.15)**2."""
    if H < 1 or A < 1:
        raise SpecValidationError("rhae_level requires H >= 1 and A >= 1")
    return min(H / A, CAP_RATIO) ** 2


def rhae_aggregate(levels: Iterable[LevelResult]) -> float:
    """Mean level score; unsolved levels score 0 and crash-wins are dropped."""
    kept = [lv for lv in levels if not lv.crash_win]
    if not kept:
        raise UndefinedMetricError("RHAE is undefined: no levels left after excluding crash-wins")
    return math.fsum(lv.score for lv in kept) / len(kept)


# ---------------------------------------------------------------------------
# Speed / Depth


@dataclass(frozen=True)
class FrontierPoint:
    speed: float
    depth: float
    label: str = ""
    per_episode: bool = False
    stats: dict = field(default_factory=dict, compare=False)


def _episode_actions(t, cap: int) -> int:
    if t.terminated:
        return max(int(t.action_count), 1)
    return cap


def speed_depth(traces: Sequence, *, cap: int = 200, per_episode: bool = False, label: str = "") -> FrontierPoint:
    """Speed = mean of 1/A; Depth = mean explore-phase entropy drop per
    explore action (0 when there were none).

    ``traces`` may be :class:`~rulearena.agent.EpisodeTrace` objects or any
    objects exposing ``action_count``, ``terminated``, ``explore_actions``
    and ``explore_entropy_drop``.  Episodes cut off without reaching a
    terminal status count as ``cap`` actions.  ``per_episode=True`` switches
    Depth to the total drop per episode.
    """
    if not traces:
        raise SpecValidationError("speed_depth needs at least one trace")
    actions = np.array([_episode_actions(t, cap) for t in traces], dtype=float)
    depths = []
    for t in traces:
        a, drop = t.explore_actions, t.explore_entropy_drop
        if per_episode:
            depths.append(drop)
        else:
            depths.append(drop / a if a > 0 else 0.0)
    depth = float(np.mean(depths))
    return FrontierPoint(
        speed=float(np.mean(1.0 / actions)),
        depth=max(depth, 0.0),
        label=label,
        per_episode=per_episode,
        stats={
            "n": len(traces),
            "mean_actions": float(actions.mean()),
            "sem_actions": float(actions.std(ddof=1) / math.sqrt(len(actions))) if len(actions) > 1 else 0.0,
        },
    )


def dominates(a: FrontierPoint, b: FrontierPoint) -> bool:
    return a.speed >= b.speed and a.depth >= b.depth and (a.speed > b.speed or a.depth > b.depth)


def pareto_frontier(points: Sequence[FrontierPoint]) -> list[FrontierPoint]:
    """Non-dominated points, ordered by speed descending (stable)."""
    keep = [p for p in points if not any(dominates(q, p) for q in points)]
    return sorted(keep, key=lambda p: -p.speed)


# ---------------------------------------------------------------------------
# analytic toy-environment curves


@dataclass(frozen=True)
class EstarCurve:
    """A(D) = c0 − c1·D and S(D) = 1/A(D) on D ∈ [0, d_max]."""

    c0: float
    c1: float
    d_max: float = LN2
    k: float | None = None
    M: float | None = None

    def actions(self, D: float) -> float:
        return self.c0 - self.c1 * D

    def speed(self, D: float) -> float:
        return 1.0 / self.actions(D)

    def sample(self, n: int = 101) -> list[tuple[float, float]]:
        ds = np.linspace(0.0, self.d_max, n)
        return [(float(d), self.speed(float(d))) for d in ds]


def estar_curve(k: float, M: float) -> EstarCurve:
    if not M > k + 2:
        raise SpecValidationError(f"estar_curve requires M > k + 2 (k={k}, M={M})")
    c0 = (k + M) / 2.0
    c1 = (M - k - 2) / (2.0 * LN2)
    return EstarCurve(c0=c0, c1=c1, d_max=LN2, k=k, M=M)


def estar_A_of_p(curve: EstarCurve, p: float) -> float:
    """Expected actions of the explore-with-probability-p policy."""
    if not 0.0 <= p <= 1.0:
        raise SpecValidationError(f"p must lie in [0, 1], got {p}")
    k = curve.k
    return p * (1 + k - (k + curve.M) / 2.0) + (k + curve.M) / 2.0


def estar_S_of_D(curve: EstarCurve, D: float) -> float:
    if not -1e-15 <= D <= curve.d_max + 1e-15:
        raise SpecValidationError(f"D must lie in [0, {curve.d_max}], got {D}")
    return curve.speed(D)


@dataclass(frozen=True)
class Certificate:
    convex: bool
    min_second_difference: float

    def __bool__(self) -> bool:
        return self.convex


def convexity_certificate(samples: Sequence[tuple[float, float]], *, rtol: float = 1e-9) -> Certificate:
    """Strict convexity check from central second differences.

    Samples must be uniformly spaced in D.  A second difference counts as
    positive only above a round-off floor scaled to the sample magnitudes,
    so an exactly affine curve is not certified.
    """
    if len(samples) < 3:
        raise SpecValidationError("need at least 3 samples")
    d = np.array([s[0] for s in samples], dtype=float)
    s = np.array([s[1] for s in samples], dtype=float)
    steps = np.diff(d)
    if np.any(steps <= 0):
        raise SpecValidationError("D must be strictly increasing")
    if np.max(np.abs(steps - steps.mean())) > rtol * max(abs(steps.mean()), 1e-300):
        raise SpecValidationError("samples must be uniformly spaced in D")
    second = s[:-2] - 2 * s[1:-1] + s[2:]
    floor = 64 * np.finfo(float).eps * float(np.max(np.abs(s)))
    m = float(second.min())
    if abs(m) <= floor:
        m = 0.0
    return Certificate(convex=bool(np.all(second > floor)), min_second_difference=m)


def uis_curve(delta_h: float, alpha: float, beta: float, k: float, M: float, *, d_max: float | None = None) -> EstarCurve:
    """Affine action curve of a uniform-information-structure environment.

    A(D) = (1/Δh + β(k − M))·D + (M + α(k − M)).  The domain defaults to the
    depth at which the correctness probability α + βD reaches 1.
    """
    if delta_h <= 0:
        raise SpecValidationError("delta_h must be positive")
    if alpha < 0 or beta < 0 or alpha > 1:
        raise SpecValidationError("require 0 <= alpha <= 1 and beta >= 0")
    slope = 1.0 / delta_h - beta * (M - k)
    if not slope < 0:
        raise SpecValidationError(f"require 1/delta_h - beta*(M - k) < 0 (got {slope!r})")
    c0 = M + alpha * (k - M)
    c1 = -slope
    if d_max is None:
        d_max = (1.0 - alpha) / beta
    if c0 <= 0 or c0 - c1 * d_max <= 0:
        raise SpecValidationError("A(D) must stay positive on the domain")
    return EstarCurve(c0=c0, c1=c1, d_max=d_max, k=k, M=M)


@dataclass(frozen=True)
class TaylorCheck:
    exact_loss: float
    approx_loss: float
    relative_error: float


def taylor_loss_check(curve: EstarCurve, epsilon: float) -> TaylorCheck:
    """Exact RHAE loss at p = 1 − ε against its first-order expansion."""
    if not 0.0 <= epsilon <= 0.01:
        raise SpecValidationError("epsilon must lie in [0, 0.01]")
    a_star = 1 + curve.k
    exact = 1.0 - (a_star / estar_A_of_p(curve, 1.0 - epsilon)) ** 2
    approx = 2.0 * curve.c1 * (epsilon * LN2) / a_star
    rel = abs(exact - approx) / abs(exact) if exact != 0 else 0.0
    return TaylorCheck(exact, approx, rel)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class Projection:
    expected_rhae: float
    ci95: tuple[float, float]
    p_hat: float


def binomial_projection(n_public: int, solves: int, n_private: int, per_solve_score: float) -> Projection:
    """Extrapolate a public solve rate to a private set of ``n_private`` games."""
    if not 0 <= solves <= n_public or n_public < 1:
        raise SpecValidationError("require 0 <= solves <= n_public")
    if n_private < 1:
        raise SpecValidationError("n_private must be >= 1")
    if not 0 < per_solve_score <= MAX_LEVEL_SCORE + 1e-12:
        raise SpecValidationError("per_solve_score must lie in (0, 1.3225]")
    p_hat = solves / n_public
    lo, hi = stats.binom.ppf([0.025, 0.975], n_private, p_hat)
    scale = per_solve_score / n_private
    return Projection(p_hat * per_solve_score, (float(lo) * scale, float(hi) * scale), p_hat)


def t_critical(df: int) -> float:
    if df < 1:
        raise SpecValidationError("df must be >= 1")
    if df <= len(T_975):
        return T_975[df - 1]
    return float(stats.t.ppf(0.975, df))


@dataclass(frozen=True)
class RunStats:
    mean: float
    std: float
    ci95: tuple[float, float]
    n: int


def multi_run_ci(values: Sequence[float]) -> RunStats:
    """Mean, sample std (n−1) and the t-based 95% interval."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise SpecValidationError("multi_run_ci needs at least two values")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    half = t_critical(x.size - 1) * std / math.sqrt(x.size)
    return RunStats(mean, std, (mean - half, mean + half), int(x.size))


# ---------------------------------------------------------------------------
# report emission

LEVEL_COLUMNS = ("game", "H", "A", "solved", "crash_win", "score")
FRONTIER_COLUMNS = ("policy", "speed", "depth", "on_frontier")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


def level_csv(levels: Sequence[LevelResult]) -> str:
    """Per-level table; crash-win rows carry an empty score."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEVEL_COLUMNS)
    for lv in levels:
        score = None if lv.crash_win else lv.score
        w.writerow([_fmt(v) for v in (lv.game, lv.H, lv.A, lv.solved, lv.crash_win, score)])
    return buf.getvalue()


def frontier_csv(points: Sequence[FrontierPoint], extra: Sequence[str] = ()) -> str:
    front = {id(p) for p in pareto_frontier(points)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((*FRONTIER_COLUMNS, *extra))
    for p in points:
        row = [p.label, p.speed, p.depth, id(p) in front] + [p.stats.get(c) for c in extra]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()
