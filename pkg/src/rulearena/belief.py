"""Exact Bayesian belief over a finite hypothesis family.

Beliefs are immutable.  Hypotheses that lose all mass stay in the map as
explicit zeros (so callers can report what was eliminated) until
:func:`compact` drops them.  Entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping

from .errors import ContradictionError, SpecValidationError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class Belief:
    weights: tuple[tuple[str, float], ...]

    @classmethod
    def from_mapping(cls, weights: Mapping[str, float]) -> "Belief":
        items = tuple((str(h), float(w)) for h, w in weights.items())
        if any(w < 0 or not math.isfinite(w) for _, w in items):
            raise SpecValidationError("belief weights must be finite and nonnegative")
        total = math.fsum(w for _, w in items)
        if abs(total - 1.0) > SUM_TOL:
            raise SpecValidationError(f"belief weights must sum to 1 (got {total!r})")
        return cls(items)

    def as_dict(self) -> dict[str, float]:
        return dict(self.weights)

    def __getitem__(self, h: str) -> float:
        return self.as_dict()[h]

    @property
    def hypotheses(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.weights)

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(h for h, w in self.weights if w > 0)

    @property
    def support_size(self) -> int:
        return len(self.support)

    @property
    def eliminated(self) -> tuple[str, ...]:
        return tuple(h for h, w in self.weights if w == 0)

    def to_records(self) -> list[list]:
        return [[h, w] for h, w in self.weights]


def init_belief(spec) -> Belief:
    """Prior belief declared by an :class:`~rulearena.env.EnvironmentSpec`."""
    return Belief.from_mapping(spec.prior)


def uniform(hypotheses: Iterable[str]) -> Belief:
    hs = list(hypotheses)
    return Belief(tuple((h, 1.0 / len(hs)) for h in hs))


def _normalise(pairs: list[tuple[str, float]]) -> Belief:
    total = math.fsum(w for _, w in pairs)
    if total <= 0.0:
        raise ContradictionError("observation is inconsistent with every hypothesis in the support")
    out = [(h, w / total if w > 0 else 0.0) for h, w in pairs]
    # fold the rounding residue into the largest weight so the sum is exact
    resid = 1.0 - math.fsum(w for _, w in out)
    if resid:
        i = max(range(len(out)), key=lambda j: out[j][1])
        out[i] = (out[i][0], out[i][1] + resid)
    return Belief(tuple(out))


def update(b: Belief, likelihoods: Mapping[str, float]) -> Belief:
    """Posterior ∝ likelihood × prior.  Missing hypotheses get likelihood 0."""
    pairs = []
    for h, w in b.weights:
        lik = float(likelihoods.get(h, 0.0))
        if lik < 0:
            raise SpecValidationError(f"negative likelihood for {h!r}")
        pairs.append((h, w * lik if w > 0 else 0.0))
    return _normalise(pairs)


def eliminate(b: Belief, hypothesis: str) -> Belief:
    return update(b, {h: 0.0 if h == hypothesis else 1.0 for h in b.hypotheses})


def compact(b: Belief) -> Belief:
    return Belief(tuple((h, w) for h, w in b.weights if w > 0))


def entropy(b: Belief | Mapping[str, float]) -> float:
    weights = b.weights if isinstance(b, Belief) else tuple(b.items())
    return 0.0 - math.fsum(w * math.log(w) for _, w in weights if w > 0)  # no -0.0 in traces


def map_hypothesis(b: Belief) -> str:
    """Highest-weight hypothesis; ties go to the earliest declared."""
    best, best_w = None, -1.0
    for h, w in b.weights:
        if w > best_w:
            best, best_w = h, w
    return best  # type: ignore[return-value]


OutcomeModel = Callable[[str, object], Mapping[Hashable, float]] | Mapping[str, Mapping[Hashable, float]]


def outcome_posteriors(b: Belief, action, model: OutcomeModel) -> dict[Hashable, tuple[float, Belief]]:
    """For each possible outcome: its marginal probability and the posterior.

    ``model(h, action)`` returns the outcome distribution under hypothesis
    ``h``.  A mapping ``{h: distribution}`` is also accepted.
    """
    if isinstance(model, Mapping):
        table = model
        model = lambda h, _a: table[h]  # noqa: E731
    joint: dict[Hashable, dict[str, float]] = {}
    for h in b.support:
        for outcome, p in model(h, action).items():
            if p > 0:
                joint.setdefault(outcome, {})[h] = float(p)
    result = {}
    for outcome, lik in joint.items():
        p_o = math.fsum(b[h] * lik[h] for h in lik)
        if p_o == 0.0:  # underflow: the outcome carries no mass
            continue
        result[outcome] = (p_o, update(b, lik))
    return result


def expected_info_gain(b: Belief, action, model: OutcomeModel) -> float:
    """H(b) − Σ_o P(o) H(b | o) for ``action`` under the outcome ``model``
    (same conventions as :func:`outcome_posteriors`)."""
    post = outcome_posteriors(b, action, model)
    expected = math.fsum(p * entropy(pb) for p, pb in post.values())
    return entropy(b) - expected
