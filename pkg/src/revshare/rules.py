"""Closed-form revenue attribution rules.

Every rule splits the revenue of each event ``e_k`` (k >= 1) of a session
among the players owning events in the prefix ``e_0 .. e_k``:

``shapley-dd12``
    equal split among the distinct players of the prefix.
``shapley-dd13``
    half to the platform, half to the owner of ``e_k``.
``event-shapley``
    proportional to how many prefix events each player owns, over ``k + 1``.
``alpha`` / ``exp:<theta>``
    event ``e_l`` weighs ``alpha(k - l)``; the platform entry event always
    weighs 1. ``exp:theta`` uses ``alpha(d) = theta ** d`` with ``0 ** 0 = 1``.

Revenue carried by the entry event ``e_0`` goes to the platform in full.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .domain import (
    PLATFORM,
    Allocation,
    PlayerId,
    Session,
    SessionLog,
    TimeWindow,
    window_filter,
)


@dataclass(frozen=True)
class AttenuationFn:
    """Nonincreasing map from event distance to relevance, with value 1 at 0."""

    evaluator: Callable[[int], float] = field(compare=False)
    descriptor: str = "alpha"

    def __call__(self, distance: int) -> float:
        return self.evaluator(distance)

    def table(self, n: int) -> list[float]:
        """Values at distances 0 .. n-1."""
        return [float(self.evaluator(d)) for d in range(n)]

    def check(self, upto: int = 64) -> None:
        values = self.table(upto + 1)
        if values[0] != 1.0:
            raise ValueError(f"{self.descriptor}: attenuation at distance 0 must be 1, got {values[0]}")
        for d in range(1, len(values)):
            if not 0.0 <= values[d] <= values[d - 1]:
                raise ValueError(
                    f"{self.descriptor}: attenuation must be nonincreasing in [0, 1] "
                    f"(distance {d}: {values[d]} after {values[d - 1]})"
                )


def exponential(theta: float) -> AttenuationFn:
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    # float pow already gives 0.0 ** 0 == 1.0
    return AttenuationFn(lambda d: theta ** d, f"exp:{theta:g}")


def tabulated(values: Sequence[float], descriptor: str = "alpha:table") -> AttenuationFn:
    """Attenuation read off a table; distances past its end reuse the last value."""
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError("empty attenuation table")
    last = len(values) - 1
    fn = AttenuationFn(lambda d: values[min(d, last)], descriptor)
    fn.check(len(values))
    return fn


def load_attenuation(path) -> AttenuationFn:
    """Read a tabulated attenuation from a file of numbers (whitespace or comma separated)."""
    text = Path(path).read_text()
    try:
        values = [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return tabulated(values, f"alpha:{path}")


class RuleKind(enum.Enum):
    SHAPLEY_DD12 = "shapley-dd12"
    SHAPLEY_DD13 = "shapley-dd13"
    EVENT_SHAPLEY = "event-shapley"
    ALPHA = "alpha"
    EXP_THETA = "exp"


@dataclass(frozen=True)
class RuleSpec:
    kind: RuleKind
    attenuation: AttenuationFn | None = None
    theta: float | None = None

    def __post_init__(self):
        if self.kind is RuleKind.EXP_THETA:
            if self.theta is None:
                raise ValueError("exp rule needs theta")
            object.__setattr__(self, "attenuation", exponential(self.theta))
        elif self.kind is RuleKind.ALPHA:
            if self.attenuation is None:
                raise ValueError("alpha rule needs an attenuation function")
            self.attenuation.check()

    @classmethod
    def exp(cls, theta: float) -> "RuleSpec":
        return cls(RuleKind.EXP_THETA, theta=float(theta))

    @classmethod
    def alpha(cls, attenuation: AttenuationFn) -> "RuleSpec":
        return cls(RuleKind.ALPHA, attenuation=attenuation)

    @classmethod
    def parse(cls, text: str) -> "RuleSpec":
        """Parse a rule name: shapley-dd12, shapley-dd13, event-shapley, exp:<theta>, alpha:<file>."""
        text = text.strip()
        if text.startswith("exp:"):
            try:
                theta = float(text[4:])
            except ValueError:
                raise ValueError(f"bad theta in {text!r}") from None
            return cls.exp(theta)
        if text.startswith("alpha:"):
            return cls.alpha(load_attenuation(text[6:]))
        for kind in (RuleKind.SHAPLEY_DD12, RuleKind.SHAPLEY_DD13, RuleKind.EVENT_SHAPLEY):
            if text == kind.value:
                return cls(kind)
        raise ValueError(f"unknown rule {text!r}")

    @property
    def is_attenuated(self) -> bool:
        return self.kind in (RuleKind.ALPHA, RuleKind.EXP_THETA)

    @property
    def name(self) -> str:
        if self.kind is RuleKind.EXP_THETA:
            return f"exp:{self.theta:g}"
        if self.kind is RuleKind.ALPHA:
            return self.attenuation.descriptor
        return self.kind.value

    def __str__(self) -> str:
        return self.name


SHAPLEY_DD12 = RuleSpec(RuleKind.SHAPLEY_DD12)
SHAPLEY_DD13 = RuleSpec(RuleKind.SHAPLEY_DD13)
EVENT_SHAPLEY = RuleSpec(RuleKind.EVENT_SHAPLEY)


def _shapley_dd12(s: Session):
    prefix = [PLATFORM]
    for e in s.events[1:]:
        if e.owner not in prefix:
            prefix.append(e.owner)
        share = e.revenue / len(prefix)
        yield {p: share for p in prefix}


def _shapley_dd13(s: Session):
    for e in s.events[1:]:
        yield {PLATFORM: e.revenue / 2, e.owner: e.revenue / 2}


def _event_shapley(s: Session):
    counts: dict[PlayerId, int] = {PLATFORM: 1}
    for k, e in enumerate(s.events[1:], start=1):
        counts[e.owner] = counts.get(e.owner, 0) + 1
        yield {p: e.revenue * c / (k + 1) for p, c in counts.items()}


def _attenuated(s: Session, alpha: AttenuationFn):
    owners = s.owners
    relevance = alpha.table(s.n_events)
    for k in range(1, s.n_events + 1):
        r = s.events[k].revenue
        # platform anchor weighs exactly 1 whatever alpha(k) is
        weights: dict[PlayerId, float] = defaultdict(float)
        weights[PLATFORM] = 1.0
        for l in range(1, k + 1):
            weights[owners[l]] += relevance[k - l]
        total = math.fsum(weights.values())
        yield {p: r * wgt / total for p, wgt in weights.items()}


def event_credits(s: Session, rule: RuleSpec) -> list[dict[PlayerId, float]]:
    """Split of each event's revenue, indexed by event position (entry event first)."""
    if rule.kind is RuleKind.SHAPLEY_DD12:
        splits = _shapley_dd12(s)
    elif rule.kind is RuleKind.SHAPLEY_DD13:
        splits = _shapley_dd13(s)
    elif rule.kind is RuleKind.EVENT_SHAPLEY:
        splits = _event_shapley(s)
    else:
        splits = _attenuated(s, rule.attenuation)
    return [{PLATFORM: s.events[0].revenue}, *splits]


def attribute_session(s: Session, rule: RuleSpec) -> dict[PlayerId, float]:
    """Credit each player receives from one session; zero credits are omitted."""
    credit: dict[PlayerId, float] = defaultdict(float)
    for split in event_credits(s, rule):
        for p, v in split.items():
            credit[p] += v
    return {p: v for p, v in sorted(credit.items()) if v != 0.0}


def _session_function(rule: RuleSpec, engine: str) -> Callable[[Session], dict[PlayerId, float]]:
    if engine == "rules":
        return lambda s: attribute_session(s, rule)
    from . import engine as _engine

    if engine == "matrix":
        return lambda s: _engine.attribute_session_matrix(s, rule)
    if engine == "incremental":
        return lambda s: _engine.attribute_session_incremental(s, rule)
    raise ValueError(f"unknown engine {engine!r}")


def _sum_credits(parts: Iterable[dict[PlayerId, float]]) -> dict[PlayerId, list[float]]:
    terms: dict[PlayerId, list[float]] = defaultdict(list)
    for part in parts:
        for p, v in part.items():
            terms[p].append(v)
    return terms


def _attribute_chunk(sessions, rule, engine):
    fn = _session_function(rule, engine)
    return [fn(s) for s in sessions]


def attribute_window(
    log: SessionLog | Iterable[Session],
    w: TimeWindow,
    rule: RuleSpec,
    engine: str = "rules",
    n_jobs: int = 1,
    players: Iterable[PlayerId] | None = None,
) -> Allocation:
    """Sum of the per-session attributions over the sessions ending in ``w``.

    Every player of ``players`` (default: the log's player set) appears in
    the result, with 0 when it earns nothing.
    """
    if not isinstance(log, SessionLog):
        log = SessionLog(tuple(log))
    sessions = window_filter(log, w)
    if n_jobs != 1 and len(sessions) > 1:
        from joblib import Parallel, delayed, effective_n_jobs

        n = min(effective_n_jobs(n_jobs), len(sessions))
        chunks = [sessions[i::n] for i in range(n)]
        results = Parallel(n_jobs=n)(delayed(_attribute_chunk)(c, rule, engine) for c in chunks)
        parts = [part for chunk in results for part in chunk]
    else:
        parts = _attribute_chunk(sessions, rule, engine)
    terms = _sum_credits(parts)
    amounts = {p: 0.0 for p in (players if players is not None else log.players())}
    for p, vals in terms.items():
        amounts[p] = math.fsum(vals)
    return Allocation(amounts, w)
