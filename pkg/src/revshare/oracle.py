"""Exhaustive game-theoretic checks for small player sets.

Everything here enumerates coalitions of the induced game, so the player
count is capped at :data:`MAX_PLAYERS`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable

from .domain import (
    PLATFORM,
    Allocation,
    PlayerId,
    PlayerKind,
    Session,
    SessionLog,
    TimeWindow,
    channel,
    total_revenue,
    window_filter,
)
from .games import GameKind, window_value
from .rules import RuleKind, RuleSpec, attribute_session, attribute_window

MAX_PLAYERS = 12
TOL = 1e-9


class PlayerCapError(ValueError):
    pass


def _check_cap(players) -> None:
    if len(players) > MAX_PLAYERS:
        raise PlayerCapError(
            f"{len(players)} players exceed the exhaustive-check cap of {MAX_PLAYERS}"
        )


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=TOL)


class InducedGame:
    """All coalition values of the game restricted to one window, by bitmask."""

    def __init__(self, log, w: TimeWindow, kind: GameKind, players: list[PlayerId] | None = None):
        if not isinstance(log, SessionLog):
            log = SessionLog(tuple(log))
        self.players = list(players) if players is not None else log.players()
        _check_cap(self.players)
        self.kind = kind
        self.values = [
            window_value(log, w, self.coalition(mask), kind) for mask in range(1 << self.n)
        ]

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def grand(self) -> int:
        return (1 << self.n) - 1

    def coalition(self, mask: int) -> frozenset[PlayerId]:
        return frozenset(p for j, p in enumerate(self.players) if mask >> j & 1)

    def shapley(self) -> dict[PlayerId, float]:
        n = self.n
        weight = [math.factorial(f) * math.factorial(n - f - 1) / math.factorial(n) for f in range(n)]
        result = {}
        for i, p in enumerate(self.players):
            bit = 1 << i
            terms = [
                weight[bin(mask).count("1")] * (self.values[mask | bit] - self.values[mask])
                for mask in range(1 << n)
                if not mask & bit
            ]
            result[p] = math.fsum(terms)
        return result


def brute_force_shapley(
    log, w: TimeWindow, kind: GameKind, players: list[PlayerId] | None = None
) -> Allocation:
    """Shapley value of the windowed game by summing marginal contributions over all coalitions."""
    game = InducedGame(log, w, kind, players)
    return Allocation(game.shapley(), w)


@dataclass
class CoreReport:
    stable: bool
    efficient: bool
    violated: list[tuple[frozenset[PlayerId], float]] = field(default_factory=list)


def core_check(log, w: TimeWindow, kind: GameKind, x: Allocation, game: InducedGame | None = None) -> CoreReport:
    """Test ``x(F) >= V(F)`` for every proper coalition and ``x(N) = V(N)``.

    ``violated`` lists each blocking coalition with its (negative) slack
    ``x(F) - V(F)``.
    """
    if game is None:
        game = InducedGame(log, w, kind)
    if set(x.amounts) != set(game.players):
        raise ValueError("allocation players differ from the game's player set")
    payoff = [x[p] for p in game.players]
    violated = []
    for mask in range(game.grand):
        xf = math.fsum(v for j, v in enumerate(payoff) if mask >> j & 1)
        slack = xf - game.values[mask]
        if slack < -TOL:
            violated.append((game.coalition(mask), slack))
    efficient = _close(math.fsum(payoff), game.values[game.grand])
    return CoreReport(stable=efficient and not violated, efficient=efficient, violated=violated)


def symmetric_pairs(game: InducedGame) -> list[tuple[PlayerId, PlayerId]]:
    pairs = []
    for i in range(game.n):
        for j in range(i + 1, game.n):
            bi, bj = 1 << i, 1 << j
            if all(
                _close(game.values[mask | bi], game.values[mask | bj])
                for mask in range(1 << game.n)
                if not mask & (bi | bj)
            ):
                pairs.append((game.players[i], game.players[j]))
    return pairs


# axiom suite

PASS, FAIL, EXPECTED_FAIL, NOT_APPLICABLE = "pass", "fail", "expected-fail", "n/a"
AXIOMS = ("EFF", "NP", "MON", "STA", "TS", "SS", "NM", "SYM")


@dataclass
class AxiomResult:
    status: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status != FAIL


@dataclass
class AxiomReport:
    rule: str
    allocation: Allocation
    results: dict[str, AxiomResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results.values())


def _same_allocation(a: Allocation, b: Allocation, players=None) -> float:
    """Largest absolute difference over ``players`` (default: both supports)."""
    keys = players if players is not None else set(a.amounts) | set(b.amounts)
    return max((abs(a[p] - b[p]) for p in keys), default=0.0)


def _game_kind(rule: RuleSpec) -> GameKind | None:
    return {RuleKind.SHAPLEY_DD12: GameKind.DD12, RuleKind.SHAPLEY_DD13: GameKind.DD13}.get(rule.kind)


def _check_eff(log, w, rule, alloc):
    total = total_revenue(window_filter(log, w))
    return AxiomResult(PASS if _close(alloc.total, total) else FAIL, f"sum={alloc.total:.9f} revenue={total:.9f}")


def _check_np(log, w, rule, alloc):
    name = "__null__"
    while channel(name) in alloc.amounts:
        name += "_"
    phantom = channel(name)
    players = log.players() + [phantom]
    extended = attribute_window(log, w, rule, players=players)
    drift = _same_allocation(alloc, extended, log.players())
    ok = extended[phantom] == 0.0 and drift <= TOL
    detail = f"null player credit={extended[phantom]}"
    kind = _game_kind(rule)
    if kind is not None and len(players) <= MAX_PLAYERS:
        oracle = brute_force_shapley(log, w, kind, players)
        ok = ok and abs(oracle[phantom]) <= TOL
        detail += f", oracle credit={oracle[phantom]:.3g}"
    return AxiomResult(PASS if ok else FAIL, detail)


def _bump(log: SessionLog, sid: str, k: int, amount: float) -> SessionLog:
    sessions = []
    for s in log:
        if s.id == sid:
            events = list(s.events)
            events[k] = replace(events[k], revenue=events[k].revenue + amount)
            s = replace(s, events=tuple(events))
        sessions.append(s)
    return SessionLog(tuple(sessions))


def _check_mon(log, w, rule, alloc, rng, samples=20):
    sites = [(s.id, k) for s in window_filter(log, w) for k in range(len(s.events))]
    if len(sites) > samples:
        sites = rng.sample(sites, samples)
    for sid, k in sites:
        bumped = attribute_window(_bump(log, sid, k, 1.0), w, rule)
        for p in alloc.amounts:
            if bumped[p] < alloc[p] - TOL:
                return AxiomResult(FAIL, f"raising {sid}[{k}] lowered {p} from {alloc[p]} to {bumped[p]}")
    return AxiomResult(PASS, f"{len(sites)} revenue increases checked")


def _check_sta(log, w, rule, alloc, games):
    kind = _game_kind(rule)
    if kind is None:
        return AxiomResult(NOT_APPLICABLE, "no matching game for this rule")
    report = core_check(log, w, kind, alloc, games[kind])
    if report.stable:
        return AxiomResult(PASS, f"in the core of {kind.name}")
    worst = min((slack for _, slack in report.violated), default=0.0)
    return AxiomResult(FAIL, f"{len(report.violated)} blocking coalitions, worst slack {worst:.3g}; efficient={report.efficient}")


def _split_points(log, w) -> list[float]:
    ends = sorted({s.end_time for s in window_filter(log, w)})
    points = set(ends)
    for a, b in zip(ends, ends[1:]):
        points.add((a + b) / 2)
    return sorted(t for t in points if w.t1 < t <= w.t2)


def _check_ts(log, w, rule, alloc):
    worst = 0.0
    points = _split_points(log, w)
    for t in points:
        left = attribute_window(log, TimeWindow(w.t1, t), rule, players=alloc.amounts)
        right = attribute_window(log, TimeWindow(t, w.t2), rule, players=alloc.amounts)
        for p in alloc.amounts:
            worst = max(worst, abs(left[p] + right[p] - alloc[p]))
    return AxiomResult(PASS if worst <= TOL else FAIL, f"{len(points)} splits, max gap {worst:.3g}")


def _check_ss(log, w, rule, alloc):
    parts = [attribute_window(SessionLog((s,)), w, rule) for s in window_filter(log, w)]
    worst = max(
        (abs(math.fsum(part[p] for part in parts) - alloc[p]) for p in alloc.amounts), default=0.0
    )
    return AxiomResult(PASS if worst <= TOL else FAIL, f"{len(parts)} sessions, max gap {worst:.3g}")


def merge_channels(log: SessionLog, parts: Iterable[PlayerId], merged: PlayerId) -> SessionLog:
    """Hand every event of ``parts`` to the single channel ``merged``."""
    parts = set(parts)
    sessions = []
    for s in log:
        events = tuple(replace(e, owner=merged) if e.owner in parts else e for e in s.events)
        sessions.append(replace(s, events=events))
    return SessionLog(tuple(sessions))


def nm_gap(log, w, rule, parts, merged) -> float:
    """How far a merge moves anyone's payout; 0 means the rule is immune to it."""
    before = attribute_window(log, w, rule)
    after = attribute_window(merge_channels(log, parts, merged), w, rule)
    gap = abs(after[merged] - math.fsum(before[p] for p in parts))
    others = [p for p in before.amounts if p not in parts and p != merged]
    return max([gap] + [abs(after[p] - before[p]) for p in others])


def _check_nm(log, w, rule, alloc, rng, scenarios=5):
    channels = [p for p in log.players() if p.kind is PlayerKind.CHANNEL]
    if len(channels) < 2:
        return AxiomResult(PASS, "fewer than two channels; nothing to merge")
    worst = 0.0
    for _ in range(scenarios):
        parts = rng.sample(channels, rng.randint(2, len(channels)))
        merged = rng.choice(parts)
        worst = max(worst, nm_gap(log, w, rule, parts, merged))
    if worst <= TOL:
        return AxiomResult(PASS, f"{scenarios} random merges")
    if rule.kind is RuleKind.SHAPLEY_DD12:
        return AxiomResult(EXPECTED_FAIL, f"merging shifts payouts by up to {worst:.6g}")
    return AxiomResult(FAIL, f"merging shifts payouts by up to {worst:.6g}")


def _check_sym(log, w, rule, alloc, games):
    kind = _game_kind(rule)
    if kind is None:
        return AxiomResult(NOT_APPLICABLE, "rule weighs repeated events; symmetry not claimed")
    pairs = symmetric_pairs(games[kind])
    bad = [(a, b) for a, b in pairs if abs(alloc[a] - alloc[b]) > TOL]
    if bad:
        return AxiomResult(FAIL, f"unequal payoffs for symmetric pairs {bad}")
    return AxiomResult(PASS, f"{len(pairs)} symmetric pairs")


def axiom_suite(log, w: TimeWindow, rule: RuleSpec, seed: int = 0) -> AxiomReport:
    """Run every fairness property as a concrete check on one log and window.

    MON is checked as monotonicity under single-event revenue increases;
    STA and SYM apply to the two Shapley rules only.
    """
    if not isinstance(log, SessionLog):
        log = SessionLog(tuple(log))
    rng = random.Random(seed)
    alloc = attribute_window(log, w, rule)
    games = {}
    kind = _game_kind(rule)
    if kind is not None:
        games[kind] = InducedGame(log, w, kind)
    results = {
        "EFF": _check_eff(log, w, rule, alloc),
        "NP": _check_np(log, w, rule, alloc),
        "MON": _check_mon(log, w, rule, alloc, rng),
        "STA": _check_sta(log, w, rule, alloc, games),
        "TS": _check_ts(log, w, rule, alloc),
        "SS": _check_ss(log, w, rule, alloc),
        "NM": _check_nm(log, w, rule, alloc, rng),
        "SYM": _check_sym(log, w, rule, alloc, games),
    }
    return AxiomReport(rule.name, alloc, results)


def oracle_agreement(log, w: TimeWindow) -> dict[str, float]:
    """Largest gap between brute-force and closed-form Shapley, per game."""
    gaps = {}
    for kind, rule in ((GameKind.DD12, RuleKind.SHAPLEY_DD12), (GameKind.DD13, RuleKind.SHAPLEY_DD13)):
        oracle = brute_force_shapley(log, w, kind)
        closed = attribute_window(log, w, RuleSpec(rule))
        gaps[kind.name] = _same_allocation(oracle, closed)
    return gaps
