"""Streaming relevance-matrix computation of per-session attributions.

A session of ``n`` revenue events produces an ``(n + 1) x n`` matrix whose
column ``k`` holds, for every event ``e_j`` of the prefix ``e_0 .. e_k``, how
relevant ``e_j`` is to the revenue of ``e_k``. Row 0 is the platform anchor
and is all ones. Columns are appended one event at a time, so a session can
be fed as it happens and settled when it ends. Settling normalizes each
column, multiplies by the revenue vector and folds the rows onto their
owners. Cost is quadratic in the session length.

For exponential attenuation, :class:`ExponentialStream` gets the same
numbers in linear time from running sums.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .domain import PLATFORM, PlayerId, Session
from .rules import AttenuationFn, RuleKind, RuleSpec


class RelevanceStream:
    """Accumulates the relevance matrix of one session, one event at a time.

    ``relevance`` maps the owners of the prefix (entry event first) and the
    newest event index ``k`` to the column for ``e_k``.
    """

    def __init__(self, relevance, entry_revenue: float = 0.0):
        self._relevance = relevance
        self.owners: list[PlayerId] = [PLATFORM]
        self.revenues: list[float] = []
        self.columns: list[list[float]] = []
        self.entry_revenue = entry_revenue
        self.closed = False

    def push(self, owner: PlayerId, revenue: float) -> None:
        if self.closed:
            raise RuntimeError("session already finalized")
        self.owners.append(owner)
        self.revenues.append(revenue)
        self.columns.append(self._relevance(self.owners, len(self.owners) - 1))

    def matrix(self) -> np.ndarray:
        n = len(self.columns)
        m = np.zeros((n + 1, n))
        for k, col in enumerate(self.columns):
            m[: len(col), k] = col
        return m

    def finalize(self) -> dict[PlayerId, float]:
        self.closed = True
        credit = normalize_and_credit(self.matrix(), self.revenues, self.owners)
        if self.entry_revenue:
            credit[PLATFORM] = credit.get(PLATFORM, 0.0) + self.entry_revenue
        return credit


def attenuated_relevance(alpha: AttenuationFn):
    cache: list[float] = []

    def column(owners, k):
        if len(cache) < k:
            cache.extend(alpha.table(2 * k)[len(cache):])
        # rows 1..k get alpha(k - j); the anchor is the literal 1
        return [1.0] + [cache[k - j] for j in range(1, k + 1)]

    return column


def first_occurrence_relevance(owners, k):
    """Equal weight for each distinct player of the prefix (truncating-game Shapley)."""
    seen = set()
    col = []
    for p in owners[: k + 1]:
        col.append(0.0 if p in seen else 1.0)
        seen.add(p)
    return col


def dropping_game_relevance(owners, k):
    return [1.0] + [0.0] * (k - 1) + [1.0]


def relevance_for(rule: RuleSpec):
    if rule.is_attenuated:
        return attenuated_relevance(rule.attenuation)
    if rule.kind is RuleKind.EVENT_SHAPLEY:
        return lambda owners, k: [1.0] * (k + 1)
    if rule.kind is RuleKind.SHAPLEY_DD13:
        return dropping_game_relevance
    return first_occurrence_relevance


def build_relevance_matrix(s: Session, alpha: AttenuationFn) -> np.ndarray:
    stream = RelevanceStream(attenuated_relevance(alpha))
    for e in s.events[1:]:
        stream.push(e.owner, e.revenue)
    return stream.matrix()


def normalize_and_credit(m, revenues, owners) -> dict[PlayerId, float]:
    """Column-normalize ``m``, weight by ``revenues`` and sum rows per owner."""
    m = np.asarray(m, dtype=float)
    revenues = np.asarray(revenues, dtype=float)
    if m.shape != (len(owners), len(revenues)):
        raise ValueError(f"matrix shape {m.shape} does not match {len(owners)} owners, {len(revenues)} revenues")
    if owners and owners[0] != PLATFORM:
        raise ValueError("row 0 must belong to the platform")
    credit: dict[PlayerId, float] = defaultdict(float)
    if m.shape[1] == 0:
        return dict(credit)
    col_sums = m.sum(axis=0)
    if not np.all(col_sums > 0):
        raise ArithmeticError("relevance column with zero sum; the platform anchor is missing")
    row_credit = (m / col_sums) @ revenues
    for owner, value in zip(owners, row_credit.tolist()):
        credit[owner] += value
    return dict(credit)


def attribute_session_matrix(s: Session, rule: RuleSpec) -> dict[PlayerId, float]:
    stream = RelevanceStream(relevance_for(rule), entry_revenue=s.events[0].revenue)
    for e in s.events[1:]:
        stream.push(e.owner, e.revenue)
    return {p: v for p, v in sorted(stream.finalize().items()) if v != 0.0}


class ExponentialStream:
    """Linear-time settlement for ``alpha(d) = theta ** d``.

    Column ``k`` sums to ``1 + T_k`` with ``T_k = theta * T_{k-1} + 1``. The
    credit of event ``e_l`` is ``sum_{k >= l} r_k theta^(k-l) / (1 + T_k)``,
    computed backwards once the session ends.
    """

    def __init__(self, theta: float, entry_revenue: float = 0.0):
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {theta}")
        self.theta = theta
        self.owners: list[PlayerId] = []
        self.scaled: list[float] = []
        self._tail = 0.0
        self.entry_revenue = entry_revenue

    def push(self, owner: PlayerId, revenue: float) -> None:
        self._tail = self.theta * self._tail + 1.0
        self.owners.append(owner)
        self.scaled.append(revenue / (1.0 + self._tail))

    def finalize(self) -> dict[PlayerId, float]:
        credit: dict[PlayerId, float] = defaultdict(float)
        credit[PLATFORM] = self.entry_revenue + sum(self.scaled)
        carry = 0.0
        for owner, x in zip(reversed(self.owners), reversed(self.scaled)):
            carry = x + self.theta * carry
            credit[owner] += carry
        return dict(credit)


def _incremental_theta(rule: RuleSpec) -> float:
    if rule.kind is RuleKind.EXP_THETA:
        return rule.theta
    if rule.kind is RuleKind.SHAPLEY_DD13:
        return 0.0
    if rule.kind is RuleKind.EVENT_SHAPLEY:
        return 1.0
    raise ValueError(f"the incremental engine only handles exponential rules, not {rule.name}")


def attribute_session_incremental(s: Session, rule: RuleSpec) -> dict[PlayerId, float]:
    stream = ExponentialStream(_incremental_theta(rule), entry_revenue=s.events[0].revenue)
    for e in s.events[1:]:
        stream.push(e.owner, e.revenue)
    return {p: v for p, v in sorted(stream.finalize().items()) if v != 0.0}
