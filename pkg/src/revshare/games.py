"""Characteristic functions of the two discrete event dynamic games.

Both games give zero to any coalition without the platform. With the
platform present:

* ``DD12`` (truncating game): a session is cut at the first event whose owner
  is outside the coalition; the coalition earns the revenue of the surviving
  prefix.
* ``DD13`` (dropping game): only the events of outsiders are removed; the
  coalition earns the revenue of every event it owns.
"""

from __future__ import annotations

import enum
import math
from typing import AbstractSet, Iterable

from .domain import PLATFORM, PlayerId, Session, SessionLog, TimeWindow, window_filter


class GameKind(enum.Enum):
    DD12 = "dd12"
    DD13 = "dd13"


Coalition = AbstractSet[PlayerId]


def session_value(s: Session, coalition: Coalition, kind: GameKind) -> float:
    if PLATFORM not in coalition:
        return 0.0
    if kind is GameKind.DD12:
        value = []
        for e in s.events:
            if e.owner not in coalition:
                break
            value.append(e.revenue)
        return math.fsum(value)
    return math.fsum(e.revenue for e in s.events if e.owner in coalition)


def window_value(
    log: SessionLog | Iterable[Session], w: TimeWindow, coalition: Coalition, kind: GameKind
) -> float:
    if not coalition:
        return 0.0
    return math.fsum(session_value(s, coalition, kind) for s in window_filter(log, w))

