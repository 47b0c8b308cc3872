"""Players, events, sessions, time windows and JSONL session-log ingestion."""

from __future__ import annotations

import enum
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Iterator, Mapping

MONEY_QUANTUM = Decimal("0.000001")


class SessionLogError(ValueError):
    """Base error for unreadable or invalid session logs."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class SessionLogSyntaxError(SessionLogError):
    pass


class SessionValidationError(SessionLogError):
    pass


class EntryRevenueWarning(UserWarning):
    """The platform entry event of a session carries revenue."""


class PlayerKind(enum.IntEnum):
    # int values give the reporting order
    PLATFORM = 0
    SEARCH = 1
    RECOMMENDER = 2
    CHANNEL = 3


@dataclass(frozen=True, order=True)
class PlayerId:
    kind: PlayerKind
    channel_name: str = ""

    def __post_init__(self):
        if self.kind is PlayerKind.CHANNEL:
            if not self.channel_name:
                raise ValueError("channel players need a non-empty name")
        elif self.channel_name:
            raise ValueError(f"{self.kind.name.lower()} player cannot carry a channel name")

    @classmethod
    def parse(cls, text: str) -> "PlayerId":
        if text in _SERVICE_CODES:
            return _SERVICE_CODES[text]
        if text.startswith("channel:"):
            return cls(PlayerKind.CHANNEL, text[len("channel:"):])
        raise ValueError(f"unknown owner {text!r}")

    @property
    def is_platform(self) -> bool:
        return self.kind is PlayerKind.PLATFORM

    @property
    def is_platform_side(self) -> bool:
        """True for the three players representing the website itself."""
        return self.kind is not PlayerKind.CHANNEL

    def __str__(self) -> str:
        if self.kind is PlayerKind.CHANNEL:
            return f"channel:{self.channel_name}"
        return _SERVICE_NAMES[self.kind]

    def __repr__(self) -> str:
        return f"PlayerId({str(self)!r})"


PLATFORM = PlayerId(PlayerKind.PLATFORM)
SEARCH = PlayerId(PlayerKind.SEARCH)
RECOMMENDER = PlayerId(PlayerKind.RECOMMENDER)
SERVICES = (PLATFORM, SEARCH, RECOMMENDER)

_SERVICE_NAMES = {
    PlayerKind.PLATFORM: "platform",
    PlayerKind.SEARCH: "search",
    PlayerKind.RECOMMENDER: "recommender",
}
_SERVICE_CODES = {name: PlayerId(kind) for kind, name in _SERVICE_NAMES.items()}


def channel(name: str) -> PlayerId:
    return PlayerId(PlayerKind.CHANNEL, name)


@dataclass(frozen=True)
class Event:
    owner: PlayerId
    revenue: float = 0.0

    def __post_init__(self):
        if not self.revenue >= 0:
            raise SessionValidationError(f"negative revenue {self.revenue} for {self.owner}")


@dataclass(frozen=True)
class Session:
    """One finished visit: the platform entry event followed by the path taken.

    ``n_events`` excludes the entry event, so a session holds ``n_events + 1``
    events in total.
    """

    id: str
    start_time: float
    end_time: float
    events: tuple[Event, ...]
    attractor: PlayerId | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise SessionValidationError(f"session {self.id!r} has no events")
        if not self.events[0].owner.is_platform:
            raise SessionValidationError(f"session {self.id!r}: first event must be platform")
        for k, ev in enumerate(self.events[1:], start=1):
            if ev.owner.is_platform:
                raise SessionValidationError(
                    f"session {self.id!r}: event {k} is owned by the platform; only e0 may be"
                )
        if not (0 <= self.start_time <= self.end_time):
            raise SessionValidationError(
                f"session {self.id!r}: need 0 <= start <= end, got {self.start_time}, {self.end_time}"
            )

    @classmethod
    def from_owners(cls, owners, revenues, id="s", start_time=0.0, end_time=1.0):
        """Build a session from parallel owner/revenue sequences.

        Owners may be PlayerId objects or their string encodings.
        """
        owners = [o if isinstance(o, PlayerId) else PlayerId.parse(o) for o in owners]
        if len(owners) != len(revenues):
            raise ValueError("owners and revenues differ in length")
        events = tuple(Event(o, float(r)) for o, r in zip(owners, revenues))
        return cls(id, float(start_time), float(end_time), events)

    @property
    def n_events(self) -> int:
        return len(self.events) - 1

    @property
    def owners(self) -> tuple[PlayerId, ...]:
        return tuple(e.owner for e in self.events)

    @property
    def revenues(self) -> tuple[float, ...]:
        return tuple(e.revenue for e in self.events)

    @property
    def revenue(self) -> float:
        return math.fsum(self.revenues)

    @property
    def players(self) -> frozenset[PlayerId]:
        return frozenset(self.owners)

    @property
    def videos(self) -> tuple[int, ...]:
        """Indices of the channel-owned events."""
        return tuple(k for k, e in enumerate(self.events) if e.owner.kind is PlayerKind.CHANNEL)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval ]t1, t2]; empty whenever t1 >= t2."""

    t1: float = 0.0
    t2: float = math.inf

    @property
    def is_empty(self) -> bool:
        return self.t1 >= self.t2

    def __contains__(self, t: float) -> bool:
        return self.t1 < t <= self.t2

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        """Parse ``a..b`` (``inf`` allowed) into ]a, b]."""
        try:
            a, b = text.split("..")
            return cls(float(a), float(b))
        except ValueError:
            raise ValueError(f"bad window {text!r}; expected a..b") from None

    def __str__(self) -> str:
        return f"]{self.t1:g}, {self.t2:g}]"


ALL_TIME = TimeWindow(0.0, math.inf)


@dataclass(frozen=True)
class SessionLog:
    sessions: tuple[Session, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        seen = set()
        for s in self.sessions:
            if s.id in seen:
                raise SessionValidationError(f"duplicate session id {s.id!r}")
            seen.add(s.id)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def __len__(self) -> int:
        return len(self.sessions)

    def players(self) -> list[PlayerId]:
        """The player set: the three services plus every channel owning an event."""
        channels = {e.owner for s in self.sessions for e in s.events if e.owner.kind is PlayerKind.CHANNEL}
        return list(SERVICES) + sorted(channels)


@dataclass(frozen=True)
class Allocation:
    amounts: Mapping[PlayerId, float]
    window: TimeWindow = ALL_TIME

    def __post_init__(self):
        object.__setattr__(self, "amounts", dict(sorted(self.amounts.items())))

    def __getitem__(self, player: PlayerId) -> float:
        return self.amounts.get(player, 0.0)

    @property
    def total(self) -> float:
        return math.fsum(self.amounts.values())

    @property
    def platform_side(self) -> float:
        """Aggregate of the three website players (the W row in reports)."""
        return math.fsum(v for p, v in self.amounts.items() if p.is_platform_side)

    def by_name(self) -> dict[str, float]:
        return {str(p): v for p, v in self.amounts.items()}


def _money(value, line: int | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, Decimal)):
        raise SessionValidationError(f"revenue must be a number, got {value!r}", line)
    try:
        d = Decimal(value).quantize(MONEY_QUANTUM)
    except InvalidOperation:
        raise SessionValidationError(f"revenue {value!r} is not a finite amount", line) from None
    if d < 0:
        raise SessionValidationError(f"negative revenue {value}", line)
    return float(d)


def _timestamp(record: dict, key: str, line: int) -> float:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float, Decimal)):
        raise SessionValidationError(f"field {key!r} must be a number", line)
    t = float(value)
    if not math.isfinite(t) or t < 0:
        raise SessionValidationError(f"field {key!r} must be a nonnegative finite number", line)
    return t


def session_from_record(record: dict, line: int | None = None) -> Session:
    if not isinstance(record, dict):
        raise SessionValidationError("record must be a JSON object", line)
    sid = record.get("id")
    if not isinstance(sid, str) or not sid:
        raise SessionValidationError("field 'id' must be a non-empty string", line)
    raw_events = record.get("events")
    if not isinstance(raw_events, list) or not raw_events:
        raise SessionValidationError(f"session {sid!r}: 'events' must be a non-empty array", line)
    events = []
    for ev in raw_events:
        if not isinstance(ev, dict) or "owner" not in ev:
            raise SessionValidationError(f"session {sid!r}: each event needs an 'owner'", line)
        try:
            owner = PlayerId.parse(ev["owner"]) if isinstance(ev["owner"], str) else None
        except ValueError as exc:
            raise SessionValidationError(f"session {sid!r}: {exc}", line) from None
        if owner is None:
            raise SessionValidationError(f"session {sid!r}: owner must be a string", line)
        events.append(Event(owner, _money(ev.get("revenue", 0), line)))
    attractor = record.get("attractor")
    try:
        attractor = PlayerId.parse(attractor) if attractor is not None else None
        session = Session(
            sid,
            _timestamp(record, "start", line),
            _timestamp(record, "end", line),
            tuple(events),
            attractor,
        )
    except SessionLogError as exc:
        raise type(exc)(exc.message, line) from None
    except ValueError as exc:
        raise SessionValidationError(str(exc), line) from None
    if session.events[0].revenue > 0:
        warnings.warn(
            f"session {sid!r}: entry event carries revenue {session.events[0].revenue}; "
            "it is credited to the platform in full",
            EntryRevenueWarning,
            stacklevel=2,
        )
    return session


def iter_session_records(stream: IO) -> Iterator[tuple[int, dict]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            yield lineno, json.loads(raw, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise SessionLogSyntaxError(f"malformed JSON ({exc.msg})", lineno) from None


def parse_session_log(stream: IO | bytes | str, format: str = "jsonl") -> SessionLog:
    """Read a JSON Lines session log, one session object per line.

    Raises SessionLogSyntaxError or SessionValidationError carrying the
    1-based line number of the offending record.
    """
    if format.lower() != "jsonl":
        raise ValueError(f"unsupported log format {format!r}")
    if isinstance(stream, (bytes, str)):
        stream = io.StringIO(stream.decode("utf-8") if isinstance(stream, bytes) else stream)
    sessions = []
    seen: dict[str, int] = {}
    for lineno, record in iter_session_records(stream):
        s = session_from_record(record, lineno)
        if s.id in seen:
            raise SessionValidationError(
                f"duplicate session id {s.id!r} (first seen on line {seen[s.id]})", lineno
            )
        seen[s.id] = lineno
        sessions.append(s)
    return SessionLog(tuple(sessions))


def read_session_log(path) -> SessionLog:
    with open(path, "rb") as fh:
        return parse_session_log(fh)


def session_to_record(s: Session) -> dict:
    record = {
        "id": s.id,
        "start": s.start_time,
        "end": s.end_time,
        "events": [{"owner": str(e.owner), "revenue": e.revenue} for e in s.events],
    }
    if s.attractor is not None:
        record["attractor"] = str(s.attractor)
    return record


def serialize_session_log(log: SessionLog | Iterable[Session]) -> str:
    return "".join(json.dumps(session_to_record(s)) + "\n" for s in log)


def window_filter(log: SessionLog | Iterable[Session], w: TimeWindow) -> list[Session]:
    """Sessions whose end time lies in ]t1, t2], in log order."""
    if w.is_empty:
        return []
    return [s for s in log if s.end_time in w]


def total_revenue(sessions: Iterable[Session]) -> float:
    return math.fsum(e.revenue for s in sessions for e in s.events)


def table1_log() -> SessionLog:
    """The three-session illustrative log: channel events pay 3, 6 and 9, recommender events pay 1."""
    rows = {
        "s1": ["platform", "search", "1", "recommender", "2", "recommender", "1",
               "recommender", "3", "recommender", "2"],
        "s2": ["platform", "3", "recommender", "1", "1", "recommender", "2",
               "recommender", "2", "search"],
        "s3": ["platform", "search", "2", "2", "recommender", "3", "recommender", "1", "1"],
    }
    pay = {"1": 3.0, "2": 6.0, "3": 9.0, "recommender": 1.0}
    sessions = []
    for i, (sid, row) in enumerate(rows.items(), start=1):
        owners = [o if o in _SERVICE_CODES else f"channel:{o}" for o in row]
        revenues = [pay.get(o, 0.0) for o in row]
        sessions.append(Session.from_owners(owners, revenues, id=sid, start_time=0.0, end_time=float(i)))
    return SessionLog(tuple(sessions))
