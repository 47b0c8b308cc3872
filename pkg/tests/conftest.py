import random

import pytest
from hypothesis import strategies as st

from revshare.domain import RECOMMENDER, SEARCH, Event, PLATFORM, Session, SessionLog, channel, table1_log

CHANNEL_NAMES = ["A", "B", "C", "D", "E"]


@pytest.fixture
def table1():
    return table1_log()


@pytest.fixture
def abc_session():
    # [w_p:0, A:4, B:6]
    return Session.from_owners(["platform", "channel:A", "channel:B"], [0, 4, 6])


def random_session(rng: random.Random, sid="s", n_channels=5, max_events=8, end_time=1.0, entry_revenue=False):
    pool = [SEARCH, RECOMMENDER] + [channel(c) for c in CHANNEL_NAMES[:n_channels]]
    n = rng.randint(0, max_events)
    events = [Event(PLATFORM, rng.choice([0.0, 0.0, 2.5]) if entry_revenue else 0.0)]
    for _ in range(n):
        events.append(Event(rng.choice(pool), rng.choice([0.0, 1.0, 3.0, 6.0, 9.0, rng.uniform(0, 20)])))
    return Session(sid, 0.0, end_time, tuple(events))


def random_log(rng: random.Random, max_channels=5, max_sessions=10, max_events=8, entry_revenue=False):
    n_channels = rng.randint(1, max_channels)
    sessions = [
        random_session(rng, f"s{i}", n_channels, max_events, float(rng.randint(1, 20)), entry_revenue)
        for i in range(rng.randint(0, max_sessions))
    ]
    return SessionLog(tuple(sessions))


owners_st = st.sampled_from(["search", "recommender"] + [f"channel:{c}" for c in CHANNEL_NAMES])
revenue_st = st.one_of(st.sampled_from([0.0, 1.0, 3.0, 6.0, 9.0]), st.floats(0, 100, allow_nan=False))


@st.composite
def sessions(draw, max_events=12, sid="s", end_time=1.0):
    owners = draw(st.lists(owners_st, max_size=max_events))
    revenues = draw(st.lists(revenue_st, min_size=len(owners), max_size=len(owners)))
    return Session.from_owners(["platform", *owners], [0.0, *revenues], id=sid, end_time=end_time)


@st.composite
def session_logs(draw, max_sessions=6, max_events=8):
    n = draw(st.integers(0, max_sessions))
    out = []
    for i in range(n):
        end = draw(st.integers(1, 10))
        out.append(draw(sessions(max_events=max_events, sid=f"s{i}", end_time=float(end))))
    return SessionLog(tuple(out))


# criterion number -> list of (ok, detail); one summary line per criterion
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[c]
        failed = [d for ok, d in checks if not ok]
        verdict = "PASS" if not failed else "FAIL"
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in checks)
        terminalreporter.write_line(f"criterion {c:>2}: {verdict}  {detail}")
