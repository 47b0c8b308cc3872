import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_session, sessions
from revshare.domain import PLATFORM, Session, SessionLog, channel, table1_log, ALL_TIME
from revshare.engine import (
    ExponentialStream,
    RelevanceStream,
    attenuated_relevance,
    attribute_session_incremental,
    attribute_session_matrix,
    build_relevance_matrix,
    normalize_and_credit,
)
from revshare.rules import EVENT_SHAPLEY, SHAPLEY_DD12, SHAPLEY_DD13, RuleSpec, attribute_session, attribute_window, exponential, tabulated

A, B = channel("A"), channel("B")


def _chain(n):
    owners = ["platform"] + [f"channel:{i % 3}" for i in range(n)]
    return Session.from_owners(owners, [0] + [1.0] * n)


def test_matrix_two_events_half():
    m = build_relevance_matrix(_chain(2), exponential(0.5))
    np.testing.assert_array_equal(m, [[1, 1], [1, 0.5], [0, 1]])


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0])
def test_matrix_single_event(theta):
    np.testing.assert_array_equal(build_relevance_matrix(_chain(1), exponential(theta)), [[1], [1]])


def test_matrix_constant_attenuation_band():
    m = build_relevance_matrix(_chain(3), exponential(1.0))
    np.testing.assert_array_equal(m, np.triu(np.ones((4, 3)), k=-1))


@pytest.mark.parametrize("n", [1, 4, 9])
def test_matrix_shape_and_column_support(n):
    m = build_relevance_matrix(_chain(n), tabulated([1, 0.7, 0.4, 0.1]))
    assert m.shape == (n + 1, n)
    assert (m[0] == 1).all()
    for k in range(1, n + 1):
        assert np.count_nonzero(m[1:, k - 1]) == k
        assert (m[k + 1:, k - 1] == 0).all()


def test_normalize_and_credit_examples(abc_session):
    m = build_relevance_matrix(abc_session, exponential(0.5))
    credit = normalize_and_credit(m, [4, 6], abc_session.owners)
    assert credit == pytest.approx({PLATFORM: 4.4, A: 3.2, B: 2.4})
    two = Session.from_owners(["platform", "channel:A"], [0, 4])
    for theta in (0, 0.5, 1):
        assert normalize_and_credit(build_relevance_matrix(two, exponential(theta)), [4], two.owners) == {PLATFORM: 2, A: 2}


def test_normalize_rejects_anchorless_column():
    with pytest.raises(ArithmeticError):
        normalize_and_credit(np.zeros((2, 1)), [1.0], [PLATFORM, A])


def test_normalize_checks_shapes():
    with pytest.raises(ValueError):
        normalize_and_credit(np.ones((3, 1)), [1.0], [PLATFORM, A])


RULES = [SHAPLEY_DD12, SHAPLEY_DD13, EVENT_SHAPLEY, RuleSpec.alpha(tabulated([1, 0.8, 0.2]))]


@pytest.mark.parametrize("rule", RULES, ids=str)
@given(s=sessions(max_events=20))
def test_matrix_engine_matches_rules(rule, s):
    want = attribute_session(s, rule)
    got = attribute_session_matrix(s, rule)
    for p in set(want) | set(got):
        assert got.get(p, 0) == pytest.approx(want.get(p, 0), abs=1e-9)


@settings(max_examples=200)
@given(s=sessions(max_events=30), theta=st.floats(0, 1))
def test_both_engines_match_rules_for_exponential(s, theta):
    rule = RuleSpec.exp(theta)
    want = attribute_session(s, rule)
    for got in (attribute_session_matrix(s, rule), attribute_session_incremental(s, rule)):
        for p in set(want) | set(got):
            assert got.get(p, 0) == pytest.approx(want.get(p, 0), abs=1e-9)


def test_incremental_rejects_non_exponential():
    with pytest.raises(ValueError, match="exponential"):
        attribute_session_incremental(_chain(3), SHAPLEY_DD12)


def test_streams_accept_events_one_at_a_time(abc_session):
    stream = RelevanceStream(attenuated_relevance(exponential(0.5)))
    fast = ExponentialStream(0.5)
    for e in abc_session.events[1:]:
        stream.push(e.owner, e.revenue)
        fast.push(e.owner, e.revenue)
    assert stream.finalize() == pytest.approx({PLATFORM: 4.4, A: 3.2, B: 2.4})
    assert fast.finalize() == pytest.approx({PLATFORM: 4.4, A: 3.2, B: 2.4})
    with pytest.raises(RuntimeError):
        stream.push(A, 1.0)


def test_engine_table1_theta_zero():
    log = table1_log()
    for engine in ("matrix", "incremental"):
        alloc = attribute_window(log, ALL_TIME, RuleSpec.exp(0), engine=engine)
        assert [round(v, 2) for v in alloc.amounts.values()] == [45.0, 0.0, 4.5, 9.0, 18.0, 13.5]


def test_entry_revenue_in_engines():
    s = Session.from_owners(["platform", "channel:A"], [2, 4])
    for fn in (attribute_session_matrix, attribute_session_incremental):
        assert fn(s, RuleSpec.exp(0.5)) == {PLATFORM: 4.0, A: 2.0}
