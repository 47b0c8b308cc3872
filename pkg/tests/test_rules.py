import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_log, random_session, sessions
from revshare.domain import ALL_TIME, PLATFORM, RECOMMENDER, SEARCH, Session, SessionLog, TimeWindow, channel
from revshare.oracle import merge_channels
from revshare.rules import (
    EVENT_SHAPLEY,
    SHAPLEY_DD12,
    SHAPLEY_DD13,
    RuleKind,
    RuleSpec,
    attribute_session,
    attribute_window,
    event_credits,
    exponential,
    load_attenuation,
    tabulated,
)

A, B = channel("A"), channel("B")


def literal_alpha_rule(s: Session, alpha) -> dict:
    """Term-by-term evaluation of the attenuated rule in exact arithmetic.

    Keeps the correction factor delta_k(d) = 1/alpha(d) when d == k (the
    platform term), 1 otherwise, instead of short-cutting the anchor to 1.
    """
    credit = {}
    for k in range(1, len(s.events)):
        def term(l):
            d = k - l
            delta = 1 / alpha(d) if d == k else 1
            return delta * alpha(d)

        denom = sum(term(j) for j in range(k + 1))
        for l in range(k + 1):
            owner = s.events[l].owner
            credit[owner] = credit.get(owner, 0) + term(l) / denom * Fraction(s.events[k].revenue)
    return credit


def assert_same(got: dict, want: dict, tol=1e-9):
    keys = set(got) | set(want)
    for p in keys:
        assert got.get(p, 0.0) == pytest.approx(float(want.get(p, 0)), abs=tol), p


def test_exp_half_hand_example(abc_session):
    half = Fraction(1, 2)
    oracle = literal_alpha_rule(abc_session, lambda d: half ** d)
    assert oracle == {PLATFORM: Fraction(22, 5), A: Fraction(16, 5), B: Fraction(12, 5)}
    assert_same(attribute_session(abc_session, RuleSpec.exp(0.5)), oracle)


def test_event_shapley_counts_repeats():
    s = Session.from_owners(["platform", "channel:A", "channel:A", "channel:B"], [0, 2, 2, 6])
    oracle = literal_alpha_rule(s, lambda d: Fraction(1))
    assert oracle == {PLATFORM: Fraction(19, 6), A: Fraction(16, 3), B: Fraction(3, 2)}
    assert_same(attribute_session(s, EVENT_SHAPLEY), oracle)


def test_dd13_splits_in_half(abc_session):
    assert attribute_session(abc_session, SHAPLEY_DD13) == {PLATFORM: 5.0, A: 2.0, B: 3.0}


def test_dd12_third_session_breakdown(table1):
    s3 = table1.sessions[2]
    assert list(s3.revenues) == [0, 0, 6, 6, 1, 9, 1, 3, 3]
    got = attribute_session(s3, SHAPLEY_DD12)
    want = {PLATFORM: 7.25, SEARCH: 7.25, RECOMMENDER: 3.25, channel("1"): 1, channel("2"): 7.25, channel("3"): 3}
    assert_same(got, want)
    per_event = event_credits(s3, SHAPLEY_DD12)
    printed_platform_row = [0, 0, 2, 2, 0.25, 1.8, 0.2, 0.5, 0.5]
    assert [round(e.get(PLATFORM, 0), 2) for e in per_event] == printed_platform_row
    assert [round(e.get(channel("1"), 0), 2) for e in per_event] == [0] * 7 + [0.5, 0.5]


@settings(max_examples=150)
@given(sessions(), st.fractions(0, 1, max_denominator=16))
def test_attenuated_matches_literal_formula(s, theta):
    # theta = 0 would make the literal delta term 1/0**k; covered by the pole test
    if theta == 0:
        theta = Fraction(1, 17)
    oracle = literal_alpha_rule(s, lambda d: theta ** d)
    assert_same(attribute_session(s, RuleSpec.exp(float(theta))), oracle, tol=1e-7)


@given(sessions())
def test_poles_of_exponential_family(s):
    assert_same(attribute_session(s, RuleSpec.exp(0)), attribute_session(s, SHAPLEY_DD13))
    assert_same(attribute_session(s, RuleSpec.exp(1)), attribute_session(s, EVENT_SHAPLEY))


def test_dd12_outside_alpha_family():
    # DD12 gives 4 to each of w_p, A, B. Matching w_p and B forces alpha(1) = 0,
    # hence alpha(2) = 0 and A gets nothing, so no attenuation works.
    s = Session.from_owners(["platform", "channel:A", "channel:B", "channel:B"], [0, 0, 6, 6])
    dd12 = attribute_session(s, SHAPLEY_DD12)
    assert_same(dd12, {PLATFORM: 4, A: 4, B: 4})
    rng = random.Random(0)
    alphas = [exponential(t / 20) for t in range(21)]
    for _ in range(50):
        a1 = rng.random()
        alphas.append(tabulated([1.0, a1, a1 * rng.random()]))
    for alpha in alphas:
        got = attribute_session(s, RuleSpec.alpha(alpha))
        assert max(abs(got.get(p, 0) - dd12[p]) for p in dd12) > 0.3


@pytest.mark.parametrize("rule", [SHAPLEY_DD12, SHAPLEY_DD13, EVENT_SHAPLEY, RuleSpec.exp(0.3)])
def test_platform_only_session(rule):
    s = Session.from_owners(["platform"], [2.5])
    assert attribute_session(s, rule) == {PLATFORM: 2.5}


@pytest.mark.parametrize("rule", [SHAPLEY_DD12, SHAPLEY_DD13, EVENT_SHAPLEY, RuleSpec.exp(0.7)])
def test_entry_revenue_goes_to_platform(rule, abc_session):
    with_entry = Session.from_owners(["platform", "channel:A", "channel:B"], [3, 4, 6])
    base = attribute_session(abc_session, rule)
    got = attribute_session(with_entry, rule)
    assert got[PLATFORM] == pytest.approx(base[PLATFORM] + 3)
    assert got[A] == base[A] and got[B] == base[B]


RULES = [SHAPLEY_DD12, SHAPLEY_DD13, EVENT_SHAPLEY, RuleSpec.exp(0.25), RuleSpec.exp(0.8),
         RuleSpec.alpha(tabulated([1, 0.6, 0.55, 0.1]))]


@pytest.mark.parametrize("rule", RULES, ids=str)
@given(s=sessions())
def test_efficiency(rule, s):
    assert math.fsum(attribute_session(s, rule).values()) == pytest.approx(s.revenue, abs=1e-9)


@pytest.mark.parametrize("rule", RULES, ids=str)
@given(s=sessions(max_events=8), k=st.integers(0, 8), bump=st.floats(0.01, 50))
def test_monotone_in_event_revenue(rule, s, k, bump):
    k = k % len(s.events)
    revenues = list(s.revenues)
    revenues[k] += bump
    raised = Session.from_owners(s.owners, revenues)
    before, after = attribute_session(s, rule), attribute_session(raised, rule)
    for p, v in before.items():
        assert after.get(p, 0.0) >= v - 1e-9


@pytest.mark.parametrize("rule", RULES, ids=str)
def test_window_allocation_is_separable(rule):
    rng = random.Random(11)
    for _ in range(30):
        log = random_log(rng)
        players = log.players()
        whole = attribute_window(log, ALL_TIME, rule)
        t = rng.uniform(0, 21)
        left = attribute_window(log, TimeWindow(0, t), rule, players=players)
        right = attribute_window(log, TimeWindow(t, math.inf), rule, players=players)
        for p in players:
            assert whole[p] == pytest.approx(left[p] + right[p], abs=1e-9)
            per_session = math.fsum(attribute_session(s, rule).get(p, 0.0) for s in log)
            assert whole[p] == pytest.approx(per_session, abs=1e-9)


def test_null_players_get_zero(table1):
    ghost = channel("ghost")
    for rule in RULES:
        alloc = attribute_window(table1, ALL_TIME, rule, players=table1.players() + [ghost])
        assert alloc[ghost] == 0.0
    # w_s only owns zero-revenue events, so it is not null in the game
    assert attribute_window(table1, ALL_TIME, SHAPLEY_DD12)[SEARCH] > 0


@pytest.mark.parametrize("rule", [SHAPLEY_DD13, EVENT_SHAPLEY, RuleSpec.exp(0.4), RuleSpec.exp(0.9)], ids=str)
def test_merging_channels_is_neutral(rule):
    rng = random.Random(5)
    for _ in range(40):
        log = random_log(rng)
        chans = [p for p in log.players() if not p.is_platform_side]
        if len(chans) < 2:
            continue
        parts = rng.sample(chans, rng.randint(2, len(chans)))
        merged = channel("merged")
        before = attribute_window(log, ALL_TIME, rule)
        after = attribute_window(merge_channels(log, parts, merged), ALL_TIME, rule)
        assert after[merged] == pytest.approx(math.fsum(before[p] for p in parts), abs=1e-9)
        for p in before.amounts:
            if p not in parts:
                assert after[p] == pytest.approx(before[p], abs=1e-9)


def test_dd12_merge_counterexample(abc_session):
    log = SessionLog((abc_session,))
    before = attribute_window(log, ALL_TIME, SHAPLEY_DD12)
    assert before[A] + before[B] == 6
    merged = attribute_window(merge_channels(log, [A, B], A), ALL_TIME, SHAPLEY_DD12)
    assert merged[A] == 5


def test_window_players_default_to_log_players(table1):
    alloc = attribute_window(table1, TimeWindow(10, 20), SHAPLEY_DD12)
    assert list(alloc.amounts) == table1.players()
    assert alloc.total == 0


def test_parallel_window_matches_serial(table1):
    serial = attribute_window(table1, ALL_TIME, RuleSpec.exp(0.5))
    parallel = attribute_window(table1, ALL_TIME, RuleSpec.exp(0.5), n_jobs=2)
    for p in serial.amounts:
        assert parallel[p] == pytest.approx(serial[p], abs=1e-9)


class TestRuleSpec:
    @pytest.mark.parametrize("name, kind", [
        ("shapley-dd12", RuleKind.SHAPLEY_DD12),
        ("shapley-dd13", RuleKind.SHAPLEY_DD13),
        ("event-shapley", RuleKind.EVENT_SHAPLEY),
        ("exp:0.25", RuleKind.EXP_THETA),
    ])
    def test_parse(self, name, kind):
        rule = RuleSpec.parse(name)
        assert rule.kind is kind
        assert rule.name == name

    @pytest.mark.parametrize("name", ["exp:1.5", "exp:-0.1", "exp:x", "shapley", ""])
    def test_parse_rejects(self, name):
        with pytest.raises(ValueError):
            RuleSpec.parse(name)

    def test_alpha_file(self, tmp_path):
        path = tmp_path / "alpha.txt"
        path.write_text("1, 0.5\n0.2\n")
        rule = RuleSpec.parse(f"alpha:{path}")
        assert rule.kind is RuleKind.ALPHA
        assert [rule.attenuation(d) for d in range(5)] == [1.0, 0.5, 0.2, 0.2, 0.2]

    @pytest.mark.parametrize("table", [[0.9, 0.5], [1, 0.5, 0.7], [1, -0.1], []])
    def test_invalid_attenuation(self, table):
        with pytest.raises(ValueError):
            tabulated(table)

    def test_zero_to_the_zero_is_one(self):
        assert exponential(0)(0) == 1.0
        assert exponential(0)(3) == 0.0

    def test_load_attenuation_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 half")
        with pytest.raises(ValueError):
            load_attenuation(path)
