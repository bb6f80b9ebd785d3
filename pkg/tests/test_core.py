from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telelink.core import (
    BOTH_LINKS,
    BudgetExceeded,
    Direction,
    DuplicateStreamId,
    InvalidStreamSpec,
    LinkId,
    RedundantNeedsBothLinks,
    StreamRegistry,
    StreamSpec,
    XPRIZE_STREAMS,
    as_fraction,
    budget_table,
    build_registry,
    fmt_mbps,
    register_stream,
)

B5, B24 = LinkId.BAND5, LinkId.BAND24
D, U = Direction.DOWNLINK, Direction.UPLINK


def spec(sid, mbps, links, direction=D, redundant=False, name=None):
    return StreamSpec(sid, name or f"s{sid}", direction, Fraction(mbps), frozenset(links), redundant, Fraction(10))


def test_register_arm_feedback_into_empty_registry():
    registry = StreamRegistry(link_capacity_mbps={B5: 50, B24: 20})
    registry = register_stream(registry, spec(1, "8.5", {B5}, name="Arm feedback"))
    assert budget_table(registry).total(D, B5) == Fraction("8.5")
    assert budget_table(registry).total(D, B24) == 0


def test_zero_budget_rejected_by_spec():
    with pytest.raises(InvalidStreamSpec):
        spec(1, 0, {B5})


def test_negative_rate_and_empty_links_rejected():
    with pytest.raises(InvalidStreamSpec):
        StreamSpec(1, "x", D, Fraction(1), frozenset({B5}), False, Fraction(0))
    with pytest.raises(InvalidStreamSpec):
        spec(1, 1, set())
    with pytest.raises(InvalidStreamSpec):
        spec(70000, 1, {B5})


def test_redundant_needs_both_links():
    with pytest.raises(RedundantNeedsBothLinks):
        spec(1, 1, {B5}, redundant=True)
    assert spec(1, 1, BOTH_LINKS, redundant=True).redundant


def test_band24_overflow_while_loading_xprize_downlink(xprize_downlink):
    # 5.5 + 0.4 fits in 6.0; audio would take the 2.4 GHz downlink to 6.3
    registry = StreamRegistry(link_capacity_mbps={B5: 50, B24: 6})
    with pytest.raises(BudgetExceeded) as info:
        for s in xprize_downlink:
            registry = registry.register(s)
    err = info.value
    assert (err.link, err.direction) == (B24, D)
    assert err.attempted_total == Fraction("6.3")
    assert err.capacity == 6
    assert budget_table(registry).total(D, B24) == Fraction("5.9")


def test_further_band24_stream_rejected_at_full_load(xprize_downlink):
    registry = build_registry(xprize_downlink, {B5: 50, B24: Fraction("6.3")})
    with pytest.raises(BudgetExceeded):
        registry.register(spec(50, "0.1", {B24}))
    # other direction is accounted separately
    registry.register(spec(50, "0.1", {B24}, direction=U))


def test_duplicate_id():
    registry = build_registry([spec(1, 1, {B5})])
    with pytest.raises(DuplicateStreamId):
        registry.register(spec(1, 1, {B24}))


def test_registration_is_all_or_nothing():
    registry = build_registry([spec(1, 45, {B5})])
    before = budget_table(registry)
    with pytest.raises(BudgetExceeded):
        registry.register(spec(2, 10, BOTH_LINKS, redundant=True))
    assert len(registry) == 1
    assert budget_table(registry).totals == before.totals


def test_xprize_downlink_totals(xprize_downlink):
    table = budget_table(build_registry(xprize_downlink))
    assert table.total(D, B5) == Fraction("28.1")
    assert table.total(D, B24) == Fraction("6.3")


def test_xprize_uplink_totals(xprize_uplink):
    table = budget_table(build_registry(xprize_uplink))
    assert table.total(U, B5) == Fraction("6.7")
    assert table.total(U, B24) == Fraction("11.0")


def test_empty_registry_totals_zero():
    table = budget_table(StreamRegistry())
    assert all(v == 0 for v in table.totals.values())
    assert len(table.totals) == 4


def test_xprize_link_assignment_matches_table():
    marks = {(s.direction, s.name): (B5 in s.links, B24 in s.links, s.redundant) for s in XPRIZE_STREAMS}
    assert marks[(D, "Main cameras")] == (True, False, False)
    assert marks[(D, "Hand camera")] == (False, True, False)
    assert marks[(D, "Audio")] == (True, True, True)
    assert marks[(U, "Arm control")] == (True, True, True)
    assert marks[(U, "Operator face")] == (False, True, False)


def test_float_budget_is_exact():
    assert as_fraction(0.1) == Fraction(1, 10)
    assert as_fraction("8.5") == Fraction(17, 2)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_fmt_mbps():
    assert fmt_mbps(Fraction("28.1")) == "28.1"
    assert fmt_mbps(Fraction(11)) == "11.0"
    assert fmt_mbps(Fraction(0)) == "0.0"


def test_budget_table_of_over_budget_streams_reports_violation():
    streams = [spec(1, 30, {B24})]
    table = budget_table(streams, {B5: 50, B24: 20})
    assert table.violations() == [(D, B24, Fraction(30), Fraction(20))]


def test_table_text_and_dict(xprize_registry):
    table = budget_table(xprize_registry)
    text = table.format_text()
    assert "28.1" in text and "6.3" in text and "6.7" in text and "11.0" in text
    d = table.to_dict()
    assert d["downlink"]["totals"] == {"Band5": "28.1", "Band24": "6.3"}
    assert d["uplink"]["totals"] == {"Band5": "6.7", "Band24": "11.0"}


# properties ---------------------------------------------------------------

budgets = st.fractions(min_value=Fraction(1, 10), max_value=Fraction(30)).map(lambda f: f.limit_denominator(10))
link_sets = st.sampled_from([frozenset({B5}), frozenset({B24}), BOTH_LINKS])
stream_st = st.builds(
    lambda sid, mbps, links, d, r: spec(sid, mbps, links, d, redundant=r and links == BOTH_LINKS),
    st.integers(0, 40), budgets, link_sets, st.sampled_from([D, U]), st.booleans(),
)


def _brute_force_ok(streams, caps):
    """Recompute every (direction, link) sum from scratch."""
    for d, link in itertools.product(Direction, LinkId):
        if sum((s.budget_mbps for s in streams if s.direction is d and link in s.links), Fraction(0)) > caps[link]:
            return False
    return len({s.stream_id for s in streams}) == len(streams)


@settings(max_examples=300, deadline=None)
@given(st.lists(stream_st, max_size=15))
def test_admission_sound_and_complete(candidates):
    caps = {B5: Fraction(50), B24: Fraction(20)}
    registry = StreamRegistry(link_capacity_mbps=caps)
    for s in candidates:
        proposed = list(registry.streams) + [s]
        try:
            registry = registry.register(s)
            accepted = True
        except (BudgetExceeded, DuplicateStreamId):
            accepted = False
        # rejected exactly when brute force says the extended set is invalid
        assert accepted == _brute_force_ok(proposed, caps)
        assert _brute_force_ok(list(registry.streams), caps)


@settings(max_examples=100, deadline=None)
@given(st.lists(stream_st, max_size=12, unique_by=lambda s: s.stream_id), st.randoms(use_true_random=False))
def test_totals_permutation_invariant(streams, rnd):
    shuffled = list(streams)
    rnd.shuffle(shuffled)
    a = budget_table(streams).totals
    b = budget_table(shuffled).totals
    assert a == b


def test_totals_match_rows_exactly(xprize_registry):
    table = budget_table(xprize_registry)
    for (d, link), total in table.totals.items():
        assert total == sum((r.budget_mbps for r in table.rows if r.direction is d and link in r.links), Fraction(0))
