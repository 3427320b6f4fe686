import math

import pytest
from hypothesis import given, settings, strategies as st

from microlab.book import (BUY, SELL, BookError, BookState, OrderEvent, apply_event, book_stats,
                           classify_order, order_category, replay, virtual_impact)
from microlab.flow import ZiParams, gen_zero_intelligence


def L(seq, side, price, vol=1):
    return OrderEvent("L", side, price, vol, None, seq)


def M(seq, side, vol=1):
    return OrderEvent("M", side, None, vol, None, seq)


def C(seq, side, ref):
    return OrderEvent("C", side, None, 0, None, seq, ref)


def make_book(orders):
    book = BookState()
    for ev in orders:
        apply_event(book, ev)
    return book


@pytest.fixture
def two_level():
    # bids 99 (3), 98 (2); asks 101 (3), 103 (2)
    return make_book([L(0, BUY, 99, 3), L(1, BUY, 98, 2), L(2, SELL, 101, 3), L(3, SELL, 103, 2)])


def test_classify_fully_crossing(two_level):
    s = classify_order(L(10, BUY, 101, 2), two_level)
    assert s.market.volume == 2 and s.limit is None


def test_classify_non_crossing(two_level):
    s = classify_order(L(10, BUY, 100, 4), two_level)
    assert s.market is None and s.limit.volume == 4 and s.limit.price == 100


def test_classify_partial_cross_at_best(two_level):
    s = classify_order(L(10, BUY, 101, 3 + 5), two_level)
    assert s.market.volume == 3
    assert s.limit.volume == 5 and s.limit.price == 101
    apply_event(two_level, L(10, BUY, 101, 8))
    assert two_level.best_bid == 101 and two_level.bids.depth[101] == 5
    assert two_level.best_ask == 103


def test_market_exact_best_depth_moves_mid_half_gap(two_level):
    m0 = two_level.mid()
    _, fills, dm = apply_event(two_level, M(10, BUY, 3))
    assert dm == pytest.approx(0.5 * (103 - 101))
    assert two_level.mid() - m0 == dm
    assert fills[0].volume == 3 and fills[0].prices == (101,)


def test_market_on_empty_side_rejected():
    book = make_book([L(0, BUY, 99, 1)])
    sig = book.signature()
    with pytest.raises(BookError):
        apply_event(book, M(1, BUY))
    assert book.signature() == sig


def test_cancel_unknown_rejected(two_level):
    with pytest.raises(BookError, match="unknown order"):
        apply_event(two_level, C(10, BUY, 77))


def test_one_sided_mid_undefined():
    book = make_book([L(0, BUY, 99)])
    assert math.isnan(book.mid())
    assert not book_stats(book)["mid_defined"]


def test_log_mid_mode():
    book = BookState(mid_unit="log", tick_size=0.01, ref_price=100.0)
    apply_event(book, L(0, BUY, 99))
    apply_event(book, L(1, SELL, 101))
    assert book.mid() == pytest.approx(math.log(100.0 + 100 * 0.01))


def test_empty_replay_single_row():
    book, rows = replay([], BookState())
    assert len(rows) == 1 and rows[0][0] == -1


def test_non_crossing_limits_move_mid_only_by_improvement():
    evs = [L(0, BUY, 95), L(1, SELL, 105), L(2, BUY, 94), L(3, SELL, 106), L(4, BUY, 97), L(5, SELL, 104)]
    _, rows = replay(evs)
    mids = [r[1] for r in rows[2:]]
    assert mids == [100.0, 100.0, 100.0, 101.0, 100.5]


def test_replay_rejects_non_increasing_seq():
    with pytest.raises(BookError, match="strictly increasing"):
        replay([L(1, BUY, 99), L(1, SELL, 101)])


def test_virtual_impact_cases(two_level):
    assert virtual_impact(two_level, 2) == (0.0, False)
    assert virtual_impact(two_level, 3) == (1.0, False)
    imp, over = virtual_impact(two_level, 5)
    assert imp == 1.0 and not over
    assert virtual_impact(two_level, 6)[1]
    assert virtual_impact(two_level, 3, SELL) == (-0.5, False)


def test_book_stats_symmetric():
    book = make_book([L(0, BUY, 99, 2), L(1, BUY, 97, 2), L(2, SELL, 101, 2), L(3, SELL, 103, 2)])
    s = book_stats(book)
    assert s["phi_b"] == s["phi_a"] and s["gap_b"] == s["gap_a"] == 2.0
    assert s["profile_b"] == s["profile_a"]


def test_book_stats_single_ask_level_gap_infinite(two_level):
    apply_event(two_level, M(10, BUY, 3))
    assert book_stats(two_level)["gap_a"] == math.inf


def test_order_category(two_level):
    assert order_category(L(10, BUY, 100), two_level) == "limit-inside-spread"
    assert order_category(L(10, BUY, 99), two_level) == "limit-at-best"
    assert order_category(L(10, BUY, 101), two_level) == "marketable-limit"
    assert order_category(C(10, BUY, 1), two_level) == "cancel-in-book"


def test_fifo_priority_within_level():
    book = make_book([L(0, SELL, 101, 2), L(1, SELL, 101, 2), L(2, BUY, 99)])
    _, fills, _ = apply_event(book, M(3, BUY, 3))
    assert [leg[0] for leg in fills[0].legs] == [0, 1]
    assert book.asks.levels[101] == {1: 1}


# --------------------------------------------------------- random streams

@st.composite
def streams(draw):
    n = draw(st.integers(1, 80))
    evs = []
    live = []
    for seq in range(n):
        kind = draw(st.sampled_from("LLLMC"))
        side = draw(st.sampled_from((BUY, SELL)))
        if kind == "L":
            evs.append(L(seq, side, draw(st.integers(95, 105)), draw(st.integers(1, 4))))
            live.append((seq, side))
        elif kind == "M":
            evs.append(M(seq, side, draw(st.integers(1, 5))))
        elif live:
            ref, s = live.pop(draw(st.integers(0, len(live) - 1)))
            evs.append(C(seq, s, ref))
    return evs


def _run(evs):
    book = BookState()
    out = []
    for ev in evs:
        try:
            _, fills, dm = apply_event(book, ev)
        except BookError:
            fills, dm = [], None
        if dm is not None and math.isnan(dm):
            dm = "nan"
        out.append((tuple(fills), dm, book.signature()))
        b, a = book.best_bid, book.best_ask
        if b is not None and a is not None:
            assert b < a
        for s in (BUY, SELL):
            posted = book.posted[s]
            assert posted == book.executed[s] + book.cancelled[s] + book.resting(s)
    return book, out


@settings(max_examples=150, deadline=None)
@given(streams())
def test_random_stream_invariants_and_determinism(evs):
    _, a = _run(evs)
    _, b = _run(evs)
    assert a == b


@settings(max_examples=100, deadline=None)
@given(streams(), st.integers(0, 80))
def test_replay_composition(evs, cut):
    cut = min(cut, len(evs))
    b_all, rows_all = replay(evs, lenient=True)
    b1, rows1 = replay(evs[:cut], lenient=True)
    b2, rows2 = replay(evs[cut:], b1, lenient=True)
    assert b_all.signature() == b2.signature()
    assert [r[0] for r in rows_all] == [r[0] for r in rows1] + [r[0] for r in rows2[1:]]
    assert rows_all[-1][1:] == rows2[-1][1:] or all(map(math.isnan, (rows_all[-1][1], rows2[-1][1])))


@settings(max_examples=100, deadline=None)
@given(streams())
def test_virtual_impact_monotone(evs):
    book, _ = _run(evs)
    if book.best_bid is None or book.best_ask is None:
        return
    for side in (BUY, SELL):
        total = book.resting(-side)
        prev = 0.0
        assert virtual_impact(book, 1, side)[0] * side >= 0
        for v in range(1, total + 2):
            imp = virtual_impact(book, v, side)[0] * side
            assert imp >= prev
            prev = imp


@settings(max_examples=60, deadline=None)
@given(streams())
def test_fills_respect_time_priority(evs):
    book = BookState()
    for ev in evs:
        try:
            _, fills, _ = apply_event(book, ev)
        except BookError:
            continue
        for f in fills:
            by_price = {}
            for oid, p, _ in f.legs:
                by_price.setdefault(p, []).append(oid)
            for ids in by_price.values():
                assert ids == sorted(ids)


def test_zi_stream_replays_without_crossing():
    run = gen_zero_intelligence(ZiParams(nu=0.05, band=50), 20_000, seed=4)
    book, rows = replay(run.events)
    spreads = [r[2] for r in rows[1:] if not math.isnan(r[2])]
    assert min(spreads) > 0
    assert book.signature() == run.book.signature()
    for s in (BUY, SELL):
        assert book.posted[s] == book.executed[s] + book.cancelled[s] + book.resting(s)


def test_zi_average_profile_humped():
    from microlab.bookshape import empirical_book_profile
    run = gen_zero_intelligence(ZiParams(mu=1, rho=0.05, nu=0.02, band=60), 60_000, seed=2)
    snaps = []
    book = BookState()
    for i, ev in enumerate(run.events):
        apply_event(book, ev)
        if i > 10_000 and i % 4 == 0:
            snaps.append(book.copy())
    prof = empirical_book_profile(snaps, depth=60, window=10, min_snapshots=5000)
    avg = prof.average
    k = int(avg.argmax())
    # peak sits well behind the best and decays before the band edge
    assert 5 <= k <= 50
    assert avg[k] > 2 * avg[1] and avg[k] > 2 * avg[-1]
    assert prof.sparsity > 0.3
