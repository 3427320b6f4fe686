"""Price-time priority limit order book on an integer tick grid.

Orders are identified by the ``seq`` of the limit event that created them;
cancellations reference that id through ``OrderEvent.ref``.
"""
from __future__ import annotations

import math
from bisect import bisect_left, insort
from dataclasses import dataclass, field

BUY = 1
SELL = -1


class BookError(ValueError):
    """An event that cannot be applied to the current book."""


@dataclass(frozen=True, slots=True)
class OrderEvent:
    kind: str  # "L", "M", "C"; "N" marks a nulled slot
    side: int  # +1 buy, -1 sell
    price: int | None = None
    volume: int = 1
    agent: int | None = None
    seq: int = 0
    ref: int | None = None
    ts: float | None = None

    def null(self) -> "OrderEvent":
        return OrderEvent("N", self.side, None, 0, self.agent, self.seq, None, self.ts)


@dataclass(frozen=True, slots=True)
class Fill:
    """Aggregate execution of one incoming order. ``legs`` holds
    ``(maker_id, price, volume)`` in execution order."""

    taker_seq: int
    side: int
    volume: int
    legs: tuple
    mid_before: float
    mid_after: float

    @property
    def prices(self) -> tuple:
        return tuple(p for _, p, _ in self.legs)


@dataclass(frozen=True, slots=True)
class Split:
    """Effective market and limit parts of an incoming order (either may be None)."""

    market: OrderEvent | None
    limit: OrderEvent | None


class _Side:
    """One side of the book: price -> {order_id: remaining volume} in FIFO order."""

    __slots__ = ("sign", "levels", "prices", "depth")

    def __init__(self, sign: int):
        self.sign = sign
        self.levels: dict[int, dict[int, int]] = {}
        self.prices: list[int] = []  # ascending
        self.depth: dict[int, int] = {}

    def best(self) -> int | None:
        if not self.prices:
            return None
        return self.prices[-1] if self.sign == BUY else self.prices[0]

    def walk(self):
        """Price levels from the best outward."""
        return reversed(self.prices) if self.sign == BUY else iter(self.prices)

    def add(self, price: int, oid: int, vol: int) -> None:
        lvl = self.levels.get(price)
        if lvl is None:
            lvl = self.levels[price] = {}
            self.depth[price] = 0
            insort(self.prices, price)
        lvl[oid] = vol
        self.depth[price] += vol

    def remove_level(self, price: int) -> None:
        del self.levels[price]
        del self.depth[price]
        del self.prices[bisect_left(self.prices, price)]

    def copy(self) -> "_Side":
        s = _Side(self.sign)
        s.levels = {p: dict(l) for p, l in self.levels.items()}
        s.prices = list(self.prices)
        s.depth = dict(self.depth)
        return s


@dataclass
class BookState:
    """Mutable book.

    ``orders`` maps each live order id to ``(side, price)``. The counters
    ``posted``, ``executed`` and ``cancelled`` track resting-order volume per
    side (keys +1/-1) for conservation checks.
    """

    mid_unit: str = "ticks"
    tick_size: float = 1.0
    ref_price: float = 0.0
    bids: _Side = field(default_factory=lambda: _Side(BUY))
    asks: _Side = field(default_factory=lambda: _Side(SELL))
    orders: dict = field(default_factory=dict)
    posted: dict = field(default_factory=lambda: {BUY: 0, SELL: 0})
    executed: dict = field(default_factory=lambda: {BUY: 0, SELL: 0})
    cancelled: dict = field(default_factory=lambda: {BUY: 0, SELL: 0})
    last_seq: int | None = None

    def copy(self) -> "BookState":
        return BookState(self.mid_unit, self.tick_size, self.ref_price,
                         self.bids.copy(), self.asks.copy(), dict(self.orders),
                         dict(self.posted), dict(self.executed), dict(self.cancelled),
                         self.last_seq)

    def side(self, s: int) -> _Side:
        return self.bids if s == BUY else self.asks

    @property
    def best_bid(self) -> int | None:
        return self.bids.best()

    @property
    def best_ask(self) -> int | None:
        return self.asks.best()

    def spread(self) -> float:
        b, a = self.bids.best(), self.asks.best()
        if b is None or a is None:
            return math.nan
        return float(a - b)

    def mid(self) -> float:
        """Midprice, NaN when either side is empty.

        In ``log`` mode the price of a tick level ``k`` is
        ``ref_price + k * tick_size`` and the log of the mean quote is returned.
        """
        b, a = self.bids.best(), self.asks.best()
        if b is None or a is None:
            return math.nan
        m = 0.5 * (a + b)
        if self.mid_unit == "log":
            return math.log(self.ref_price + m * self.tick_size)
        return m

    def best_volumes(self) -> tuple[int, int]:
        b, a = self.bids.best(), self.asks.best()
        return (self.bids.depth[b] if b is not None else 0,
                self.asks.depth[a] if a is not None else 0)

    def resting(self, s: int) -> int:
        return sum(self.side(s).depth.values())

    def signature(self) -> tuple:
        """Hashable snapshot of every live order, in priority order."""
        out = []
        for sd in (self.bids, self.asks):
            for p in sd.prices:
                out.append((sd.sign, p, tuple(sd.levels[p].items())))
        return tuple(out)


def _match(book: BookState, seq: int, side: int, limit: int | None, vol: int):
    opp = book.side(-side)
    legs = []
    orders = book.orders
    while vol > 0 and opp.prices:
        p = opp.prices[0] if side == BUY else opp.prices[-1]
        if limit is not None and (p > limit if side == BUY else p < limit):
            break
        lvl = opp.levels[p]
        done = []
        got = 0
        for oid, have in lvl.items():
            take = have if have <= vol else vol
            legs.append((oid, p, take))
            vol -= take
            got += take
            if take == have:
                done.append(oid)
            else:
                lvl[oid] = have - take
            if vol == 0:
                break
        for oid in done:
            del lvl[oid]
            del orders[oid]
        opp.depth[p] -= got
        book.executed[-side] += got
        if not lvl:
            opp.remove_level(p)
    return legs, vol


def classify_order(ev: OrderEvent, book: BookState) -> Split:
    """Split an incoming order into its effective market and limit parts.

    The market part is the volume that would execute on arrival; the limit
    part is what would rest. Cancels and null events give two empty parts.
    """
    if ev.kind not in ("L", "M"):
        return Split(None, None)
    opp = book.side(-ev.side)
    avail = 0
    for p in opp.walk():
        if ev.kind == "L" and (p > ev.price if ev.side == BUY else p < ev.price):
            break
        avail += opp.depth[p]
        if avail >= ev.volume:
            break
    mkt = min(avail, ev.volume)
    rest = ev.volume - mkt if ev.kind == "L" else 0
    m = OrderEvent("M", ev.side, None, mkt, ev.agent, ev.seq, None, ev.ts) if mkt else None
    lim = OrderEvent("L", ev.side, ev.price, rest, ev.agent, ev.seq, None, ev.ts) if rest else None
    return Split(m, lim)


def order_category(ev: OrderEvent, book: BookState) -> str:
    """Coarse taxonomy label relative to the current quotes.

    One of ``market``, ``marketable-limit``, ``limit-inside-spread``,
    ``limit-at-best``, ``limit-in-book``, ``cancel-at-best``,
    ``cancel-in-book``, ``cancel-unknown``, ``null``.
    """
    if ev.kind == "N":
        return "null"
    if ev.kind == "M":
        return "market"
    if ev.kind == "C":
        loc = book.orders.get(ev.ref)
        if loc is None:
            return "cancel-unknown"
        s, p = loc
        return "cancel-at-best" if p == book.side(s).best() else "cancel-in-book"
    own = book.side(ev.side).best()
    opp = book.side(-ev.side).best()
    p = ev.price
    if opp is not None and (p >= opp if ev.side == BUY else p <= opp):
        return "marketable-limit"
    if own is None or ((p > own) if ev.side == BUY else (p < own)):
        return "limit-inside-spread"
    if p == own:
        return "limit-at-best"
    return "limit-in-book"


def apply_event(book: BookState, ev: OrderEvent):
    """Apply one event in place; returns ``(book, fills, midprice_change)``.

    A marketable limit order executes its crossing part first and rests the
    remainder at its limit price. Market volume beyond the opposing depth is
    dropped. Invalid events raise ``BookError`` and leave the book unchanged.
    ``midprice_change`` is NaN when either side is empty before or after.
    """
    k = ev.kind
    if k == "N":
        return book, [], 0.0
    if ev.side != BUY and ev.side != SELL:
        raise BookError(f"seq {ev.seq}: side must be +1 or -1")
    m0 = book.mid()
    if k == "C":
        loc = book.orders.get(ev.ref) if ev.ref is not None else None
        if loc is None:
            raise BookError(f"seq {ev.seq}: cancel of unknown order {ev.ref}")
        s, p = loc
        sd = book.side(s)
        lvl = sd.levels[p]
        v = lvl.pop(ev.ref)
        sd.depth[p] -= v
        book.cancelled[s] += v
        del book.orders[ev.ref]
        if not lvl:
            sd.remove_level(p)
        return book, [], book.mid() - m0
    if ev.volume <= 0:
        raise BookError(f"seq {ev.seq}: volume must be positive")
    if k == "M":
        if not book.side(-ev.side).prices:
            raise BookError(f"seq {ev.seq}: market order with empty opposing side")
        legs, _ = _match(book, ev.seq, ev.side, None, ev.volume)
    elif k == "L":
        if ev.price is None:
            raise BookError(f"seq {ev.seq}: limit order without price")
        if ev.seq in book.orders:
            raise BookError(f"seq {ev.seq}: duplicate order id")
        legs, rest = _match(book, ev.seq, ev.side, ev.price, ev.volume)
        if rest > 0:
            book.side(ev.side).add(ev.price, ev.seq, rest)
            book.orders[ev.seq] = (ev.side, ev.price)
            book.posted[ev.side] += rest
    else:
        raise BookError(f"seq {ev.seq}: unknown event kind {k!r}")
    m1 = book.mid()
    fills = []
    if legs:
        fills.append(Fill(ev.seq, ev.side, sum(l[2] for l in legs), tuple(legs), m0, m1))
    return book, fills, m1 - m0


def replay(events, book: BookState | None = None, *, lenient: bool = False,
           on_event=None):
    """Apply ``events`` in order. Returns ``(book, records)``.

    ``records`` has one row per event plus the initial state, each
    ``(seq, mid_ticks, spread_ticks, phi_b, phi_a)``; the initial row carries
    seq -1. With ``lenient=True`` rejected events act as null events.
    ``on_event(ev, fills, book)`` is called after every event.
    """
    book = BookState() if book is None else book
    pb, pa = book.best_volumes()
    out = [(-1, book.mid(), book.spread(), pb, pa)]
    last = book.last_seq
    for ev in events:
        if last is not None and ev.seq <= last:
            raise BookError(f"seq {ev.seq}: stream not strictly increasing")
        last = ev.seq
        try:
            _, fills, _ = apply_event(book, ev)
        except BookError:
            if not lenient:
                raise
            fills = []
        book.last_seq = last
        if on_event is not None:
            on_event(ev, fills, book)
        pb, pa = book.best_volumes()
        out.append((ev.seq, book.mid(), book.spread(), pb, pa))
    return book, out


def virtual_impact(book: BookState, volume: int, side: int = BUY) -> tuple[float, bool]:
    """Midprice change of a hypothetical market order, without mutating ``book``.

    Returns ``(impact, overflow)``. When ``volume`` reaches the whole
    opposing depth the new quote is taken as the last level consumed, and
    ``overflow`` is set only if volume is strictly larger than that depth.
    """
    opp = book.side(-side)
    own = book.side(side).best()
    if not opp.prices or own is None:
        raise BookError("virtual impact needs both sides of the book")
    if volume <= 0:
        return 0.0, False
    q0 = opp.best()
    newq = q0
    total = sum(opp.depth.values())
    if volume < total:
        # first level not fully consumed
        left = volume
        for p in opp.walk():
            d = opp.depth[p]
            if left < d:
                newq = p
                break
            left -= d
    else:
        newq = opp.prices[-1] if side == BUY else opp.prices[0]
    return 0.5 * (newq - q0), volume > total


def book_stats(book: BookState, depth: int = 20) -> dict:
    """Quotes, spread, best depths, first gaps and the depth profile Φ(Δ).

    Δ is measured in ticks from the midprice (half-integers when the spread
    is odd) and stored as profile index ``floor(Δ)``. A side with a single
    level reports an infinite first gap. ``mid`` is NaN for a one-sided book.
    """
    b, a = book.best_bid, book.best_ask
    pb, pa = book.best_volumes()
    m = 0.5 * (a + b) if (a is not None and b is not None) else math.nan

    def gap(sd: _Side) -> float:
        if len(sd.prices) < 2:
            return math.inf
        it = sd.walk()
        p0 = next(it)
        return float(abs(next(it) - p0))

    prof_b = [0] * depth
    prof_a = [0] * depth
    if not math.isnan(m):
        for p, v in book.bids.depth.items():
            d = int(m - p)
            if d < depth:
                prof_b[d] += v
        for p, v in book.asks.depth.items():
            d = int(p - m)
            if d < depth:
                prof_a[d] += v
    return {
        "mid": m if book.mid_unit == "ticks" else book.mid(),
        "mid_defined": not math.isnan(m),
        "best_bid": b,
        "best_ask": a,
        "spread": book.spread(),
        "phi_b": pb,
        "phi_a": pa,
        "gap_b": gap(book.bids),
        "gap_a": gap(book.asks),
        "profile_b": prof_b,
        "profile_a": prof_a,
        "n_orders": len(book.orders),
    }
