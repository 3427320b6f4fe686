"""Order-flow generators: sign processes, hidden-order (LMF) flow, volumes,
zero-intelligence and Mike-Farmer event streams, the Kyle toy model, and
simple price processes driven by a sign series."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammaln

from . import kernels
from .book import BUY, SELL, BookState, OrderEvent, apply_event
from .rng import stream
from .series import TradeSeries


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class LmfParams:
    K: int = 10
    alpha: float = 1.5
    creation_prob: float | None = None  # None selects the fixed-K variant
    min_size: int = 1
    n_brokers: int | None = None  # map hidden orders onto broker labels

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1 (infinite-mean sizes unsupported)")
        if self.creation_prob is not None and not 0 < self.creation_prob <= 1:
            raise ValueError("creation_prob must lie in (0, 1]")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")


@dataclass(frozen=True)
class FarimaParams:
    hurst: float = 0.75
    K: int = 1
    n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        _check_hurst(self.hurst)
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def gamma(self) -> float:
        return 2.0 - 2.0 * self.hurst

    @property
    def beta(self) -> float:
        return 0.5 * (1.0 - self.gamma)


@dataclass(frozen=True)
class ZiParams:
    mu: float = 1.0  # market orders per unit time, each side
    rho: float = 0.05  # limit orders per tick per unit time, each side
    nu: float = 0.01  # cancellation rate per resting order
    band: int = 200  # limit prices fall within this many ticks of the opposite best
    volume: int = 1
    tick: float = 1.0

    def __post_init__(self):
        if min(self.mu, self.rho, self.nu) <= 0:
            raise ValueError("all rates must be positive")
        if self.band < 2:
            raise ValueError("band must be at least 2 ticks")


@dataclass(frozen=True)
class MfParams:
    dof: float = 1.3
    loc: float = 0.3  # ticks behind the same best
    scale: float = 2.0  # ticks
    hurst: float = 0.8
    cancel_a: float = 0.12  # overall cancellation strength
    cancel_b: float = 0.3  # imbalance offset
    cancel_y0: float = 5.0  # distance scale, ticks

    def __post_init__(self):
        if not self.dof > 1:
            raise ValueError("dof must be > 1")
        if min(self.cancel_a, self.cancel_b, self.scale) < 0:
            raise ValueError("rates and scales must be non-negative")
        _check_hurst(self.hurst)


@dataclass(frozen=True)
class KyleParams:
    lam: float = 0.1
    beta: float = 1.0
    p_inf: float = 1.0
    xi: float = 0.0
    eta: float = 0.0
    horizon: int = 100
    p0: float = 0.0


def _check_hurst(H: float) -> None:
    if not 0.5 < H < 1.0:
        raise ValueError("Hurst exponent must lie in (0.5, 1)")


# ----------------------------------------------------------------- FARIMA

def farima_coeffs(K: int, H: float) -> np.ndarray:
    """Best linear predictor coefficients a_1..a_K of a FARIMA(0,d,0) sign
    process, d = H - 1/2, from the binomial-Gamma closed form."""
    _check_hurst(H)
    if K < 1:
        raise ValueError("K must be >= 1")
    d = H - 0.5
    i = np.arange(1, K + 1, dtype=float)
    log_binom = gammaln(K + 1.0) - gammaln(i + 1.0) - gammaln(K - i + 1.0)
    # -1/Gamma(-d) = d/Gamma(1-d) > 0
    log_a = (log_binom + gammaln(i - d) + gammaln(K - i + 1.0 - d)
             - gammaln(1.0 - d) - gammaln(K + 1.0 - d))
    return d * np.exp(log_a)


def farima_ar_inf(n: int, H: float) -> np.ndarray:
    """First ``n`` coefficients of the infinite-order predictor (K -> inf)."""
    _check_hurst(H)
    d = H - 0.5
    i = np.arange(1, n + 1, dtype=float)
    return d * np.exp(gammaln(i - d) - gammaln(1.0 - d) - gammaln(i + 1.0))


def farima_ma(n: int, H: float) -> np.ndarray:
    """Moving-average weights psi_0..psi_{n-1} of FARIMA(0,d,0)."""
    d = H - 0.5
    k = np.arange(n, dtype=float)
    return np.exp(gammaln(k + d) - gammaln(k + 1.0) - gammaln(d))


def farima_autocorr(n: int, H: float) -> np.ndarray:
    """Autocorrelation rho_0..rho_n of the Gaussian FARIMA(0,d,0) series."""
    d = H - 0.5
    k = np.arange(n + 1, dtype=float)
    return np.exp(gammaln(1 - d) - gammaln(d) + gammaln(k + d) - gammaln(k + 1 - d))


def clipped_autocorr(n: int, H: float) -> np.ndarray:
    """Sign autocorrelation of the clipped Gaussian FARIMA series (arcsine law)."""
    return (2.0 / np.pi) * np.arcsin(farima_autocorr(n, H))


# ------------------------------------------------------------------ signs

def gen_signs(mode: str, n: int, seed: int, *, rho: float | None = None,
              hurst: float | None = None, coeffs=None) -> np.ndarray:
    """Sign series of length ``n``.

    Modes: ``iid``; ``mrr`` (Markov chain with lag-one correlation ``rho``);
    ``farima`` (clipped Gaussian FARIMA with Hurst exponent ``hurst``);
    ``linear`` (P(+) = (1 + sum a_i eps_{n-i}) / 2 with ``coeffs``, sum |a_i| <= 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = stream(seed, 1)
    if mode == "iid":
        return np.where(g.random(n) < 0.5, 1, -1).astype(np.int8)
    if mode == "mrr":
        if rho is None or not -1 < rho < 1:
            raise ValueError("mrr mode needs rho in (-1, 1)")
        e0 = 1 if g.random() < 0.5 else -1
        return kernels.markov_signs(g.random(n), float(rho), e0)
    if mode == "farima":
        if hurst is None:
            raise ValueError("farima mode needs hurst")
        _check_hurst(hurst)
        w = g.standard_normal(2 * n - 1)
        x = fftconvolve(w, farima_ma(n, hurst), mode="valid")
        return np.where(x >= 0, 1, -1).astype(np.int8)
    if mode == "linear":
        a = np.asarray(coeffs, dtype=float)
        if a.ndim != 1 or len(a) == 0 or np.abs(a).sum() > 1 + 1e-12:
            raise ValueError("linear mode needs 1-d coeffs with sum |a_i| <= 1")
        init = np.where(g.random(len(a)) < 0.5, 1, -1).astype(np.int8)
        return kernels.linear_signs(g.random(n), a, init)
    raise ValueError(f"unknown sign mode {mode!r}")


# ---------------------------------------------------------------- volumes

def sample_volumes(dist: str, n: int, seed: int, *, alpha: float | None = None,
                   s: float | None = None, scale: float = 1.0) -> np.ndarray:
    """``pareto``: P(V > x) = (x/scale)^-alpha for x >= scale.
    ``lognormal``: log(V/scale) ~ N(0, s^2)."""
    g = stream(seed, 2)
    if dist == "pareto":
        if alpha is None or not alpha > 0:
            raise ValueError("pareto needs alpha > 0")
        return scale * (1.0 - g.random(n)) ** (-1.0 / alpha)
    if dist == "lognormal":
        if s is None or not s > 0:
            raise ValueError("lognormal needs s > 0")
        return scale * np.exp(s * g.standard_normal(n))
    raise ValueError(f"unknown volume distribution {dist!r}")


# -------------------------------------------------------------------- LMF

@dataclass
class LmfStream:
    eps: np.ndarray
    order_id: np.ndarray
    agent: np.ndarray
    live: np.ndarray  # live hidden orders when each trade happened
    sizes: np.ndarray  # size of hidden order i (indexed by id)
    signs: np.ndarray  # sign of hidden order i

    @property
    def vol(self) -> np.ndarray:
        return np.ones(len(self.eps))


def gen_lmf(params: LmfParams, n_events: int, seed: int) -> LmfStream:
    """Unit trades executed by splitting Pareto-sized hidden orders.

    Fixed-K variant: K hidden orders are live at all times; each step one is
    picked uniformly and trades one unit; a finished order is replaced at
    once. Generalized variant (``creation_prob`` set): a new order is born
    with that probability each step (with certainty if none is live), and
    finished orders are not replaced.
    """
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    K = params.K
    g = stream(seed, 3)
    m = n_events + K
    u = 1.0 - g.random(m)
    sizes = np.ceil(params.min_size * u ** (-1.0 / params.alpha))
    sizes = np.minimum(sizes, 2.0 ** 62).astype(np.int64)
    signs = np.where(g.random(m) < 0.5, 1, -1).astype(np.int8)
    if params.creation_prob is None:
        picks = g.integers(0, K, n_events, dtype=np.int64)
        eps, ids = kernels.lmf_fixed(picks, sizes, signs, K)
        live = np.full(n_events, K, dtype=np.int64)
    else:
        up = g.random(n_events)
        uc = g.random(n_events)
        eps, ids, live = kernels.lmf_general(up, uc, sizes, signs, K, float(params.creation_prob))
    if params.n_brokers:
        broker = stream(seed, 4).integers(0, params.n_brokers, m)
        agent = broker[ids]
    else:
        agent = ids.copy()
    return LmfStream(eps, ids, agent, live, sizes, signs)


# --------------------------------------------------------- zero intelligence

@dataclass
class ZiRun:
    events: list
    ts: np.ndarray  # event times
    mid: np.ndarray  # midprice after each event (NaN if one-sided)
    spread: np.ndarray  # spread after each event
    book: BookState = field(repr=False, default=None)

    def time_average_spread(self, burn_in: float = 0.2) -> float:
        """Spread averaged over continuous time, skipping the first fraction."""
        i0 = int(burn_in * len(self.ts))
        dt = np.diff(self.ts[i0:])
        s = self.spread[i0:-1]
        ok = np.isfinite(s)
        return float((s[ok] * dt[ok]).sum() / dt[ok].sum())


class _LiveSet:
    """Resting-order ids supporting O(1) insert, delete and uniform choice."""

    __slots__ = ("ids", "pos")

    def __init__(self):
        self.ids: list[int] = []
        self.pos: dict[int, int] = {}

    def add(self, oid: int) -> None:
        self.pos[oid] = len(self.ids)
        self.ids.append(oid)

    def discard(self, oid: int) -> None:
        i = self.pos.pop(oid, None)
        if i is None:
            return
        last = self.ids.pop()
        if last != oid:
            self.ids[i] = last
            self.pos[last] = i

    def __len__(self) -> int:
        return len(self.ids)


def gen_zero_intelligence(params: ZiParams, n_events: int, seed: int,
                          ref: int = 10_000) -> ZiRun:
    """Continuous-time zero-intelligence flow.

    Per side: market orders at rate ``mu``; limit orders at rate ``rho`` per
    tick, uniform over the ``band`` ticks behind the opposite best quote (so
    they never cross); each resting order is cancelled at rate ``nu``.
    Market orders that would meet an empty side are not emitted.
    """
    p = params
    g = stream(seed, 5)
    book = BookState()
    live = _LiveSet()
    lim_rate = p.rho * p.band
    last_b, last_a = ref - 1, ref + 1
    events: list[OrderEvent] = []
    ts = np.empty(n_events)
    mids = np.empty(n_events)
    spreads = np.empty(n_events)
    t = 0.0
    seq = 0
    # draw uniforms in blocks
    blk = 4096
    U = g.random((blk, 3))
    j = 0
    while seq < n_events:
        if j == blk:
            U = g.random((blk, 3))
            j = 0
        u0, u1, u2 = U[j]
        j += 1
        n_live = len(live)
        r_mkt = 2.0 * p.mu
        r_lim = 2.0 * lim_rate
        r_can = p.nu * n_live
        tot = r_mkt + r_lim + r_can
        t += -math.log(1.0 - u0) / tot
        x = u1 * tot
        b = book.bids.best()
        a = book.asks.best()
        if b is not None:
            last_b = b
        if a is not None:
            last_a = a
        if x < r_mkt:
            side = BUY if x < p.mu else SELL
            if (a if side == BUY else b) is None:
                continue
            ev = OrderEvent("M", side, None, p.volume, None, seq, None, t)
        elif x < r_mkt + r_lim:
            side = BUY if x - r_mkt < lim_rate else SELL
            off = 1 + int(u2 * p.band)
            if off > p.band:
                off = p.band
            price = (last_a - off) if side == BUY else (last_b + off)
            ev = OrderEvent("L", side, price, p.volume, None, seq, None, t)
        else:
            k = int(u2 * n_live)
            if k >= n_live:
                k = n_live - 1
            oid = live.ids[k]
            ev = OrderEvent("C", book.orders[oid][0], None, 0, None, seq, oid, t)
        _, fills, _ = apply_event(book, ev)
        if ev.kind == "L" and ev.seq in book.orders:
            live.add(ev.seq)
        elif ev.kind == "C":
            live.discard(ev.ref)
        for f in fills:
            for oid, _, _ in f.legs:
                if oid not in book.orders:
                    live.discard(oid)
        events.append(ev)
        ts[seq] = t
        mids[seq] = book.mid()
        spreads[seq] = book.spread()
        seq += 1
    return ZiRun(events, ts, mids, spreads, book)


# ------------------------------------------------------------- Mike-Farmer

@dataclass
class MfRun:
    events: list
    mid: np.ndarray
    spread: np.ndarray
    crossing: np.ndarray  # True where the arriving order executed on arrival
    spread_before: np.ndarray


def gen_mike_farmer(params: MfParams, n_orders: int, seed: int,
                    ref: int = 10_000) -> MfRun:
    """Order placement relative to the same-side best with Student-t offsets.

    Signs are an exogenous clipped-FARIMA series. An offset ``x`` puts a buy at
    ``bid - x`` (a sell at ``ask + x``); negative offsets move inside the
    spread and large ones cross and execute at once. After each arrival every
    resting order is cancelled with probability
    ``A (1 - exp(-y / y0)) (n_imb + B) / N``, where ``y`` is its distance to the
    opposite best, ``n_imb`` the share of resting orders on its side and ``N``
    the number of resting orders. The coefficients are placeholders.
    """
    p = params
    g = stream(seed, 6)
    eps = gen_signs("farima", n_orders, seed, hurst=p.hurst)
    if math.isinf(p.dof):
        offs = p.loc + p.scale * g.standard_normal(n_orders)
    else:
        offs = p.loc + p.scale * g.standard_t(p.dof, n_orders)
    offs = np.clip(np.rint(offs), -10_000, 10_000).astype(np.int64)
    book = BookState()
    live = _LiveSet()
    seq = 0
    for side, px in ((BUY, ref - 1), (SELL, ref + 1), (BUY, ref - 2), (SELL, ref + 2)):
        apply_event(book, OrderEvent("L", side, px, 1, None, seq))
        live.add(seq)
        seq += 1
    last_b, last_a = ref - 1, ref + 1
    events: list[OrderEvent] = []
    mids = np.empty(n_orders)
    spreads = np.empty(n_orders)
    sb = np.empty(n_orders)
    crossing = np.zeros(n_orders, dtype=bool)
    A, B, y0 = p.cancel_a, p.cancel_b, p.cancel_y0
    for i in range(n_orders):
        b, a = book.bids.best(), book.asks.best()
        last_b = b if b is not None else last_b
        last_a = a if a is not None else last_a
        sb[i] = last_a - last_b
        side = int(eps[i])
        price = int(last_b - offs[i]) if side == BUY else int(last_a + offs[i])
        ev = OrderEvent("L", side, price, 1, None, seq, None, float(i))
        _, fills, _ = apply_event(book, ev)
        events.append(ev)
        crossing[i] = bool(fills)
        if seq in book.orders:
            live.add(seq)
        for f in fills:
            for oid, _, _ in f.legs:
                if oid not in book.orders:
                    live.discard(oid)
        seq += 1
        N = len(live)
        if N > 0 and A > 0:
            p_max = A * (1.0 + B) / N
            n_try = g.binomial(N, min(p_max, 1.0))
            if n_try:
                nb = sum(1 for s, _ in book.orders.values() if s == BUY)
                frac = {BUY: nb / N, SELL: 1.0 - nb / N}
                b, a = book.bids.best(), book.asks.best()
                cand = g.choice(N, size=min(n_try, N), replace=False)
                victims = [live.ids[k] for k in cand]
                for oid, uu in zip(victims, g.random(len(victims))):
                    s, px = book.orders[oid]
                    opp = a if s == BUY else b
                    y = abs(opp - px) if opp is not None else y0
                    h = A * (1.0 - math.exp(-y / y0)) * (frac[s] + B) / N
                    if uu * p_max < h:
                        cev = OrderEvent("C", s, None, 0, None, seq, oid, float(i))
                        apply_event(book, cev)
                        events.append(cev)
                        live.discard(oid)
                        seq += 1
        mids[i] = book.mid()
        spreads[i] = book.spread()
    return MfRun(events, mids, spreads, crossing, sb)


# ------------------------------------------------------------------- Kyle

def gen_kyle(params: KyleParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Price path p_0..p_T and insider demand Phi_0..Phi_{T-1}."""
    p = params
    if p.lam <= 0 or p.beta < 0:
        raise ValueError("need lam > 0 and beta >= 0")
    if p.lam * p.beta >= 2:
        warnings.warn("lam * beta >= 2: the discrete price map diverges", RuntimeWarning)
    g = stream(seed, 7)
    T = p.horizon
    xi = p.xi * g.standard_normal(T)
    eta = p.eta * g.standard_normal(T)
    price = np.empty(T + 1)
    phi = np.empty(T)
    price[0] = p.p0
    for t in range(T):
        phi[t] = p.beta * (p.p_inf - price[t])
        price[t + 1] = price[t] + p.lam * (phi[t] + xi[t]) + eta[t]
    return price, phi


# ---------------------------------------------------- price processes

def simulate_permanent(eps, seed: int, *, vol=None, f=None, sigma: float = 0.0) -> TradeSeries:
    """m_{n+1} - m_n = eps_n f(v_n) + eta_n with fixed, permanent impact."""
    eps = np.asarray(eps, dtype=np.int8)
    n = len(eps)
    vol = np.ones(n) if vol is None else np.asarray(vol, dtype=float)
    fv = np.ones(n) if f is None else f(vol)
    r = eps * fv + sigma * stream(seed, 8).standard_normal(n)
    mid = np.concatenate([[0.0], np.cumsum(r)])
    return TradeSeries(eps, vol, mid)


def simulate_mrr(rho: float, theta: float, sigma: float, n: int, seed: int) -> TradeSeries:
    """Midpoint version of the Madhavan-Richardson-Roomans model:
    m_{n+1} - m_n = eta_n + theta (eps_n - rho eps_{n-1}) with Markov signs."""
    e = gen_signs("mrr", n + 1, seed, rho=rho)
    prev, eps = e[:-1], e[1:]
    r = theta * (eps - rho * prev.astype(float)) + sigma * stream(seed, 9).standard_normal(n)
    mid = np.concatenate([[0.0], np.cumsum(r)])
    return TradeSeries(eps, np.ones(n), mid, spread=np.zeros(n))


def simulate_linear_mrr(coeffs, theta: float, sigma: float, n: int, seed: int) -> TradeSeries:
    """Generalized MRR: signs with a linear predictor eps_hat = sum a_i eps_{n-i}
    and midpoint returns theta (eps_n - eps_hat_n) + eta_n."""
    a = np.asarray(coeffs, dtype=float)
    K = len(a)
    e = gen_signs("linear", n + K, seed, coeffs=a)
    hat = np.zeros(n)
    for i in range(1, K + 1):
        hat += a[i - 1] * e[K - i:K - i + n]
    eps = e[K:]
    r = theta * (eps - hat) + sigma * stream(seed, 10).standard_normal(n)
    mid = np.concatenate([[0.0], np.cumsum(r)])
    return TradeSeries(eps, np.ones(n), mid, spread=np.zeros(n), extra={"eps_hat": hat})


def simulate_propagator(g, eps, seed: int, *, vol=None, f=None, sigma: float = 0.0) -> TradeSeries:
    """Transient-impact prices m_n = sum_{j<n} G(n-j) eps_j f(v_j) + noise.

    ``g[k]`` is G(k+1), the impact felt k+1 trades after a trade; lags
    beyond ``len(g)`` keep the last value.
    """
    eps = np.asarray(eps, dtype=np.int8)
    n = len(eps)
    vol = np.ones(n) if vol is None else np.asarray(vol, dtype=float)
    q = eps * (np.ones(n) if f is None else f(vol))
    g = np.asarray(g, dtype=float)
    if len(g) < n:
        g = np.concatenate([g, np.full(n - len(g), g[-1])])
    mid = np.zeros(n + 1)
    mid[1:] = fftconvolve(q, g[:n])[:n]
    if sigma:
        mid[1:] += np.cumsum(sigma * stream(seed, 11).standard_normal(n))
    return TradeSeries(eps, vol, mid)
