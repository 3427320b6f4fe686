"""Mean order-book profiles, the zero-intelligence spread equation of state
and the linear Glosten-Sandas book."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import gamma as Gamma
from scipy.special import gammaincc

from .book import BookState
from .rng import stream


# ------------------------------------------------- equation of state

def eos_F(u):
    """Fitted scaling function F(u) = 0.28 + 1.86 u^(3/4)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be non-negative")
    return 0.28 + 1.86 * u ** 0.75


def zi_spread_eos(mu: float, rho_lo: float, nu: float) -> float:
    """Average zero-intelligence spread (mu / rho) F(nu / mu), rates per side."""
    if mu <= 0 or rho_lo <= 0 or nu < 0:
        raise ValueError("rates must be positive")
    return float(mu / rho_lo * eos_F(nu / mu))


# ------------------------------------------------------ mean book theory

@dataclass(frozen=True)
class BookShapeParams:
    """Flow density rho(u) of new orders at distance u from the midpoint,
    a diffusing midpoint (diffusion D) and cancellation rate nu.

    ``flow`` is ``powerlaw`` (u^(-1-mu), optionally cut off below ``u_min``)
    or ``exponential`` (exp(-beta_e u)).
    """

    mu_lp: float = 0.6
    D: float = 1.0
    nu: float = 0.5
    flow: str = "powerlaw"
    beta_e: float = 1.0
    u_min: float = 0.0

    def __post_init__(self):
        if self.flow not in ("powerlaw", "exponential"):
            raise ValueError("flow must be 'powerlaw' or 'exponential'")
        if self.mu_lp <= 0:
            raise ValueError("mu_lp must be positive")
        if self.D <= 0 or self.nu <= 0:
            raise ValueError("D and nu must be positive")
        if self.flow == "powerlaw" and self.mu_lp >= 1 and self.u_min <= 0:
            raise ValueError("mu_lp >= 1 needs a positive cutoff u_min")

    @property
    def alpha(self) -> float:
        return math.sqrt(2 * self.nu / self.D)

    def rho(self, u):
        u = np.asarray(u, dtype=float)
        if self.flow == "exponential":
            return np.exp(-self.beta_e * u)
        with np.errstate(divide="ignore"):
            return np.where(u >= self.u_min, u ** (-1 - self.mu_lp), 0.0)


def _series_sinh(x: float, mu: float, tol: float = 1e-17) -> float:
    """int_0^x u^(-1-mu) sinh u du = sum_k x^(2k+1-mu) / ((2k+1)! (2k+1-mu))."""
    total, k = 0.0, 0
    term = x  # x^(2k+1) / (2k+1)!
    while True:
        add = term * x ** (-mu) / (2 * k + 1 - mu)
        total += add
        if add < tol * total:
            return total
        k += 1
        term *= x * x / ((2 * k) * (2 * k + 1))


def rescaled_profile(delta, mu: float, split: float = 1.0) -> np.ndarray:
    """Mean book in rescaled units for a pure power-law flow, 0 < mu < 1:

    e^-d int_0^d u^(-1-mu) sinh u du + sinh d int_d^inf u^(-1-mu) e^-u du.

    The first integral uses its series below ``split`` and quadrature above;
    the second is an incomplete Gamma function, scaled by e^d for large d.
    """
    if not 0 < mu < 1:
        raise ValueError("the rescaled form needs 0 < mu < 1")
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(d < 0):
        raise ValueError("delta must be non-negative")
    out = np.zeros_like(d)
    g1 = Gamma(1 - mu)
    for i, x in enumerate(d):
        if x == 0:
            continue
        a = min(x, split)
        first = math.exp(-x) * _series_sinh(a, mu)
        if x > split:
            # e^-x sinh u kept bounded for large x
            f = lambda u: u ** (-1 - mu) * 0.5 * (math.exp(u - x) - math.exp(-u - x))
            first += integrate.quad(f, split, x, epsabs=0, epsrel=1e-10, limit=200)[0]
        # sinh(x) Gamma(-mu, x) = (1 - e^-2x)/2 * e^x Gamma(-mu, x)
        if x < 1:
            # Gamma(-mu, x) = (x^-mu e^-x - Gamma(1-mu, x)) / mu
            scaled = math.exp(x) * (x ** (-mu) * math.exp(-x) - g1 * gammaincc(1 - mu, x)) / mu
        else:
            scaled = integrate.quad(lambda t: (x + t) ** (-1 - mu) * math.exp(-t), 0, math.inf,
                                    epsabs=0, epsrel=1e-10, limit=200)[0]
        out[i] = first + 0.5 * (1 - math.exp(-2 * x)) * scaled
    return out


def general_profile(params: BookShapeParams, delta) -> np.ndarray:
    """Mean book for any flow density, by quadrature in physical units:
    e^(-a D) int_0^D rho(u) sinh(a u) du + sinh(a D) int_D^inf rho(u) e^(-a u) du."""
    a = params.alpha
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    rho = lambda u: float(params.rho(u))
    out = np.zeros_like(d)
    lo = params.u_min
    pts = [lo] if lo > 0 else None
    for i, x in enumerate(d):
        if x == 0:
            continue
        # keep the exponentials bounded: e^(-a x) sinh(a u) = (e^(a(u-x)) - e^(-a(u+x))) / 2
        f1 = lambda u: rho(u) * 0.5 * (math.exp(a * (u - x)) - math.exp(-a * (u + x)))
        f2 = lambda u: rho(u) * 0.5 * (math.exp(a * (x - u)) - math.exp(-a * (x + u)))
        i1 = integrate.quad(f1, 0, x, points=[p for p in (pts or []) if p < x] or None,
                            epsabs=1e-12, epsrel=1e-10, limit=400)[0]
        i2 = integrate.quad(f2, max(x, lo), math.inf, epsabs=1e-12, epsrel=1e-10,
                            limit=400)[0]
        out[i] = i1 + i2
    return out


def mean_book_theory(params: BookShapeParams, delta) -> np.ndarray:
    """Stationary mean depth at distance delta from the midpoint.

    Exponential flow uses the closed form, normalized to unit total volume
    on the side (the limit delta a e^(-a delta) applies when a = beta).
    Power-law flow without cutoff and mu < 1 uses the rescaled form
    alpha^mu F(alpha delta); other cases fall back to quadrature.
    """
    d = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(d < 0):
        raise ValueError("delta must be non-negative")
    a = params.alpha
    if params.flow == "exponential":
        b = params.beta_e
        if math.isclose(a, b, rel_tol=1e-9):
            prof = a * b * d * np.exp(-a * d)
        else:
            prof = a * b / (a - b) * (np.exp(-b * d) - np.exp(-a * d))
        return prof
    if params.u_min == 0 and params.mu_lp < 1:
        return a ** params.mu_lp * rescaled_profile(a * d, params.mu_lp)
    return general_profile(params, d)


# ------------------------------------------------ Poisson book simulation

@dataclass
class PoissonBookRun:
    delta: np.ndarray  # ticks from the midpoint
    profile: np.ndarray  # mean resting volume
    stderr: np.ndarray
    alpha: float  # sqrt(2 nu / D) in inverse ticks


def simulate_poisson_book(mu: float = 0.6, nu: float = 1e-3, p_move: float = 0.25,
                          rate: float = 1.0, width: int = 400, n_steps: int = 200_000,
                          burn_in: int | None = None, seed: int = 0) -> PoissonBookRun:
    """Sell side of a lattice book in the frame of a random-walk midpoint.

    Each step the midpoint moves up or down one tick with probability
    ``p_move`` each (D = 2 p_move per step), orders are deposited at
    distance k >= 1 with Poisson mean rate k^(-1-mu) / zeta, resting orders
    are cancelled with probability nu, and orders at or below the midpoint
    are removed.
    """
    g = stream(seed, 60)
    k = np.arange(1, width + 1, dtype=float)
    lam = k ** (-1 - mu)
    lam = rate * lam / lam.sum()
    vol = np.zeros(width, dtype=np.int64)
    burn = burn_in if burn_in is not None else int(10 / nu)
    acc = np.zeros(width)
    nb = 20
    blocks = np.zeros((nb, width))
    per = max((n_steps) // nb, 1)
    moves = g.random(n_steps + burn)
    for t in range(n_steps + burn):
        u = moves[t]
        if u < p_move:  # midpoint up: the level at distance 1 is crossed
            vol[:-1] = vol[1:]
            vol[-1] = 0
        elif u < 2 * p_move:  # midpoint down
            vol[1:] = vol[:-1]
            vol[0] = 0
        vol -= g.binomial(vol, nu)
        vol += g.poisson(lam)
        if t >= burn:
            s = t - burn
            acc += vol
            blocks[min(s // per, nb - 1)] += vol
    prof = acc / n_steps
    bm = blocks / per
    se = bm.std(0, ddof=1) / math.sqrt(nb)
    return PoissonBookRun(k, prof, se, math.sqrt(2 * nu / (2 * p_move)))


def rescaled_deviation(sim: PoissonBookRun, mu: float, fit_x: bool = True,
                       max_delta: float | None = None, cell_offset: float = 0.5) -> dict:
    """Sup-norm gap between a simulated profile and the rescaled theory.

    Lattice level k holds the depth of the cell (k-1, k] and is placed at
    k - ``cell_offset``. The horizontal scale starts at alpha (optionally
    refined) and the vertical scale is fitted by least squares; the
    deviation is relative to the fitted curve's maximum.
    """
    x = sim.delta - cell_offset
    y = sim.profile
    m = np.ones(len(x), bool) if max_delta is None else sim.delta <= max_delta
    x, y = x[m], y[m]

    def fitted(sx):
        F = rescaled_profile(sx * x, mu)
        return F, (F * y).sum() / (F * F).sum()

    def loss(ls):
        F, c = fitted(sim.alpha * math.exp(ls))
        return float(((c * F - y) ** 2).sum())

    ls = 0.0
    if fit_x:
        ls = optimize.minimize_scalar(loss, bounds=(-1.0, 1.0), method="bounded").x
    sx = sim.alpha * math.exp(ls)
    F, c = fitted(sx)
    dev = np.abs(c * F - y).max() / (c * F).max()
    return {"sup_dev": float(dev), "x_scale": float(sx), "y_scale": float(c),
            "x_scale_ratio": float(math.exp(ls))}


# -------------------------------------------------------- Glosten-Sandas

@dataclass
class LinearBook:
    price: np.ndarray
    volume: np.ndarray  # cumulative sell volume at prices up to p
    slope: float
    intercept: float  # value at p = m

    @property
    def intercept_sign(self) -> int:
        return int(np.sign(self.intercept))

    def impact(self, v):
        """Model-implied volume-dependent impact v / slope."""
        return np.asarray(v, dtype=float) / self.slope


def glosten_sandas_book(alpha: float, G_min: float, beta: float, price, mid: float = 0.0
                        ) -> LinearBook:
    """Cumulative sell-side volume alpha (p - m) - alpha G_min - alpha / beta.

    ``beta = inf`` removes the exponential-information term.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    p = np.asarray(price, dtype=float)
    icpt = -alpha * G_min - (alpha / beta if math.isfinite(beta) else 0.0)
    return LinearBook(p, alpha * (p - mid) + icpt, alpha, icpt)


def fit_linear_book(price, volume, mid: float = 0.0) -> dict:
    """Least-squares line through a cumulative book; a positive intercept
    means the linear-book model is rejected."""
    p = np.asarray(price, dtype=float) - mid
    v = np.asarray(volume, dtype=float)
    if len(p) < 3:
        raise ValueError("need at least 3 points")
    slope, icpt = np.polyfit(p, v, 1)
    return {"slope": float(slope), "intercept": float(icpt),
            "rejected": bool(icpt > 0)}


# ------------------------------------------------------- empirical books

@dataclass
class EmpiricalProfile:
    delta: np.ndarray  # ticks from the same-side best quote
    bid: np.ndarray
    ask: np.ndarray
    bid_se: np.ndarray
    ask_se: np.ndarray
    sparsity: float  # mean fraction of empty levels within ``window`` ticks of the best
    gaps: np.ndarray  # first gaps, both sides pooled
    best_volumes: np.ndarray
    gamma_shape: float  # gamma fit of the best volume (location 0)
    n_snapshots: int

    @property
    def average(self) -> np.ndarray:
        return 0.5 * (self.bid + self.ask)


def empirical_book_profile(snapshots, depth: int = 30, window: int = 10,
                           min_snapshots: int = 10_000) -> EmpiricalProfile:
    """Time-average depth against distance from the best quote, with
    sparsity, first-gap and best-volume statistics.

    ``snapshots`` is a sequence of BookState objects (two-sided ones are used).
    """
    rows_b, rows_a, sparse, gaps, best = [], [], [], [], []
    for bk in snapshots:
        if not isinstance(bk, BookState):
            raise TypeError("snapshots must be BookState objects")
        b, a = bk.best_bid, bk.best_ask
        if b is None or a is None:
            continue
        pb = np.zeros(depth)
        pa = np.zeros(depth)
        for p, v in bk.bids.depth.items():
            d = int(round((b - p)))
            if d < depth:
                pb[d] += v
        for p, v in bk.asks.depth.items():
            d = int(round((p - a)))
            if d < depth:
                pa[d] += v
        rows_b.append(pb)
        rows_a.append(pa)
        w = min(window, depth)
        sparse.append(0.5 * ((pb[:w] == 0).mean() + (pa[:w] == 0).mean()))
        for sd in (bk.bids, bk.asks):
            if len(sd.prices) > 1:
                it = sd.walk()
                p0 = next(it)
                gaps.append(abs(next(it) - p0))
        best.extend([pb[0], pa[0]])
    n = len(rows_b)
    if n < min_snapshots:
        raise ValueError(f"only {n} two-sided snapshots (need {min_snapshots})")
    B = np.array(rows_b)
    A = np.array(rows_a)

    def mse(X):
        nb = 20
        bm = np.array([c.mean(0) for c in np.array_split(X, nb)])
        return X.mean(0), bm.std(0, ddof=1) / math.sqrt(nb)

    mb, sb = mse(B)
    ma, sa = mse(A)
    bv = np.array(best, dtype=float)
    shape = float(stats.gamma.fit(bv[bv > 0], floc=0)[0]) if np.sum(bv > 0) > 10 else math.nan
    return EmpiricalProfile(np.arange(depth), mb, ma, sb, sa, float(np.mean(sparse)),
                            np.array(gaps, dtype=float), bv, shape, n)
