"""Spread economics: sequential-trade and MRR spread models, strategy gains,
the spread/impact phase diagram, a market-making backtest and spread decay.

Sequential-trade update rule. With probability q a trade comes from an
informed trader who buys iff the end-of-day price is the high outcome; noise
traders buy or sell with probability 1/2. The likelihood of a buy is
(1+q)/2 under the high outcome and (1-q)/2 under the low one, so a trade of
sign e maps the belief d = P(high) to

    d' = d (1 + e q) / (1 + e q (2d - 1)).

Under the model's own sign law d is a martingale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .estimators import (batch_mean_se, fit_power_law, response_function,
                         sign_autocorr)
from .rng import stream
from .series import LaggedCurve, TradeSeries


# ----------------------------------------------------- sequential trades

@dataclass(frozen=True)
class GmState:
    q: float
    p_hi: float
    p_lo: float
    delta: float = 0.5
    n: int = 0

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")
        if not self.p_hi > self.p_lo:
            raise ValueError("need p_hi > p_lo")
        if not 0 <= self.delta <= 1:
            raise ValueError("belief must lie in [0, 1]")

    @property
    def spread(self) -> float:
        """First-order spread 4 q d (1-d) (p_hi - p_lo)."""
        return 4 * self.q * self.delta * (1 - self.delta) * (self.p_hi - self.p_lo)

    def posterior(self, sign: int) -> float:
        d, q = self.delta, self.q
        num = d * (1 + sign * q)
        den = 1 + sign * q * (2 * d - 1)
        if den <= 0:
            # the trade is impossible under the current belief: stay on the boundary
            return d
        return min(max(num / den, 0.0), 1.0)

    def quotes(self) -> tuple[float, float]:
        """Regret-free ask and bid: the expected value after a buy or a sell."""
        up, dn = self.posterior(1), self.posterior(-1)
        ask = up * self.p_hi + (1 - up) * self.p_lo
        bid = dn * self.p_hi + (1 - dn) * self.p_lo
        return ask, bid


def gm_step(state: GmState, sign: int) -> tuple[GmState, float]:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    new = replace(state, delta=state.posterior(sign), n=state.n + 1)
    return new, new.spread


@dataclass
class GmRun:
    delta: np.ndarray  # (days, n+1)
    spread: np.ndarray  # (days, n+1)
    signs: np.ndarray  # (days, n)
    outcome: np.ndarray  # +1 high, -1 low

    def mean_spread(self) -> np.ndarray:
        return self.spread.mean(0)


def simulate_gm(q: float, p_hi: float, p_lo: float, n_days: int, n_trades: int,
                seed: int) -> GmRun:
    """Many independent days; the outcome of each day is drawn from the 1/2 prior."""
    s0 = GmState(q, p_hi, p_lo)
    g = stream(seed, 40)
    outcome = np.where(g.random(n_days) < 0.5, 1, -1).astype(np.int8)
    u_type = g.random((n_days, n_trades))
    u_noise = g.random((n_days, n_trades))
    delta, signs = kernels.gm_paths(u_type, u_noise, outcome, q, s0.delta)
    spread = 4 * q * delta * (1 - delta) * (p_hi - p_lo)
    return GmRun(delta, spread, signs, outcome)


def martingale_drift(run: GmRun) -> tuple[float, float]:
    """Mean one-step belief change pooled over days and trades, with its SE.

    Days are independent, so the SE comes from per-day means.
    """
    d = np.diff(run.delta, axis=1).mean(1)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))


# ----------------------------------------------------- MRR with a spread

@dataclass
class MrrSpreadModel:
    rho: float
    theta: float
    phi: float

    @property
    def spread(self) -> float:
        return 2 * (self.theta + self.phi)

    @property
    def lam(self) -> float:
        return 1.0 / (1.0 - self.rho)

    @property
    def R1(self) -> float:
        return self.theta * (1 - self.rho)

    def R(self, l) -> np.ndarray:
        l = np.asarray(l, dtype=float)
        return self.theta * (1 - self.rho ** l)

    def limit_order_cost(self, spread: float | None = None) -> float:
        """-S/2 + R_1 / (1 - rho); zero at S = 2 theta."""
        S = self.spread if spread is None else spread
        return -0.5 * S + self.R1 / (1 - self.rho)

    def simulate(self, n: int, seed: int, sigma: float = 0.0, vol=None) -> TradeSeries:
        """Fundamental price hit by sign surprises, quotes set around it.

        ``mid`` holds the quote midpoint before each trade (plus one after
        the last); ``extra['p']`` the fundamental price.
        """
        from .flow import gen_signs

        eps = gen_signs("mrr", n + 1, seed, rho=self.rho).astype(float)
        eta = sigma * stream(seed, 41).standard_normal(n) if sigma else np.zeros(n)
        prev = np.concatenate([[0.0], eps[:-1]])
        dp = eta + self.theta * (eps[:n] - self.rho * prev[:n])
        p = np.concatenate([[0.0], np.cumsum(dp)])
        mid = p - self.theta * self.rho * prev
        ask = mid + self.theta + self.phi
        bid = mid - self.theta - self.phi
        price = np.where(eps[:n] > 0, ask[:n], bid[:n])
        v = np.ones(n) if vol is None else np.asarray(vol, dtype=float)
        return TradeSeries(eps[:n], v, mid, spread=(ask - bid)[:n],
                           extra={"p": p, "price": price})


def mrr_spread_model(rho: float, theta: float, phi: float = 0.0) -> MrrSpreadModel:
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    return MrrSpreadModel(rho, theta, phi)


# ------------------------------------------------------- strategy gains

def strategy_gains(x: float, y: float, C1: float, lam: float) -> dict:
    """Per-unit-volume gains of the strategies in the spread/impact plane.

    ``mm_fast`` and ``mm_slow`` are the market-making limits beta -> 0 and
    beta -> 1 (per unit tendered volume).
    """
    if x < 0 or y < 0:
        raise ValueError("x and y must be non-negative")
    if not abs(C1) < 1:
        raise ValueError("|C1| must be below 1")
    return {
        "market": lam * x - y / 2,
        "copycat": (lam - 1) * x - y / 2,
        "mm_fast": y * (1 - C1) / 2 - x,
        "mm_slow": y / 2 - lam * x,
        "provider": y / 2 - lam * x,
        "bound_ok": y <= 2 * x / (1 - C1),
    }


def mm_gain_theory(beta: float, R, C, y: float) -> float:
    """Gain per unit tendered volume of the inventory-reverting market maker.

    First order in the tendered fraction, unit volumes: the spread term is
    (y/2) [1 - (1-b) sum_j b^(j-1) C_j], the impact term
    (1-b) sum_l b^(l-1) R_l. ``R`` and ``C`` hold lags 1..L; R is held at
    its last value and C at zero beyond L.
    """
    R = np.asarray(getattr(R, "values", R), dtype=float)
    C = np.asarray(getattr(C, "values", C), dtype=float)
    w = _geo_weights(beta, max(len(R), len(C)))
    sc = (w[: len(C)] * C).sum()
    imp = (w[: len(R)] * R).sum() + R[-1] * beta ** len(R)
    return float(y / 2 * (1 - sc) - imp)


def _geo_weights(beta: float, L: int) -> np.ndarray:
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    return (1 - beta) * beta ** np.arange(L)


def lambda_beta(beta: float, R, C) -> float:
    """Slope factor of the zero-gain line y = 2 lambda_beta x, from the
    supplied response and sign-correlation curves (R_1 sets x)."""
    R = np.asarray(getattr(R, "values", R), dtype=float)
    C = np.asarray(getattr(C, "values", C), dtype=float)
    w = _geo_weights(beta, max(len(R), len(C)))
    sc = (w[: len(C)] * C).sum()
    imp = (w[: len(R)] * R).sum() + R[-1] * beta ** len(R)
    return float(imp / R[0] / (1 - sc))


# ------------------------------------------------------ phase diagram

REGIONS = ("above-red", "PMM", "neutral-wedge", "PCC", "below-blue")


@dataclass
class PhasePoint:
    x: float
    y: float
    C1: float
    lam: float
    region: str
    lambda_beta: float
    flags: dict

    def as_record(self) -> dict:
        return {"x": self.x, "y": self.y, "C1": self.C1, "lambda": self.lam,
                "region": self.region, "lambda_beta": self.lambda_beta}


def classify(x: float, y: float, C1: float, lam: float, lam_b: float,
             tol: float = 1e-12) -> tuple[str, dict]:
    if x < 0 or y < 0:
        raise ValueError("x and y must be non-negative")
    red, blue, green, black = 2 * lam, 2 / (1 - C1), 2 * (lam - 1), 2 * lam_b
    flags = {"above_red": y > red * x + tol, "below_blue": y < blue * x - tol,
             "above_black": y > black * x + tol, "below_green": y < green * x - tol}
    if flags["above_red"]:
        region = "above-red"
    elif flags["above_black"]:
        region = "PMM"
    elif not flags["below_blue"]:
        region = "neutral-wedge"
    elif flags["below_green"] and y > 0:
        region = "PCC"
    else:
        region = "below-blue"
    return region, flags


def phase_point(series: TradeSeries, L: int = 100, n_bins: int = 10,
                beta: float = 0.5) -> PhasePoint:
    """Locate a trade series in the spread/impact plane.

    R_1(v) uses equal-count volume bins; lambda = R_L / R_1.
    """
    if series.spread is None:
        raise ValueError("phase_point needs a spread column")
    n = len(series)
    v = series.vol
    r1 = series.eps * (series.mid[1:n + 1] - series.mid[:n]) if len(series.mid) > n else \
        series.eps[:-1] * np.diff(series.mid)
    m = len(r1)
    order = np.argsort(v[:m], kind="stable")
    num = 0.0
    for idx in np.array_split(order, n_bins):
        if len(idx):
            num += v[idx].sum() * r1[idx].mean()
    x = num / v[:m].sum()
    y = float((v * series.spread).sum() / v.sum())
    R = response_function(series, L)
    C = sign_autocorr(series.eps, min(L, n // 10))
    C1 = float(C.values[0])
    lam = float(R.values[-1] / R.values[0])
    lb = lambda_beta(beta, R.values, C.values)
    region, flags = classify(x, y, C1, lam, lb)
    return PhasePoint(float(x), y, C1, lam, region, lb, flags)


# ---------------------------------------------------- market making

@dataclass
class MmBacktest:
    phi: np.ndarray
    inventory: np.ndarray
    gain: float  # per unit tendered volume, boundary term excluded
    gain_se: float
    boundary: float  # -|V_T| S_T / 2, the cost of flattening at the end
    beta_hat: float
    max_inventory: float


def mm_backtest(series: TradeSeries, phi0: float, alpha: float, v0: float = 0.0) -> MmBacktest:
    """Market maker providing phi_i = phi0 (1 + alpha V_i eps_i) of each trade.

    Results are first order in phi0. Inventory is marked to the midquote
    after each trade; the gain per step is phi v S/2 plus the inventory
    change in value.
    """
    if series.spread is None:
        raise ValueError("mm_backtest needs a spread column")
    n = len(series)
    if len(series.mid) != n + 1:
        raise ValueError("mm_backtest needs the midquote after the last trade")
    Ev = float(series.vol.mean())
    if alpha * phi0 * Ev >= 1:
        raise ValueError("unstable parameters: alpha * phi0 * E[v] must be below 1")
    if phi0 <= 0 or alpha < 0:
        raise ValueError("need phi0 > 0 and alpha >= 0")
    phi, inv = kernels.mm_inventory(series.eps, series.vol, phi0, alpha, v0)
    tendered = phi * series.vol
    dG = tendered * series.spread / 2 + inv[1:] * np.diff(series.mid)
    scale = tendered.mean()
    g, se = batch_mean_se(dG / scale)
    boundary = -abs(inv[-1]) * series.spread[-1] / 2
    return MmBacktest(phi, inv, g, se, float(boundary), 1 - alpha * phi0 * Ev,
                      float(np.abs(inv).max()))


# ------------------------------------------------------- spread decay

def spread_decay(spread, delta: float, taus, tol: float = 1e-9, min_events: int = 30,
                 window=None) -> LaggedCurve:
    """G(tau | Delta) = E[S_{t+tau} | S_t - S_{t-1} = Delta] - E[S].

    Undefined spreads (NaN, one-sided book) are skipped throughout.
    """
    S = np.asarray(spread, dtype=float)
    taus = np.asarray(taus, dtype=int)
    dS = np.diff(S)
    with np.errstate(invalid="ignore"):
        t = np.flatnonzero(np.abs(dS - delta) <= tol) + 1
    t = t[t + taus.max() < len(S)]
    if len(t) < min_events:
        raise ValueError(f"only {len(t)} conditioning events (need {min_events})")
    mean = np.nanmean(S)
    vals, ses = [], []
    for tau in taus:
        x = S[t + tau] - mean
        x = x[np.isfinite(x)]
        vals.append(x.mean())
        ses.append(x.std(ddof=1) / math.sqrt(len(x)))
    c = LaggedCurve(taus, vals, ses, meta={"n_events": int(len(t)), "delta": delta})
    if len(taus) >= 3 and taus.min() > 0:
        c.fit = fit_power_law(c, window or (int(taus.min()), int(taus.max())))
    return c


def decay_shape(curve: LaggedCurve) -> dict:
    """R^2 of log-log (power law) and log-linear (exponential) fits."""
    m = curve.values > 0
    lags, y = curve.lags[m].astype(float), np.log(curve.values[m])

    def r2(x):
        c = np.polyfit(x, y, 1)
        res = y - np.polyval(c, x)
        return 1 - res.var() / y.var()

    return {"powerlaw_r2": float(r2(np.log(lags))), "exponential_r2": float(r2(lags))}


# -------------------------------------------------- spread and volatility

def stock_aggregates(series: TradeSeries) -> dict:
    """Per-stock inputs to ``spread_vol_relation``."""
    if series.spread is None:
        raise ValueError("need a spread column")
    n = len(series)
    r = np.diff(series.mid)[:n]
    e = series.eps[: len(r)]
    v = series.vol[: len(r)]
    S = series.spread[: len(r)]
    return {"sigma1": float(math.sqrt((r ** 2).mean())), "R1": float((e * r).mean()),
            "ES": float(S.mean()), "EvS": float((v * S).mean()), "Ev": float(v.mean()),
            "EvR1": float((v * e * r).mean())}


def spread_vol_relation(rows) -> dict:
    """Cross-sectional regressions over stocks or disjoint periods.

    sigma1^2 = A R1^2 + Sigma^2 (OLS with intercept), E[S] = C sigma1
    (through the origin), and the universality ratios
    B = E[vS]/(E[v]E[S]) and B' = E[v R1(v)]/(E[v] R1) averaged over rows.
    """
    rows = list(rows)
    if len(rows) < 10:
        raise ValueError("need at least 10 stocks or periods")
    s1 = np.array([r["sigma1"] for r in rows])
    R1 = np.array([r["R1"] for r in rows])
    ES = np.array([r["ES"] for r in rows])
    X = R1 ** 2
    if np.ptp(X) <= 1e-15 * max(abs(X).max(), 1e-300) or np.ptp(s1) == 0:
        raise ValueError("degenerate regression: no cross-sectional variation")
    A, Sig2 = np.polyfit(X, s1 ** 2, 1)
    C = float((ES * s1).sum() / (s1 ** 2).sum())
    B = float(np.mean([r["EvS"] / (r["Ev"] * r["ES"]) for r in rows]))
    Bp = float(np.mean([r["EvR1"] / (r["Ev"] * r["R1"]) for r in rows]))
    return {"A": float(A), "Sigma2": float(Sig2), "C": C, "B": B, "B_prime": Bp}


def sigma_per_time(sigma1: float, f: float) -> float:
    """Volatility per unit time from volatility per trade and trade frequency."""
    return sigma1 * math.sqrt(f)
