"""Estimators applied to trade series, simulated or ingested.

Standard errors on long-memory series use non-overlapping batch means with
batch length n^(2/3).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import gammaln

from .rng import stream
from .series import LaggedCurve, PowerLawFit, TradeSeries


# ----------------------------------------------------------- batch helpers

def _batches(n: int) -> list[tuple[int, int]]:
    bl = max(int(round(n ** (2.0 / 3.0))), 1)
    nb = max(n // bl, 1)
    edges = [i * bl for i in range(nb)] + [n]
    return list(zip(edges[:-1], edges[1:]))


def _xcorr(a: np.ndarray, b: np.ndarray, L: int) -> np.ndarray:
    """out[l] = sum_i a[i] * b[i + l] for l = 0..L, with b zero beyond its end."""
    m = len(a) + len(b)
    nfft = 1 << (m - 1).bit_length()
    fa = np.fft.rfft(a, nfft)
    fb = np.fft.rfft(b, nfft)
    return np.fft.irfft(np.conj(fa) * fb, nfft)[: L + 1]


def lagged_products(a, b, L: int, *, subtract_same: bool = False):
    """Batch sums of a_n * b_{n+l} (or a_n * (b_{n+l} - b_n)) for l = 0..L.

    Returns ``(sums, counts)`` of shape (n_batches, L+1); a pair (n, n+l)
    belongs to the batch containing n.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    lags = np.arange(L + 1)
    bs = _batches(n)
    sums = np.empty((len(bs), L + 1))
    counts = np.empty((len(bs), L + 1))
    ab = np.concatenate([[0.0], np.cumsum(a * b)]) if subtract_same else None
    for k, (s, e) in enumerate(bs):
        seg = _xcorr(a[s:e], b[s:min(e + L, n)], L)
        hi = np.clip(np.minimum(e, n - lags), s, None)
        counts[k] = hi - s
        if subtract_same:
            seg = seg - (ab[hi] - ab[s])
        sums[k] = seg
    return sums, counts


def _mean_se(sums: np.ndarray, counts: np.ndarray):
    tot = counts.sum(0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums.sum(0) / tot
        bm = sums / counts
    B = sums.shape[0]
    if B < 2:
        return mean, np.full_like(mean, np.nan)
    ok = counts > 0
    se = np.empty_like(mean)
    for j in range(len(mean)):
        v = bm[ok[:, j], j]
        se[j] = v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else np.nan
    return mean, se


def batch_mean_se(x) -> tuple[float, float]:
    """Mean and batch-means standard error of a (possibly correlated) series."""
    x = np.asarray(x, dtype=float)
    bs = _batches(len(x))
    bm = np.array([x[s:e].mean() for s, e in bs])
    se = bm.std(ddof=1) / math.sqrt(len(bm)) if len(bm) > 1 else math.nan
    return float(x.mean()), float(se)


# ------------------------------------------------------------ power laws

def fit_power_law(curve: LaggedCurve, window: tuple[int, int] | None = None) -> PowerLawFit:
    """OLS fit of log|value| on log lag over ``window`` (default [10, L/10]).

    Non-positive values inside the window are skipped.
    """
    L = int(curve.lags.max())
    lo, hi = window if window is not None else (10, max(L // 10, 11))
    m = (curve.lags >= lo) & (curve.lags <= hi) & (curve.values > 0)
    if m.sum() < 3:
        return PowerLawFit(math.nan, math.nan, (lo, hi), math.nan, int(m.sum()))
    x = np.log(curve.lags[m])
    y = np.log(curve.values[m])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    r2 = 1.0 - resid.var() / y.var() if y.var() > 0 else math.nan
    return PowerLawFit(float(math.exp(icpt)), float(-slope), (lo, hi), float(r2), int(m.sum()))


# ---------------------------------------------------------- correlations

def sign_autocorr(eps, L: int, window: tuple[int, int] | None = None) -> LaggedCurve:
    """Sign autocorrelation C_1..C_L, normalized so C_0 = 1, with a power-law fit."""
    e = np.asarray(eps, dtype=float)
    n = len(e)
    if n < 10 * L:
        raise ValueError("need at least 10 L observations")
    var = e.var()
    if var == 0:
        nanv = np.full(L, np.nan)
        return LaggedCurve(np.arange(1, L + 1), nanv, np.zeros(L), meta={"degenerate": True})
    x = e - e.mean()
    sums, counts = lagged_products(x, x, L)
    mean, se = _mean_se(sums, counts)
    c = LaggedCurve(np.arange(1, L + 1), mean[1:] / var, se[1:] / var,
                    meta={"C0": 1.0, "degenerate": False, "n": n})
    c.fit = fit_power_law(c, window)
    return c


def autocorr_raw(x, L: int) -> np.ndarray:
    """Plain sample means of x_n x_{n+l}, l = 0..L (no demeaning)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    out = _xcorr(x, x, L)
    return out / (n - np.arange(L + 1))


def decompose_by_agent(eps, agent, L: int, window: tuple[int, int] | None = None) -> dict:
    """Sign correlations conditioned on the two trades sharing an agent label.

    C^same_l = E[eps_n eps_{n+l} | same agent], C^diff_l likewise for
    different agents, and C^all_l unconditionally.
    """
    if agent is None:
        raise ValueError("agent labels are required")
    e = np.asarray(eps, dtype=float)
    ag = np.asarray(agent)
    n = len(e)
    if len(ag) != n:
        raise ValueError("agent labels must match the series length")
    labels, inv = np.unique(ag, return_inverse=True)
    s_all, c_all = lagged_products(e, e, L)
    if len(labels) <= 256:
        s_same = np.zeros_like(s_all)
        c_same = np.zeros_like(s_all)
        for k in range(len(labels)):
            ind = (inv == k).astype(float)
            s, _ = lagged_products(e * ind, e * ind, L)
            c, _ = lagged_products(ind, ind, L)
            s_same += s
            c_same += np.rint(c)  # pair counts are integers
    else:
        bs = _batches(n)
        s_same = np.zeros((len(bs), L + 1))
        c_same = np.zeros((len(bs), L + 1))
        for l in range(L + 1):
            same = inv[: n - l] == inv[l:]
            prod = e[: n - l] * e[l:]
            for k, (s, t) in enumerate(bs):
                t = min(t, n - l)
                if t <= s:
                    continue
                m = same[s:t]
                s_same[k, l] = prod[s:t][m].sum()
                c_same[k, l] = m.sum()
    lags = np.arange(1, L + 1)
    out = {}
    for name, (s, c) in {
        "same": (s_same, c_same),
        "diff": (s_all - s_same, c_all - c_same),
        "all": (s_all, c_all),
    }.items():
        mean, se = _mean_se(s, c)
        curve = LaggedCurve(lags, mean[1:], np.nan_to_num(se[1:], nan=0.0),
                            meta={"pairs": c.sum(0)[1:], "batch_sums": s[:, 1:], "batch_counts": c[:, 1:]})
        curve.fit = fit_power_law(curve, window)
        out[name] = curve
    return out


def pooled_mean_se(curve: LaggedCurve, lo: int, hi: int) -> tuple[float, float]:
    """Pair-weighted mean of a decomposed curve over lags lo..hi.

    The standard error comes from per-batch pooled means, so the strong
    correlation between neighbouring lags is accounted for.
    """
    S, C = curve.meta["batch_sums"], curve.meta["batch_counts"]
    m = (curve.lags >= lo) & (curve.lags <= hi)
    s, c = S[:, m].sum(1), C[:, m].sum(1)
    ok = c > 0
    bm = s[ok] / c[ok]
    se = bm.std(ddof=1) / math.sqrt(len(bm)) if len(bm) > 1 else math.nan
    return float(s.sum() / c.sum()), float(se)


# ---------------------------------------------------------- Hurst / R-S

def _rs_blocks(x: np.ndarray, s: int) -> float:
    m = len(x) // s
    blk = x[: m * s].reshape(m, s)
    dev = blk - blk.mean(1, keepdims=True)
    z = np.cumsum(dev, 1)
    R = z.max(1) - z.min(1)
    S = blk.std(1)
    ok = S > 0
    return float((R[ok] / S[ok]).mean())


def _anis_lloyd(s: int) -> float:
    i = np.arange(1, s)
    tail = np.sqrt((s - i) / i).sum()
    if s <= 340:
        g = math.exp(gammaln((s - 1) / 2) - gammaln(s / 2)) / math.sqrt(math.pi)
    else:
        g = 1.0 / math.sqrt(s * math.pi / 2)
    return (s - 0.5) / s * g * tail


def lo_statistic(x, q: int | None = None) -> float:
    """Lo's modified rescaled range V = Q_n / sqrt(n) with Newey-West
    bandwidth q = floor(4 (n/100)^(1/4))."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if q is None:
        q = int(math.floor(4 * (n / 100) ** 0.25))
    d = x - x.mean()
    z = np.cumsum(d)
    R = max(z.max(), 0.0) - min(z.min(), 0.0)
    g0 = d @ d / n
    s2 = g0
    for j in range(1, q + 1):
        s2 += 2 * (1 - j / (q + 1)) * (d[:-j] @ d[j:]) / n
    return float(R / math.sqrt(s2) / math.sqrt(n))


def hurst(x, method: str = "rs", min_block: int = 16) -> dict:
    """Hurst exponent by rescaled-range analysis.

    ``rs``: slope of log(R/S) against block size, corrected by the
    Anis-Lloyd expectation for short-memory data. ``lo_modified`` also
    returns Lo's statistic and the 5% decision against short memory
    (acceptance region [0.809, 1.862]).
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 1000:
        raise ValueError("series too short for R/S analysis (need n >= 1000)")
    sizes = np.unique(np.logspace(math.log10(min_block), math.log10(n // 4), 20).astype(int))
    rs = np.array([_rs_blocks(x, s) for s in sizes])
    al = np.array([_anis_lloyd(s) for s in sizes])
    slope = np.polyfit(np.log(sizes), np.log(rs) - np.log(al), 1)[0]
    out = {"H": float(0.5 + slope), "method": method, "sizes": sizes, "rs": rs}
    if method == "lo_modified":
        v = lo_statistic(x)
        out.update(statistic=v, reject=bool(v < 0.809 or v > 1.862))
    elif method != "rs":
        raise ValueError(f"unknown method {method!r}")
    return out


# ---------------------------------------------------------- response

def response_function(series: TradeSeries, L: int) -> LaggedCurve:
    """R_l = <eps_n (m_{n+l} - m_n)> for l = 1..L with batch-means errors."""
    n = len(series)
    m = series.mid
    if L >= len(m):
        raise ValueError("L must be smaller than the series length")
    e = np.zeros(len(m))
    e[:n] = series.eps
    mc = m - m.mean()
    sums, counts = lagged_products(e, mc, L, subtract_same=True)
    mean, se = _mean_se(sums, counts)
    return LaggedCurve(np.arange(1, L + 1), mean[1:], np.nan_to_num(se[1:]))


def return_autocorr(series: TradeSeries, L: int = 10) -> LaggedCurve:
    r = series.returns
    r = r - r.mean()
    sums, counts = lagged_products(r, r, L)
    mean, se = _mean_se(sums, counts)
    v = mean[0]
    return LaggedCurve(np.arange(1, L + 1), mean[1:] / v, se[1:] / v)


def variance_function(series: TradeSeries, lags) -> LaggedCurve:
    """V_l = <(m_{n+l} - m_n)^2> at the given lags."""
    m = series.mid
    lags = np.asarray(lags, dtype=int)
    vals, ses = [], []
    for l in lags:
        d = (m[l:] - m[:-l]) ** 2
        mu, se = batch_mean_se(d)
        vals.append(mu)
        ses.append(se)
    return LaggedCurve(lags, vals, np.nan_to_num(ses))


# ------------------------------------------------------ propagator maps

def predict_response(g, C, L: int | None = None, c_zero: float = 1.0) -> np.ndarray:
    """Average response R_1..R_L from a propagator and sign correlations.

    ``g[k]`` is G(k+1) and ``C[j-1]`` is C_j. G is held constant beyond the
    end of ``g``; the sum over past trades runs over the lags where C is
    given. Requires C_1..C_{L-1}.
    """
    g = np.asarray(g, dtype=float)
    C = np.asarray(C, dtype=float)
    L = len(g) if L is None else int(L)
    if len(C) < L - 1:
        raise ValueError("C must cover lags 1..L-1")
    M = len(C)
    ext = np.concatenate([g, np.full(max(L + M + 1 - len(g), 0), g[-1])])

    def G(x):  # x >= 1
        return ext[x - 1]

    ells = np.arange(1, L + 1)
    t1 = c_zero * G(ells)
    t2 = np.convolve(g[:L], C[:L])[: L + 1]  # t2[l-2] = sum_{j=1}^{l-1} G(l-j) C_j
    t2 = np.concatenate([[0.0], t2[: L - 1]])
    js = np.arange(1, M + 1)
    base = (G(js) * C).sum()
    t3 = np.empty(L)
    step = max(1, 2_000_000 // max(M, 1))
    for s in range(0, L, step):
        blk = ells[s:s + step]
        t3[s:s + step] = (G(blk[:, None] + js[None, :]) * C[None, :]).sum(1) - base
    return t1 + t2 + t3


def response_matrix(C, L: int, c_zero: float = 1.0) -> np.ndarray:
    """Matrix A with R = A @ g on the lag grid 1..L (G flat beyond L)."""
    C = np.asarray(C, dtype=float)
    M = len(C)
    A = np.zeros((L, L))
    idx = np.arange(L)
    A[idx, idx] += c_zero
    for j in range(1, min(L, M + 1)):
        A[idx[j:], idx[j:] - j] += C[j - 1]
    js = np.arange(1, M + 1)
    for l in range(1, L + 1):
        cols = np.minimum(l + js, L) - 1
        np.add.at(A[l - 1], cols, C)
        np.add.at(A[l - 1], np.minimum(js, L) - 1, -C)
    return A


@dataclass
class PropagatorFit:
    G: LaggedCurve
    condition: float
    fit: dict | None = None


def fit_propagator_form(G: np.ndarray, lags=None):
    """Least-squares fit of G(l) = Gamma0 / (l0^2 + l^2)^(beta/2)."""
    G = np.asarray(G, dtype=float)
    lags = np.arange(1, len(G) + 1) if lags is None else np.asarray(lags, dtype=float)

    def f(l, g0, l0, b):
        return g0 / (l0 ** 2 + l ** 2) ** (b / 2)

    p, _ = curve_fit(f, lags, G, p0=(G[0] * 2, 1.0, 0.3),
                     bounds=([0, 0, -1], [np.inf, np.inf, 3]), maxfev=20000)
    return {"Gamma0": float(p[0]), "l0": float(p[1]), "beta": float(p[2])}


def extract_propagator(R, C, *, ridge: float = 1e-10, c_zero: float = 1.0,
                       fit: bool = False, refine: int = 3) -> PropagatorFit:
    """Invert the response relation for G(1..L) given R(1..L) and C.

    Uses a Tikhonov-regularized SVD solve with relative ridge ``ridge``,
    followed by ``refine`` iterated-Tikhonov residual corrections (these
    remove the ridge bias on well-resolved directions and leave directions
    below the ridge damped). A RuntimeWarning is issued when the condition
    number exceeds 1e8.
    """
    R = np.asarray(getattr(R, "values", R), dtype=float)
    C = np.asarray(getattr(C, "values", C), dtype=float)
    L = len(R)
    if L < 2:
        raise ValueError("need at least two lags")
    if len(C) < L - 1:
        raise ValueError("C must cover lags 1..L-1")
    A = response_matrix(C, L, c_zero)
    U, s, Vt = np.linalg.svd(A)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    if cond > 1e8:
        warnings.warn(f"propagator system ill-conditioned (cond={cond:.3g})", RuntimeWarning)
    lam = ridge * s[0] ** 2
    filt = s / (s ** 2 + lam)
    g = Vt.T @ (filt * (U.T @ R))
    for _ in range(refine):
        g = g + Vt.T @ (filt * (U.T @ (R - A @ g)))
    curve = LaggedCurve(np.arange(1, L + 1), g, np.zeros(L), meta={"condition": cond})
    out = PropagatorFit(curve, cond)
    if fit:
        out.fit = fit_propagator_form(g)
    return out


# ---------------------------------------------- asymmetric liquidity

def _equal_count_bins(x: np.ndarray, n_bins: int) -> list[np.ndarray]:
    order = np.argsort(x, kind="stable")
    return [b for b in np.array_split(order, n_bins) if len(b)]


def fit_ar(eps, K: int) -> np.ndarray:
    """Least-squares AR(K) coefficients of a sign series (no intercept)."""
    e = np.asarray(eps, dtype=float)
    n = len(e)
    if n <= 10 * K:
        raise ValueError("series too short for the requested order")
    X = np.column_stack([e[K - i:n - i] for i in range(1, K + 1)])
    y = e[K:]
    XtX = X.T @ X
    if np.linalg.matrix_rank(XtX) < K:
        raise ValueError("singular design matrix")
    return np.linalg.solve(XtX, X.T @ y)


@dataclass
class ConditionalReturns:
    coeffs: np.ndarray
    eps_hat: np.ndarray
    abs_hat: np.ndarray  # bin mean |eps_hat|
    phi_plus: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    se_plus: np.ndarray
    se_minus: np.ndarray
    residual: np.ndarray  # phi+ r+ - phi- r-
    residual_se: np.ndarray
    slope_plus: float
    intercept_plus: float
    slope_minus: float
    intercept_minus: float


def _line(x, y):
    # slope is undefined when the regressor takes a single value
    if len(x) < 2 or np.ptp(x) < 1e-12 * max(1.0, np.abs(x).max()):
        return math.nan, float(np.mean(y)) if len(y) else math.nan
    return np.polyfit(x, y, 1)


def conditional_returns(series: TradeSeries, K: int, n_bins: int = 10) -> ConditionalReturns:
    """Returns split by whether the trade sign agreed with its AR(K) forecast.

    With s = sign(eps_hat), r+ = <s r | eps = s> and r- = <-s r | eps = -s>,
    binned on |eps_hat| with equal counts. Slopes are per-observation OLS
    of s r (matched) and -s r (unmatched) against |eps_hat|.
    """
    e = series.eps.astype(float)
    r = series.returns
    n = min(len(e), len(r))
    a = fit_ar(e[:n], K)
    hat = np.zeros(n)
    for i in range(1, K + 1):
        hat[K:] += a[i - 1] * e[K - i:n - i]
    hat, ee, rr = hat[K:], e[K:n], r[K:n]
    s = np.where(hat >= 0, 1.0, -1.0)
    x = np.abs(hat)
    match = ee == s
    sr = s * rr
    out = {k: [] for k in ("x", "phi", "rp", "rm", "sp", "sm", "res", "rse")}
    for b in _equal_count_bins(x, n_bins):
        mb = match[b]
        p = mb.mean()
        rp = sr[b][mb]
        rm = -sr[b][~mb]
        out["x"].append(x[b].mean())
        out["phi"].append(p)
        out["rp"].append(rp.mean() if len(rp) else np.nan)
        out["rm"].append(rm.mean() if len(rm) else np.nan)
        out["sp"].append(rp.std(ddof=1) / math.sqrt(len(rp)) if len(rp) > 1 else np.nan)
        out["sm"].append(rm.std(ddof=1) / math.sqrt(len(rm)) if len(rm) > 1 else np.nan)
        out["res"].append(sr[b].mean())
        out["rse"].append(sr[b].std(ddof=1) / math.sqrt(len(b)))
    sp, ip = _line(x[match], sr[match])
    sm, im = _line(x[~match], -sr[~match])
    arr = {k: np.array(v) for k, v in out.items()}
    return ConditionalReturns(a, hat, arr["x"], arr["phi"], arr["rp"], arr["rm"], arr["sp"],
                              arr["sm"], arr["res"], arr["rse"], float(sp), float(ip),
                              float(sm), float(im))


# ---------------------------------------------------------- impact curves

@dataclass
class BinnedCurve:
    x: np.ndarray
    y: np.ndarray
    se: np.ndarray
    count: np.ndarray
    scale: float = 1.0  # Q*_N used for the rescaled variant

    def rescaled(self) -> "BinnedCurve":
        return BinnedCurve(self.x / self.scale, self.y / self.scale, self.se / self.scale,
                           self.count, 1.0)


def binned_mean(x, y, n_bins: int) -> BinnedCurve:
    """Equal-count bins on ``x``; mean of x and y per bin with iid SE."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys, ss, cs = [], [], [], []
    for b in _equal_count_bins(x, n_bins):
        xs.append(x[b].mean())
        ys.append(y[b].mean())
        ss.append(y[b].std(ddof=1) / math.sqrt(len(b)) if len(b) > 1 else 0.0)
        cs.append(len(b))
    return BinnedCurve(np.array(xs), np.array(ys), np.array(ss), np.array(cs))


def aggregate_impact(series: TradeSeries, N_list, n_bins: int = 20) -> dict:
    """R(Q, N) over non-overlapping windows of N trades, binned on
    Q = sum eps v. Each curve carries Q*_N = Q95 - Q5 for rescaling."""
    e = series.eps.astype(float)
    v = series.vol
    r = series.returns
    n = min(len(e), len(r))
    out = {}
    for N in N_list:
        m = n // N
        if m < n_bins:
            warnings.warn(f"N={N}: too few windows, skipped", RuntimeWarning)
            continue
        Q = (e[: m * N] * v[: m * N]).reshape(m, N).sum(1)
        R = r[: m * N].reshape(m, N).sum(1)
        curve = binned_mean(Q, R, n_bins)
        keep = curve.count > 0
        if not keep.all():
            warnings.warn("empty bins dropped", RuntimeWarning)
        q5, q95 = np.percentile(Q, [5, 95])
        curve.scale = float(q95 - q5)
        out[N] = curve
    return out


def small_q_slope(curve: BinnedCurve, frac: float = 0.2) -> float:
    """Slope through the origin over bins with |Q| <= frac * Q*."""
    m = np.abs(curve.x) <= frac * curve.scale
    if m.sum() < 2:
        m = np.argsort(np.abs(curve.x))[:2]
    x, y = curve.x[m], curve.y[m]
    return float((x * y).sum() / (x * x).sum())


def linear_extent(curve: BinnedCurve, tol: float = 0.1, frac: float = 0.2) -> float:
    """Largest |Q|/Q* up to which bin means stay on the straight line fitted
    to the bins with |Q| <= frac * Q*, scanning outward from Q = 0.

    A bin stays on the line while its deviation is within ``tol`` times the
    linear part plus two standard errors. The smaller of the two sides is
    returned.
    """
    x = curve.x / curve.scale
    y = curve.y / curve.scale
    se = curve.se / curve.scale
    m = np.abs(x) <= frac
    if m.sum() < 4:
        m = np.argsort(np.abs(x))[:4]
    s, b = np.polyfit(x[m], y[m], 1)
    reach = []
    for side in (1, -1):
        idx = np.where(side * x > 0)[0]
        idx = idx[np.argsort(np.abs(x[idx]))]
        r = 0.0
        for i in idx:
            if abs(y[i] - (s * x[i] + b)) > tol * abs(s * x[i]) + 2 * se[i]:
                break
            r = abs(x[i])
        reach.append(r)
    return float(min(reach))


@dataclass
class SingleImpactFit:
    psi: float
    prefactor: float
    curve: BinnedCurve
    p_plus: BinnedCurve


def fit_single_impact(series: TradeSeries, n_bins: int = 20) -> SingleImpactFit:
    """Log-log fit of <eps r | v> = prefactor * v^psi and the probability
    P(+|v) that a trade of size v moves the midprice."""
    e = series.eps.astype(float)
    r = series.returns
    n = min(len(e), len(r))
    v = series.vol[:n]
    curve = binned_mean(v, e[:n] * r[:n], n_bins)
    ok = (curve.y > 0) & (curve.x > 0)
    if len(curve.x) < 10 or ok.sum() < 10:
        raise ValueError("fewer than 10 usable volume bins")
    slope, icpt = np.polyfit(np.log(curve.x[ok]), np.log(curve.y[ok]), 1)
    moved = (np.abs(r[:n]) > 0).astype(float)
    pp = binned_mean(v, moved, n_bins)
    return SingleImpactFit(float(slope), float(math.exp(icpt)), curve, pp)


def p_plus_model(best_volumes, v) -> np.ndarray:
    """P(+|v) implied by the distribution of opposite best-quote volume:
    a trade moves the price when it takes the whole best level."""
    phi = np.sort(np.asarray(best_volumes, dtype=float))
    return np.searchsorted(phi, np.asarray(v, dtype=float), side="right") / len(phi)


# ---------------------------------------------------------- surrogates

def surrogate_shuffle(returns, counts, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate returns over consecutive bins of ``counts`` transactions,
    for the real order and for a random permutation of the transactions."""
    r = np.asarray(returns, dtype=float)
    counts = np.asarray(counts, dtype=int)
    if counts.sum() > len(r):
        raise ValueError("bin counts exceed the number of returns")
    edges = np.concatenate([[0], np.cumsum(counts)])
    used = r[: edges[-1]]
    shuf = stream(seed, 20).permutation(used)

    def agg(x):
        cs = np.concatenate([[0.0], np.cumsum(x)])
        return cs[edges[1:]] - cs[edges[:-1]]

    return agg(used), agg(shuf)


# ---------------------------------------------------------- tails

@dataclass
class HillEstimate:
    alpha: float
    se: float
    ci: tuple[float, float]
    k: int
    threshold: float


def tail_index(x, top_fraction: float = 0.01) -> HillEstimate:
    """Hill estimator on the largest ``top_fraction`` of a positive sample."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("sample must be positive")
    n = len(x)
    k = int(math.floor(n * top_fraction))
    if k < 50:
        raise ValueError("fewer than 50 tail points")
    xs = np.sort(x)[::-1]
    thr = xs[k] if k < n else xs[-1]
    logs = np.log(xs[:k] / thr)
    a = k / logs.sum()
    se = a / math.sqrt(k)
    return HillEstimate(float(a), float(se), (float(a - 1.96 * se), float(a + 1.96 * se)), k,
                        float(thr))


def hill_drift(x, fractions=(0.1, 0.05, 0.02, 0.01, 0.005)) -> dict:
    """Hill estimates across thresholds; ``drifting`` flags a systematic
    rise with threshold larger than two standard errors (no regular variation)."""
    est = [tail_index(x, f) for f in fractions]
    a = np.array([h.alpha for h in est])
    rising = bool(np.all(np.diff(a) > 0) and a[-1] - a[0] > 2 * est[-1].se)
    return {"fractions": list(fractions), "alpha": a, "drifting": rising}
