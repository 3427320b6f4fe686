"""Closed-form and numeric predictions used as oracles for the simulations.

Propagator arrays follow one convention throughout: ``g[k]`` is G(k+1),
the midprice impact of a trade observed k+1 trades later, so ``g[0]`` is
the immediate impact.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import gamma as Gamma
from scipy.special import gammaln, ndtr

from .flow import farima_ar_inf, farima_coeffs
from .rng import stream


# -------------------------------------------------------------- MRR

def mrr_theory(rho: float, theta: float, sigma: float = 0.0, L: int = 10) -> dict:
    """Midpoint MRR model: flat response, two-level propagator, and the
    one-trade and long-run return variances."""
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    if theta <= 0:
        raise ValueError("theta must be positive")
    g = np.full(L, theta * (1 - rho))
    g[0] = theta
    return {
        "R": np.full(L, theta * (1 - rho ** 2)),
        "G": g,
        "C": rho ** np.arange(1, L + 1, dtype=float),
        "sigma1_sq": sigma ** 2 + theta ** 2 * (1 - rho) ** 2,
        "sigma_inf_sq": sigma ** 2 + theta ** 2 * (1 - rho ** 2),
    }


def limit_order_cost(spread: float, R1: float, rho: float) -> float:
    """Expected cost of a limit order relative to a market order in the
    Markov-sign model: -S/2 + R_1 / (1 - rho)."""
    return -0.5 * spread + R1 / (1 - rho)


# ------------------------------------------------------- propagator model

def beta_critical(gamma: float) -> float:
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    return 0.5 * (1.0 - gamma)


@dataclass(frozen=True)
class PropagatorModel:
    """G(l) = Gamma0 / (l0^2 + l^2)^(beta/2) and C_l = c0 l^-gamma (C_0 = 1).

    ``c_table`` optionally overrides C_1..C_len exactly; the power law is
    used beyond it.
    """

    Gamma0: float = 1.0
    beta: float = 0.25
    l0: float = 0.0
    c0: float = 0.2
    gamma: float = 0.5
    sigma2: float = 0.0
    theta: float = 1.0
    c_table: tuple | None = None

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    def G(self, l):
        l = np.asarray(l, dtype=float)
        return self.Gamma0 * (self.l0 ** 2 + l ** 2) ** (-self.beta / 2)

    def C(self, l):
        l = np.asarray(l, dtype=float)
        out = self.c0 * l ** (-self.gamma)
        if self.c_table is not None:
            tab = np.asarray(self.c_table, dtype=float)
            li = np.where(l <= len(tab), l, 0).astype(np.int64)
            m = (li >= 1) & (li <= len(tab)) & (li == l)
            out = np.where(m, tab[np.clip(li, 1, len(tab)) - 1], out)
        return out

    def G_shift(self, x, l):
        """G(x + l) - G(x) without cancellation at large x."""
        x = np.asarray(x, dtype=float)
        ratio = (2 * l * x + l * l) / (self.l0 ** 2 + x ** 2)
        return self.G(x) * np.expm1(-0.5 * self.beta * np.log1p(ratio))

    def g_array(self, L: int) -> np.ndarray:
        return self.G(np.arange(1, L + 1))


def response_theory(model: PropagatorModel, lags, J: int = 1 << 20) -> np.ndarray:
    """R_l for an analytic model, summing past trades exactly up to J and
    adding the remainder as an integral of the continuous forms."""
    out = []
    js = np.arange(1, J + 1, dtype=float)
    Cj = model.C(js)
    Gj = model.G(js)
    for l in np.atleast_1d(lags):
        l = int(l)
        t1 = float(model.G(l))
        k = np.arange(1, l)
        t2 = float((model.G(l - k) * Cj[: l - 1]).sum())
        t3 = float(((model.G(l + js) - Gj) * Cj).sum())
        tail = _tail_integral(lambda x: model.G_shift(x, l) * model.C(x), J + 0.5)
        out.append(t1 + t2 + t3 + tail)
    return np.array(out)


def _tail_integral(f, a: float) -> float:
    """Integral of a smooth power-law-like function over [a, inf), in log space."""
    h = lambda u: f(a * math.exp(u)) * a * math.exp(u)
    val, _ = integrate.quad(h, 0, 60, limit=400, epsabs=1e-13, epsrel=1e-10)
    return float(val)


def response_asymptotic(model: PropagatorModel, l) -> np.ndarray:
    """Leading large-l behavior of R_l for beta + gamma < 1."""
    b, g = model.beta, model.gamma
    pref = (model.Gamma0 * model.c0 * Gamma(1 - g) / (Gamma(b) * Gamma(2 - b - g))
            * (math.pi / math.sin(math.pi * b) - math.pi / math.sin(math.pi * (1 - b - g))))
    return pref * np.asarray(l, dtype=float) ** (1 - b - g)


def variance_theory(model: PropagatorModel, lags, J: int | None = None) -> dict:
    """Lagged price variance V_l and its correlation part Delta(l).

    The price change over l trades is a linear form in past signs; its
    variance is evaluated as a quadratic form against C with past trades
    truncated at J (default 64 l, at least 2^14).
    """
    lags = np.atleast_1d(np.asarray(lags, dtype=int))
    if lags.max() > 10_000:
        warnings.warn("lags above 1e4: quadratic-cost evaluation", RuntimeWarning)
    V, D = [], []
    for l in lags:
        Jl = J if J is not None else max(64 * int(l), 1 << 14)
        w = _price_weights(model.G, int(l), Jl)
        ac = fftconvolve(w, w[::-1])[len(w) - 1:]
        d = np.arange(1, len(ac))
        corr = float((model.C(d) * ac[1:]).sum())
        quad = float(ac[0])
        V.append(quad + 2 * corr + model.sigma2 * l)
        D.append(corr)
    return {"lags": lags, "V": np.array(V), "Delta": np.array(D)}


def _price_weights(G, l: int, J: int) -> np.ndarray:
    """Weights of eps_j (j = -J..l-1) in m_l - m_0."""
    j = np.arange(-J, l)
    a = np.where(l - j >= 1, G(np.maximum(l - j, 1)), 0.0)
    b = np.where(-j >= 1, G(np.maximum(-j, 1)), 0.0)
    return a - b


def delta_integral(gamma: float, beta: float) -> float:
    """I(gamma, beta): the continuum limit of Delta(l) / (Gamma0^2 c0 l^(2-2beta-gamma))."""
    b, g = beta, gamma
    opts = dict(limit=400, epsabs=1e-11, epsrel=1e-10)

    def h(x):
        return (1 + x) ** (-b) - x ** (-b) if x > 0 else -math.inf

    # 0 < x < y < 1: substitute y = x + u
    def inner1(u):
        f = lambda x: (1 - x) ** (-b) * (1 - x - u) ** (-b)
        return integrate.quad(f, 0, 1 - u, **opts)[0]

    t1 = integrate.quad(lambda u: u ** (-g) * inner1(u), 0, 1, limit=400, epsabs=1e-9)[0]

    # 0 < x < y < inf
    def inner2(x):
        f = lambda u: u ** (-g) * h(x + u)
        return (integrate.quad(f, 0, 1, **opts)[0]
                + integrate.quad(f, 1, math.inf, **opts)[0])

    outer2 = lambda x: h(x) * inner2(x)
    t2 = (integrate.quad(outer2, 0, 1, limit=400, epsabs=1e-9)[0]
          + integrate.quad(outer2, 1, math.inf, limit=400, epsabs=1e-9)[0])

    # 0 < x < 1, 0 < y < inf
    def inner3(x):
        f = lambda y: h(y) * (x + y) ** (-g)
        return (integrate.quad(f, 0, 1, **opts)[0]
                + integrate.quad(f, 1, math.inf, **opts)[0])

    t3 = integrate.quad(lambda x: (1 - x) ** (-b) * inner3(x), 0, 1, limit=400, epsabs=1e-9)[0]
    return float(t1 + t2 + t3)


def delta_asymptotic(model: PropagatorModel, l) -> np.ndarray:
    I = delta_integral(model.gamma, model.beta)
    p = 2 - 2 * model.beta - model.gamma
    return model.Gamma0 ** 2 * model.c0 * I * np.asarray(l, dtype=float) ** p


# ---------------------------------------------------------- hidden orders

@dataclass(frozen=True)
class HiddenOrderSpec:
    N: int
    pi: float = 1.0  # participation rate
    eps: int = 1
    K: int | None = None  # predictor lag; None means the infinite-order predictor
    theta: float = 1.0
    hurst: float = 0.75

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 < self.pi <= 1:
            raise ValueError("participation rate must lie in (0, 1]")


def _coeffs(spec: HiddenOrderSpec, n: int, coeffs=None) -> np.ndarray:
    """Predictor coefficients a_1..a_n (zero beyond a finite K)."""
    if coeffs is not None:
        a = np.asarray(coeffs, dtype=float)
    elif spec.K is None:
        a = farima_ar_inf(n, spec.hurst)
    else:
        a = farima_coeffs(spec.K, spec.hurst)
    out = np.zeros(n)
    out[: min(n, len(a))] = a[:n]
    return out


def hidden_order_impact(spec: HiddenOrderSpec, t: int = 0, coeffs=None) -> float:
    """Expected midprice move of a hidden order, E[m_{N+t}] - m_0.

    Full participation: eps theta sum_{i=t+1}^{t+N} [1 - sum_{j<i} a_j],
    valid for any t >= 0. Partial participation (t = 0 only): the i-th child
    order sees the predictor summed over the floor(i/pi) most recent trades,
    eps theta sum_{i=0}^{N-1} (1 - sum_{k <= i/pi} a_k), which reduces to the
    full-participation sum at pi = 1.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    N = spec.N
    if spec.pi == 1.0:
        a = _coeffs(spec, t + N, coeffs)
        S = np.concatenate([[0.0], np.cumsum(a)])  # S[i] = sum_{j<=i} a_j
        i = np.arange(t + 1, t + N + 1)
        return float(spec.eps * spec.theta * (1.0 - S[i - 1]).sum())
    if t != 0:
        raise ValueError("partial participation is defined at t = 0 only")
    k = np.floor(np.arange(N) / spec.pi).astype(int)
    a = _coeffs(spec, int(k[-1]) if k[-1] > 0 else 1, coeffs)
    S = np.concatenate([[0.0], np.cumsum(a)])
    return float(spec.eps * spec.theta * (1.0 - S[k]).sum())


def hidden_order_impact_printed(spec: HiddenOrderSpec, coeffs=None) -> float:
    """The partial-participation sum with the printed index range,
    eps theta sum_{i=1}^{N} (1 - sum_{k <= i/pi} a_k). At pi = 1 it equals
    the full-participation sum evaluated one trade after completion."""
    N = spec.N
    k = np.floor(np.arange(1, N + 1) / spec.pi).astype(int)
    a = _coeffs(spec, int(k[-1]), coeffs)
    S = np.concatenate([[0.0], np.cumsum(a)])
    return float(spec.eps * spec.theta * (1.0 - S[k]).sum())


def hidden_order_impact_asymptotic(spec: HiddenOrderSpec) -> float:
    """Continuum form theta (1 + 2^(beta-1) pi^beta [(2N-1)^(1-beta) - 1] / (1-beta))."""
    b = spec.hurst - 0.5
    N, p = spec.N, spec.pi
    return spec.eps * spec.theta * (1 + 2 ** (b - 1) * p ** b / (1 - b)
                                    * ((2 * N - 1) ** (1 - b) - 1))


def permanent_impact(spec: HiddenOrderSpec) -> float:
    """Long-run impact eps theta N (1 - sum_{j<=K} a_j^(K)) for a finite-K predictor.

    Evaluated from the Gamma-function closed form in log space; the infinite
    predictor (K None) gives zero.
    """
    if spec.K is None:
        return 0.0
    H, K = spec.hurst, spec.K
    log_mag = (gammaln(H) + gammaln(2 + K - 2 * H) - gammaln(1.5 + K - H)
               + (H - 1) * math.log(4.0) - 0.5 * math.log(math.pi))
    val = 2 * math.sin(math.pi * H) * math.exp(log_mag)
    return float(spec.eps * spec.theta * spec.N * val)


def post_order_decay(spec: HiddenOrderSpec, t: int, coeffs=None) -> float:
    """E[m_{N+t}] - E[m_N] after a fully-participating hidden order ends."""
    if spec.pi != 1.0:
        raise ValueError("post-order decay needs full participation")
    return hidden_order_impact(spec, t, coeffs) - hidden_order_impact(spec, 0, coeffs)


# ------------------------------------------------------ aggregate impact

class VolumeLaw:
    """Symmetric signed-volume law with odd impact function f.

    Subclasses provide ``phi`` (characteristic function of v), ``S``
    (int_0^inf p_abs(x) f(x) sin(lam x) dx), ``f`` and ``sample``.
    """

    def f(self, v):
        raise NotImplementedError

    def phi(self, lam):
        raise NotImplementedError

    def S(self, lam):
        raise NotImplementedError

    def sample(self, n: int, g: np.random.Generator):
        raise NotImplementedError


class LaplacePower(VolumeLaw):
    """|v| exponential with mean ``scale``, f(v) = sign(v) |v|^psi."""

    def __init__(self, scale: float = 1.0, psi: float = 0.5):
        self.s, self.psi = scale, psi

    def f(self, v):
        return np.sign(v) * np.abs(v) ** self.psi

    def phi(self, lam):
        return 1.0 / (1.0 + (lam * self.s) ** 2)

    def S(self, lam):
        p, s = self.psi, self.s
        return (Gamma(1 + p) * s ** p * np.sin((1 + p) * np.arctan(lam * s))
                / (1 + (lam * s) ** 2) ** ((1 + p) / 2))

    def sample(self, n, g):
        return np.where(g.random(n) < 0.5, 1.0, -1.0) * g.exponential(self.s, n)


class GaussianLinear(VolumeLaw):
    """Signed volume N(0, sd^2) and f(v) = v."""

    def __init__(self, sd: float = 1.0):
        self.sd = sd

    def f(self, v):
        return np.asarray(v, dtype=float)

    def phi(self, lam):
        return np.exp(-0.5 * (lam * self.sd) ** 2)

    def S(self, lam):
        return lam * self.sd ** 2 * np.exp(-0.5 * (lam * self.sd) ** 2)

    def sample(self, n, g):
        return self.sd * g.standard_normal(n)


class NumericLaw(VolumeLaw):
    """Generic law from the density of |v|; transforms by oscillatory quadrature."""

    def __init__(self, pdf_abs, f, sampler):
        self.pdf_abs, self._f, self.sampler = pdf_abs, f, sampler

    def f(self, v):
        return self._f(v)

    def phi(self, lam):
        lam = float(lam)
        if lam == 0:
            return integrate.quad(self.pdf_abs, 0, math.inf)[0]
        return integrate.quad(self.pdf_abs, 0, math.inf, weight="cos", wvar=lam)[0]

    def S(self, lam):
        lam = float(lam)
        if lam == 0:
            return 0.0
        h = lambda x: self.pdf_abs(x) * self._f(x)
        return integrate.quad(h, 0, math.inf, weight="sin", wvar=lam)[0]

    def sample(self, n, g):
        return self.sampler(n, g)


def _lam_integral(F, weight: str, w: float) -> float:
    """int_0^inf F(lam) * trig(w lam) d lam (trig = sin or cos)."""
    if w == 0:
        if weight == "sin":
            return 0.0
        return integrate.quad(F, 0, math.inf, limit=500, epsabs=1e-8)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        return integrate.quad(F, 0, math.inf, weight=weight, wvar=abs(w), limlst=200,
                              epsabs=1e-8)[0] * (np.sign(w) if weight == "sin" else 1.0)


@dataclass
class AggregateTheory:
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    method: str
    se: np.ndarray | None = None


def aggregate_iid_theory(law: VolumeLaw, N: int, Q=None, bins=None,
                         method: str = "auto", n_mc: int = 2_000_000,
                         seed: int = 0) -> AggregateTheory:
    """R(Q, N) for IID signed volumes by Fourier inversion over lambda.

    ``Q`` gives point values; ``bins`` (edges) gives bin averages
    <R | Q in bin>. ``method`` is ``exact`` (N = 1 only), ``quadrature``,
    ``mc`` or ``auto`` (exact for N = 1, otherwise quadrature with a
    Monte-Carlo fallback when quadrature fails).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if method == "auto":
        method = "exact" if (N == 1 and Q is not None) else "quadrature"
    if method == "exact":
        if N != 1 or Q is None:
            raise ValueError("exact evaluation needs N = 1 and point values")
        Q = np.asarray(Q, dtype=float)
        return AggregateTheory(Q, law.f(Q), np.full(len(Q), np.nan), "exact")
    if method == "mc":
        return _aggregate_mc(law, N, Q, bins, n_mc, seed)
    try:
        return _aggregate_quad(law, N, Q, bins)
    except (integrate.IntegrationWarning, ZeroDivisionError, FloatingPointError):
        warnings.warn("quadrature failed, using Monte Carlo", RuntimeWarning)
        return _aggregate_mc(law, N, Q, bins, n_mc, seed)


def _aggregate_quad(law: VolumeLaw, N: int, Q, bins) -> AggregateTheory:
    num_f = lambda lam: law.phi(lam) ** (N - 1) * law.S(lam)
    den_f = lambda lam: law.phi(lam) ** N
    if bins is None:
        Q = np.asarray(Q, dtype=float)
        R, P = [], []
        for q in Q:
            num = N / math.pi * _lam_integral(num_f, "sin", q)
            den = 1 / math.pi * _lam_integral(den_f, "cos", q)
            R.append(num / den)
            P.append(den)
        return AggregateTheory(Q, np.array(R), np.array(P), "quadrature")
    edges = np.asarray(bins, dtype=float)
    R, P, mids = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        # int_a^b sin(lam Q) dQ = (cos lam a - cos lam b) / lam, and similarly
        # for cos; the 1/lam factor is kept on [cut, inf) only
        num = N / math.pi * _bin_integral(num_f, "cos", a, b)
        den = 1 / math.pi * _bin_integral(den_f, "sin", a, b)
        R.append(num / den)
        P.append(den)
        mids.append(0.5 * (a + b))
    return AggregateTheory(np.array(mids), np.array(R), np.array(P), "quadrature")


def _bin_integral(F, weight: str, a: float, b: float, cut: float = 1.0) -> float:
    if weight == "cos":
        kern = lambda x: (math.cos(x * a) - math.cos(x * b)) / x
    else:
        kern = lambda x: (math.sin(x * b) - math.sin(x * a)) / x
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        head = integrate.quad(lambda x: F(x) * kern(x) if x > 0 else 0.0, 0, cut,
                              limit=500, epsabs=1e-10)[0]

        def far(w):
            if w == 0:
                return 0.0 if weight == "sin" else integrate.quad(
                    lambda x: F(x) / x, cut, math.inf, limit=500)[0]
            v = integrate.quad(lambda x: F(x) / x, cut, math.inf, weight=weight,
                               wvar=abs(w), limlst=200, epsabs=1e-10)[0]
            return v * (np.sign(w) if weight == "sin" else 1.0)

        tail = (far(a) - far(b)) if weight == "cos" else (far(b) - far(a))
    return head + tail


def _aggregate_mc(law: VolumeLaw, N: int, Q, bins, n: int, seed: int) -> AggregateTheory:
    g = stream(seed, 30)
    v = law.sample(n * N, g).reshape(n, N)
    Qs = v.sum(1)
    Rs = law.f(v).sum(1)
    if bins is None:
        Q = np.asarray(Q, dtype=float)
        w = 0.05 * (np.percentile(Qs, 95) - np.percentile(Qs, 5))
        edges = np.column_stack([Q - w / 2, Q + w / 2])
    else:
        e = np.asarray(bins, dtype=float)
        edges = np.column_stack([e[:-1], e[1:]])
    R, P, se, mids = [], [], [], []
    for a, b in edges:
        m = (Qs >= a) & (Qs < b)
        k = m.sum()
        R.append(Rs[m].mean() if k else np.nan)
        se.append(Rs[m].std(ddof=1) / math.sqrt(k) if k > 1 else np.nan)
        P.append(k / (n * (b - a)))
        mids.append(0.5 * (a + b))
    return AggregateTheory(np.array(mids), np.array(R), np.array(P), "mc", np.array(se))


def transient_I(s: float) -> float:
    """2 int_0^inf u exp(u s - u^2/2) du."""
    return 2.0 * (1.0 + s * math.sqrt(2 * math.pi) * math.exp(0.5 * s * s) * ndtr(s))


def aggregate_transient_theory(s: float, Gamma0: float, gamma: float, N, Q) -> np.ndarray:
    """Large-N aggregate impact of the transient model with beta = beta_c:
    R = sqrt(N) s Gamma0 / (I (1 - beta)) * Q / N^(1 - gamma/2)."""
    b = beta_critical(gamma)
    N = np.asarray(N, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return np.sqrt(N) * s * Gamma0 / (transient_I(s) * (1 - b)) * Q / N ** (1 - gamma / 2)


# ------------------------------------------------ Gaussian-volume propagator

class NotPositiveDefinite(ValueError):
    pass


def levinson_durbin(r) -> tuple[np.ndarray, float, np.ndarray]:
    """Solve the Yule-Walker equations for autocovariances r_0..r_p.

    Returns (phi_1..phi_p, final innovation variance, reflection
    coefficients). Raises ``NotPositiveDefinite`` naming the first leading
    minor that is not positive.
    """
    r = np.asarray(r, dtype=float)
    p = len(r) - 1
    if r[0] <= 0:
        raise NotPositiveDefinite("leading minor of order 1 is not positive")
    phi = np.zeros(p)
    refl = np.zeros(p)
    v = r[0]
    for k in range(1, p + 1):
        acc = r[k] - phi[: k - 1] @ r[k - 1:0:-1] if k > 1 else r[k]
        kap = acc / v
        new = phi.copy()
        new[k - 1] = kap
        if k > 1:
            new[: k - 1] = phi[: k - 1] - kap * phi[k - 2::-1][: k - 1]
        phi = new
        refl[k - 1] = kap
        v = v * (1.0 - kap * kap)
        if v <= 0 or abs(kap) >= 1:
            raise NotPositiveDefinite(f"leading minor of order {k + 1} is not positive")
    return phi, float(v), refl


@dataclass
class GaussianPropagator:
    K: np.ndarray  # K(0..M-1)
    Q: np.ndarray  # Q(0..p)
    G: np.ndarray  # G(1..len), see module docstring
    phi: np.ndarray
    sigma2: float
    reproduction_error: float
    delta: float
    k0: float


def gaussian_volume_propagator(C, *, c_zero: float = 1.0, theta: float = 1.0,
                               n_kernel: int | None = None, n_G: int | None = None,
                               gamma: float | None = None, c0: float | None = None
                               ) -> GaussianPropagator:
    """Causal kernel K with C_n = sum_m K(m+n) K(m), its inverse Q, and the
    propagator G(l) = theta K(0) sum_{m<l} Q(m) that makes the response flat.

    ``C`` holds C_1..C_L (lag-zero value ``c_zero``). When ``gamma`` and
    ``c0`` are given the power-law tail constants delta = (1+gamma)/2 and
    k0^2 = c0 Gamma(delta) / (Gamma(gamma) Gamma(1-delta)) are reported.
    """
    C = np.asarray(getattr(C, "values", C), dtype=float)
    L = len(C)
    r = np.concatenate([[c_zero], C])
    phi, v, _ = levinson_durbin(r)
    sd = math.sqrt(v)
    Q = np.concatenate([[1.0], -phi]) / sd
    M = n_kernel or 32 * (L + 1)
    K = np.zeros(M)
    K[0] = sd
    for n in range(1, M):
        k = min(n, L)
        K[n] = phi[:k] @ K[n - 1::-1][:k]
    auto = np.array([K[: M - n] @ K[n:] for n in range(L + 1)])
    err = float(np.abs(auto - r).max())
    nG = n_G or 2 * L + 2
    csQ = np.cumsum(np.concatenate([Q, np.zeros(max(nG - len(Q), 0))]))[:nG]
    G = theta * K[0] * csQ
    delta = k0 = math.nan
    if gamma is not None:
        delta = 0.5 * (1 + gamma)
        if c0 is not None:
            k0 = math.sqrt(c0 * Gamma(delta) / (Gamma(gamma) * Gamma(1 - delta)))
    return GaussianPropagator(K, Q, G, phi, v, err, delta, k0)
