"""Optimal execution of a fixed volume under a transient impact kernel.

The profile is discretized into n_g equal cells with constant rate plus two
explicit point masses at t = 0 and t = T, since the exponential-kernel
optimum has Dirac masses at both ends. Cell-averaged kernel entries are
exact second differences of the kernel's double antiderivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammaln, hyp2f1


# ---------------------------------------------------------------- kernels

@dataclass(frozen=True)
class ExponentialKernel:
    G0: float = 1.0
    alpha: float = 1.0
    G_inf: float = 0.0

    def G(self, tau):
        tau = np.abs(np.asarray(tau, dtype=float))
        return self.G0 * np.exp(-self.alpha * tau) + self.G_inf

    def Psi(self, tau):
        """Double antiderivative of G from 0 (even in tau)."""
        t = np.abs(np.asarray(tau, dtype=float))
        a = self.alpha
        return (self.G0 * (t / a + np.expm1(-a * t) / (a * a))
                + 0.5 * self.G_inf * t * t)


@dataclass(frozen=True)
class PowerLawKernel:
    """g0 S / (1 + (f tau)^2)^(beta/2): the power law g0 S (f tau)^-beta
    regularized below one trade interval 1/f."""

    g0: float = 1.0
    S: float = 1.0
    f: float = 1e4
    beta: float = 0.25

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")

    def G(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.g0 * self.S * (1 + (self.f * tau) ** 2) ** (-self.beta / 2)

    def Psi(self, tau):
        t = np.abs(np.asarray(tau, dtype=float))
        b, f = self.beta, self.f
        x = (f * t) ** 2
        first = t * hyp2f1(0.5, b / 2, 1.5, -x)  # int_0^t (1+(fu)^2)^(-b/2) du
        moment = np.expm1((1 - b / 2) * np.log1p(x)) / (f * f * (2 - b))
        return self.g0 * self.S * (t * first - moment)


KERNELS = {"exponential": ExponentialKernel, "powerlaw": PowerLawKernel}


def make_kernel(kind: str, **kw):
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}; choose from {sorted(KERNELS)}")
    return KERNELS[kind](**kw)


# ------------------------------------------------------------- problem

@dataclass(frozen=True)
class ExecutionProblem:
    V: float
    T: float
    kernel: object
    n_g: int = 512

    def __post_init__(self):
        if self.V <= 0 or self.T <= 0:
            raise ValueError("V and T must be positive")
        if self.n_g < 8:
            raise ValueError("n_g must be at least 8")

    @property
    def h(self) -> float:
        return self.T / self.n_g

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_g + 1)


@dataclass
class ExecutionProfile:
    edges: np.ndarray
    phi: np.ndarray  # rate in each cell
    atoms: tuple[float, float]  # volume executed at t = 0 and t = T
    z: float = math.nan
    cost: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def cell_volumes(self) -> np.ndarray:
        return self.phi * np.diff(self.edges)

    @property
    def volume(self) -> float:
        return float(self.cell_volumes.sum() + sum(self.atoms))

    def masses(self) -> np.ndarray:
        """Atom at 0, cell volumes, atom at T."""
        return np.concatenate([[self.atoms[0]], self.cell_volumes, [self.atoms[1]]])


def kernel_matrix(problem: ExecutionProblem, kernel=None) -> np.ndarray:
    """Interaction matrix over (atom 0, cells, atom T) in volume units:
    cost = 1/2 m^T K m for masses m."""
    ker = kernel if kernel is not None else problem.kernel
    n, h, T = problem.n_g, problem.h, problem.T
    d = np.arange(n + 1) * h
    P = ker.Psi(d)
    # second differences; Psi is even so the d = 0 entry is 2 Psi(h)
    sd = np.empty(n)
    sd[0] = 2 * P[1]
    sd[1:] = P[2:] - 2 * P[1:-1] + P[:-2]
    sd /= h * h
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    K = np.zeros((n + 2, n + 2))
    K[1:-1, 1:-1] = sd[idx]
    # atom-cell coupling: cell average of G(t) and G(T - t)
    G1 = _first_antiderivative(ker, d)
    avg = np.diff(G1) / h
    K[0, 1:-1] = avg
    K[1:-1, 0] = avg
    K[-1, 1:-1] = avg[::-1]
    K[1:-1, -1] = avg[::-1]
    g0 = float(ker.G(0.0))
    K[0, 0] = K[-1, -1] = g0
    K[0, -1] = K[-1, 0] = float(ker.G(T))
    return K


def _first_antiderivative(ker, t) -> np.ndarray:
    """int_0^t G in closed form."""
    t = np.asarray(t, dtype=float)
    if isinstance(ker, ExponentialKernel):
        a = ker.alpha
        return ker.G0 * (-np.expm1(-a * t)) / a + ker.G_inf * t
    if isinstance(ker, PowerLawKernel):
        return ker.g0 * ker.S * t * hyp2f1(0.5, ker.beta / 2, 1.5, -(ker.f * t) ** 2)
    raise TypeError("unsupported kernel")


# --------------------------------------------------------------- solvers

class IndefiniteKernel(ValueError):
    def __init__(self, min_eig: float):
        super().__init__(f"kernel matrix is not positive definite (smallest eigenvalue {min_eig:.6g})")
        self.min_eig = min_eig


def _check_pd(K: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(K)
    lo = float(ev[0])
    if lo <= 1e-14 * max(abs(float(ev[-1])), 1e-300):
        raise IndefiniteKernel(lo)
    return lo


def solve_profile(problem: ExecutionProblem, project: bool = False) -> ExecutionProfile:
    """Minimize the impact cost at fixed volume: K m = z 1, 1^T m = V.

    The system is solved on the mirror-symmetric subspace, so the solution
    is exactly symmetric about T/2. ``project`` enforces non-negative
    masses by an active-set iteration (not part of the unconstrained
    first-order condition).
    """
    K = kernel_matrix(problem)
    min_eig = _check_pd(K)
    m = _symmetric_solve(K, problem.V)
    if project:
        m = _active_set(K, problem.V, m)
    return _profile_from_masses(problem, K, m, {"min_eig": min_eig, "projected": project})


def _symmetric_solve(K: np.ndarray, V: float, free=None) -> np.ndarray:
    N = K.shape[0]
    half = (N + 1) // 2
    # mirror basis: y_j -> m_j = m_{N-1-j}
    B = np.zeros((N, half))
    for j in range(half):
        B[j, j] = 1.0
        B[N - 1 - j, j] = 1.0
    if free is not None:
        B = B[:, free]
    Kr = B.T @ K @ B
    rhs = B.T @ np.ones(N)
    w = np.linalg.solve(Kr, rhs)
    m = B @ w
    return m * (V / m.sum())


def _active_set(K: np.ndarray, V: float, m: np.ndarray) -> np.ndarray:
    """Drop negative mirror pairs, release bound pairs whose gradient
    falls below the multiplier, until the KKT conditions hold."""
    N = K.shape[0]
    half = (N + 1) // 2
    free = np.ones(half, bool)
    for _ in range(4 * half):
        neg = free & (m[:half] < 0)
        if neg.any():
            free &= ~neg
            m = _symmetric_solve(K, V, np.flatnonzero(free))
            continue
        m = np.where(m < 0, 0.0, m)
        grad = (K @ m)[:half]
        z = grad[free].mean()
        slack = np.where(free, np.inf, grad - z)
        j = int(slack.argmin())
        if slack[j] >= -1e-12 * max(abs(z), 1.0):
            return m
        free[j] = True
        m = _symmetric_solve(K, V, np.flatnonzero(free))
    return m


def _profile_from_masses(problem, K, m, meta) -> ExecutionProfile:
    h = problem.h
    phi = m[1:-1] / h
    z = float((K @ m)[1:-1].mean())
    cost = 0.5 * float(m @ K @ m)
    return ExecutionProfile(problem.edges, phi, (float(m[0]), float(m[-1])), z, cost, meta)


# ---------------------------------------------------------- closed forms

def closed_form_profile(problem: ExecutionProblem) -> ExecutionProfile:
    """Analytic optimum on the problem's grid.

    Exponential kernel: masses V / (2 (1 + a T / 2)) at both ends and a flat
    rate V a / (2 (1 + a T / 2)). Power-law kernel: the approximate profile
    V Gamma(2b) / (T^(2b-1) Gamma(b)^2) t^(b-1) (T-t)^(b-1), assigned to
    cells by exact incomplete-Beta masses and without atoms.
    """
    ker = problem.kernel
    V, T, e = problem.V, problem.T, problem.edges
    if isinstance(ker, ExponentialKernel):
        a = ker.alpha
        c = V / (1 + a * T / 2)
        phi = np.full(problem.n_g, c * a / 2)
        atoms = (c / 2, c / 2)
        z = ker.G0 * c + ker.G_inf * V
    elif isinstance(ker, PowerLawKernel):
        b = ker.beta
        cdf = betainc(b, b, e / T)
        phi = V * np.diff(cdf) / np.diff(e)
        atoms = (0.0, 0.0)
        z = math.nan
    else:
        raise ValueError("closed form available for exponential and power-law kernels only")
    prof = ExecutionProfile(e, phi, atoms, z)
    prof.cost = execution_cost(prof, problem)
    return prof


def riesz_profile(problem: ExecutionProblem) -> ExecutionProfile:
    """Exact optimum for the pure kernel tau^-b without cutoff: the rate is
    proportional to (t (T-t))^((b-1)/2), i.e. Beta((1+b)/2, (1+b)/2) masses."""
    ker = problem.kernel
    if not isinstance(ker, PowerLawKernel):
        raise ValueError("riesz_profile needs a power-law kernel")
    a = (1 + ker.beta) / 2
    e = problem.edges
    phi = problem.V * np.diff(betainc(a, a, e / problem.T)) / np.diff(e)
    prof = ExecutionProfile(e, phi, (0.0, 0.0))
    prof.cost = execution_cost(prof, problem)
    return prof


def powerlaw_density(t, V: float, T: float, beta: float) -> np.ndarray:
    """Pointwise approximate optimum V Gamma(2b)/(T^(2b-1) Gamma(b)^2) t^(b-1) (T-t)^(b-1)."""
    t = np.asarray(t, dtype=float)
    logc = gammaln(2 * beta) - 2 * gammaln(beta) - (2 * beta - 1) * math.log(T)
    return V * np.exp(logc) * t ** (beta - 1) * (T - t) ** (beta - 1)


def execution_cost(profile: ExecutionProfile, problem: ExecutionProblem, kernel=None,
                   rtol: float = 1e-8) -> float:
    """1/2 double integral of phi G phi, atoms included as point masses."""
    if len(profile.phi) != problem.n_g:
        raise ValueError("profile grid does not match the problem")
    if abs(profile.volume - problem.V) > rtol * problem.V:
        raise ValueError(f"infeasible profile: volume {profile.volume!r} != {problem.V!r}")
    K = kernel_matrix(problem, kernel)
    m = profile.masses()
    return 0.5 * float(m @ K @ m)


def flat_profile(problem: ExecutionProblem) -> ExecutionProfile:
    return ExecutionProfile(problem.edges, np.full(problem.n_g, problem.V / problem.T), (0.0, 0.0))


def front_loaded_profile(problem: ExecutionProblem) -> ExecutionProfile:
    """Linearly decreasing rate, zero at T."""
    e = problem.edges
    cdf = 1 - (1 - e / problem.T) ** 2
    phi = problem.V * np.diff(cdf) / np.diff(e)
    return ExecutionProfile(e, phi, (0.0, 0.0))


def endpoint_exponent(profile: ExecutionProfile, lo: int = 2, hi: int | None = None) -> float:
    """Log-log slope of the rate against t over cells [lo, hi) near t = 0."""
    hi = hi or max(len(profile.phi) // 16, lo + 3)
    t = profile.t[lo:hi]
    y = profile.phi[lo:hi]
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])
