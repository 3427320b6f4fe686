"""Mechanical impact by counterfactual replay.

The reference event is replaced by a null event and the rest of the stream
is replayed unchanged. A later cancel of the removed order becomes a null
event, and market orders simply consume whatever the counterfactual book
offers next. Any other event the counterfactual book cannot accept is
treated as null, which is the lenient replay of ``book.replay``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .book import BookError, BookState, apply_event
from .estimators import fit_power_law
from .series import LaggedCurve


def _event_sign(ev) -> int:
    """Price pressure sign: buys and new bids push up, cancelled bids push down."""
    if ev.kind == "C":
        return -ev.side
    return ev.side


def _apply_lenient(book: BookState, ev) -> list:
    try:
        return apply_event(book, ev)[1]
    except BookError:
        return []


def _leave(live: set, book: BookState, ev, fills) -> None:
    if not live:
        return
    if ev.kind == "C":
        live.discard(ev.ref)
    for f in fills:
        for oid, _, _ in f.legs:
            if oid not in book.orders:
                live.discard(oid)


def _paths(book_t: BookState, events, t_index: int, tau_max: int,
           check_every: int = 16):
    """Real and counterfactual mids after tau = 1..tau_max events from t.

    ``book_t`` is the pre-event book; it is not modified. Returns
    ``(real, cf, tau_converged, tau_turnover)``. ``tau_converged`` is the
    first checked tau at which both books hold identical orders (after that
    the two runs coincide, so the counterfactual mids are copied).
    ``tau_turnover`` is the first tau at which every order resting at t, and
    the reference order itself, has left the real book.
    """
    end = min(t_index + tau_max, len(events))
    n = end - t_index
    ref = events[t_index]
    nulled = ref.seq
    cf = book_t.copy()
    real = book_t.copy()
    cf_mid = np.full(tau_max, np.nan)
    real_mid = np.full(tau_max, np.nan)
    converged = turnover = None
    live = set(book_t.orders)
    # the reference slot itself is null in the counterfactual
    cf_mid[0] = cf.mid()
    fills = _apply_lenient(real, ref)
    if ref.kind == "L" and ref.seq in real.orders:
        live.add(ref.seq)
    _leave(live, real, ref, fills)
    real_mid[0] = real.mid()
    if not live:
        turnover = 1
    k = 1
    while k < n:
        ev = events[t_index + k]
        fills = _apply_lenient(real, ev)
        real_mid[k] = real.mid()
        if turnover is None:
            _leave(live, real, ev, fills)
            if not live:
                turnover = k + 1
        if not (ev.kind == "C" and ev.ref == nulled):
            _apply_lenient(cf, ev)
        cf_mid[k] = cf.mid()
        k += 1
        if k % check_every == 0 and real.signature() == cf.signature():
            converged = k
            break
    if converged is not None:
        # identical books from here on; only the real run is needed
        while k < n:
            ev = events[t_index + k]
            fills = _apply_lenient(real, ev)
            real_mid[k] = real.mid()
            k += 1
            if turnover is None:
                _leave(live, real, ev, fills)
                if not live:
                    turnover = k
        cf_mid[converged:n] = real_mid[converged:n]
    return real_mid, cf_mid, converged, turnover


@dataclass
class MechanicalImpact:
    tau: np.ndarray  # 1..tau_max
    mech: np.ndarray  # p(real) - p(counterfactual)
    total: np.ndarray  # p(real)_{t+tau} - p_t
    sign: int
    converged_at: int | None
    turnover: int | None

    @property
    def info(self) -> np.ndarray:
        return self.total - self.mech


def mechanical_impact(events, book0: BookState | None, t_index: int, tau_max: int,
                      lenient: bool = True) -> MechanicalImpact:
    """Mechanical and total impact of ``events[t_index]`` over tau = 1..tau_max.

    ``book0`` is the book before ``events[0]``. At tau = 1 mechanical and
    total impact coincide exactly.
    """
    if not 0 <= t_index < len(events):
        raise IndexError(f"t_index {t_index} outside stream of length {len(events)}")
    if tau_max < 1:
        raise ValueError("tau_max must be at least 1")
    book = BookState() if book0 is None else book0.copy()
    for ev in events[:t_index]:
        if lenient:
            _apply_lenient(book, ev)
        else:
            apply_event(book, ev)
    p0 = book.mid()
    real, cf, conv, turn = _paths(book, events, t_index, tau_max)
    mech = real - cf
    total = real - p0
    return MechanicalImpact(np.arange(1, tau_max + 1), mech, total,
                            _event_sign(events[t_index]), conv, turn)


@dataclass
class MechanicalAverage:
    tau: np.ndarray
    mech: np.ndarray
    mech_se: np.ndarray
    total: np.ndarray
    total_se: np.ndarray
    info_se: np.ndarray
    n_samples: int
    turnover: np.ndarray  # per-sample turnover lag, NaN if beyond tau_max
    fit: object = None  # power-law fit of the mechanical decay

    def turnover_lag(self, q: float = 0.9) -> float:
        """Quantile of the per-sample full-turnover lag (inf if any is unseen)."""
        t = np.sort(np.where(np.isnan(self.turnover), np.inf, self.turnover))
        return float(t[int(math.ceil(q * (len(t) - 1)))])

    @property
    def info(self) -> np.ndarray:
        return self.total - self.mech

    def curves(self) -> dict[str, LaggedCurve]:
        return {"mech": LaggedCurve(self.tau, self.mech, self.mech_se),
                "total": LaggedCurve(self.tau, self.total, self.total_se),
                "info": LaggedCurve(self.tau, self.info, self.info_se)}

    def rows(self):
        for i, t in enumerate(self.tau):
            yield {"tau": int(t), "mech": self.mech[i], "mech_se": self.mech_se[i],
                   "total": self.total[i], "total_se": self.total_se[i],
                   "info": self.total[i] - self.mech[i]}


def sample_indices(events, n_samples: int, *, kinds=("L", "M", "C"), start: int = 0,
                   tau_max: int = 0, seed: int | None = None) -> np.ndarray:
    """Evenly spaced (or seeded random) reference events of the given kinds
    whose full tau window lies inside the stream."""
    last = len(events) - tau_max
    cand = np.array([i for i in range(start, max(last, start)) if events[i].kind in kinds], dtype=int)
    if len(cand) == 0:
        raise ValueError("no eligible reference events")
    if n_samples >= len(cand):
        return cand
    if seed is None:
        pick = np.linspace(0, len(cand) - 1, n_samples).round().astype(int)
        return cand[np.unique(pick)]
    from .rng import stream
    return np.sort(stream(seed, 70).choice(cand, n_samples, replace=False))


def mechanical_impact_average(events, book0: BookState | None, indices, tau_max: int,
                              min_samples: int = 1000, fit_range=None) -> MechanicalAverage:
    """Signed averages E[eps_t dp^M_tau] and E[eps_t dp^T_tau] over ``indices``.

    One forward pass over the real stream takes a book snapshot at each
    reference event; each counterfactual is then independent.
    """
    idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
    if len(idx) < min_samples:
        raise ValueError(f"need at least {min_samples} reference events, got {len(idx)}")
    book = BookState() if book0 is None else book0.copy()
    pre_mid = np.empty(len(idx))
    snaps = []
    j = 0
    for i, ev in enumerate(events):
        if j < len(idx) and idx[j] == i:
            snaps.append(book.copy())
            pre_mid[j] = book.mid()
            j += 1
        _apply_lenient(book, ev)
    M = np.full((len(idx), tau_max), np.nan)
    T = np.full((len(idx), tau_max), np.nan)
    turn = np.full(len(idx), np.nan)
    for r, (t, b) in enumerate(zip(idx, snaps)):
        real, cf, _, tv = _paths(b, events, int(t), tau_max)
        if tv is not None:
            turn[r] = tv
        s = _event_sign(events[t])
        M[r] = s * (real - cf)
        T[r] = s * (real - pre_mid[r])
    mech, mech_se = _col_mean_se(M)
    tot, tot_se = _col_mean_se(T)
    info, info_se = _col_mean_se(T - M)
    tau = np.arange(1, tau_max + 1)
    fit = fit_power_law(LaggedCurve(tau, np.nan_to_num(mech), np.nan_to_num(mech_se)),
                        fit_range or (2, tau_max))
    return MechanicalAverage(tau, mech, mech_se, tot, tot_se, info_se, len(idx), turn, fit)


def _col_mean_se(X: np.ndarray):
    ok = np.isfinite(X)
    n = ok.sum(axis=0)
    Xz = np.where(ok, X, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = Xz.sum(axis=0) / n
        var = (np.where(ok, X - mean, 0.0) ** 2).sum(axis=0) / (n - 1)
        se = np.sqrt(var / n)
    return mean, se
