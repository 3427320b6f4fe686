import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from microlab.book import BookState, apply_event
from microlab.bookshape import (BookShapeParams, empirical_book_profile, eos_F, fit_linear_book,
                                general_profile, glosten_sandas_book, mean_book_theory,
                                rescaled_profile, zi_spread_eos)
from microlab.flow import ZiParams, gen_zero_intelligence

# ------------------------------------------------------ equation of state


def test_eos_zero_cancellation():
    assert zi_spread_eos(2.0, 0.5, 0.0) == pytest.approx(0.28 * 2.0 / 0.5)


def test_eos_monotone_in_nu():
    s = [zi_spread_eos(1.0, 0.1, nu) for nu in np.linspace(0, 2, 30)]
    assert np.all(np.diff(s) > 0)


def test_eos_prefactor_scaling():
    assert zi_spread_eos(1.0, 0.2, 0.1) == pytest.approx(0.5 * zi_spread_eos(1.0, 0.1, 0.1))
    # doubling mu and nu together keeps F's argument fixed
    assert zi_spread_eos(2.0, 0.1, 0.2) == pytest.approx(2 * zi_spread_eos(1.0, 0.1, 0.1))


def test_eos_errors():
    with pytest.raises(ValueError):
        zi_spread_eos(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        eos_F(-0.1)


# ------------------------------------------------------ mean book theory

def test_profile_vanishes_at_zero():
    for p in (BookShapeParams(), BookShapeParams(flow="exponential", beta_e=0.3),
              BookShapeParams(mu_lp=1.5, u_min=0.5)):
        assert mean_book_theory(p, [0.0])[0] == 0.0


def test_rescaled_asymptotic_slopes():
    F = lambda d: rescaled_profile(np.asarray(d), 0.6)
    lo = np.diff(np.log(F([1e-6, 1e-5]))) / math.log(10)
    hi = np.diff(np.log(F([200.0, 2000.0]))) / math.log(10)
    assert lo[0] == pytest.approx(1 - 0.6, abs=1e-3)
    assert hi[0] == pytest.approx(-1 - 0.6, abs=1e-3)


def test_rescaled_single_interior_maximum():
    d = np.linspace(0, 20, 801)
    F = rescaled_profile(d, 0.6)
    k = int(F.argmax())
    assert 0 < k < len(d) - 1
    assert np.all(np.diff(F[: k + 1]) > 0) and np.all(np.diff(F[k:]) < 0)
    assert np.all(F >= 0)


def test_rescaled_split_independent():
    d = [0.5, 3.0, 10.0, 40.0]
    np.testing.assert_allclose(rescaled_profile(d, 0.4, split=0.3),
                               rescaled_profile(d, 0.4, split=2.0), rtol=1e-9)


def test_rescaled_large_delta_finite():
    F = rescaled_profile([1e3, 1e4], 0.6)
    assert np.all(np.isfinite(F)) and np.all(F > 0)


def _direct(d, mu):
    # both integrals by plain quadrature, no series, no incomplete Gamma
    a = integrate.quad(lambda u: u ** (-1 - mu) * math.sinh(u) * math.exp(-d), 0, d,
                       epsabs=0, epsrel=1e-11, limit=400)[0]
    b = integrate.quad(lambda u: u ** (-1 - mu) * math.exp(-u), d, math.inf,
                       epsabs=0, epsrel=1e-11, limit=400)[0]
    return a + math.sinh(d) * b


@pytest.mark.parametrize("mu", [0.3, 0.6, 0.9])
def test_rescaled_matches_direct_quadrature(mu):
    d = [0.05, 0.7, 2.0, 8.0]
    np.testing.assert_allclose(rescaled_profile(d, mu), [_direct(x, mu) for x in d], rtol=1e-7)


def test_powerlaw_general_matches_rescaled():
    p = BookShapeParams(mu_lp=0.6, D=2.0, nu=0.3)
    x = np.array([0.3, 1.0, 4.0, 20.0])
    np.testing.assert_allclose(general_profile(p, x), mean_book_theory(p, x), rtol=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_rescaling_collapse(nu1, nu2):
    mu = 0.6
    p1, p2 = BookShapeParams(mu_lp=mu, nu=nu1), BookShapeParams(mu_lp=mu, nu=nu2)
    u = np.array([0.2, 1.0, 3.0])
    c1 = mean_book_theory(p1, u / p1.alpha) / p1.alpha ** mu
    c2 = mean_book_theory(p2, u / p2.alpha) / p2.alpha ** mu
    assert np.abs(c1 - c2).max() < 1e-6


@pytest.mark.parametrize("beta_e", [0.5, 1.0, 3.0])
def test_exponential_closed_form_matches_quadrature(beta_e):
    # closed form is normalized; quadrature is not, so compare up to a constant
    p = BookShapeParams(flow="exponential", beta_e=beta_e, D=1.0, nu=0.5)
    x = np.linspace(0.5, 30, 9)
    ratio = general_profile(p, x) / mean_book_theory(p, x)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-7)


def test_exponential_closed_form_unit_volume():
    p = BookShapeParams(flow="exponential", beta_e=0.4, D=1.0, nu=0.5)
    tot = integrate.quad(lambda d: mean_book_theory(p, [d])[0], 0, math.inf)[0]
    assert tot == pytest.approx(1.0, rel=1e-8)


def test_exponential_single_maximum():
    p = BookShapeParams(flow="exponential", beta_e=0.3)
    F = mean_book_theory(p, np.linspace(0, 60, 601))
    k = int(F.argmax())
    assert 0 < k < 600 and np.all(np.diff(F[: k + 1]) > 0) and np.all(np.diff(F[k:]) < 0)


def test_params_validation():
    with pytest.raises(ValueError):
        BookShapeParams(mu_lp=0)
    with pytest.raises(ValueError):
        BookShapeParams(flow="gaussian")
    with pytest.raises(ValueError):
        BookShapeParams(mu_lp=1.2)
    with pytest.raises(ValueError):
        mean_book_theory(BookShapeParams(), [-1.0])
    with pytest.raises(ValueError):
        rescaled_profile([1.0], 1.0)


# -------------------------------------------------------- linear book

def test_linear_book_through_origin():
    b = glosten_sandas_book(2.0, 0.0, math.inf, [0.0, 1.0, 3.0])
    np.testing.assert_allclose(b.volume, [0.0, 2.0, 6.0])
    assert b.intercept == 0.0


def test_linear_book_intercept_negative_and_impact_linear():
    b = glosten_sandas_book(4.0, 0.1, 2.0, np.linspace(0, 1, 5), mid=0.0)
    assert b.intercept == pytest.approx(-4.0 * 0.1 - 4.0 / 2.0)
    assert b.intercept_sign == -1
    np.testing.assert_allclose(b.impact([1, 2, 8]), [0.25, 0.5, 2.0])


def test_fit_linear_book_rejection():
    p = np.linspace(0.1, 1.0, 10)
    assert not fit_linear_book(p, 3 * p - 0.5)["rejected"]
    fit = fit_linear_book(p, 3 * p + 0.4)
    assert fit["rejected"] and fit["slope"] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fit_linear_book([1, 2], [1, 2])


# ------------------------------------------------------ empirical books

def _zi_snapshots(rho, seed=2):
    run = gen_zero_intelligence(ZiParams(mu=1, rho=rho, nu=0.02, band=60), 60_000, seed=seed)
    snaps, book = [], BookState()
    for i, ev in enumerate(run.events):
        apply_event(book, ev)
        if i > 10_000 and i % 4 == 0:
            snaps.append(book.copy())
    return snaps


def test_empirical_profile_symmetric_and_sparse():
    prof = empirical_book_profile(_zi_snapshots(0.02), depth=60, window=10, min_snapshots=10_000)
    z = np.abs(prof.bid - prof.ask) / np.hypot(prof.bid_se, prof.ask_se)
    # 60 levels: allow a Bonferroni-sized excursion
    assert z.max() < 4
    assert prof.sparsity > 0.5
    assert prof.n_snapshots >= 10_000
    assert np.all(prof.gaps >= 1)
    assert prof.gamma_shape > 0


def test_empirical_profile_too_few():
    with pytest.raises(ValueError, match="two-sided snapshots"):
        empirical_book_profile([BookState()] * 5)
    with pytest.raises(TypeError):
        empirical_book_profile([object()])
