import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from microlab.book import replay
from microlab.estimators import sign_autocorr, tail_index
from microlab.flow import (FarimaParams, KyleParams, LmfParams, MfParams, ZiParams, farima_ar_inf,
                           farima_coeffs, gen_kyle, gen_lmf, gen_mike_farmer, gen_signs,
                           gen_zero_intelligence, sample_volumes)


def test_param_validation():
    with pytest.raises(ValueError):
        LmfParams(alpha=1.0)
    with pytest.raises(ValueError):
        LmfParams(K=0)
    with pytest.raises(ValueError):
        FarimaParams(hurst=0.5)
    with pytest.raises(ValueError):
        ZiParams(nu=0)
    with pytest.raises(ValueError):
        ZiParams(band=1)
    with pytest.raises(ValueError):
        MfParams(dof=1.0)
    with pytest.raises(ValueError):
        gen_signs("mrr", 10, 0, rho=1.0)
    with pytest.raises(ValueError):
        gen_signs("iid", 0, 0)
    with pytest.raises(ValueError):
        farima_coeffs(3, 1.0)


def test_farima_params_exponents():
    p = FarimaParams(hurst=0.75)
    assert p.gamma == pytest.approx(0.5) and p.beta == pytest.approx(0.25)


# ------------------------------------------------------------ FARIMA coefficients

def _gamma_coeffs(K, H):
    # direct evaluation of -binom(K,i) Gamma(i-d) Gamma(K-d-i+1) / (Gamma(-d) Gamma(K-d+1))
    d = H - 0.5
    return np.array([-math.comb(K, i) * math.gamma(i - d) * math.gamma(K - d - i + 1)
                     / (math.gamma(-d) * math.gamma(K - d + 1)) for i in range(1, K + 1)])


def test_farima_k1_golden():
    a = farima_coeffs(1, 0.75)
    assert a[0] == pytest.approx(_gamma_coeffs(1, 0.75)[0], rel=1e-13)
    assert a[0] == pytest.approx(1 / 3, rel=1e-13)


@pytest.mark.parametrize("K", [2, 5, 20])
@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_farima_coeffs_match_gamma_oracle(K, H):
    np.testing.assert_allclose(farima_coeffs(K, H), _gamma_coeffs(K, H), rtol=1e-11)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.floats(0.501, 0.999))
def test_farima_coeffs_positive_sum_below_one(K, H):
    a = farima_coeffs(K, H)
    assert np.all(np.isfinite(a)) and np.all(a > 0)
    assert a.sum() < 1


def test_farima_memoryless_limit():
    assert np.abs(farima_coeffs(10, 0.5 + 1e-9)).max() < 1e-8


def test_farima_tail_slope():
    H = 0.75
    beta = (1 - (2 - 2 * H)) / 2
    a = farima_ar_inf(100_000, H)
    k = np.array([1_000, 100_000])
    slope = np.diff(np.log(a[k - 1])) / np.diff(np.log(k))
    assert slope[0] == pytest.approx(-beta - 1, abs=0.005)


# ------------------------------------------------------------------ signs

def test_iid_signs_uncorrelated():
    e = gen_signs("iid", 100_000, 7)
    c = sign_autocorr(e, 5)
    assert abs(c.values[0]) < 3 * c.stderr[0]
    assert set(np.unique(e)) == {-1, 1}


def test_mrr_signs_geometric():
    e = gen_signs("mrr", 100_000, 3, rho=0.3)
    c = sign_autocorr(e, 3)
    for l in (1, 2, 3):
        assert abs(c.values[l - 1] - 0.3 ** l) < 3 * c.stderr[l - 1] + 1e-3


def test_mrr_lag_one_product_three_sigma():
    e = gen_signs("mrr", 100_000, 11, rho=-0.4).astype(float)
    p = e[1:] * e[:-1]
    assert abs(p.mean() + 0.4) < 3 * p.std() / math.sqrt(len(p)) * math.sqrt((1 + 0.16) / (1 - 0.16))


def test_farima_signs_decay_exponent():
    e = gen_signs("farima", 1_000_000, 3, hurst=0.75)
    g = sign_autocorr(e, 1000, (10, 1000)).fit.exponent
    assert 0.4 <= g <= 0.6


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["iid", "mrr", "farima", "linear"]), st.integers(1, 500), st.integers(0, 2**31))
def test_signs_pure_function_of_seed(mode, n, seed):
    kw = {"mrr": {"rho": 0.2}, "farima": {"hurst": 0.7}, "linear": {"coeffs": [0.3, 0.2]}}.get(mode, {})
    a = gen_signs(mode, n, seed, **kw)
    b = gen_signs(mode, n, seed, **kw)
    assert a.tobytes() == b.tobytes()
    assert len(a) == n and set(np.unique(a)) <= {-1, 1}


# -------------------------------------------------------------------- LMF

def test_lmf_orders_share_sign_and_retire_at_size():
    s = gen_lmf(LmfParams(K=10, alpha=1.5), 50_000, 5)
    assert np.all(s.eps == s.signs[s.order_id])
    counts = np.bincount(s.order_id, minlength=len(s.sizes))
    done = np.unique(s.order_id)
    # every order except the ones still live at the end traded its full size
    finished = counts[done] == s.sizes[done]
    assert (~finished).sum() <= 10
    assert np.all(counts[done] <= s.sizes[done])
    assert np.all(s.live == 10)


def test_lmf_single_queue():
    s = gen_lmf(LmfParams(K=1, alpha=1.5), 200_000, 2)
    changes = np.flatnonzero(np.diff(s.order_id))
    assert np.all(np.diff(s.order_id) >= 0)
    for i in changes[:200]:
        assert np.all(s.eps[s.order_id == s.order_id[i]] == s.eps[i])
    c1 = sign_autocorr(s.eps, 10).values[0]
    # different orders have independent signs, so C_1 = P(trade n+1 belongs to the same order)
    p_same = 1 - len(changes) / (len(s.eps) - 1)
    assert c1 == pytest.approx(p_same, abs=0.01)


def test_lmf_generalized_matches_fixed():
    fixed = sign_autocorr(gen_lmf(LmfParams(K=10), 300_000, 1).eps, 1000, (10, 300)).fit.exponent
    gen = sign_autocorr(gen_lmf(LmfParams(K=10, creation_prob=0.2), 300_000, 1).eps, 1000,
                        (10, 300)).fit.exponent
    assert abs(fixed - gen) < 0.15


def test_lmf_brokers_label():
    s = gen_lmf(LmfParams(K=5, n_brokers=3), 1000, 0)
    assert set(np.unique(s.agent)) <= {0, 1, 2}


# -------------------------------------------------------------------- volumes

def test_pareto_hill():
    v = sample_volumes("pareto", 1_000_000, 1, alpha=1.5)
    assert 1.35 <= tail_index(v, 0.01).alpha <= 1.65
    assert v.min() >= 1.0


def test_lognormal_log_is_gaussian():
    v = sample_volumes("lognormal", 20_000, 4, s=0.8)
    z = np.log(v)
    assert stats.normaltest(z).pvalue > 1e-3
    assert z.std() == pytest.approx(0.8, rel=0.03)


def test_pareto3_second_moment_stable():
    # E[V^2] = alpha/(alpha-2) = 3 for alpha = 3
    m2 = [np.mean(sample_volumes("pareto", 400_000, s, alpha=3.0) ** 2) for s in range(4)]
    assert max(abs(m - 3.0) for m in m2) < 0.3


# -------------------------------------------------------------------- ZI

def test_zi_cancellation_dominated_widens_spread():
    base = gen_zero_intelligence(ZiParams(mu=1, rho=0.05, nu=0.01, band=60), 30_000, 1)
    wide = gen_zero_intelligence(ZiParams(mu=1, rho=0.05, nu=2.0, band=60), 30_000, 1)
    assert wide.time_average_spread() > 2 * base.time_average_spread()
    assert len(wide.book.orders) < len(base.book.orders)


def test_zi_pure_function_and_no_crossing():
    a = gen_zero_intelligence(ZiParams(nu=0.1, band=30), 5000, 9)
    b = gen_zero_intelligence(ZiParams(nu=0.1, band=30), 5000, 9)
    assert a.events == b.events
    _, rows = replay(a.events)
    assert all(r[2] > 0 for r in rows[1:] if not math.isnan(r[2]))


# ------------------------------------------------------------- Mike-Farmer

def test_mf_small_spread_more_crossing():
    r = gen_mike_farmer(MfParams(), 20_000, 1)
    med = np.median(r.spread_before)
    assert r.crossing[r.spread_before <= med].mean() > r.crossing[r.spread_before > med].mean()


def test_mf_returns_heavy_tailed():
    r = gen_mike_farmer(MfParams(), 20_000, 1)
    m = r.mid[np.isfinite(r.mid)]
    assert stats.kurtosis(np.diff(m[::10]), fisher=False) > 5


def test_mf_gaussian_placement_limit():
    r = gen_mike_farmer(MfParams(dof=math.inf), 5000, 1)
    assert np.isfinite(r.mid).all() and np.all(r.spread > 0)


# ------------------------------------------------------------------ Kyle

def test_kyle_exponential_relaxation():
    p = KyleParams(lam=0.2, beta=2.0, p_inf=1.0, horizon=20)
    price, _ = gen_kyle(p, 0)
    t = np.arange(21)
    np.testing.assert_allclose(price, 1.0 - (1 - 0.4) ** t, atol=1e-14)
    rate = -np.log((1 - price[1:]) / (1 - price[:-1]))
    np.testing.assert_allclose(rate, -math.log(1 - 0.4), rtol=1e-9)


def test_kyle_zero_beta_random_walk():
    price, phi = gen_kyle(KyleParams(lam=0.5, beta=0.0, xi=1.0, horizon=20_000), 3)
    assert np.all(phi == 0)
    d = np.diff(price)
    assert d.std() == pytest.approx(0.5, rel=0.03)
    assert abs(np.corrcoef(d[1:], d[:-1])[0, 1]) < 0.03


def test_kyle_recursion_linear_impact():
    p = KyleParams(lam=0.3, beta=0.5, xi=0.0, eta=0.0, horizon=30, p_inf=2.0)
    price, phi = gen_kyle(p, 0)
    np.testing.assert_allclose(np.diff(price), 0.3 * phi, atol=1e-15)
    # demand is linear in the price gap, so the cumulated demand is what moved the price
    assert price[-1] - price[0] == pytest.approx(p.lam * phi.sum(), abs=1e-12)


def test_kyle_divergence_warning():
    with pytest.warns(RuntimeWarning):
        gen_kyle(KyleParams(lam=1.0, beta=2.0), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gen_kyle(KyleParams(lam=0.5, beta=1.0), 0)
