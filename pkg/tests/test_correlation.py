import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergolab.correlation import (DecaySeries, correlation_series, expansion_time, fit_rate,
                                 hitting_times, holder_norm, ld_series)
from ergolab.errors import InsufficientSamplesError, PreconditionError, ZeroNormError
from ergolab.maps import make_map
from ergolab.measure import simulate_ensemble
from ergolab.observables import Observable, centered_identity, constant, identity


def _series(n, v):
    n = np.asarray(n, dtype=float)
    return DecaySeries(n, np.asarray(v, dtype=float), np.zeros(n.size))


# ---------------------------------------------------------------- Hoelder norms

def test_holder_identity():
    est = holder_norm(identity(), 1.0)
    assert abs(est.norm - 2.0) < 1e-9 and est.lower_bound


def test_holder_constant():
    assert holder_norm(constant(-3.5), 0.7).norm == 3.5


def test_holder_sqrt():
    est = holder_norm(Observable(np.sqrt, alpha=0.5), 0.5)
    assert 1.99 <= est.norm <= 2.0 + 1e-9


def test_holder_bad_alpha():
    with pytest.raises(PreconditionError):
        holder_norm(identity(), 0.0)


# ---------------------------------------------------------------- correlations

@pytest.fixture(scope="module")
def doubling_cov(doubling):
    return correlation_series(doubling, identity(), identity(), 10, N=4096,
                              norm_phi="none", norm_psi="none")


def test_doubling_covariance_oracle(doubling_cov):
    ref = 2.0 ** -np.arange(1, 11) / 12
    assert np.max(np.abs(doubling_cov.raw - ref)) <= 1e-3


def test_doubling_covariance_rate(doubling_cov):
    fit = fit_rate(doubling_cov)
    assert fit.family == "exponential"
    assert abs(fit.params["tau"] - math.log(2)) <= 0.05 * math.log(2)


@pytest.mark.parametrize("method", ["ulam", "ensemble"])
def test_constant_psi_gives_zero(intermittent, method):
    s = correlation_series(intermittent, identity(), constant(1.0), 8, method=method,
                           N=512, count=5000, norm_phi="none", norm_psi="none")
    assert np.max(np.abs(s.raw)) <= 1e-12


def test_zero_norm(doubling):
    with pytest.raises(ZeroNormError):
        correlation_series(doubling, identity(), constant(0.0), 5, N=64)


def test_intermittent_polynomial_slope(intermittent):
    s = correlation_series(intermittent, identity(), identity(), 50, N=2 ** 14,
                           norm_phi="none", norm_psi="none")
    beta = fit_rate(s.window(5, 50), "polynomial").params["beta"]
    assert 0.7 <= beta <= 1.3


def test_cauchy_schwarz_ensemble(intermittent):
    s = correlation_series(intermittent, identity(), identity(), 20, method="ensemble",
                           count=50_000, seed=2, norm_phi="none", norm_psi="none")
    e = simulate_ensemble(intermittent, 50_000, burn_in=1000, seed=2)
    sd = float(np.std(e.points))
    assert np.all(np.abs(s.raw) <= sd * sd + 4 * s.stderr)


def test_ensemble_matches_ulam(doubling, doubling_cov):
    s = correlation_series(doubling, identity(), identity(), 4, method="ensemble",
                           count=200_000, seed=1, norm_phi="none", norm_psi="none")
    assert np.all(np.abs(s.raw - doubling_cov.raw[:4]) <= 4 * s.stderr + 1e-4)


# ---------------------------------------------------------------- large deviations

@pytest.fixture(scope="module")
def dbl_ens(doubling):
    return simulate_ensemble(doubling, 50_000, burn_in=20, seed=7)


def test_ld_monotone_in_eps(doubling, dbl_ens):
    vals = [ld_series(doubling, centered_identity(), e, [5, 20], dbl_ens, center=0.0).values
            for e in (0.02, 0.05, 0.1, 0.2, 0.3)]
    for a, b in zip(vals, vals[1:]):
        assert np.all(b <= a)


def test_ld_impossible_deviation(doubling, dbl_ens):
    s = ld_series(doubling, centered_identity(), 1.01, [1, 3, 10], dbl_ens)
    assert np.all(s.values == 0)


def test_ld_n1_matches_histogram(doubling, dbl_ens):
    eps = 0.3
    s = ld_series(doubling, centered_identity(), eps, [1], dbl_ens, center=0.0)
    direct = np.mean(np.abs(dbl_ens.points - 0.5) > eps)
    assert abs(s.values[0] - direct) <= 2 * s.stderr[0] + 1e-15


def test_ld_eps_must_be_positive(doubling, dbl_ens):
    with pytest.raises(PreconditionError):
        ld_series(doubling, identity(), 0.0, [1], dbl_ens)


# ---------------------------------------------------------------- fitting

def test_fit_polynomial_exact():
    n = np.arange(1, 40)
    fit = fit_rate(_series(n, n ** -2.0))
    assert fit.family == "polynomial" and abs(fit.params["beta"] - 2) <= 0.01


def test_fit_stretched_exact():
    n = np.arange(1, 200)
    fit = fit_rate(_series(n, np.exp(-0.3 * n ** (1 / 3))))
    assert fit.family == "stretched"
    assert abs(fit.params["tau"] - 0.3) <= 0.02
    assert abs(fit.params["theta"] - 1 / 3) <= 0.05


def test_fit_needs_points():
    with pytest.raises(InsufficientSamplesError):
        fit_rate(_series(np.arange(1, 6), np.ones(5)))


@given(beta=st.floats(0.3, 4.0), C=st.floats(0.01, 100.0))
def test_fit_polynomial_round_trip(beta, C):
    n = np.arange(1, 60)
    fit = fit_rate(_series(n, C * n ** -beta), "polynomial")
    assert abs(fit.params["beta"] - beta) <= 0.01 * beta


@given(tau=st.floats(0.01, 2.0))
def test_fit_exponential_round_trip(tau):
    n = np.arange(1, 30)
    fit = fit_rate(_series(n, 3.0 * np.exp(-tau * n)), "exponential")
    assert abs(fit.params["tau"] - tau) <= 0.01 * tau


@given(tau=st.floats(0.1, 1.0), theta=st.floats(0.15, 0.95))
def test_fit_stretched_round_trip(tau, theta):
    n = np.arange(1, 300)
    fit = fit_rate(_series(n, np.exp(-tau * n ** theta)), "stretched")
    assert abs(fit.params["theta"] - theta) <= 0.01 * theta
    assert abs(fit.params["tau"] - tau) <= 0.01 * tau


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 3.0])
def test_fit_noisy_coverage(beta):
    # a single draw lands outside 3 SE about 0.3% of the time, so check coverage
    n = np.arange(1, 80, dtype=float)
    hits = 0
    for seed in range(300):
        rng = np.random.default_rng(seed)
        v = n ** -beta * np.exp(0.05 * rng.standard_normal(n.size))
        fit = fit_rate(_series(n, v), "polynomial")
        hits += abs(fit.params["beta"] - beta) <= 3 * fit.stderr["beta"]
    assert hits / 300 >= 0.97


# ---------------------------------------------------------------- hitting times

def test_doubling_expansion_time_trivial(doubling):
    e = simulate_ensemble(doubling, 2000, burn_in=5, seed=0)
    ht = expansion_time(doubling, e, 50, lam=-math.log(2))
    assert np.all(ht.times == 1) and np.all(ht.tail.values == 0)


def test_censoring_with_n_max_one(doubling):
    e = simulate_ensemble(doubling, 500, burn_in=5, seed=0)
    ht = hitting_times(doubling, identity(), e, 1, upper=-1.0)
    assert ht.censored.all() and ht.censored_fraction == 1.0


def test_intermittent_expansion_tail(intermittent):
    e = simulate_ensemble(intermittent, 20_000, burn_in=500, seed=5)
    ht = expansion_time(intermittent, e, 400)
    v = ht.tail.values
    assert v[0] > 0 and np.all(np.diff(v) <= 0)
    beta = fit_rate(ht.tail.window(10, 400), "polynomial").params["beta"]
    assert beta > 0


@given(seed=st.integers(0, 1000), eps=st.floats(0.01, 0.3))
def test_hitting_tail_non_increasing(seed, eps):
    m = make_map("intermittent", gamma=0.5)
    e = simulate_ensemble(m, 300, burn_in=20, seed=seed)
    ht = hitting_times(m, identity(), e, 60, eps=eps)
    assert np.all(np.diff(ht.tail.values) <= 0)
    assert np.all(ht.times[~ht.censored] <= 60)
