import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergolab.correlation import correlation_series, fit_rate
from ergolab.errors import (IncompleteTailError, NonMarkovBaseError, UnsupportedDimensionError)
from ergolab.inducing import (first_return_partition, kac_check, merge_cells, separation_time,
                              tail_series, verify_gibbs_markov)
from ergolab.maps import make_map
from ergolab.measure import empirical_density, simulate_ensemble
from ergolab.observables import identity
from ergolab.transfer import leading_mode, step_eval, ulam


@pytest.fixture(scope="module")
def dbl_ind(doubling):
    return first_return_partition(doubling, (0.0, 0.5), n_max=30)


@pytest.fixture(scope="module")
def int_ind(intermittent):
    return first_return_partition(intermittent, (0.5, 1.0), n_max=4000)


def _left_inverse_orbit(count, gamma=0.5):
    """a_1 = 1/2 and f(a_{n+1}) = a_n, solved by bisection on the left branch."""
    a = [0.5]
    for _ in range(count - 1):
        target, lo, hi = a[-1], 0.0, a[-1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * (1 + (2 * mid) ** gamma) < target:
                lo = mid
            else:
                hi = mid
        a.append(0.5 * (lo + hi))
    return np.array(a)


# ---------------------------------------------------------------- partition

def test_doubling_tail_exact(dbl_ind):
    n = np.arange(1, 31)
    assert np.array_equal(dbl_ind.tail(), 2.0 ** -(n + 1))
    per = np.bincount(dbl_ind.cell_R, weights=dbl_ind.cell_mass)
    assert np.array_equal(per[1:31], 2.0 ** -(np.arange(1, 31) + 1))


def test_mass_conservation(dbl_ind, int_ind):
    for ind in (dbl_ind, int_ind):
        assert abs(math.fsum(ind.cell_mass) + ind.residual - ind.base_mass) <= 1e-9


def test_cells_disjoint(dbl_ind, int_ind):
    for ind in (dbl_ind, int_ind):
        assert np.all(ind.cell_lo < ind.cell_hi)
        assert np.all(ind.cell_hi[:-1] <= ind.cell_lo[1:])
        assert ind.cell_lo[0] >= ind.base[0] and ind.cell_hi[-1] <= ind.base[1]


def test_non_dyadic_base(doubling):
    with pytest.raises(NonMarkovBaseError):
        first_return_partition(doubling, (0.0, 0.3), n_max=10)


def test_viana_rejected():
    with pytest.raises(UnsupportedDimensionError):
        first_return_partition(make_map("viana"), (0.0, 0.5), n_max=5)


def test_intermittent_endpoints(int_ind, intermittent):
    # cells of return time n+1 are the f-preimages in (1/2, 1] of (a_{n+1}, a_n]
    a = _left_inverse_orbit(40)
    right = intermittent.branches[1]
    for n in range(1, 39):
        sel = int_ind.cell_R == n + 1
        assert sel.sum() == 1
        lo, hi = int_ind.cell_lo[sel][0], int_ind.cell_hi[sel][0]
        ref = np.sort(right.inv(np.array([a[n], a[n - 1]])))
        assert abs(lo - ref[0]) < 1e-13 and abs(hi - ref[1]) < 1e-13


def test_intermittent_tail_exponent(int_ind):
    s = tail_series(int_ind)
    beta = fit_rate(s.window(50, 4000), "polynomial").params["beta"]
    assert abs(beta - 2.0) <= 0.2
    assert np.all(np.diff(s.values) <= 0)


def test_tail_complete_flag(dbl_ind, doubling):
    assert tail_series(dbl_ind).meta["complete"]
    short = first_return_partition(doubling, (0.0, 0.5), n_max=10)
    assert not tail_series(short).meta["complete"]
    assert tail_series(short).meta["upper_bound"]


def test_tail_dominated_by_fit(int_ind):
    s = tail_series(int_ind)
    w = s.window(50, 4000)
    fit = fit_rate(w, "polynomial")
    late = s.window(2000, 4000)
    assert np.all(late.values <= 1.1 * fit.predict(late.n))


def test_tail_exponent_vs_correlation_exponent(int_ind, intermittent):
    corr = correlation_series(intermittent, identity(), identity(), 50, N=2 ** 14,
                              norm_phi="none", norm_psi="none")
    beta_corr = fit_rate(corr.window(5, 50), "polynomial").params["beta"]
    tail_exp = fit_rate(tail_series(int_ind).window(50, 4000), "polynomial").params["beta"]
    assert tail_exp >= beta_corr - 1 - 0.3


def test_csv_export(dbl_ind, tmp_path):
    p = tmp_path / "cells.csv"
    dbl_ind.to_csv(p)
    raw = p.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["cell_left", "cell_right", "R", "mass"]
    assert len(rows) == dbl_ind.ncells + 1


@given(x=st.floats(0.0, 0.5, exclude_min=True))
def test_locate_consistent(x):
    ind = first_return_partition(make_map("doubling"), (0.0, 0.5), n_max=20)
    c = int(ind.locate(np.array([x]))[0])
    if c >= 0:
        assert ind.cell_lo[c] < x <= ind.cell_hi[c]


# ---------------------------------------------------------------- Gibbs-Markov

def test_doubling_gibbs_markov(dbl_ind):
    rep = verify_gibbs_markov(dbl_ind)
    assert rep.lambda_hat == 0.5 and rep.K_hat == 0.0 and rep.passed


def test_intermittent_gibbs_markov(int_ind):
    rep = verify_gibbs_markov(int_ind, sample_per_cell=40)
    assert rep.pairs >= 10_000
    assert rep.lambda_hat < 1 and math.isfinite(rep.K_hat)
    assert rep.distortion_margin > 0 and rep.passed


def test_merged_cells_flagged(dbl_ind):
    bad = merge_cells(dbl_ind, 0, 1)
    rep = verify_gibbs_markov(bad)
    assert rep.markov_residual > 1e-9 and not rep.markov_pass and rep.failing_cells


def test_separation_time_identical_points(dbl_ind):
    u = np.array([0.1, 0.3])
    s, capped = separation_time(dbl_ind, u, u, cap=12)
    assert np.all(s == 12) and np.all(capped)


# ---------------------------------------------------------------- Kac

def test_kac_doubling():
    m = make_map("doubling")
    ind = first_return_partition(m, (0.0, 0.5), n_max=60)
    m_int, mu_int = kac_check(ind)
    assert abs(m_int - 1.0) < 1e-12 and mu_int == m_int


def test_kac_doubling_histogram(dbl_ind, doubling):
    e = simulate_ensemble(doubling, 200_000, burn_in=20, seed=1)
    ind = first_return_partition(doubling, (0.0, 0.5), n_max=40)
    _, mu_int = kac_check(ind, empirical_density(e, 64))
    assert abs(mu_int - 1.0) < 0.01


def test_kac_intermittent(int_ind, intermittent):
    m_int, _ = kac_check(int_ind)
    assert math.isfinite(m_int) and m_int > 0.5
    op = ulam(intermittent, 4096)
    h = leading_mode(op).h
    _, mu_int = kac_check(int_ind, lambda x: step_eval(op, h, x))
    assert abs(mu_int - 1.0) < 0.02


def test_kac_incomplete():
    m = make_map("intermittent", gamma=0.9)
    ind = first_return_partition(m, (0.5, 1.0), n_max=2000)
    with pytest.raises(IncompleteTailError):
        kac_check(ind)
    partial, _ = kac_check(ind, strict=False)
    assert math.isfinite(partial) and partial > 0
    beta = fit_rate(tail_series(ind).window(50, 2000), "polynomial").params["beta"]
    assert abs(beta - 1 / 0.9) < 0.1
