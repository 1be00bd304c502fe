import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergolab.errors import PreconditionError
from ergolab.maps import make_map
from ergolab.measure import (birkhoff, empirical_density, lyapunov_check, push_forward,
                             simulate_ensemble, OrbitEnsemble)
from ergolab.observables import constant, identity, log_inv_derivative
from ergolab.transfer import leading_mode, ulam


@pytest.fixture(scope="module")
def doubling_ens(doubling):
    return simulate_ensemble(doubling, 100_000, burn_in=50, seed=11)


@pytest.fixture(scope="module")
def intermittent_ens(intermittent):
    return simulate_ensemble(intermittent, 400_000, burn_in=1000, seed=3)


def _dyadic_slope(x, ks):
    dens = [np.mean((x > 2.0 ** -k) & (x <= 2.0 ** -(k - 1))) / 2.0 ** -k for k in ks]
    return np.polyfit(np.log(1.5 * 2.0 ** -ks), np.log(dens), 1)[0]


def test_doubling_ensemble_is_uniform(doubling_ens):
    x = np.sort(doubling_ens.points)
    n = x.size
    ks = max(np.max(np.arange(1, n + 1) / n - x), np.max(x - np.arange(n) / n))
    assert ks <= 0.01


def test_ensemble_points_in_domain(doubling_ens, intermittent_ens):
    for e in (doubling_ens, intermittent_ens):
        assert np.all((e.points >= 0.0) & (e.points <= 1.0))


def test_count_zero_rejected(doubling):
    with pytest.raises(PreconditionError):
        simulate_ensemble(doubling, 0, burn_in=10, seed=0)


def test_ensemble_seed_and_worker_determinism(intermittent):
    a = simulate_ensemble(intermittent, 70_000, burn_in=200, seed=5, workers=1)
    b = simulate_ensemble(intermittent, 70_000, burn_in=200, seed=5, workers=4)
    c = simulate_ensemble(intermittent, 70_000, burn_in=200, seed=6, workers=1)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_doubling_histogram_flat(doubling_ens):
    h = empirical_density(doubling_ens, 64)
    assert abs(h.masses.sum() - 1.0) <= 1e-9
    se = math.sqrt((1 / 64) * (1 - 1 / 64) / doubling_ens.count)
    assert np.all(np.abs(h.masses - 1 / 64) <= 3 * se)


def test_intermittent_mass_concentrates_near_zero(intermittent_ens, intermittent):
    h = empirical_density(intermittent_ens, 64)
    assert h.masses[0] > 2 * (1 / 64)
    # Ulam converges slowly at the x^-gamma singularity, hence the fine grid
    op = ulam(intermittent, 16384)
    ref = leading_mode(op).h * op.widths
    ref64 = ref.reshape(64, 256).sum(axis=1)
    assert abs(h.masses[0] - ref64[0]) < 0.05 * ref64[0]
    assert np.all(np.abs(h.masses[8:] - ref64[8:]) < 0.05 * ref64[8:])


def test_intermittent_density_slope(intermittent_ens, intermittent):
    slope = _dyadic_slope(intermittent_ens.points, np.arange(8, 16))
    assert -0.6 <= slope <= -0.4
    op = ulam(intermittent, 8192)
    h, c = leading_mode(op).h, op.centers
    sel = (c < 2.0 ** -8) & (c > 16 / 8192)
    ref = np.polyfit(np.log(c[sel]), np.log(h[sel]), 1)[0]
    assert abs(slope - ref) < 0.1


def test_single_point_two_bins(doubling):
    e = OrbitEnsemble(map=doubling, count=1, burn_in=0, seed=0, points=np.array([0.3]))
    h = empirical_density(e, 2)
    assert sorted(h.masses.tolist()) == [0.0, 1.0]


def test_histogram_bins_precondition(doubling_ens):
    with pytest.raises(PreconditionError):
        empirical_density(doubling_ens, 1)


def test_birkhoff_doubling_mean(doubling):
    assert abs(birkhoff(doubling, identity(), 0.1234567, 1_000_000, seed=2) - 0.5) <= 0.002


def test_birkhoff_log_derivative_exact(doubling):
    assert birkhoff(doubling, log_inv_derivative(doubling), 0.3, 1000) == -math.log(2.0)
    v = birkhoff(doubling, lambda x: np.log(np.abs(doubling.deriv(x))), 0.7, 500)
    assert v == math.log(2.0)


def test_birkhoff_n1(intermittent):
    assert birkhoff(intermittent, identity(), 0.37, 1) == 0.37


@given(c=st.floats(-1e6, 1e6, allow_nan=False), n=st.integers(1, 3000),
       x0=st.floats(0.0, 1.0, exclude_min=True))
def test_birkhoff_constant_exact(c, n, x0):
    m = make_map("intermittent", gamma=0.5)
    assert birkhoff(m, constant(c), x0, n) == c


def test_birkhoff_n0_rejected(doubling):
    with pytest.raises(PreconditionError):
        birkhoff(doubling, identity(), 0.2, 0)


def test_lyapunov_doubling(doubling):
    e = simulate_ensemble(doubling, 2000, burn_in=10, seed=1)
    est, ok, info = lyapunov_check(doubling, e, 200)
    assert est == -math.log(2.0) and ok
    assert info["skipped"] == 0


def test_lyapunov_intermittent(intermittent):
    e = simulate_ensemble(intermittent, 20_000, burn_in=500, seed=4)
    est, ok, _ = lyapunov_check(intermittent, e, 400)
    assert est < 0 and ok
    # Ulam-weighted midpoint quadrature of -log f'
    op = ulam(intermittent, 4096)
    h = leading_mode(op).h
    ref = float(np.sum(-np.log(intermittent.deriv(op.centers)) * h * op.widths))
    assert abs(est - ref) < 0.03


def test_lyapunov_identity():
    m = make_map("identity")
    e = simulate_ensemble(m, 500, burn_in=0, seed=0)
    est, ok, _ = lyapunov_check(m, e, 100)
    assert est == 0.0 and not ok


def test_lyapunov_short_orbit_rejected(doubling, doubling_ens):
    with pytest.raises(PreconditionError):
        lyapunov_check(doubling, doubling_ens, 50)


@pytest.mark.parametrize("fam,kw", [("doubling", {}), ("intermittent", {"gamma": 0.5}),
                                    ("markov3", {})])
def test_push_forward_invariance(fam, kw):
    m = make_map(fam, **kw)
    e = simulate_ensemble(m, 100_000, burn_in=1000, seed=9)
    h0 = empirical_density(e, 32)
    moved = OrbitEnsemble(map=m, count=e.count, burn_in=e.burn_in + 1, seed=e.seed,
                          points=push_forward(e))
    h1 = empirical_density(moved, 32)
    assert np.all(np.abs(h1.masses - h0.masses) <= 4 * np.maximum(h0.stderr(), 1e-12))


def test_histogram_rows_columns(doubling_ens):
    rows = empirical_density(doubling_ens, 4).rows()
    assert rows[0][0] == 0.0 and rows[-1][1] == 1.0 and len(rows[0]) == 3
