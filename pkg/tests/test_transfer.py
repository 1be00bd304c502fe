import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ergolab.errors import FitFailureError, GridMismatchError, UnsupportedDimensionError
from ergolab.maps import make_map
from ergolab.transfer import (UlamOperator, apply_P, apply_U, check_operator_identities,
                              cond_expect, grid_average, lasota_yorke_fit, leading_mode,
                              saussol_condition, seminorm, spectral_gap, spectral_report, ulam)

FAMILIES = [("doubling", {}), ("doubling", {"d": 3}), ("tent", {}), ("markov3", {}),
            ("intermittent", {"gamma": 0.5}), ("intermittent", {"gamma": 0.8}),
            ("quadratic", {"a": 2.0}), ("rotation", {})]


@pytest.fixture(scope="module")
def dbl1024(doubling):
    return ulam(doubling, 1024)


def test_doubling_n4_rows(doubling):
    T = ulam(doubling, 4).dense()
    half = [0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]
    assert np.array_equal(T, np.array([half[0], half[1], half[0], half[1]]))


def test_doubling_n4_spectrum(doubling):
    op = ulam(doubling, 4)
    ev = np.sort(np.abs(np.linalg.eigvals(op.dense())))
    assert abs(ev[-1] - 1) < 1e-12 and np.all(ev[:-1] < 1e-7)
    assert spectral_gap(op) == 0.0


@pytest.mark.parametrize("fam,kw", FAMILIES)
@pytest.mark.parametrize("N", [7, 64, 500])
def test_rows_stochastic(fam, kw, N):
    op = ulam(make_map(fam, **kw), N)
    T = op.dense()
    assert np.max(np.abs(T.sum(axis=1) - 1)) <= 1e-12
    assert T.min() >= 0 and T.max() <= 1


def test_viana_rejected():
    with pytest.raises(UnsupportedDimensionError):
        ulam(make_map("viana"), 16)


@pytest.mark.parametrize("N", [16, 64, 256, 1024, 4096])
def test_doubling_density_uniform(doubling, N):
    rep = leading_mode(ulam(doubling, N))
    assert np.max(np.abs(rep.h - 1)) <= 1e-8
    assert abs(rep.lambda1 - 1) <= 1e-10


def test_intermittent_density_singular(intermittent):
    op = ulam(intermittent, 2 ** 14)
    rep = leading_mode(op)
    h, c = rep.h, op.centers
    assert h.min() >= -1e-12
    assert np.all(np.diff(h[:64]) < 0)
    sel = (c > 2.0 ** -10) & (c < 2.0 ** -6)
    slope = np.polyfit(np.log(c[sel]), np.log(h[sel]), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_permutation_has_no_gap():
    op = UlamOperator.from_matrix(np.eye(5))
    assert not leading_mode(op).gap_resolved


def test_two_state_gap():
    for a, b in [(0.3, 0.2), (0.9, 0.8), (0.5, 0.5), (0.1, 0.05)]:
        op = UlamOperator.from_matrix([[1 - a, a], [b, 1 - b]])
        assert abs(spectral_gap(op) - abs(1 - a - b)) < 1e-12


def test_markov3_gap(markov3):
    op = ulam(markov3, 3)
    ref = np.array([[0.5, 0.5, 0], [1 / 3, 1 / 3, 1 / 3], [0, 0.5, 0.5]])
    assert np.allclose(op.dense(), ref, atol=1e-15)
    # hand eigensolve: eigenvalues 1, 1/2, -1/6
    assert abs(spectral_gap(op) - 0.5) <= 1e-9
    assert abs(spectral_gap(ulam(markov3, 96)) - 0.5) <= 1e-9


def test_deflated_power_matches_dense(markov3):
    op = ulam(markov3, 300)
    assert abs(spectral_gap(op, dense_cutoff=10) - spectral_gap(op)) < 1e-6


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gap_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    T = rng.random((6, 6)) ** 3
    T /= T.sum(axis=1, keepdims=True)
    perm = rng.permutation(6)
    P = np.eye(6)[perm]
    a = spectral_gap(UlamOperator.from_matrix(T))
    b = spectral_gap(UlamOperator.from_matrix(P @ T @ P.T))
    assert abs(a - b) < 1e-9


def test_P_mu_centred_identity(dbl1024):
    N = dbl1024.N
    c = dbl1024.centers
    out = apply_P(dbl1024, c - 0.5)
    assert np.max(np.abs(out - (c - 0.5) / 2)) <= 2 / N


@pytest.mark.parametrize("fam,kw", FAMILIES[:6])
def test_P_fixes_constants(fam, kw):
    op = ulam(make_map(fam, **kw), 256)
    assert np.array_equal(apply_P(op, np.ones(256)), np.ones(256))


def test_cond_expect_zero_is_identity(dbl1024, doubling):
    phi = np.sin(dbl1024.centers * 7)
    assert np.array_equal(cond_expect(dbl1024, doubling, phi, 0), phi)


def test_grid_mismatch(dbl1024):
    with pytest.raises(GridMismatchError):
        apply_P(dbl1024, np.ones(10))


def test_identities_smooth(dbl1024, doubling):
    # P3 costs about half a bin width times Lip(phi), so keep Lip(phi) <= 1
    phi = grid_average(dbl1024, lambda x: x * (1 - x))
    psi = grid_average(dbl1024, lambda x: np.sin(2 * np.pi * x))
    res = check_operator_identities(dbl1024, doubling, phi, psi)
    assert all(v <= 1e-3 for v in res.values())


def test_identities_constant(dbl1024, doubling):
    one = np.ones(dbl1024.N)
    res = check_operator_identities(dbl1024, doubling, one, one)
    assert res["P1"] == 0 and res["P3"] == 0 and res["P5"] == 0


@pytest.fixture(scope="module")
def int256():
    op = ulam(make_map("intermittent", gamma=0.5), 256)
    op.spectral()
    return op


@given(arrays(np.float64, 256, elements=st.floats(-1e3, 1e3)))
def test_P5_contraction(int256, phi):
    res = check_operator_identities(int256, int256.map, phi, phi)
    assert res["P5"] <= 1e-12 * max(1.0, float(np.max(np.abs(phi))))


def test_bv_indicator():
    phi = (np.arange(64) < 32).astype(float)
    assert seminorm(phi, "bv") == 1.0


@pytest.mark.parametrize("alpha,eps0", [(0.5, 0.1), (0.2, 0.01), (0.9, 0.3)])
def test_quasiholder_zero_function(alpha, eps0):
    assert seminorm(np.zeros(32), "quasiholder", alpha=alpha, eps0=eps0) == 0.0


def test_quasiholder_indicator():
    phi = (np.arange(64) < 32).astype(float)
    v = seminorm(phi, "quasiholder", alpha=0.5, eps0=0.1)
    assert abs(v - 4 * math.sqrt(0.1)) < 1e-9


@given(st.integers(0, 2 ** 31), st.floats(-5, 5, allow_nan=False))
def test_bv_subadditive_homogeneous(seed, c):
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal(40), rng.standard_normal(40)
    assert seminorm(f + g) <= seminorm(f) + seminorm(g) + 1e-12
    assert abs(seminorm(c * f) - abs(c) * seminorm(f)) <= 1e-9 * (1 + seminorm(f))


def test_lasota_yorke_doubling(doubling):
    n0, a, b = lasota_yorke_fit(doubling, 256, 1000, seed=1)
    assert n0 == 1 and abs(a - 0.5) <= 0.05 and b >= 0


def test_lasota_yorke_tent():
    n0, a, _ = lasota_yorke_fit(make_map("tent"), 256, 400, seed=2)
    assert n0 == 1 and a < 1


def test_lasota_yorke_rotation_fails():
    with pytest.raises(FitFailureError):
        # coarse grids add numerical diffusion (alpha about 0.994 at N=128)
        lasota_yorke_fit(make_map("rotation"), 1024, 200, seed=3)


def test_saussol_examples():
    v, ok = saussol_condition(0.02, 0.5, 4, 2)
    assert ok and abs(v - (math.sqrt(0.02) + (0.08 / 0.98) * 4 * 2 / math.pi)) < 1e-12
    assert abs(v - 0.349) < 1e-3
    v, ok = saussol_condition(0.2, 0.5, 4, 2)
    assert not ok and abs(v - 2.99) < 0.01
    v, ok = saussol_condition(1e-12, 0.5, 4, 2)
    assert ok and v < 1e-5


def test_spectral_report_fields(markov3):
    rep = spectral_report(ulam(markov3, 60))
    assert abs(rep.q - 0.5) < 1e-9 and rep.gap_resolved and rep.C_bound >= 1.0
    d = rep.to_dict()
    assert {"lambda1", "q", "gap_resolved", "C_bound"} <= set(d)


def test_apply_U_composes(dbl1024, doubling):
    c = dbl1024.centers
    out = apply_U(dbl1024, doubling, c)
    assert np.max(np.abs(out - doubling(c))) < 2 / dbl1024.N


def test_operator_csv_rows(markov3):
    rows = ulam(markov3, 3).rows()
    assert rows[0] == (0, 0, 0.5) and len(rows) == 7
