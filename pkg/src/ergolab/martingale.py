"""Martingale-difference decomposition of Birkhoff sums and concentration oracles.

Conditional expectations are computed through ``U^i P^i`` on the grid; the
filtration is never represented explicitly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import transfer as tr
from .errors import (BoundViolationError, EnumerationBudgetError, PreconditionError)
from .maps import PiecewiseMap, iterate
from .parallel import map_chunks

CENTER_TOL = 1e-9


@dataclass
class MartingaleDecomposition:
    """``xi = phi + chi - chi o f - P^k phi`` on an Ulam grid.

    ``chi = sum_{j=1}^k P^j phi``.  In exponential mode ``k`` is the number
    of terms actually summed and ``summable`` records the diagnosis.
    """
    k: int
    phi: np.ndarray
    chi: np.ndarray
    xi: np.ndarray
    Pk_phi: np.ndarray
    op: tr.UlamOperator
    map: PiecewiseMap
    center: float = 0.0
    mode: str = "truncated"
    summable: bool | None = None
    powers_sup: np.ndarray = field(default_factory=lambda: np.empty(0))
    source: object = None

    @property
    def chi_sup(self) -> float:
        return float(np.max(np.abs(self.chi)))

    def step(self, g, x):
        """Evaluate a grid function at points as its piecewise-constant representative."""
        return tr.step_eval(self.op, g, x)


def _grid(op, phi):
    if callable(phi):
        return tr.grid_average(op, phi)
    return tr._check_grid(op, phi).copy()


def decompose(op: tr.UlamOperator, m: PiecewiseMap, phi, k: int | None = 10,
              mode: str = "truncated", center: bool = True, tol: float = 1e-12,
              max_terms: int = 1000, blowup: float = 1e6) -> MartingaleDecomposition:
    """Build the decomposition for ``phi`` (callable or grid function).

    ``mode="truncated"`` sums ``k`` powers of ``P``.  ``mode="exponential"``
    sums until ``||P^j phi||_inf < tol`` or ``max_terms``; the partial sums
    exceeding ``blowup`` in sup norm is diagnosed as non-summable.
    """
    g = _grid(op, phi)
    c = tr.mu_integral(op, g)
    if center:
        g = g - c
    elif abs(c) > CENTER_TOL:
        raise PreconditionError(f"phi must have zero mean, got {c:.3e}")
    if mode == "truncated":
        if k is None or k < 1:
            raise PreconditionError("k must be >= 1")
        terms = k
    elif mode == "exponential":
        terms = max_terms
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    chi = np.zeros_like(g)
    Pj = g
    sups = []
    summable = None
    used = 0
    for j in range(1, terms + 1):
        Pj = tr.apply_P(op, Pj)
        chi = chi + Pj
        used = j
        s = float(np.max(np.abs(Pj)))
        sups.append(s)
        if mode == "exponential":
            if float(np.max(np.abs(chi))) > blowup:
                summable = False
                break
            if s < tol:
                summable = True
                break
    if mode == "exponential" and summable is None:
        summable = False
    xi = g + chi - tr.apply_U(op, m, chi) - Pj
    return MartingaleDecomposition(k=used, phi=g, chi=chi, xi=xi, Pk_phi=Pj, op=op, map=m,
                                   center=c if center else 0.0, mode=mode, summable=summable,
                                   powers_sup=np.array(sups), source=phi)


@dataclass(frozen=True)
class ClosedFormDecomposition:
    """Decomposition given by callables (used as an exact oracle)."""
    k: int
    phi: object
    chi: object
    Pk_phi: object
    map: PiecewiseMap

    def xi(self, x):
        x = np.asarray(x, dtype=float)
        return self.phi(x) + self.chi(x) - self.chi(self.map(x)) - self.Pk_phi(x)


def doubling_closed_form(k: int) -> ClosedFormDecomposition:
    """``phi = x - 1/2`` under the doubling map: ``P^j phi = 2^-j phi``."""
    from .maps import make_map
    a = 1.0 - 2.0 ** (-k)
    b = 2.0 ** (-k)
    return ClosedFormDecomposition(
        k=k, phi=lambda x: np.asarray(x) - 0.5, chi=lambda x: a * (np.asarray(x) - 0.5),
        Pk_phi=lambda x: b * (np.asarray(x) - 0.5), map=make_map("doubling"))


def verify_decomposition(dec, m: PiecewiseMap, x0, n: int, seed: int = 0) -> float:
    """Largest ``|S_n - RHS|`` over the orbits of ``x0``, where
    ``RHS = sum Z_j + chi o f^n - chi + sum P^k phi o f^{n-j}``.

    ``S_n`` uses the exact (centred) observable; grid decompositions are
    evaluated as step functions at the orbit points.  Orbits of
    float-degenerate families use the seeded low-bit refresh.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    traj = iterate(m, np.asarray(x0, dtype=float), n, record=True,
                   dither_seed=seed if m.dither else None)
    pts = traj[:, :n]
    if isinstance(dec, ClosedFormDecomposition):
        phi_exact = dec.phi(pts)
        xi = dec.xi(pts)
        Pk = dec.Pk_phi(pts)
        chi0, chin = dec.chi(traj[:, 0]), dec.chi(traj[:, n])
    else:
        src = dec.source
        if callable(src):
            phi_exact = np.asarray(src(pts), dtype=float) - dec.center
        else:
            phi_exact = dec.step(dec.phi, pts)
        xi = dec.step(dec.xi, pts)
        Pk = dec.step(dec.Pk_phi, pts)
        chi0, chin = dec.step(dec.chi, traj[:, 0]), dec.step(dec.chi, traj[:, n])
    lhs = phi_exact.sum(axis=1)
    rhs = xi.sum(axis=1) + chin - chi0 + Pk.sum(axis=1)
    return float(np.max(np.abs(lhs - rhs)))


def verify_martingale(dec: MartingaleDecomposition, n: int = 10, xi=None,
                      pointwise: bool = False, samples_per_bin: int = 4) -> tuple:
    """``(||P xi||_inf, max_{i<n} ||U^{i+1} P xi||_inf)``.

    By default both operators act on the grid.  With ``pointwise=True``,
    ``xi`` is read as the function ``phi + chi - chi o f - P^k phi`` on the
    interval (exact ``phi`` and composition, step functions for the grid
    terms) and the true transfer operator is applied through branch
    preimages at ``samples_per_bin`` points per bin.  Exact Koopman steps
    preserve the sup norm on a surjective map, so both entries coincide.
    """
    op, m = dec.op, dec.map
    x = dec.xi if xi is None else tr._check_grid(op, xi)
    if pointwise:
        u = (np.arange(samples_per_bin) + 0.5) / samples_per_bin
        y = (op.edges[:-1, None] + op.widths[:, None] * u[None, :]).ravel()
        shift = 0.0 if xi is None else x - dec.xi
        src = dec.source

        def xi_fn(pre, img):
            base = (np.asarray(src(pre), dtype=float) - dec.center if callable(src)
                    else dec.step(dec.phi, pre))
            return (base + dec.step(dec.chi, pre) - dec.step(dec.chi, img)
                    - dec.step(dec.Pk_phi, pre) + dec.step(shift + np.zeros(op.N), pre))
        Px = tr.pointwise_transfer(op, m, xi_fn, y)
        r = float(np.max(np.abs(Px)))
        return r, r
    Px = tr.apply_P(op, x)
    r1 = float(np.max(np.abs(Px)))
    g = Px
    r2 = 0.0
    for _ in range(n):
        g = tr.apply_U(op, m, g)
        r2 = max(r2, float(np.max(np.abs(g))))
    return r1, r2


def pjq_check(op: tr.UlamOperator, phi, q: float, j_max: int, norm_B: float | None = None,
              tol: float = 1e-9) -> list:
    """Compare ``||P^j phi||_q`` with the duality bound for ``j = 1..j_max``.

    The pairing ``int phi (psi o f^j) dmu`` with ``psi = sgn(P^j phi)`` uses the
    Ulam Koopman operator ``T^j psi``, the exact grid adjoint of ``P^j``.
    Returns dicts with ``j, lhs, rhs, pairing, cor, pass``.
    """
    if q < 1:
        raise PreconditionError("q must be >= 1")
    g = _grid(op, phi)
    p = op.mu_masses()
    sup = float(np.max(np.abs(g)))
    nb = norm_B if norm_B is not None else 1.0
    rows = []
    Pj = g
    for j in range(1, j_max + 1):
        Pj = tr.apply_P(op, Pj)
        lhs = float(np.dot(p, np.abs(Pj) ** q) ** (1.0 / q))
        psi = np.sign(Pj)
        pairing = float(np.dot(p * g, tr.koopman_ulam(op, psi, j)))
        if sup == 0.0:
            cor, rhs = 0.0, 0.0
        else:
            cor = abs(pairing) / (nb * 1.0)
            rhs = cor ** (1.0 / q) * nb ** (1.0 / q) * sup ** (1.0 - 1.0 / q)
        rows.append({"j": j, "lhs": lhs, "rhs": rhs, "pairing": pairing, "cor": cor,
                     "margin": rhs - lhs, "pass": bool(lhs <= rhs + tol)})
    return rows


def power_sum_check(dec: MartingaleDecomposition, xi=None) -> tuple:
    """``(||sum_{n>=0} P^n phi||_inf, ||phi||_inf sum xi(n))``.

    Without ``xi`` the L1-dual correlation ``xi(n) = ||P^n phi||_inf / ||phi||_inf``
    is read off the grid.
    """
    sup = float(np.max(np.abs(dec.phi)))
    lhs = float(np.max(np.abs(dec.phi + dec.chi)))
    if xi is None:
        xi = np.concatenate([[1.0], dec.powers_sup / sup]) if sup > 0 else np.zeros(1)
    return lhs, sup * float(np.sum(xi))


# -------------------------------------------------------------- exact chains

@dataclass(frozen=True)
class ExactChain:
    """Finite Markov chain with an observable per state."""
    P: np.ndarray
    init: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "init", np.asarray(self.init, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        s = P.shape[0]
        if P.shape != (s, s) or self.init.shape != (s,) or self.values.shape != (s,):
            raise PreconditionError("inconsistent chain shapes")
        if s > 12:
            raise PreconditionError("at most 12 states")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1)) > 1e-12:
            raise PreconditionError("transition rows must be stochastic")
        if np.any(self.init < 0) or abs(self.init.sum() - 1) > 1e-12:
            raise PreconditionError("initial law must be a probability vector")

    @property
    def states(self) -> int:
        return self.P.shape[0]

    @classmethod
    def coin(cls) -> "ExactChain":
        return cls(np.full((2, 2), 0.5), np.array([0.5, 0.5]), np.array([-1.0, 1.0]))

    @classmethod
    def random(cls, rng, states: int) -> "ExactChain":
        P = rng.dirichlet(np.ones(states), size=states)
        init = rng.dirichlet(np.ones(states))
        vals = rng.uniform(-1, 1, states)
        return cls(P, init, vals)

    def is_martingale_difference(self, tol=1e-12) -> bool:
        """``E(X_{i+1} | s_i) = 0`` from every state."""
        return bool(np.max(np.abs(self.P @ self.values)) <= tol)


@dataclass
class AzumaReport:
    n: int
    a: float
    b: float
    bound: float
    exact: float | None
    empirical: float | None
    empirical_stderr: float | None
    trials: int

    @property
    def passed(self) -> bool:
        return self.exact is None or self.exact <= self.bound

    def to_dict(self):
        return {"n": self.n, "a": self.a, "b": self.b, "bound": self.bound,
                "exact": self.exact, "empirical": self.empirical,
                "empirical_stderr": self.empirical_stderr, "trials": self.trials,
                "pass": self.passed}


def _threshold(n, b):
    nb = n * b
    return nb - 1e-9 * max(1.0, abs(nb))


def coin_tail(n: int, b: float) -> float:
    """Exact ``P(sum of n fair +-1 >= n b)``."""
    thr = _threshold(n, b)
    # sum = 2 heads - n
    kmin = max(0, math.ceil((n + thr) / 2.0))
    if kmin > n:
        return 0.0
    num = sum(math.comb(n, h) for h in range(kmin, n + 1))
    return float(Fraction(num, 2 ** n))


def _chain_tail_exact(chain: ExactChain, n: int, b: float, budget: float) -> float:
    """``P(sum X_i >= n b)`` by dynamic programming over (state, partial sum)."""
    dist = {}
    for s in range(chain.states):
        if chain.init[s] > 0:
            key = (s, round(float(chain.values[s]), 12))
            dist[key] = dist.get(key, 0.0) + chain.init[s]
    for _ in range(n - 1):
        nxt = {}
        for (s, tot), pr in dist.items():
            for t in range(chain.states):
                w = chain.P[s, t]
                if w > 0:
                    key = (t, round(tot + float(chain.values[t]), 12))
                    nxt[key] = nxt.get(key, 0.0) + pr * w
        dist = nxt
        if len(dist) > budget:
            raise EnumerationBudgetError("state-sum table exceeds the enumeration budget")
    thr = _threshold(n, b)
    return float(math.fsum(pr for (s, tot), pr in dist.items() if tot >= thr))


def azuma_check(chain="coin", a: float = 1.0, b: float = 0.3, n: int = 100,
                trials: int = 1_000_000, seed: int = 0, budget: float = 1e7,
                workers=None) -> AzumaReport:
    """Tail ``P(sum X_i >= n b)`` against ``exp(-n b^2 / (2 a^2))``.

    ``chain`` is ``"coin"`` or an ``ExactChain`` whose observable has zero
    conditional mean from every state.  Simulation uses ``trials`` seeded
    draws (0 skips it).

    Raises
    ------
    BoundViolationError
        If the exact tail exceeds the bound.
    """
    if b < 0:
        raise PreconditionError("b must be >= 0")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    is_coin = isinstance(chain, str)
    if is_coin and chain != "coin":
        raise PreconditionError(f"unknown chain {chain!r}")
    inc = 1.0 if is_coin else float(np.max(np.abs(chain.values)))
    if inc > a:
        raise PreconditionError(f"increments reach {inc}, above a={a}")
    if not is_coin and not chain.is_martingale_difference():
        raise PreconditionError("chain observable is not a martingale difference")
    bound = math.exp(-n * b * b / (2.0 * a * a))
    if is_coin:
        exact = coin_tail(n, b)
    else:
        exact = _chain_tail_exact(chain, n, b, budget)
    if exact > bound:
        raise BoundViolationError(f"exact tail {exact:.6g} exceeds bound {bound:.6g}")
    emp = se = None
    if trials > 0:
        thr = _threshold(n, b)
        chunk = 1 << 17

        def run(lo, hi):
            rng = np.random.default_rng([seed, lo])
            if is_coin:
                sums = 2.0 * rng.binomial(n, 0.5, hi - lo) - n
            else:
                sums = _simulate_chain(chain, n, hi - lo, rng)
            return int(np.count_nonzero(sums >= thr))
        hits = sum(map_chunks(run, trials, chunk, workers))
        emp = hits / trials
        se = math.sqrt(emp * (1 - emp) / trials)
    return AzumaReport(n=n, a=a, b=b, bound=bound, exact=exact, empirical=emp,
                       empirical_stderr=se, trials=trials)


def _simulate_chain(chain: ExactChain, n: int, count: int, rng) -> np.ndarray:
    cum = np.cumsum(chain.P, axis=1)
    s = np.searchsorted(np.cumsum(chain.init), rng.uniform(size=count), side="right")
    s = np.minimum(s, chain.states - 1)
    tot = chain.values[s].copy()
    for _ in range(n - 1):
        u = rng.uniform(size=count)
        s = np.minimum((u[:, None] >= cum[s]).sum(axis=1), chain.states - 1)
        tot += chain.values[s]
    return tot


@dataclass
class RioReport:
    p: float
    n: int
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15

    def to_dict(self):
        return {"p": self.p, "n": self.n, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.rhs - self.lhs, "pass": self.passed}


def rio_check(chain: ExactChain, p: float, n: int, budget: float = 1e7) -> RioReport:
    """Both sides of Rio's moment inequality for ``X_i = g(s_i)``, computed exactly.

    ``E(X_k | F_i) = (P^{k-i} g)(s_i)``, so the right side only needs the
    marginal law of ``s_i``; the left side enumerates all paths.

    Raises
    ------
    EnumerationBudgetError
        If ``states**n`` exceeds ``budget``.
    """
    if p < 1:
        raise PreconditionError("p must be >= 1")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    s = chain.states
    if s ** n > budget:
        raise EnumerationBudgetError(f"{s}^{n} paths exceed the budget {budget:g}")
    g = chain.values
    # all paths as an (s^n, n) index array
    paths = np.array(list(itertools.product(range(s), repeat=n)), dtype=np.int64)
    prob = chain.init[paths[:, 0]].copy()
    for i in range(1, n):
        prob *= chain.P[paths[:, i - 1], paths[:, i]]
    S = g[paths].sum(axis=1)
    lhs = float(np.dot(prob, np.abs(S) ** (2 * p)) ** (1.0 / p))
    # P^m g for m = 0..n-1 and marginals pi_i
    Pg = [g]
    for _ in range(n - 1):
        Pg.append(chain.P @ Pg[-1])
    Pg = np.array(Pg)
    cums = np.cumsum(Pg, axis=0)
    pi = chain.init.copy()
    total = 0.0
    for i in range(n):
        best = 0.0
        for u in range(i, n):
            term = np.abs(g * cums[u - i]) ** p
            best = max(best, float(np.dot(pi, term) ** (1.0 / p)))
        total += best
        pi = pi @ chain.P
    return RioReport(p=p, n=n, lhs=lhs, rhs=4.0 * p * total)
