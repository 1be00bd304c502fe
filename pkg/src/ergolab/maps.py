"""Concrete map families, derivatives, critical sets and non-degeneracy fits.

All families live on an interval, except the Viana skew product which lives
on ``S^1 x I``.  Points that sit exactly on a branch boundary belong to the
branch on their left; every module relies on this rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import (CriticalPointError, InsufficientSamplesError,
                     OrbitEscapeError, ParameterError, PreconditionError)

# relative size of the low-bit refresh added by ensemble simulations
DITHER_SCALE = 2.0 ** -50

VIANA_DEFAULT_A0 = 1.7968


@dataclass(frozen=True)
class Branch:
    """One monotone branch on ``(lo, hi]`` (the leftmost branch also owns ``lo``).

    ``slope``/``offset`` are set for affine branches so that the compiled
    kernels and the exact inverse-length bookkeeping can use them.
    """
    lo: float
    hi: float
    f: Callable
    df: Callable
    inv: Optional[Callable] = None
    image: tuple = (0.0, 1.0)
    increasing: bool = True
    slope: Optional[float] = None
    offset: Optional[float] = None


@dataclass(frozen=True, eq=False)
class PiecewiseMap:
    """A dynamical system given branch by branch.

    Attributes
    ----------
    label : str
        Family tag.
    domain : tuple of (lo, hi)
        One pair per dimension.
    branches : tuple of Branch
        For the Viana family these are the circle branches of ``s``.
    critical_set : tuple of float
        Critical values of the coordinate ``critical_axis``.
    params : mapping
        Named parameters, read only.
    """
    label: str
    domain: tuple
    branches: tuple
    critical_set: tuple = ()
    critical_axis: int = 0
    params: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    kernel: Optional[tuple] = None
    dither: bool = False
    expanding: bool = True

    @property
    def dim(self) -> int:
        return len(self.domain)

    @property
    def lo(self) -> float:
        return self.domain[0][0] if self.dim == 1 else self.domain[1][0]

    @property
    def hi(self) -> float:
        return self.domain[0][1] if self.dim == 1 else self.domain[1][1]

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.domain]))

    def branch_index(self, x):
        """Branch owning each point under the left-boundary rule."""
        x = np.asarray(x, dtype=float)
        pos = x if self.dim == 1 else x[..., 0]
        rights = np.array([b.hi for b in self.branches[:-1]])
        return np.searchsorted(rights, pos, side="left")

    def __call__(self, x):
        if self.dim == 2:
            return _viana_step(self, np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        idx = self.branch_index(xs)
        y = np.empty_like(xs)
        for b, br in enumerate(self.branches):
            sel = idx == b
            if sel.any():
                y[sel] = br.f(xs[sel])
        return y[0] if scalar else y

    def deriv(self, x):
        """Vectorized derivative, no critical-point checks.

        Returns ``f'(x)`` in 1-D and the stack of 2x2 Jacobians for Viana.
        """
        if self.dim == 2:
            return _viana_jacobian(self, np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        idx = self.branch_index(xs)
        y = np.empty_like(xs)
        for b, br in enumerate(self.branches):
            sel = idx == b
            if sel.any():
                y[sel] = br.df(xs[sel])
        return y[0] if scalar else y

    def log_inv_derivative(self, x):
        """``log ||Df(x)^{-1}||``, vectorized; ``+inf`` where Df is singular."""
        d = self.deriv(x)
        with np.errstate(divide="ignore"):
            if self.dim == 1:
                return -np.log(np.abs(d))
            smin = np.linalg.svd(d, compute_uv=False)[..., -1]
            return -np.log(smin)

    def log_abs_det(self, x):
        d = self.deriv(x)
        with np.errstate(divide="ignore"):
            if self.dim == 1:
                return np.log(np.abs(d))
            return np.log(np.abs(np.linalg.det(d)))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return (x >= self.lo - tol) & (x <= self.hi + tol)
        (s0, s1), (x0, x1) = self.domain
        return ((x[..., 0] >= s0 - tol) & (x[..., 0] <= s1 + tol)
                & (x[..., 1] >= x0 - tol) & (x[..., 1] <= x1 + tol))


# ---------------------------------------------------------------- families

def _affine(lo, hi, slope, offset, image):
    inc = slope > 0
    return Branch(lo=lo, hi=hi,
                  f=lambda x, a=slope, c=offset: a * x + c,
                  df=lambda x, a=slope: np.full_like(np.asarray(x, float), a),
                  inv=lambda y, a=slope, c=offset: (y - c) / a,
                  image=image, increasing=inc, slope=slope, offset=offset)


def _pl_map(label, pieces, params, critical=(), dither=True, expanding=True):
    branches = []
    for lo, hi, a, c in pieces:
        ends = sorted((a * lo + c, a * hi + c))
        branches.append(_affine(lo, hi, a, c, tuple(ends)))
    rights = np.array([p[1] for p in pieces], dtype=float)
    slopes = np.array([p[2] for p in pieces], dtype=float)
    offsets = np.array([p[3] for p in pieces], dtype=float)
    kern = (kernels.FAM_PL, np.zeros(2), rights, slopes, offsets)
    return PiecewiseMap(label=label, domain=((0.0, 1.0),), branches=tuple(branches),
                        critical_set=tuple(critical), params=MappingProxyType(dict(params)),
                        kernel=kern, dither=dither, expanding=expanding)


def _intermittent_left_inverse(y, gamma, tol=1e-15, maxit=200):
    """Solve ``x (1 + 2^g x^g) = y`` on ``[0, 1/2]`` by safeguarded Newton."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    c = 2.0 ** gamma
    lo = np.zeros_like(y)
    hi = np.full_like(y, 0.5)
    # good start: for small y the map is close to the identity
    x = np.clip(y / (1.0 + c * np.power(np.maximum(y, 0.0), gamma)), 0.0, 0.5)
    for _ in range(maxit):
        fx = x * (1.0 + c * np.power(x, gamma)) - y
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        dfx = 1.0 + c * (1.0 + gamma) * np.power(x, gamma)
        xn = x - fx / dfx
        bad = (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= tol * np.maximum(xn, 1e-300)
        x = xn
        if done.all():
            break
    x = np.where(y <= 0, 0.0, x)
    return x[0] if scalar else x


def _viana_step(m, p):
    a0, al, d = m.params["a0"], m.params["alpha"], m.params["d"]
    s, x = p[..., 0], p[..., 1]
    sn = d * s
    sn = sn - np.floor(sn)
    xn = a0 + al * np.sin(2.0 * np.pi * s) - x * x
    return np.stack([sn, xn], axis=-1)


def _viana_jacobian(m, p):
    al, d = m.params["alpha"], m.params["d"]
    s, x = p[..., 0], p[..., 1]
    J = np.zeros(p.shape[:-1] + (2, 2))
    J[..., 0, 0] = d
    J[..., 1, 0] = 2.0 * np.pi * al * np.cos(2.0 * np.pi * s)
    J[..., 1, 1] = -2.0 * x
    return J


def viana_fibre_interval(a0: float, alpha: float) -> tuple:
    """Forward invariant fibre interval ``[a_min - a_max^2, a_max]``."""
    amax, amin = a0 + alpha, a0 - alpha
    return (amin - amax * amax, amax)


def make_map(family: str, **params) -> PiecewiseMap:
    """Build a map from its family tag and named parameters.

    Families: ``doubling`` (d), ``tent``, ``rotation`` (omega), ``identity``,
    ``intermittent`` (gamma), ``quadratic`` (a), ``markov3``,
    ``viana`` (a0, alpha, d).

    Raises
    ------
    ParameterError
        Naming the violated constraint.
    """
    fam = family.lower()
    if fam == "doubling":
        d = params.get("d", 2)
        if int(d) != d or d < 2:
            raise ParameterError(f"doubling: slope d must be an integer >= 2, got {d!r}")
        d = int(d)
        pieces = [(i / d, (i + 1) / d, float(d), float(-i)) for i in range(d)]
        pieces[0] = (0.0,) + pieces[0][1:]
        return _pl_map("doubling", pieces, {"d": d})
    if fam == "tent":
        pieces = [(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, -2.0, 2.0)]
        return _pl_map("tent", pieces, {}, critical=(0.5,))
    if fam == "rotation":
        w = float(params.get("omega", (math.sqrt(5.0) - 1.0) / 2.0))
        if not 0.0 <= w < 1.0:
            raise ParameterError(f"rotation: omega must lie in [0, 1), got {w}")
        if w == 0.0:
            pieces = [(0.0, 1.0, 1.0, 0.0)]
        else:
            pieces = [(0.0, 1.0 - w, 1.0, w), (1.0 - w, 1.0, 1.0, w - 1.0)]
        return _pl_map("rotation", pieces, {"omega": w}, expanding=False)
    if fam == "identity":
        return _pl_map("identity", [(0.0, 1.0, 1.0, 0.0)], {}, dither=False,
                       expanding=False)
    if fam == "markov3":
        # slopes 2, 3, 2 onto [0,2/3], [0,1], [1/3,1]
        pieces = [(0.0, 1.0 / 3.0, 2.0, 0.0), (1.0 / 3.0, 2.0 / 3.0, 3.0, -1.0),
                  (2.0 / 3.0, 1.0, 2.0, -1.0)]
        return _pl_map("markov3", pieces, {})
    if fam == "intermittent":
        g = params.get("gamma", 0.5)
        if not (isinstance(g, (int, float)) and 0.0 < g <= 1.0):
            raise ParameterError(f"intermittent: gamma must lie in (0, 1], got {g!r}")
        g = float(g)
        c = 2.0 ** g
        left = Branch(lo=0.0, hi=0.5,
                      f=lambda x: x * (1.0 + c * np.power(x, g)),
                      df=lambda x: 1.0 + c * (1.0 + g) * np.power(x, g),
                      inv=lambda y: _intermittent_left_inverse(y, g),
                      image=(0.0, 1.0))
        right = _affine(0.5, 1.0, 2.0, -1.0, (0.0, 1.0))
        kern = (kernels.FAM_INTERMITTENT, np.array([g, c]), np.array([0.5, 1.0]),
                np.zeros(2), np.zeros(2))
        return PiecewiseMap(label="intermittent", domain=((0.0, 1.0),),
                            branches=(left, right), params=MappingProxyType({"gamma": g}),
                            kernel=kern, dither=False)
    if fam == "quadratic":
        a = params.get("a", 2.0)
        if not (isinstance(a, (int, float)) and 0.0 < a <= 2.0):
            raise ParameterError(f"quadratic: a must lie in (0, 2], got {a!r}")
        a = float(a)
        beta = (1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0
        img = (-beta, a)
        left = Branch(lo=-beta, hi=0.0, f=lambda x: a - x * x, df=lambda x: -2.0 * x,
                      inv=lambda y: -np.sqrt(np.maximum(a - y, 0.0)), image=img,
                      increasing=True)
        right = Branch(lo=0.0, hi=beta, f=lambda x: a - x * x, df=lambda x: -2.0 * x,
                       inv=lambda y: np.sqrt(np.maximum(a - y, 0.0)), image=img,
                       increasing=False)
        kern = (kernels.FAM_QUADRATIC, np.array([a, 0.0]), np.array([0.0, beta]),
                np.zeros(2), np.zeros(2))
        return PiecewiseMap(label="quadratic", domain=((-beta, beta),),
                            branches=(left, right), critical_set=(0.0,),
                            params=MappingProxyType({"a": a, "beta": beta}),
                            kernel=kern, dither=False)
    if fam == "viana":
        a0 = float(params.get("a0", VIANA_DEFAULT_A0))
        al = float(params.get("alpha", 0.01))
        d = params.get("d", 2)
        if not 1.0 < a0 < 2.0:
            raise ParameterError(f"viana: a0 must lie in (1, 2), got {a0}")
        if not al > 0.0:
            raise ParameterError(f"viana: alpha must be > 0, got {al}")
        if int(d) != d or d < 2:
            raise ParameterError(f"viana: d must be an integer >= 2, got {d!r}")
        d = int(d)
        xlo, xhi = viana_fibre_interval(a0, al)
        if xlo < -xhi:
            raise ParameterError(
                f"viana: alpha={al} too large for a0={a0}; no invariant fibre interval")
        sb = tuple(_affine(i / d, (i + 1) / d, float(d), float(-i), (0.0, 1.0))
                   for i in range(d))
        return PiecewiseMap(label="viana", domain=((0.0, 1.0), (xlo, xhi)), branches=sb,
                            critical_set=(0.0,), critical_axis=1,
                            params=MappingProxyType({"a0": a0, "alpha": al, "d": d}),
                            kernel=None, dither=True)
    raise ParameterError(f"unknown map family {family!r}")


# -------------------------------------------------------------- operations

def _check_domain(m: PiecewiseMap, x):
    if not np.all(m.contains(x)):
        raise PreconditionError(f"point outside the domain of {m.label}")


def iterate(m: PiecewiseMap, x0, n: int, *, record: bool = False, dither_seed=None,
            index0: int = 0, t0: int = 0):
    """Iterate a batch of points with the active kernel backend.

    Parameters
    ----------
    x0 : array
        Shape ``(count,)`` in 1-D, ``(count, 2)`` for Viana.
    dither_seed : int or None
        When given and the family is float-degenerate, a refresh of relative
        size ``DITHER_SCALE`` drawn from the counter stream of
        ``(seed, point index, step)`` is added after every step.
    index0, t0 : int
        Global point index and step of the first row, so that chunked runs
        see the same random numbers as a single run.
    """
    key = None
    if dither_seed is not None and m.dither:
        key = kernels.stream_key(dither_seed, kernels.STREAM_DITHER)
    if m.dim == 2:
        p = np.ascontiguousarray(np.asarray(x0, dtype=float).reshape(-1, 2))
        (xlo, xhi) = m.domain[1]
        s, x, bad = kernels.iterate_viana(
            np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]), int(n),
            m.params["a0"], m.params["alpha"], float(m.params["d"]), xlo, xhi,
            key, DITHER_SCALE, int(index0), int(t0), bool(record))
        if bad >= 0:
            raise OrbitEscapeError(f"viana orbit {index0 + bad} left the fibre interval")
        return np.stack([s, x], axis=-1)
    fam, par, rights, slopes, offsets = m.kernel
    x = np.ascontiguousarray(np.asarray(x0, dtype=float).reshape(-1))
    out, bad = kernels.iterate_1d(x, int(n), fam, par, rights, slopes, offsets,
                                  m.lo, m.hi, key, DITHER_SCALE * (m.hi - m.lo),
                                  int(index0), int(t0), bool(record))
    if bad >= 0:
        raise OrbitEscapeError(f"orbit {index0 + bad} of {m.label} left the domain")
    return out


def eval_orbit(m: PiecewiseMap, x0, n: int) -> np.ndarray:
    """Orbit ``x0, f(x0), ..., f^n(x0)`` by plain iteration.

    Returns shape ``(n+1,)`` in 1-D and ``(n+1, 2)`` for Viana.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    _check_domain(m, x0)
    traj = iterate(m, x0.reshape(1, -1) if m.dim == 2 else x0.reshape(1), n, record=True)
    return traj[0]


def derivative(m: PiecewiseMap, x):
    """Df at a single point: a float in 1-D, a 2x2 array for Viana.

    Raises
    ------
    CriticalPointError
        If ``x`` lies on the critical set.
    """
    x = np.asarray(x, dtype=float)
    d = dist_to_critical(m, x)
    if d == 0.0:
        raise CriticalPointError(f"derivative undefined at critical point {x.tolist()}")
    out = m.deriv(x)
    return float(out) if m.dim == 1 else np.asarray(out)


def dist_to_critical(m: PiecewiseMap, x):
    """Distance to the critical set; ``math.inf`` when the set is empty."""
    if not m.critical_set:
        return math.inf
    x = np.asarray(x, dtype=float)
    coord = x if m.dim == 1 else x[..., m.critical_axis]
    c = np.asarray(m.critical_set, dtype=float)
    d = np.min(np.abs(np.asarray(coord)[..., None] - c), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def preperiodic_check(a0: float, depth: int = 50, tol: float = 1e-9) -> dict:
    """Look for a repeat in the orbit of 0 under ``Q(x) = a0 - x^2``.

    Returns ``{"preperiodic", "preperiod", "period", "orbit"}``.  A repeat is
    two orbit points within ``tol``; repelling cycles amplify round-off, so
    only short preperiods are detectable at double precision.
    """
    z = [0.0]
    for _ in range(depth):
        z.append(a0 - z[-1] * z[-1])
    for j in range(1, depth + 1):
        for i in range(j):
            if abs(z[i] - z[j]) <= tol:
                return {"preperiodic": True, "preperiod": i, "period": j - i, "orbit": z}
    return {"preperiodic": False, "preperiod": None, "period": None, "orbit": z}


@dataclass
class NondegReport:
    """Fitted constants of the non-degeneracy conditions.

    ``c2_slack``/``c3_slack`` are the largest holdout violations; a value
    ``<= 0`` means the fitted bound (with slack) held everywhere.
    """
    B_hat: float
    d_hat: float
    eta_hat: float
    c2_slack: float
    c3_slack: float
    passed: dict
    constants: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())


def _ols(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef[0], coef[1]


def sample_uniform(m: PiecewiseMap, count: int, seed: int, stream=kernels.STREAM_INIT,
                   index0: int = 0) -> np.ndarray:
    """Counter-based uniform points in the domain (same on every backend)."""
    key = kernels.stream_key(seed, stream)
    idx = np.arange(index0, index0 + count, dtype=np.int64)
    cols = []
    for axis, (a, b) in enumerate(m.domain):
        u = kernels.uniforms(key, idx, axis)
        cols.append(a + (b - a) * u)
    return cols[0] if m.dim == 1 else np.stack(cols, axis=-1)


def check_nondegeneracy(m: PiecewiseMap, sample_count: int, eps_grid, seed: int,
                        slack: float = 0.1, min_count: int = 10) -> NondegReport:
    """Fit the constants of the four non-degeneracy conditions.

    Samples are split in two halves; constants are fitted on the first half
    and checked on the second with ``slack`` relative tolerance.

    Raises
    ------
    PreconditionError
        If the critical set is empty or the grid is not positive decreasing.
    InsufficientSamplesError
        If a regression has fewer than 8 usable points.
    """
    if not m.critical_set:
        raise PreconditionError(f"{m.label} has an empty critical set")
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise PreconditionError("eps_grid must be positive and strictly decreasing")
    pts = sample_uniform(m, sample_count, seed, stream=kernels.STREAM_PAIRS)
    dist = dist_to_critical(m, pts)
    fit = np.arange(sample_count) % 2 == 0
    hold = ~fit
    vol = m.volume

    # (C0): m{d <= eps} <= B eps^d
    def mass(sel):
        dd = dist[sel]
        counts = np.array([(dd <= e).sum() for e in eps])
        return counts, vol * counts / dd.size
    cf, mf = mass(fit)
    use = cf >= min_count
    if use.sum() < 8:
        raise InsufficientSamplesError(
            f"(C0) regression has {int(use.sum())} usable points, need 8")
    d_hat, _ = _ols(np.log(eps[use]), np.log(mf[use]))
    B0 = float(np.max(mf[use] / eps[use] ** d_hat))
    ch, mh = mass(hold)
    useh = ch >= min_count
    c0_ok = bool(d_hat > 0 and np.all(mh[useh] <= (1 + slack) * B0 * eps[useh] ** d_hat))

    # (C1): B^-1 d^eta <= |Df v| <= B d^-eta
    near = dist > 0
    D = m.deriv(pts)
    if m.dim == 1:
        smin = smax = np.abs(D)
    else:
        sv = np.linalg.svd(D, compute_uv=False)
        smax, smin = sv[..., 0], sv[..., -1]
    ok1 = near & (smin > 0)
    sel_fit = fit & ok1 & (dist <= eps[0])
    if sel_fit.sum() < 8:
        raise InsufficientSamplesError("(C1) regression has fewer than 8 usable points")
    eta_hat, _ = _ols(np.log(dist[sel_fit]), np.log(smin[sel_fit]))
    sf = fit & ok1
    B1 = float(max(np.max(dist[sf] ** eta_hat / smin[sf]),
                   np.max(smax[sf] * dist[sf] ** eta_hat)))
    sh = hold & ok1
    c1_ok = bool(eta_hat > 0
                 and np.all(smin[sh] >= dist[sh] ** eta_hat / ((1 + slack) * B1))
                 and np.all(smax[sh] <= (1 + slack) * B1 * dist[sh] ** -eta_hat))

    # (C2)/(C3) on consecutive pairs, ordered so that d(x) <= d(y)
    li = m.log_inv_derivative(pts)
    ld = m.log_abs_det(pts)
    logd = np.log(np.where(near, dist, np.nan))

    def pair_fit(vals, sel):
        v, g = vals[sel], logd[sel]
        k = (v.size // 2) * 2
        a, b = slice(0, k, 2), slice(1, k, 2)
        lhs = np.abs(v[a] - v[b])
        rhs = np.abs(g[a] - g[b])
        good = np.isfinite(lhs) & np.isfinite(rhs) & (rhs > 1e-12)
        return lhs[good], rhs[good]
    okp = near & np.isfinite(li) & np.isfinite(ld)
    l2f, r2f = pair_fit(li, fit & okp)
    l3f, r3f = pair_fit(ld, fit & okp)
    if l2f.size < 8 or l3f.size < 8:
        raise InsufficientSamplesError("(C2)/(C3) have fewer than 8 usable pairs")
    B2 = float(np.max(l2f / r2f))
    B3 = float(np.max(l3f / r3f))
    l2h, r2h = pair_fit(li, hold & okp)
    l3h, r3h = pair_fit(ld, hold & okp)
    c2_slack = float(np.max(l2h - (1 + slack) * B2 * r2h))
    c3_slack = float(np.max(l3h - (1 + slack) * B3 * r3h))
    tol = 1e-12
    passed = {"C0": c0_ok, "C1": c1_ok, "C2": c2_slack <= tol, "C3": c3_slack <= tol}
    return NondegReport(B_hat=max(B0, B1, B2, B3), d_hat=float(d_hat),
                        eta_hat=float(eta_hat), c2_slack=c2_slack, c3_slack=c3_slack,
                        passed=passed,
                        constants={"B0": B0, "B1": B1, "B2": B2, "B3": B3})
