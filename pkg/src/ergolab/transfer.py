"""Ulam discretization of the transfer operator and its companions.

Two operators are kept apart.  ``P_m`` pushes densities forward with respect
to Lebesgue measure and is what spectral and Lasota-Yorke work uses.
``P_mu`` is the transfer operator relative to the invariant measure; on the
grid it is the Bayes reversal of the Ulam chain, ``(P_mu phi)_j =
sum_i p_i T_ij phi_i / sum_i p_i T_ij`` with ``p`` the invariant bin masses.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import (FitFailureError, GridMismatchError, NonConvergenceError,
                     PreconditionError, UnsupportedDimensionError)
from .maps import PiecewiseMap
from .parallel import map_chunks

log = logging.getLogger(__name__)

DENSE_CUTOFF = 4096
H_GUARD = 1e-12


class UlamOperator:
    """Row-stochastic matrix ``T[i, j] = m(B_i & f^-1 B_j) / m(B_i)``.

    Attributes
    ----------
    N : int
    edges : ndarray, shape (N+1,)
    T : scipy.sparse.csr_matrix
    map : PiecewiseMap or None
    row_defect : float
        Largest ``|row sum - 1|`` before the final renormalization.
    """
    reference = "lebesgue"

    def __init__(self, T, edges, m=None, row_defect=0.0):
        self.T = sp.csr_matrix(T)
        self.edges = np.asarray(edges, dtype=float)
        self.N = self.edges.size - 1
        if self.T.shape != (self.N, self.N):
            raise GridMismatchError("matrix shape does not match the bin edges")
        self.map = m
        self.row_defect = float(row_defect)
        self._cache = {}

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def TT(self):
        if "TT" not in self._cache:
            self._cache["TT"] = self.T.T.tocsr()
        return self._cache["TT"]

    def dense(self):
        return self.T.toarray()

    def spectral(self, tol=1e-13):
        if "spectral" not in self._cache:
            self._cache["spectral"] = leading_mode(self, tol)
        return self._cache["spectral"]

    def mu_masses(self):
        """Invariant bin masses ``p_i = h_i w_i``."""
        rep = self.spectral()
        return rep.h * self.widths

    def rows(self):
        coo = self.T.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]

    @classmethod
    def from_matrix(cls, T, edges=None):
        T = np.asarray(T, dtype=float) if not sp.issparse(T) else T
        n = T.shape[0]
        if edges is None:
            edges = np.linspace(0.0, 1.0, n + 1)
        return cls(T, edges)


GridFunction = np.ndarray


def _check_grid(op: UlamOperator, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (op.N,):
        raise GridMismatchError(f"grid function has shape {phi.shape}, operator has N={op.N}")
    return phi


def grid_average(op: UlamOperator, phi, nodes: int = 5) -> np.ndarray:
    """Bin averages of a callable by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = op.edges[:-1], op.edges[1:]
    pts = 0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
    vals = np.asarray(phi(pts), dtype=float)
    return 0.5 * vals @ w


def ulam(m: PiecewiseMap, N: int, method: str = "auto", points_per_bin: int = 64,
         workers=None) -> UlamOperator:
    """Ulam matrix on ``N`` uniform bins.

    ``method="exact"`` measures branch-inverse images of the target bins;
    ``"quadrature"`` maps ``points_per_bin`` midpoints of each source bin.
    ``"auto"`` is exact whenever every branch supplies an inverse.
    """
    if m.dim != 1:
        raise UnsupportedDimensionError("Ulam discretization is 1-D only")
    if N < 2:
        raise PreconditionError("N must be >= 2")
    edges = np.linspace(m.lo, m.hi, N + 1)
    width = edges[1:] - edges[:-1]
    exact = all(b.inv is not None for b in m.branches)
    if method == "exact" and not exact:
        raise PreconditionError("exact Ulam needs branch inverses")
    if method == "quadrature" or (method == "auto" and not exact):
        return _ulam_quadrature(m, edges, points_per_bin)
    los, his, cols = [], [], []
    for br in m.branches:
        p, q = br.image
        j0 = max(0, int(np.searchsorted(edges, p, side="right")) - 1)
        j1 = min(N - 1, int(np.searchsorted(edges, q, side="left")) - 1)
        if j1 < j0:
            continue
        js = np.arange(j0, j1 + 1)
        ya = np.clip(edges[js], p, q)
        yb = np.clip(edges[js + 1], p, q)
        if br.slope is not None:
            xa, xb = br.inv(ya), br.inv(yb)
        else:
            pre = br.inv(np.concatenate([ya, yb[-1:]]))
            xa, xb = pre[:-1], pre[1:]
        lo = np.minimum(xa, xb)
        hi = np.maximum(xa, xb)
        lo = np.clip(lo, br.lo, br.hi)
        hi = np.clip(hi, br.lo, br.hi)
        los.append(lo)
        his.append(hi)
        cols.append(js)
    lo = np.ascontiguousarray(np.concatenate(los))
    hi = np.ascontiguousarray(np.concatenate(his))
    col = np.ascontiguousarray(np.concatenate(cols).astype(np.int64))

    def run(a, b):
        return kernels.interval_overlaps(lo[a:b], hi[a:b], col[a:b], edges)
    parts = map_chunks(run, lo.size, 1 << 15, workers)
    rows = np.concatenate([p[0] for p in parts])
    cc = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts]) / width[rows]
    T = sp.csr_matrix((vals, (rows, cc)), shape=(N, N))
    T.sum_duplicates()
    return _finish(T, edges, m)


def _ulam_quadrature(m, edges, k):
    N = edges.size - 1
    u = (np.arange(k) + 0.5) / k
    pts = edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]
    y = m(pts.ravel())
    j = np.clip(np.searchsorted(edges, y, side="left") - 1, 0, N - 1)
    rows = np.repeat(np.arange(N), k)
    T = sp.csr_matrix((np.full(rows.size, 1.0 / k), (rows, j)), shape=(N, N))
    T.sum_duplicates()
    return _finish(T, edges, m)


def _finish(T, edges, m):
    rs = np.asarray(T.sum(axis=1)).ravel()
    defect = float(np.max(np.abs(rs - 1.0)))
    if np.any(rs <= 0):
        raise NonConvergenceError("Ulam row with no mass; map leaves the grid")
    T = sp.diags(1.0 / rs) @ T
    T = sp.csr_matrix(T)
    T.data = np.clip(T.data, 0.0, 1.0)
    return UlamOperator(T, edges, m, row_defect=defect)


@dataclass
class SpectralReport:
    """Leading mode and gap of an Ulam operator.

    ``h`` is the invariant density (``sum h_i w_i = 1``); ``q`` is ``None``
    until ``spectral_gap`` has run.
    """
    h: np.ndarray
    lambda1: float
    q: float | None = None
    gap_resolved: bool = False
    C_bound: float | None = None
    iterations: int = 0
    method: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"lambda1": self.lambda1, "q": self.q, "gap_resolved": self.gap_resolved,
                "C_bound": self.C_bound, "method": self.method}


def _power_polish(TT, p, tol, maxiter):
    it = 0
    while True:
        q = TT @ p
        q = np.maximum(q, 0.0)
        q /= q.sum()
        err = float(np.abs(q - p).sum())
        p = q
        it += 1
        if err <= tol:
            return p, it, err
        if it >= maxiter:
            raise NonConvergenceError(f"power iteration stalled at residual {err:.3e}")


def leading_mode(op: UlamOperator, tol: float = 1e-13, maxiter: int = 100_000) -> SpectralReport:
    """Invariant density of the Ulam chain.

    A sparse direct solve of ``p T = p, sum p = 1`` gives the start vector
    and power iteration polishes it to ``tol`` (l1 change per step).  When
    the solve is singular (eigenvalue 1 not simple) the power iteration
    starts from the uniform density and the gap flag is false.
    """
    N = op.N
    TT = op.TT
    # anchor the solve on the heaviest bin of a short warm start; a dense
    # normalization row would cause heavy fill-in in the factorization
    warm = op.widths / op.widths.sum()
    for _ in range(20):
        warm = TT @ warm
    k = int(np.argmax(warm))
    A = (TT - sp.eye(N, format="csr")).tolil()
    A[k, :] = 0.0
    A[k, k] = 1.0
    b = np.zeros(N)
    b[k] = 1.0
    unique = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            p = spla.spsolve(A.tocsc(), b)
        except RuntimeError:
            p = np.full(N, np.nan)
    if np.all(np.isfinite(p)) and p.sum() > 0:
        p = p / p.sum()
    if not np.all(np.isfinite(p)) or p.min() < -1e-8:
        unique = False
        p = op.widths / op.widths.sum()
        method = "power"
    else:
        method = "direct+power"
        p = np.maximum(p, 0.0)
        p /= p.sum()
    p, it, err = _power_polish(TT, p, tol, maxiter)
    lam = float((TT @ p).sum() / p.sum())
    h = p / op.widths
    h /= float(np.sum(h * op.widths))
    return SpectralReport(h=h, lambda1=lam, gap_resolved=unique, iterations=it, method=method,
                          extra={"residual": err})


def spectral_gap(op: UlamOperator, dense_cutoff: int = DENSE_CUTOFF, tol: float = 1e-10,
                 maxiter: int = 100_000, seed: int = 0) -> float:
    """Modulus of the second eigenvalue of ``T``.

    Dense eigensolve up to ``dense_cutoff`` bins, otherwise power iteration
    on zero-sum row vectors (the invariant direction deflated).
    """
    if op.N <= dense_cutoff:
        ev = np.linalg.eigvals(op.dense())
        k = int(np.argmin(np.abs(ev - 1.0)))
        rest = np.delete(ev, k)
        q = float(np.max(np.abs(rest))) if rest.size else 0.0
        if q < 1e-6 and _deflated_nilpotent(op):
            # a defective zero eigenvalue only resolves to ~sqrt(eps) in eigvals
            return 0.0
        return q
    p = op.mu_masses()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.N)
    v -= v.sum() * p / p.sum()
    TT = op.TT
    logn = 0.0
    hist = [0.0]
    window = 50
    prev = None
    for it in range(1, maxiter + 1):
        v = TT @ v
        v -= v.sum() * p / p.sum()
        nv = float(np.abs(v).sum())
        if nv == 0.0:
            return 0.0
        logn += math.log(nv)
        v /= nv
        hist.append(logn)
        if it % window == 0 and it >= 2 * window:
            est = math.exp((hist[-1] - hist[-1 - window]) / window)
            if prev is not None and abs(est - prev) < tol:
                return float(est)
            prev = est
    raise NonConvergenceError("deflated power iteration did not settle")


def _deflated_nilpotent(op, max_power=64, tol=1e-13):
    T = op.dense()
    p = op.mu_masses()
    Q = T - np.outer(np.ones(op.N), p)
    M = Q.copy()
    for _ in range(min(op.N, max_power)):
        if np.max(np.abs(M)) < tol:
            return True
        M = M @ Q
    return False


def random_bv_functions(N: int, trials: int, seed: int) -> np.ndarray:
    """A mix of rough and smooth grid functions for norm and Lasota-Yorke probes."""
    rng = np.random.default_rng(seed)
    x = (np.arange(N) + 0.5) / N
    out = np.empty((trials, N))
    for t in range(trials):
        kind = t % 4
        if kind == 0:
            k = int(rng.integers(1, max(2, N // 4)))
            cuts = np.sort(rng.choice(np.arange(1, N), size=min(k, N - 1), replace=False))
            vals = rng.standard_normal(cuts.size + 1)
            out[t] = vals[np.searchsorted(cuts, np.arange(N), side="right")]
        elif kind == 1:
            k = int(rng.integers(1, max(2, N // 8)))
            out[t] = np.sin(2 * np.pi * k * x + rng.uniform(0, 2 * np.pi))
        elif kind == 2:
            k = int(rng.integers(1, max(2, N // 8)))
            out[t] = (k * x + rng.uniform()) % 1.0
        else:
            out[t] = np.cumsum(rng.choice([-1.0, 1.0], size=N)) / math.sqrt(N)
    return out


def spectral_report(op: UlamOperator, n_probe: int = 30, trials: int = 16,
                    seed: int = 0) -> SpectralReport:
    """Leading mode, gap, and an empirical constant for ``||Q^n|| <= C q^n``.

    The constant is the largest ratio ``||Q^n phi||_BV / (q^n ||phi||_BV)``
    over random probes and ``n <= n_probe`` (a lower estimate).
    """
    rep = op.spectral()
    q = spectral_gap(op, seed=seed)
    rep.q = q
    rep.gap_resolved = bool(rep.gap_resolved and q < 1.0 - 1e-9)
    w = op.widths
    probes = random_bv_functions(op.N, trials, seed)
    C = 0.0
    for phi in probes:
        base = bv_norm(phi, w)
        if base == 0:
            continue
        g = phi.copy()
        mass = float(np.sum(g * w))
        for n in range(0, n_probe + 1):
            if n > 0:
                g = apply_P_m(op, g)
            qn = q ** n
            if n > 0 and qn < 1e-300:
                break
            r = g - rep.h * mass
            C = max(C, bv_norm(r, w) / (qn * base) if qn > 0 else 0.0)
    rep.C_bound = C
    return rep


def bv_norm(phi, widths):
    return float(np.sum(np.abs(phi) * widths) + np.sum(np.abs(np.diff(phi))))


def apply_P_m(op: UlamOperator, g) -> np.ndarray:
    """Density push-forward with respect to Lebesgue measure."""
    g = _check_grid(op, g)
    w = op.widths
    return (op.TT @ (g * w)) / w


def apply_P(op: UlamOperator, phi) -> np.ndarray:
    """Transfer operator relative to the invariant measure (grid Bayes reversal)."""
    phi = _check_grid(op, phi)
    p = op.mu_masses()
    den = op.TT @ p
    num = op.TT @ (p * phi)
    return num / np.maximum(den, H_GUARD * op.widths)


def _image_of_centers(op: UlamOperator, m: PiecewiseMap):
    key = ("fc", id(m))
    if key not in op._cache:
        op._cache[key] = np.asarray(m(op.centers), dtype=float)
    return op._cache[key]


def interpolate(op: UlamOperator, phi, x):
    """Evaluate a grid function off the grid, linearly between bin centres.

    Points in the outer half bins use the end segments' slopes rather than
    clamping, which keeps the error second order up to the boundary.
    """
    c = op.centers
    x = np.asarray(x, dtype=float)
    out = np.interp(x, c, phi)
    lo, hi = x < c[0], x > c[-1]
    if lo.any():
        out[lo] = phi[0] + (x[lo] - c[0]) * (phi[1] - phi[0]) / (c[1] - c[0])
    if hi.any():
        out[hi] = phi[-1] + (x[hi] - c[-1]) * (phi[-1] - phi[-2]) / (c[-1] - c[-2])
    return out


def step_eval(op: UlamOperator, phi, x) -> np.ndarray:
    """Evaluate a grid function as a step function on bins ``(e_i, e_{i+1}]``.

    The half-open convention matches the maps' rule that a branch boundary
    belongs to the left branch.
    """
    b = np.searchsorted(op.edges, np.asarray(x, dtype=float), side="left") - 1
    return np.asarray(phi)[np.clip(b, 0, op.N - 1)]


def pointwise_transfer(op: UlamOperator, m: PiecewiseMap, phi, y) -> np.ndarray:
    """``P_mu g`` evaluated at points ``y`` through exact branch preimages.

    ``P_mu g(y) = sum_x g(x) h(x) / |f'(x)| / sum_x h(x) / |f'(x)|`` over the
    preimages ``x`` of ``y``, with ``h`` the grid invariant density.  The
    denominator is the pointwise push-forward of ``h``, so constants are
    fixed exactly.  ``phi`` is a grid function (read as a step function) or
    a callable ``g(x, y)`` receiving each preimage and its image.
    """
    if callable(phi):
        g = phi
    else:
        grid = _check_grid(op, phi)

        def g(x, yy):
            return step_eval(op, grid, x)
    h = op.spectral().h
    y = np.asarray(y, dtype=float)
    num = np.zeros_like(y)
    den = np.zeros_like(y)
    for br in m.branches:
        if br.inv is None:
            raise PreconditionError("pointwise transfer needs branch inverses")
        p, q = br.image
        sel = (y >= p) & (y <= q)
        if not sel.any():
            continue
        x = np.clip(br.inv(y[sel]), br.lo, br.hi)
        w = step_eval(op, h, x) / np.abs(br.df(x))
        num[sel] += w * np.asarray(g(x, y[sel]), dtype=float)
        den[sel] += w
    return num / np.maximum(den, H_GUARD)


def apply_U(op: UlamOperator, m: PiecewiseMap, phi) -> np.ndarray:
    """Koopman step ``phi o f`` evaluated at bin centres."""
    phi = _check_grid(op, phi)
    return interpolate(op, phi, _image_of_centers(op, m))


def koopman_ulam(op: UlamOperator, psi, n: int = 1) -> np.ndarray:
    """``T^n psi``: the Koopman operator of the Ulam chain (grid adjoint of ``P``)."""
    psi = _check_grid(op, psi)
    out = psi
    for _ in range(n):
        out = op.T @ out
    return out


def cond_expect(op: UlamOperator, m: PiecewiseMap, phi, i: int) -> np.ndarray:
    """``U^i P^i phi``, the conditional expectation on ``f^-i`` of the sigma-algebra."""
    out = _check_grid(op, phi)
    for _ in range(i):
        out = apply_P(op, out)
    for _ in range(i):
        out = apply_U(op, m, out)
    return out


def mu_integral(op: UlamOperator, phi) -> float:
    return float(np.dot(op.mu_masses(), _check_grid(op, phi)))


def mu_norm(op: UlamOperator, phi, p) -> float:
    w = op.mu_masses()
    a = np.abs(_check_grid(op, phi))
    if p == math.inf:
        return float(a[w > 0].max()) if np.any(w > 0) else 0.0
    return float(np.dot(w, a ** p) ** (1.0 / p))


def check_operator_identities(op: UlamOperator, m: PiecewiseMap, phi, psi) -> dict:
    """Residuals of the transfer-operator identities on the grid.

    ``P1``: ``|int P phi - int phi|``; ``P2``: ``|int (P phi) psi - int phi (psi o f)|``;
    ``P3``: ``||P U phi - phi||_inf``; ``P5``: ``max_p ||P phi||_p - ||phi||_p`` over
    ``p`` in ``{1, 2, inf}`` (non-positive for a contraction).
    """
    phi = _check_grid(op, phi)
    psi = _check_grid(op, psi)
    Pphi = apply_P(op, phi)
    r1 = abs(mu_integral(op, Pphi) - mu_integral(op, phi))
    r2 = abs(mu_integral(op, Pphi * psi) - mu_integral(op, phi * apply_U(op, m, psi)))
    r3 = float(np.max(np.abs(apply_P(op, apply_U(op, m, phi)) - phi)))
    r5 = max(mu_norm(op, Pphi, p) - mu_norm(op, phi, p) for p in (1, 2, math.inf))
    return {"P1": r1, "P2": r2, "P3": r3, "P5": r5}


# -------------------------------------------------------------- seminorms

def _sparse_table(v, fn):
    table = [v]
    k = 1
    while 2 * k <= v.size:
        prev = table[-1]
        table.append(fn(prev[:-k], prev[k:]))
        k *= 2
    return table


def _range_query(table, lo, hi, fn):
    length = hi - lo + 1
    lev = np.floor(np.log2(length)).astype(int)
    out = np.empty(lo.size)
    for L in np.unique(lev):
        sel = lev == L
        t = table[L]
        out[sel] = fn(t[lo[sel]], t[hi[sel] - (1 << L) + 1])
    return out


def oscillation_integral(phi, edges, eps: float) -> float:
    """``int osc(phi, B_eps(x)) dx`` over the line, ``phi`` a step function extended by 0."""
    phi = np.asarray(phi, dtype=float)
    edges = np.asarray(edges, dtype=float)
    V = np.concatenate([[0.0], phi, [0.0]])
    bp = np.unique(np.concatenate([edges - eps, edges + eps]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    lens = np.diff(bp)
    ia = np.searchsorted(edges, mids - eps, side="right")
    ib = np.searchsorted(edges, mids + eps, side="right")
    tmax = _sparse_table(V, np.maximum)
    tmin = _sparse_table(V, np.minimum)
    osc = _range_query(tmax, ia, ib, np.maximum) - _range_query(tmin, ia, ib, np.minimum)
    return float(np.dot(lens, osc))


def seminorm(phi, kind: str = "bv", alpha: float | None = None, eps0: float | None = None,
             edges=None, levels: int = 16, depth: float = 256.0) -> float:
    """BV or quasi-Hoelder seminorm of a grid function.

    ``kind="bv"`` is the sum of absolute adjacent differences.
    ``kind="quasiholder"`` is the largest ``eps^-alpha int osc(phi, B_eps(x)) dx``
    over ``levels`` geometric values of ``eps`` from ``eps0`` to ``eps0/depth``.
    """
    phi = np.asarray(phi, dtype=float)
    if kind == "bv":
        return float(np.sum(np.abs(np.diff(phi))))
    if kind != "quasiholder":
        raise PreconditionError(f"unknown seminorm kind {kind!r}")
    if alpha is None or not 0.0 < alpha < 1.0:
        raise PreconditionError("quasi-Hoelder seminorm needs alpha in (0, 1)")
    if eps0 is None or eps0 <= 0:
        raise PreconditionError("quasi-Hoelder seminorm needs eps0 > 0")
    if edges is None:
        edges = np.linspace(0.0, 1.0, phi.size + 1)
    if np.all(phi == phi[0]) and phi[0] == 0.0:
        return 0.0
    epsilons = eps0 * depth ** (-np.arange(levels) / (levels - 1))
    best = 0.0
    for e in epsilons:
        val = oscillation_integral(phi, edges, e) / e ** alpha
        best = max(best, val)
    return best


def lasota_yorke_fit(m: PiecewiseMap, N: int, trials: int, seed: int = 0,
                     n0_max: int = 8, rough: float = 1.0 / 64) -> tuple:
    """Fit ``V(P^n0 phi) <= a V(phi) + b ||phi||_1`` on random test functions.

    ``a`` is the largest contraction ratio among rough probes (those with
    ``||phi||_1 / V(phi) <= rough``, where the weak-norm term cannot help);
    ``b`` is then the smallest value making every probe satisfy the
    inequality.  ``n0`` is raised until ``a < 1``.

    Ulam matrices smear mass between neighbouring bins, so on coarse grids
    even an isometry shows slight contraction; use ``N`` of several hundred
    bins or more when the verdict matters.

    Raises
    ------
    FitFailureError
        If ``a >= 1`` for every ``n0 <= n0_max``.
    """
    if m.dim != 1:
        raise UnsupportedDimensionError("Lasota-Yorke fit is 1-D only")
    op = ulam(m, N)
    w = op.widths
    probes = random_bv_functions(N, trials, seed)
    V0 = np.abs(np.diff(probes, axis=1)).sum(axis=1)
    L1 = (np.abs(probes) * w).sum(axis=1)
    keep = V0 > 0
    probes, V0, L1 = probes[keep], V0[keep], L1[keep]
    is_rough = L1 / V0 <= rough
    if not is_rough.any():
        raise FitFailureError("no rough probes; increase N or trials")
    g = probes.T.copy()
    for n0 in range(1, n0_max + 1):
        g = (op.TT @ (g * w[:, None])) / w[:, None]
        V1 = np.abs(np.diff(g, axis=0)).sum(axis=0)
        a = float(np.max(V1[is_rough] / V0[is_rough]))
        if a < 1.0:
            b = float(np.max(np.maximum(V1 - a * V0, 0.0) / L1))
            return n0, a, b
    raise FitFailureError(f"no contraction up to n0={n0_max}")


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def saussol_condition(s: float, alpha: float, Y: float, N_dim: int) -> tuple:
    """Left side of ``s^a + 4s/(1-s) Y g_{N-1}/g_N < 1`` and whether it holds."""
    if not 0.0 < s < 1.0:
        raise PreconditionError("s must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise PreconditionError("alpha must lie in (0, 1)")
    if Y < 1.0:
        raise PreconditionError("Y must be >= 1")
    if N_dim < 1:
        raise PreconditionError("N_dim must be >= 1")
    val = s ** alpha + (4.0 * s / (1.0 - s)) * Y * unit_ball_volume(N_dim - 1) / unit_ball_volume(N_dim)
    return val, bool(val < 1.0)
