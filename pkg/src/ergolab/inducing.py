"""First-return induced maps on an interval base.

Cells are found by expanding the backward tree of the base breadth-first in
return time: level ``m`` holds the intervals outside the base that first
enter it after exactly ``m`` steps, and a cell of return time ``n`` is a
preimage of a level ``n - 1`` interval that lands inside the base.  Every
tree node remembers the branch that maps it onto its parent, which is all
that is needed to rebuild ``F = f^R`` and its derivative by the chain rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .correlation import DecaySeries
from .errors import (EnumerationBudgetError, IncompleteTailError, NonMarkovBaseError,
                     PreconditionError, UnsupportedDimensionError)
from .maps import PiecewiseMap
from .measure import DensityHistogram

MARKOV_TOL = 1e-10
COMPLETE_TOL = 1e-6


@dataclass(frozen=True)
class InducedMap:
    """A first-return map ``F = f^R`` on the base ``(lo, hi)``.

    Cell arrays are sorted by left endpoint.  ``node_*`` arrays describe the
    backward tree; node 0 is the base itself.
    """
    map: PiecewiseMap
    base: tuple
    n_max: int
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    cell_R: np.ndarray
    cell_mass: np.ndarray
    cell_parent: np.ndarray
    cell_branch: np.ndarray
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_parent: np.ndarray
    node_branch: np.ndarray
    residual: float
    meta: dict = field(default_factory=dict)

    @property
    def ncells(self) -> int:
        return int(self.cell_R.size)

    @property
    def base_mass(self) -> float:
        return float(self.base[1] - self.base[0])

    @property
    def complete(self) -> bool:
        return self.residual < COMPLETE_TOL

    def tail(self) -> np.ndarray:
        """``m(R > n)`` for ``n = 1..n_max``, residual included."""
        return _tail_values(self)

    def chain(self, c: int) -> list:
        """Branch indices to pull a base point back onto cell ``c``, root first."""
        out = [int(self.cell_branch[c])]
        p = int(self.cell_parent[c])
        while p != 0:
            out.append(int(self.node_branch[p]))
            p = int(self.node_parent[p])
        return out[::-1]

    def locate(self, x) -> np.ndarray:
        """Cell index containing each point, or -1 outside every resolved cell."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.cell_lo, x, side="left") - 1
        k = np.clip(k, 0, max(self.ncells - 1, 0))
        ok = (self.ncells > 0) & (x > self.cell_lo[k]) & (x <= self.cell_hi[k])
        return np.where(ok, k, -1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_left", "cell_right", "R", "mass"])
            for a, b, r, mm in zip(self.cell_lo, self.cell_hi, self.cell_R, self.cell_mass):
                w.writerow(["%.17g" % a, "%.17g" % b, int(r), "%.17g" % mm])


def _tail_values(ind: InducedMap) -> np.ndarray:
    per_level = np.bincount(ind.cell_R, weights=ind.cell_mass, minlength=ind.n_max + 2)
    deeper = np.cumsum(per_level[::-1])[::-1]        # deeper[n] = m(R >= n), resolved part
    return deeper[2:ind.n_max + 2] + ind.residual      # m(R > n) for n = 1..n_max


def _straddles(a, b, x, tol):
    """True where ``x`` lies strictly inside ``(a, b)`` by more than ``tol``."""
    return (a < x - tol) & (b > x + tol)


def _preimage(br, lo, hi):
    """Vectorized preimage of intervals ``(lo, hi]`` under one branch."""
    a = br.inv(lo)
    b = br.inv(hi)
    if br.slope is not None:
        length = (hi - lo) / abs(br.slope)
    else:
        length = np.abs(b - a)
    return np.minimum(a, b), np.maximum(a, b), length


def first_return_partition(m: PiecewiseMap, base=(0.0, 0.5), n_max: int = 30,
                           *, tol: float = MARKOV_TOL, max_nodes: int = 2_000_000) -> InducedMap:
    """Enumerate the cells of the first-return map to ``base`` up to ``n_max``.

    Raises
    ------
    NonMarkovBaseError
        If some preimage straddles a boundary of the base or of a branch
        image, so a cell would not map onto the whole base.
    """
    if m.dim != 1:
        raise UnsupportedDimensionError("inducing is only implemented for interval maps")
    lo0, hi0 = float(base[0]), float(base[1])
    if not (m.lo <= lo0 < hi0 <= m.hi):
        raise PreconditionError(f"base {base!r} is not a subinterval of the domain")
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1")

    node_lo, node_hi, node_parent, node_branch = [lo0], [hi0], [-1], [-1]
    cells = {k: [] for k in ("lo", "hi", "R", "mass", "parent", "branch")}
    f_lo = np.array([lo0]); f_hi = np.array([hi0])
    f_id = np.array([0])
    for level in range(1, n_max + 1):
        nxt = ([], [], [], [], [])
        for bi, br in enumerate(m.branches):
            p, q = br.image
            hit = (f_hi > p) & (f_lo < q)
            if not hit.any():
                continue
            if np.any(hit & (_straddles(f_lo, f_hi, p, tol) | _straddles(f_lo, f_hi, q, tol))):
                raise NonMarkovBaseError(
                    f"level {level}: an interval straddles the image of branch {bi}")
            a, b, ln = _preimage(br, f_lo[hit], f_hi[hit])
            pid = f_id[hit]
            keep = ln > 0
            a, b, ln, pid = a[keep], b[keep], ln[keep], pid[keep]
            bad = _straddles(a, b, lo0, tol) | _straddles(a, b, hi0, tol)
            if bad.any():
                j = int(np.flatnonzero(bad)[0])
                raise NonMarkovBaseError(
                    f"return time {level}: preimage ({a[j]:.12g}, {b[j]:.12g}] straddles "
                    f"the base boundary")
            mid = 0.5 * (a + b)
            inn = (mid > lo0) & (mid < hi0)
            cells["lo"].append(a[inn]); cells["hi"].append(b[inn])
            cells["R"].append(np.full(int(inn.sum()), level))
            cells["mass"].append(ln[inn]); cells["parent"].append(pid[inn])
            cells["branch"].append(np.full(int(inn.sum()), bi))
            o = ~inn
            for lst, v in zip(nxt, (a[o], b[o], ln[o], pid[o], np.full(int(o.sum()), bi))):
                lst.append(v)
        if not nxt[0]:
            f_lo = np.empty(0)
            break
        f_lo, f_hi, _, pids, brs = (np.concatenate(v) for v in nxt)
        start = len(node_lo)
        if start + f_lo.size > max_nodes:
            raise EnumerationBudgetError(
                f"backward tree exceeds {max_nodes} nodes at return time {level}")
        node_lo.extend(f_lo); node_hi.extend(f_hi)
        node_parent.extend(pids); node_branch.extend(brs)
        f_id = np.arange(start, start + f_lo.size)
        if f_lo.size == 0:
            break

    def cat(key, dtype):
        return np.concatenate(cells[key]).astype(dtype) if cells[key] else np.empty(0, dtype)

    clo, chi = cat("lo", float), cat("hi", float)
    order = np.argsort(clo, kind="stable")
    masses = cat("mass", float)[order]
    residual = max(0.0, (hi0 - lo0) - math.fsum(masses))
    return InducedMap(
        map=m, base=(lo0, hi0), n_max=int(n_max),
        cell_lo=clo[order], cell_hi=chi[order], cell_R=cat("R", int)[order],
        cell_mass=masses, cell_parent=cat("parent", int)[order],
        cell_branch=cat("branch", int)[order],
        node_lo=np.asarray(node_lo, float), node_hi=np.asarray(node_hi, float),
        node_parent=np.asarray(node_parent, int), node_branch=np.asarray(node_branch, int),
        residual=residual, meta={"nodes": len(node_lo)})


def merge_cells(ind: InducedMap, i: int, j: int) -> InducedMap:
    """Return a copy in which cells ``i`` and ``j`` are fused into one.

    The fused cell keeps the itinerary of cell ``i``; used to exercise the
    Markov check with a deliberately broken partition.
    """
    lo = min(ind.cell_lo[i], ind.cell_lo[j])
    hi = max(ind.cell_hi[i], ind.cell_hi[j])
    keep = np.ones(ind.ncells, bool)
    keep[j] = False

    def fix(arr, val):
        a = arr.copy()
        a[i] = val
        return a[keep]

    return InducedMap(
        map=ind.map, base=ind.base, n_max=ind.n_max,
        cell_lo=fix(ind.cell_lo, lo), cell_hi=fix(ind.cell_hi, hi),
        cell_R=ind.cell_R[keep], cell_mass=fix(ind.cell_mass, ind.cell_mass[i] + ind.cell_mass[j]),
        cell_parent=ind.cell_parent[keep], cell_branch=ind.cell_branch[keep],
        node_lo=ind.node_lo, node_hi=ind.node_hi, node_parent=ind.node_parent,
        node_branch=ind.node_branch, residual=ind.residual, meta=dict(ind.meta, merged=(i, j)))


def tail_series(ind: InducedMap) -> DecaySeries:
    """``m(R > n)`` for ``n = 1..n_max``.

    The unresolved residual is added to every entry, so the values are upper
    bounds that become exact once the tail is complete.
    """
    vals = _tail_values(ind)
    n = np.arange(1, ind.n_max + 1, dtype=float)
    return DecaySeries(n, vals, np.zeros_like(vals), kind="tail",
                       meta={"complete": ind.complete, "residual": ind.residual,
                             "upper_bound": not ind.complete or ind.residual > 0})


# ---------------------------------------------------------------- verification

@dataclass
class GibbsMarkovReport:
    markov_residual: float
    markov_pass: bool
    lambda_hat: float
    expansion_pass: bool
    K_hat: float
    distortion_margin: float
    distortion_pass: bool
    failing_cells: list
    pairs: int
    checked_cells: int
    s_capped: int

    @property
    def passed(self) -> bool:
        return self.markov_pass and self.expansion_pass and self.distortion_pass

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def _sorted_pair(u, v):
    return np.minimum(u, v), np.maximum(u, v)


def _node_residuals(ind: InducedMap) -> np.ndarray:
    """Worst endpoint mismatch along each node's path back to the base."""
    m = ind.map
    n = ind.node_lo.size
    own = np.zeros(n)
    for bi, br in enumerate(m.branches):
        sel = np.flatnonzero(ind.node_branch == bi)
        if sel.size == 0:
            continue
        a, b = _sorted_pair(br.f(ind.node_lo[sel]), br.f(ind.node_hi[sel]))
        par = ind.node_parent[sel]
        own[sel] = np.maximum(np.abs(a - ind.node_lo[par]), np.abs(b - ind.node_hi[par]))
    # parents always precede children, so one forward sweep accumulates
    acc = own.copy()
    for k in range(1, n):
        p = ind.node_parent[k]
        if p > 0 and acc[p] > acc[k]:
            acc[k] = acc[p]
    return acc


def _pull_back(m: PiecewiseMap, chain, u):
    """Pull base points back along ``chain``; returns the points and ``|DF|``."""
    x = np.array(u, dtype=float)
    jac = np.ones_like(x)
    for bi in chain:
        br = m.branches[bi]
        x = br.inv(x)
        jac = jac * np.abs(br.df(x))
    return x, jac


def _apply_F(ind: InducedMap, x):
    """One step of the induced map; points outside resolved cells return NaN."""
    m = ind.map
    c = ind.locate(x)
    out = np.full(x.shape, np.nan)
    ok = c >= 0
    y = x[ok].copy()
    R = ind.cell_R[c[ok]]
    for step in range(int(R.max()) if R.size else 0):
        act = R > step
        y[act] = m(y[act])
    out[ok] = y
    return out, c


def separation_time(ind: InducedMap, u, v, cap: int = 40):
    """Number of induced iterates for which ``u`` and ``v`` share a cell.

    Returns ``(s, capped)``; ``capped`` marks pairs still together after
    ``cap`` iterates or that fell into the unresolved residual.
    """
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    s = np.zeros(u.shape, dtype=int)
    alive = np.ones(u.shape, bool)
    capped = np.zeros(u.shape, bool)
    for _ in range(cap):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        cu, cv = ind.locate(u[idx]), ind.locate(v[idx])
        lost = (cu < 0) | (cv < 0)
        capped[idx[lost]] = True
        same = (cu == cv) & ~lost
        alive[idx[~same]] = False
        idx = idx[same]
        s[idx] += 1
        u[idx], _ = _apply_F(ind, u[idx])
        v[idx], _ = _apply_F(ind, v[idx])
    capped |= alive
    return s, capped


def verify_gibbs_markov(ind: InducedMap, sample_per_cell: int = 32, *, seed: int = 0,
                        max_cells: int = 256, s_cap: int = 40, slack: float = 0.1,
                        tol: float = 1e-9) -> GibbsMarkovReport:
    """Check the Markov, expansion and distortion conditions of ``F = f^R``.

    Only the ``max_cells`` heaviest cells are sampled.  For each, pairs are
    drawn uniformly in the base and pulled back onto the cell, so ``F`` of
    the pair is known exactly and ``DF`` follows by the chain rule.  Half
    of the pairs fit the smallest ``K`` with ``|DF(x)/DF(y) - 1| <= K lam^s``
    (``lam = lambda_hat``, ``s`` the separation time of the images); the
    other half must satisfy it with ``K (1 + slack)``.
    """
    m = ind.map
    if ind.ncells == 0:
        raise PreconditionError("induced map has no resolved cells")
    chosen = np.argsort(-ind.cell_mass, kind="stable")[:max_cells]

    # Markov: each one-step image must coincide with the parent node
    node_acc = _node_residuals(ind)
    cell_res = np.zeros(chosen.size)
    for k, c in enumerate(chosen):
        br = m.branches[ind.cell_branch[c]]
        a, b = _sorted_pair(br.f(np.array([ind.cell_lo[c]])), br.f(np.array([ind.cell_hi[c]])))
        p = ind.cell_parent[c]
        cell_res[k] = max(abs(a[0] - ind.node_lo[p]), abs(b[0] - ind.node_hi[p]), node_acc[p])
    failing = [int(c) for c, r in zip(chosen, cell_res) if r > tol]

    rng = np.random.default_rng(seed)
    lo0, hi0 = ind.base
    U, V, DX, DY = [], [], [], []
    for c in chosen:
        ch = ind.chain(int(c))
        u = lo0 + (hi0 - lo0) * (1.0 - rng.random(sample_per_cell))
        v = lo0 + (hi0 - lo0) * (1.0 - rng.random(sample_per_cell))
        _, ju = _pull_back(m, ch, u)
        _, jv = _pull_back(m, ch, v)
        U.append(u); V.append(v); DX.append(ju); DY.append(jv)
    U, V = np.concatenate(U), np.concatenate(V)
    DX, DY = np.concatenate(DX), np.concatenate(DY)
    lam = float(np.max(1.0 / np.concatenate([DX, DY])))

    s, capped = separation_time(ind, U, V, cap=s_cap)
    ratio = np.abs(DX / DY - 1.0)
    w = lam ** s.astype(float)
    fit = np.arange(U.size) % 2 == 0
    K = float(np.max(ratio[fit] / w[fit])) if fit.any() else 0.0
    hold = ~fit
    margin = K * (1.0 + slack) * w[hold] - ratio[hold]
    mmin = float(margin.min()) if margin.size else 0.0
    return GibbsMarkovReport(
        markov_residual=float(cell_res.max()), markov_pass=not failing,
        lambda_hat=lam, expansion_pass=lam < 1.0,
        K_hat=K, distortion_margin=mmin, distortion_pass=mmin >= -1e-12,
        failing_cells=failing, pairs=int(U.size), checked_cells=int(chosen.size),
        s_capped=int(capped.sum()))


def kac_check(ind: InducedMap, mu=None, strict: bool = True):
    """Return-time integrals ``(int_base R dm, int_base R dmu)``.

    ``mu`` may be a :class:`DensityHistogram`, a callable density (integrated
    on each cell by Gauss-Legendre) or ``None`` for Lebesgue.  For an ergodic
    invariant probability the second value equals 1.  With ``strict=False``
    an incomplete tail is allowed and the sums over resolved cells (lower
    bounds) are returned.
    """
    if strict and not ind.complete:
        raise IncompleteTailError(
            f"residual mass {ind.residual:.3g} exceeds {COMPLETE_TOL}; raise n_max")
    R = ind.cell_R.astype(float)
    m_int = math.fsum(R * ind.cell_mass)
    if mu is None:
        return m_int, m_int
    if isinstance(mu, DensityHistogram):
        w = np.asarray(mu.mass_of(ind.cell_lo, ind.cell_hi), dtype=float)
    else:
        nodes, weights = np.polynomial.legendre.leggauss(8)
        half = 0.5 * (ind.cell_hi - ind.cell_lo)
        mid = 0.5 * (ind.cell_hi + ind.cell_lo)
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        w = half * (np.asarray(mu(pts), dtype=float) @ weights)
    return m_int, math.fsum(R * w)
