"""Invariant-measure samples, histograms, Birkhoff averages and Lyapunov checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PreconditionError, SkippedEvaluationError
from .maps import PiecewiseMap, iterate, sample_uniform
from .observables import as_observable
from .parallel import map_chunks

DEFAULT_BURN_IN = 1000
N_BATCHES = 32
_CELLS_PER_CHUNK = 4_000_000


@dataclass(frozen=True, eq=False)
class OrbitEnsemble:
    """Post burn-in sample of ``count`` points.

    Regenerating with the same ``(map, count, burn_in, seed)`` reproduces
    ``points`` bit for bit whatever the worker count.
    """
    map: PiecewiseMap
    count: int
    burn_in: int
    seed: int
    points: np.ndarray

    @property
    def label(self) -> str:
        return self.map.label


@dataclass(frozen=True)
class DensityHistogram:
    edges: np.ndarray
    masses: np.ndarray
    count: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.widths

    def stderr(self) -> np.ndarray:
        """Binomial standard error of each bin mass."""
        p = self.masses
        return np.sqrt(p * (1 - p) / max(self.count, 1))

    def cdf(self, x):
        """Piecewise-linear CDF of the histogram."""
        c = np.concatenate([[0.0], np.cumsum(self.masses)])
        return np.interp(x, self.edges, c)

    def mass_of(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def rows(self):
        return [(float(a), float(b), float(m))
                for a, b, m in zip(self.edges[:-1], self.edges[1:], self.masses)]


def _chunk_len(n_steps: int) -> int:
    return max(256, _CELLS_PER_CHUNK // (n_steps + 1))


def simulate_ensemble(m: PiecewiseMap, count: int, burn_in: int = DEFAULT_BURN_IN,
                      seed: int = 0, workers=None) -> OrbitEnsemble:
    """Iterate ``count`` uniform initial points ``burn_in`` times.

    Point ``i`` uses the counter streams of ``(seed, i)``, both for its
    initial condition and for the low-bit refresh of float-degenerate
    families.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    if burn_in < 0:
        raise PreconditionError("burn_in must be >= 0")

    def run(a, b):
        x0 = sample_uniform(m, b - a, seed, index0=a)
        if burn_in == 0:
            return x0
        return iterate(m, x0, burn_in, dither_seed=seed, index0=a, t0=0)
    parts = map_chunks(run, count, 65536, workers)
    pts = np.concatenate(parts, axis=0)
    return OrbitEnsemble(map=m, count=count, burn_in=burn_in, seed=seed, points=pts)


def orbit_reduce(m: PiecewiseMap, points, n: int, reducer, *, seed=None, t0: int = 0,
                 index0: int = 0, workers=None, chunk=None):
    """Run ``reducer(traj, start)`` on chunked trajectories and concatenate.

    ``traj`` has shape ``(chunk, n+1)`` (or ``(chunk, n+1, 2)``) and starts
    at the given points; ``start`` is the global index of its first row.
    """
    pts = np.asarray(points, dtype=float)
    total = pts.shape[0]
    step = chunk or _chunk_len(n)

    def run(a, b):
        traj = iterate(m, pts[a:b], n, record=True, dither_seed=seed,
                       index0=index0 + a, t0=t0)
        return reducer(traj, index0 + a)
    parts = map_chunks(run, total, step, workers)
    return np.concatenate(parts, axis=0) if parts else np.empty(0)


def ensemble_sums(ens: OrbitEnsemble, phi, ns, workers=None) -> np.ndarray:
    """Birkhoff sums ``S_n(x) = sum_{i<n} phi(f^i x)`` for every ensemble point.

    Returns shape ``(count, len(ns))``.  Orbits continue the burn-in random
    streams, so they are genuine continuations of the ensemble orbits.
    """
    phi = as_observable(phi)
    ns = np.asarray(ns, dtype=int)
    if ns.size == 0 or ns.min() < 1:
        raise PreconditionError("ns must be >= 1")
    nmax = int(ns.max())

    def red(traj, start):
        v = phi(traj[:, :nmax])
        return np.cumsum(v, axis=1)[:, ns - 1]
    return orbit_reduce(ens.map, ens.points, nmax, red, seed=ens.seed, t0=ens.burn_in,
                        workers=workers)


def empirical_density(ens: OrbitEnsemble, bins: int) -> DensityHistogram:
    """Normalized histogram on the domain (fibre coordinate for Viana)."""
    if bins < 2:
        raise PreconditionError("bins must be >= 2")
    m = ens.map
    x = ens.points if m.dim == 1 else ens.points[:, 1]
    edges = np.linspace(m.lo, m.hi, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    masses = counts / x.shape[0]
    return DensityHistogram(edges=edges, masses=masses, count=int(x.shape[0]))


def _shifted_mean(v: np.ndarray) -> float:
    """Mean computed around the first value, exact for constant input."""
    v = np.asarray(v, dtype=float).ravel()
    v0 = v[0]
    return float(v0 + math.fsum(v - v0) / v.size)


def birkhoff(m: PiecewiseMap, phi, x0, n: int, *, seed: int = 0, refresh=None,
             block: int = 1 << 16) -> float:
    """``(1/n) sum_{i<n} phi(f^i x0)`` along one orbit.

    Float-degenerate families (e.g. the doubling map, whose floating point
    orbits reach 0 within about 55 steps) use the seeded low-bit refresh
    unless ``refresh=False``.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    phi = as_observable(phi)
    use = m.dither if refresh is None else bool(refresh)
    dseed = seed if use else None
    x = np.asarray(x0, dtype=float).reshape((1, 2) if m.dim == 2 else (1,))
    v0 = float(np.asarray(phi(x)).ravel()[0])
    parts = []
    done = 0
    while done < n:
        k = min(block, n - done)
        traj = iterate(m, x, k, record=True, dither_seed=dseed, t0=done)
        vals = np.asarray(phi(traj[0, :k])).ravel()
        parts.append(math.fsum(vals - v0))
        x = traj[:, -1]
        done += k
    return float(v0 + math.fsum(parts) / n)


def batch_stderr(values, batches: int = N_BATCHES) -> float:
    v = np.asarray(values, dtype=float).ravel()
    b = min(batches, v.size)
    if b < 2:
        return 0.0
    means = np.array([_shifted_mean(c) for c in np.array_split(v, b)])
    if np.all(means == means[0]):
        return 0.0
    return float(np.std(means, ddof=1) / math.sqrt(b))


def lyapunov_check(m: PiecewiseMap, ens: OrbitEnsemble, n: int, workers=None,
                   max_skip: float = 1e-3):
    """Ensemble estimate of ``int log ||Df^{-1}|| dmu`` and the expanding verdict.

    Returns ``(estimate, verdict, info)`` where the verdict is
    ``estimate + 3 * stderr < 0`` with batch-means standard error.

    Raises
    ------
    SkippedEvaluationError
        If more than ``max_skip`` of the evaluations hit the critical set.
    """
    if n < 100:
        raise PreconditionError("n must be >= 100")

    def red(traj, start):
        v = m.log_inv_derivative(traj[:, :n])
        bad = ~np.isfinite(v)
        v = np.where(bad, 0.0, v)
        kept = n - bad.sum(axis=1)
        v0 = v[:, :1]
        s = np.where(bad, 0.0, v - v0).sum(axis=1)
        means = np.where(kept > 0, v0[:, 0] + s / np.maximum(kept, 1), np.nan)
        return np.stack([means, bad.sum(axis=1).astype(float)], axis=1)
    out = orbit_reduce(m, ens.points, n, red, seed=ens.seed, t0=ens.burn_in,
                       workers=workers)
    skipped = int(out[:, 1].sum())
    frac = skipped / (n * ens.count)
    if frac > max_skip:
        raise SkippedEvaluationError(
            f"{skipped} of {n * ens.count} evaluations hit the critical set")
    means = out[:, 0][np.isfinite(out[:, 0])]
    est = _shifted_mean(means)
    se = batch_stderr(means)
    verdict = bool(est + 3.0 * se < 0.0)
    return est, verdict, {"stderr": se, "skipped": skipped, "skipped_fraction": frac}


def push_forward(ens: OrbitEnsemble) -> np.ndarray:
    """One more map step applied to every ensemble point (continuing its stream)."""
    return iterate(ens.map, ens.points, 1, dither_seed=ens.seed,
                   t0=ens.burn_in)


__all__ = ["OrbitEnsemble", "DensityHistogram", "simulate_ensemble", "empirical_density",
           "birkhoff", "lyapunov_check", "ensemble_sums", "orbit_reduce", "batch_stderr",
           "push_forward", "DEFAULT_BURN_IN", "kernels"]
