"""Correlation decay, large deviations, Hoelder norms, hitting times and rate fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import transfer as tr
from .errors import (FitFailureError, InsufficientSamplesError, PreconditionError,
                     ZeroNormError)
from .maps import PiecewiseMap
from .measure import (OrbitEnsemble, _shifted_mean, ensemble_sums, lyapunov_check,
                      orbit_reduce, simulate_ensemble)
from .observables import Observable, as_observable

THETA_GRID = np.round(np.arange(0.10, 1.0001, 0.05), 10)
FAMILIES = ("polynomial", "exponential", "stretched")


@dataclass
class DecaySeries:
    """A sequence indexed by ``n`` with Monte-Carlo standard errors.

    ``raw`` keeps the signed, un-normalized values when ``values`` has been
    normalized or made absolute.
    """
    n: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    kind: str = ""
    raw: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.n.size > 1 and np.any(np.diff(self.n) <= 0):
            raise PreconditionError("n must be strictly increasing")
        if not (self.n.shape == self.values.shape == self.stderr.shape):
            raise PreconditionError("n, values and stderr must have equal length")

    def __len__(self):
        return self.n.size

    def window(self, lo, hi) -> "DecaySeries":
        s = (self.n >= lo) & (self.n <= hi)
        return DecaySeries(self.n[s], self.values[s], self.stderr[s], self.kind,
                           None if self.raw is None else self.raw[s], dict(self.meta))

    def rows(self):
        return [(float(a), float(b), float(c))
                for a, b, c in zip(self.n, self.values, self.stderr)]


@dataclass
class RateFit:
    """Least-squares fit of a decay law.

    ``params`` holds ``beta`` (polynomial), ``tau`` and ``theta``
    (stretched) or ``tau`` (exponential), plus the prefactor ``C``.
    """
    family: str
    params: dict
    r2: float
    resid_max: float
    stderr: dict = field(default_factory=dict)
    npoints: int = 0

    def predict(self, n):
        n = np.asarray(n, dtype=float)
        C = self.params["C"]
        if self.family == "polynomial":
            return C * n ** (-self.params["beta"])
        if self.family == "exponential":
            return C * np.exp(-self.params["tau"] * n)
        return C * np.exp(-self.params["tau"] * n ** self.params["theta"])

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params), "r2": self.r2,
                "resid_max": self.resid_max, "stderr": dict(self.stderr),
                "npoints": self.npoints}


@dataclass(frozen=True)
class HolderEstimate:
    """``sup_norm + seminorm``; a lower bound on the true Hoelder norm."""
    norm: float
    sup_norm: float
    seminorm: float
    alpha: float
    lower_bound: bool = True


def holder_norm(phi, alpha: float, pair_count: int = 20000, seed: int = 0,
                domain=(0.0, 1.0), grid: int = 4097) -> HolderEstimate:
    """Sampled estimate of ``||phi||_inf + sup |phi(x)-phi(y)| / |x-y|^alpha``.

    The sup norm is a grid maximum.  Pairs are uniform pairs plus close
    pairs at geometric separations (including pairs anchored at the domain
    ends), so singular behaviour at the boundary is seen.
    """
    if not 0.0 < alpha <= 1.0:
        raise PreconditionError("alpha must lie in (0, 1]")
    phi = as_observable(phi)
    a, b = map(float, domain)
    L = b - a
    xs = np.linspace(a, b, grid)
    sup = float(np.max(np.abs(phi(xs))))
    rng = np.random.default_rng(seed)
    half = max(1, pair_count // 2)
    x = rng.uniform(a, b, half)
    y = rng.uniform(a, b, half)
    hs = L * np.logspace(-12, 0, 49)
    near = rng.uniform(a, b, (hs.size, max(1, (pair_count - half) // hs.size)))
    xn = near.ravel()
    yn = np.clip(xn + np.repeat(hs, near.shape[1]), a, b)
    xe = np.concatenate([np.full(hs.size, a), np.full(hs.size, b)])
    ye = np.concatenate([a + hs, b - hs])
    X = np.concatenate([x, xn, xe])
    Y = np.concatenate([y, yn, ye])
    d = np.abs(X - Y)
    keep = d > 0
    X, Y, d = X[keep], Y[keep], d[keep]
    ratio = np.abs(phi(X) - phi(Y)) / d ** alpha
    ratio = ratio[np.isfinite(ratio)]
    semi = float(ratio.max()) if ratio.size else 0.0
    return HolderEstimate(norm=sup + semi, sup_norm=sup, seminorm=semi, alpha=alpha)


def _norms(phi: Observable, which: str, **kw) -> float:
    if which == "none":
        return 1.0
    if which == "linf":
        if phi.sup_norm is not None:
            return phi.sup_norm
        return holder_norm(phi, phi.alpha, **kw).sup_norm
    if which == "holder":
        if phi.holder_norm is not None:
            return phi.holder_norm
        return holder_norm(phi, phi.alpha, **kw).norm
    raise PreconditionError(f"unknown normalization {which!r}")


def correlation_series(m: PiecewiseMap, phi, psi, n_max: int, method: str = "ulam", *,
                       N: int = 4096, count: int = 100_000, seed: int = 0,
                       burn_in: int = 1000, norm_phi: str = "holder",
                       norm_psi: str = "linf", op: tr.UlamOperator | None = None,
                       workers=None) -> DecaySeries:
    """``|Cov_mu(phi, psi o f^n)| / (||phi|| ||psi||)`` for ``n = 1..n_max``.

    ``method="ulam"`` uses bin averages of the observables, the Ulam
    invariant masses and ``T^n psi``; it carries no sampling error.
    ``method="ensemble"`` uses orbit samples from ``simulate_ensemble``.
    The signed covariances are kept in ``raw``.

    Raises
    ------
    ZeroNormError
        If a normalizing norm is zero.
    """
    if n_max < 1:
        raise PreconditionError("n_max must be >= 1")
    phi = as_observable(phi)
    psi = as_observable(psi)
    a = _norms(phi, norm_phi)
    b = _norms(psi, norm_psi)
    if a == 0.0 or b == 0.0:
        raise ZeroNormError("an observable has zero norm; the normalized series is undefined")
    ns = np.arange(1, n_max + 1)
    if method == "ulam":
        if op is None:
            op = tr.ulam(m, N, workers=workers)
        p = op.mu_masses()
        fg = tr.grid_average(op, phi)
        g = tr.grid_average(op, psi)
        mf, mg = float(p @ fg), float(p @ g)
        pf = p * fg
        raw = np.empty(n_max)
        for k in range(n_max):
            g = op.T @ g
            raw[k] = float(pf @ g) - mf * mg
        se = np.zeros(n_max)
        meta = {"method": "ulam", "N": op.N}
    elif method == "ensemble":
        ens = simulate_ensemble(m, count, burn_in=burn_in, seed=seed, workers=workers)

        def red(traj, start):
            f0 = phi(traj[:, 0])
            gv = psi(traj[:, 1:n_max + 1])
            prod = f0[:, None] * gv
            return np.stack([prod.sum(0), (prod ** 2).sum(0), gv.sum(0),
                             np.full(n_max, f0.sum())])[None]
        parts = orbit_reduce(m, ens.points, n_max, red, seed=ens.seed, t0=ens.burn_in,
                             workers=workers)
        s = parts.sum(axis=0) / count
        raw = s[0] - s[3] * s[2]
        se = np.sqrt(np.maximum(s[1] - s[0] ** 2, 0.0) / count)
        meta = {"method": "ensemble", "count": count, "seed": seed}
    else:
        raise PreconditionError(f"unknown method {method!r}")
    meta.update({"norm_phi": a, "norm_psi": b})
    return DecaySeries(ns, np.abs(raw) / (a * b), se / (a * b), kind="correlation",
                       raw=raw, meta=meta)


def ld_series(m: PiecewiseMap, phi, eps: float, n_grid, ensemble: OrbitEnsemble,
              workers=None, center: float | None = None) -> DecaySeries:
    """Ensemble fraction with ``|S_n/n - mean| > eps`` and its binomial error.

    ``mean`` is ``center`` when given (e.g. a known exact mean), otherwise
    the ensemble mean of ``phi``.
    """
    if eps <= 0:
        raise PreconditionError("eps must be > 0")
    phi = as_observable(phi)
    ns = np.asarray(sorted(set(int(v) for v in n_grid)))
    if center is None:
        center = _shifted_mean(phi(ensemble.points))
    sums = ensemble_sums(ensemble, phi, ns, workers=workers)
    dev = np.abs(sums / ns[None, :] - center) > eps
    f = dev.mean(axis=0)
    se = np.sqrt(f * (1 - f) / ensemble.count)
    return DecaySeries(ns, f, se, kind="ld",
                       meta={"eps": eps, "mean": center, "count": ensemble.count})


# -------------------------------------------------------------- fitting

def _ols(x, y):
    """Slope, intercept, R^2, residuals and slope/intercept standard errors."""
    n = x.size
    X = np.stack([x, np.ones(n)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    sse = float(res @ res)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0)
    dof = max(n - 2, 1)
    s2 = sse / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return coef[0], coef[1], min(max(r2, 0.0), 1.0), res, np.sqrt(np.diag(cov))


def _fit_family(n, logv, family):
    if family == "polynomial":
        s, c, r2, res, se = _ols(np.log(n), logv)
        return {"beta": -s, "C": math.exp(c)}, r2, res, {"beta": se[0]}
    if family == "exponential":
        s, c, r2, res, se = _ols(n, logv)
        return {"tau": -s, "C": math.exp(c)}, r2, res, {"tau": se[0]}

    def sse(theta):
        _, _, _, res, _ = _ols(n ** theta, logv)
        return float(res @ res)
    vals = [sse(t) for t in THETA_GRID]
    t0 = float(THETA_GRID[int(np.argmin(vals))])
    lo, hi = max(0.05, t0 - 0.05), min(1.0, t0 + 0.05)
    opt = minimize_scalar(sse, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    theta = float(opt.x) if opt.fun <= min(vals) else t0
    s, c, r2, res, se = _ols(n ** theta, logv)
    h = 1e-4
    curv = (sse(min(theta + h, 1.0)) - 2 * sse(theta) + sse(max(theta - h, 0.05))) / h ** 2
    s2 = float(res @ res) / max(n.size - 3, 1)
    th_se = math.sqrt(2 * s2 / curv) if curv > 0 else math.inf
    return ({"tau": -s, "theta": theta, "C": math.exp(c)}, r2, res,
            {"tau": se[0], "theta": th_se})


def fit_rate(series: DecaySeries, family: str = "auto", min_points: int = 6,
             tie: float = 1e-9) -> RateFit:
    """Fit a polynomial, stretched-exponential or exponential decay law.

    Each family is fitted by least squares on its linearizing transform; the
    stretched exponent is profiled over ``THETA_GRID`` and then refined.
    ``family="auto"`` takes the best R^2 among fits with positive rates,
    preferring the simpler family when R^2 agree within ``tie``.

    Raises
    ------
    InsufficientSamplesError
        Fewer than ``min_points`` positive values.
    FitFailureError
        No family yields a positive rate.
    """
    v = series.values
    keep = np.isfinite(v) & (v > 0) & (series.n > 0)
    if keep.sum() < min_points:
        raise InsufficientSamplesError(f"need >= {min_points} positive points, have {int(keep.sum())}")
    n = series.n[keep]
    logv = np.log(v[keep])
    fams = FAMILIES if family == "auto" else (family,)
    fits = []
    for fam in fams:
        if fam not in FAMILIES:
            raise PreconditionError(f"unknown family {fam!r}")
        params, r2, res, se = _fit_family(n, logv, fam)
        rate = params["beta"] if fam == "polynomial" else params["tau"]
        fit = RateFit(fam, params, r2, float(np.max(np.abs(res))), se, int(n.size))
        if rate > 0:
            fits.append(fit)
        elif family != "auto":
            raise FitFailureError(f"{fam} fit gives non-positive rate {rate:.4g}")
    if not fits:
        raise FitFailureError("no family gives a positive rate")
    best = max(f.r2 for f in fits)
    for f in fits:
        if f.r2 >= best - tie:
            return f
    return fits[0]


# -------------------------------------------------------------- hitting times

@dataclass
class HittingTimes:
    """Last band violation plus one, per ensemble point.

    ``times`` is meaningful only where ``censored`` is false; censored points
    still violate at ``N_max``.  ``tail`` is ``m(N > n)`` for ``n = 1..N_max``
    with censored points counted in every entry.
    """
    times: np.ndarray
    censored: np.ndarray
    tail: DecaySeries
    N_max: int

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())


def hitting_times(m: PiecewiseMap, phi, ensemble: OrbitEnsemble, N_max: int, *,
                  eps: float | None = None, center: float | None = None,
                  upper: float | None = None, workers=None) -> HittingTimes:
    """Time after which the running Birkhoff average stays in a band.

    Two-sided band: ``|A_n - center| <= eps`` (``center`` defaults to the
    ensemble mean of ``phi``).  One-sided band: ``A_n <= upper``.
    """
    if N_max < 1:
        raise PreconditionError("N_max must be >= 1")
    phi = as_observable(phi)
    if upper is None:
        if eps is None or eps <= 0:
            raise PreconditionError("give eps > 0 or an upper threshold")
        if center is None:
            center = _shifted_mean(phi(ensemble.points))
    ns = np.arange(1, N_max + 1)

    def red(traj, start):
        v = phi(traj[:, :N_max])
        A = np.cumsum(v, axis=1) / ns[None, :]
        bad = (A > upper) if upper is not None else (np.abs(A - center) > eps)
        any_bad = bad.any(axis=1)
        last = N_max - np.argmax(bad[:, ::-1], axis=1)
        return np.where(any_bad, last + 1, 1)
    times = orbit_reduce(m, ensemble.points, N_max, red, seed=ensemble.seed,
                         t0=ensemble.burn_in, workers=workers).astype(np.int64)
    censored = times > N_max
    # N > n for n = 1..N_max, censored points exceed every n
    counts = np.bincount(np.minimum(times, N_max + 1), minlength=N_max + 2)
    le = np.cumsum(counts)[1:N_max + 1]
    f = 1.0 - le / times.size
    se = np.sqrt(f * (1 - f) / times.size)
    tail = DecaySeries(ns, f, se, kind="tail",
                       meta={"censored": int(censored.sum()), "count": int(times.size)})
    return HittingTimes(times=times, censored=censored, tail=tail, N_max=N_max)


def expansion_time(m: PiecewiseMap, ensemble: OrbitEnsemble, N_max: int,
                   lam: float | None = None, workers=None) -> HittingTimes:
    """First time after which ``(1/n) sum log||Df^-1||`` stays below ``lam/2``.

    ``lam`` is the (negative) integral of ``log||Df^-1||``; estimated from the
    ensemble when omitted.
    """
    if lam is None:
        lam, _, _ = lyapunov_check(m, ensemble, max(100, N_max), workers=workers)
    if lam >= 0:
        raise PreconditionError(f"expansion time needs a negative exponent, got {lam:.4g}")
    phi = Observable(m.log_inv_derivative, label="log|Df^-1|")
    return hitting_times(m, phi, ensemble, N_max, upper=lam / 2.0, workers=workers)


def recurrence_time(m: PiecewiseMap, ensemble: OrbitEnsemble, N_max: int, eps: float,
                    delta: float, workers=None) -> HittingTimes:
    """First time after which the running mean of the recurrence observable stays below ``2 eps``."""
    from .bounds import special_observables
    _, phi2 = special_observables(m, delta)
    return hitting_times(m, phi2, ensemble, N_max, upper=2.0 * eps, workers=workers)
