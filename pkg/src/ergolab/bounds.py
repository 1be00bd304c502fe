"""Large-deviation bound formulas, tail conversion, truncations and schedules.

Every implicit constant is an explicit calibration parameter defaulting to 1,
so only shapes (exponents, slopes) carry meaning.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gamma as gamma_fn, gammaincc

from .errors import (DivergentSumError, ParameterError, PreconditionError,
                     ScheduleInfeasibleError)
from .maps import PiecewiseMap, dist_to_critical
from .measure import OrbitEnsemble, _shifted_mean, ensemble_sums
from .observables import Observable, as_observable

REGIMES = ("polynomial", "stretched", "exponential")


@dataclass(frozen=True)
class BoundParams:
    """Constants entering the large-deviation bounds.

    ``norm_B``, ``norm_inf`` and ``norm_chi`` are ``||phi||_B``,
    ``||phi||_inf`` and ``||sum_{j>=1} P^j phi||_inf``.  ``C_prime`` is the
    calibration constant; ``gamma_slack`` is the slack exponent of the
    truncation schedules.
    """
    regime: str
    C: float = 1.0
    beta: float | None = None
    tau: float | None = None
    theta: float | None = None
    q: float | None = None
    eps: float = 0.1
    norm_B: float = 1.0
    norm_inf: float = 1.0
    norm_chi: float = 0.0
    C_prime: float = 1.0
    zeta: float | None = None
    gamma_slack: float | None = None
    delta: float | None = None
    c: float = 1.0

    def validate(self) -> "BoundParams":
        if self.regime not in REGIMES:
            raise ParameterError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not self.eps > 0:
            raise ParameterError("eps must be > 0")
        for name in ("C", "norm_B", "norm_inf", "C_prime", "c"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.norm_chi < 0:
            raise ParameterError("norm_chi must be >= 0")
        if self.regime == "polynomial":
            if self.beta is None or not self.beta > 0:
                raise ParameterError("polynomial regime needs beta > 0")
            if self.q is None or not self.q > max(1.0, self.beta):
                raise ParameterError("polynomial regime needs q > max(1, beta)")
        if self.regime == "stretched":
            if self.tau is None or not self.tau > 0 or self.theta is None or not self.theta > 0:
                raise ParameterError("stretched regime needs tau > 0 and theta > 0")
        for name in ("zeta", "gamma_slack", "delta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be > 0")
        return self

    def with_(self, **kw) -> "BoundParams":
        return replace(self, **kw)


def theta_prime(theta: float) -> float:
    """Stretched exponent after the martingale step: ``theta / (theta + 2)``."""
    if not theta > 0:
        raise ParameterError("theta must be > 0")
    return theta / (theta + 2.0)


def tau_prime(tau: float, eps: float, norm_inf: float) -> float:
    """``min(tau, eps^2 / (162 ||phi||_inf^2))``."""
    return min(tau, eps * eps / (162.0 * norm_inf * norm_inf))


def exponential_rate(eps: float, norm_inf: float, norm_chi: float) -> float:
    """``eps^2 / (8 (||phi||_inf + 2 ||chi||_inf)^2)``."""
    s = norm_inf + 2.0 * norm_chi
    return eps * eps / (8.0 * s * s)


def ld_terms(p: BoundParams) -> dict:
    """Named ingredients of the bound for ``p``'s regime."""
    p.validate()
    if p.regime == "polynomial":
        pre = p.C_prime * p.norm_B * p.norm_inf ** (2 * p.q - 1) * p.eps ** (-2 * p.q)
        return {"prefactor": pre, "beta": p.beta}
    if p.regime == "stretched":
        return {"prefactor": p.C_prime * (2.0 + p.C * p.norm_B / p.eps),
                "theta_prime": theta_prime(p.theta),
                "tau_prime": tau_prime(p.tau, p.eps, p.norm_inf)}
    return {"prefactor": 2.0 * p.C_prime,
            "tau": exponential_rate(p.eps, p.norm_inf, p.norm_chi)}


def ld_bound(p: BoundParams, n):
    """Upper bound on the large deviation at time ``n`` (scalar or array)."""
    t = ld_terms(p)
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise PreconditionError("n must be >= 1")
    if p.regime == "polynomial":
        out = t["prefactor"] * n_arr ** (-p.beta)
    elif p.regime == "stretched":
        out = t["prefactor"] * np.exp(-t["tau_prime"] * n_arr ** t["theta_prime"])
    else:
        out = t["prefactor"] * np.exp(-t["tau"] * n_arr)
    return float(out) if np.ndim(out) == 0 else out


def bound_curve(p: BoundParams, ns, empirical=None):
    """Rows ``(n, bound, empirical, margin)`` with ``margin = bound - empirical``."""
    ns = np.asarray(ns, dtype=float)
    b = np.atleast_1d(ld_bound(p, ns))
    e = np.full(ns.shape, np.nan) if empirical is None else np.asarray(empirical, float)
    return [(float(a), float(x), float(y), float(x - y)) for a, x, y in zip(ns, b, e)]


# -------------------------------------------------------------- tail conversion

@dataclass(frozen=True)
class RateLaw:
    """``xi(l)``: ``C l^-beta``, ``C exp(-tau l^theta)`` or ``C exp(-tau l)``."""
    family: str
    C: float = 1.0
    beta: float | None = None
    tau: float | None = None
    theta: float | None = None

    def __call__(self, l):
        l = np.asarray(l, dtype=float)
        if self.family == "polynomial":
            return self.C * l ** (-self.beta)
        if self.family == "exponential":
            return self.C * np.exp(-self.tau * l)
        return self.C * np.exp(-self.tau * l ** self.theta)

    @classmethod
    def from_fit(cls, fit) -> "RateLaw":
        pr = fit.params
        return cls(fit.family, C=pr["C"], beta=pr.get("beta"), tau=pr.get("tau"),
                   theta=pr.get("theta"))


def _poly_tail(beta: float, n: int, direct: int = 2000) -> float:
    """``sum_{l>=n} l^-beta``: direct block plus Euler-Maclaurin remainder."""
    L = n + direct
    l = np.arange(n, L, dtype=float)
    head = math.fsum(l ** (-beta))
    Lf = float(L)
    em = (Lf ** (1 - beta) / (beta - 1) + 0.5 * Lf ** (-beta)
          + beta * Lf ** (-beta - 1) / 12.0
          - beta * (beta + 1) * (beta + 2) * Lf ** (-beta - 3) / 720.0)
    return head + em


def _stretched_tail(tau: float, theta: float, n: int, cap: int = 1_000_000) -> float:
    total = []
    l0 = n
    block = 4096
    while True:
        l = np.arange(l0, l0 + block, dtype=float)
        v = np.exp(-tau * l ** theta)
        total.append(math.fsum(v))
        l0 += block
        s = math.fsum(total)
        if v[-1] <= 1e-18 * max(s, 1e-300) or l0 - n >= cap:
            break
    # integral remainder from l0 on, with the trapezoid end correction
    a = 1.0 / theta
    x = tau * l0 ** theta
    integral = gamma_fn(a) * gammaincc(a, x) / (theta * tau ** a)
    return s + integral + 0.5 * math.exp(-x)


def tail_from_ld(law: RateLaw, c: float, n: int) -> float:
    """``(1/c) sum_{l>=n} xi(l)``.

    Raises
    ------
    DivergentSumError
        Polynomial law with ``beta <= 1``.
    """
    if not c > 0:
        raise PreconditionError("c must be > 0")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if law.family == "polynomial":
        if law.beta is None or law.beta <= 1.0:
            raise DivergentSumError(f"sum of l^-beta diverges for beta={law.beta}")
        s = _poly_tail(law.beta, int(n))
    elif law.family == "exponential":
        if not (law.tau and law.tau > 0):
            raise ParameterError("exponential law needs tau > 0")
        s = math.exp(-law.tau * n) / -math.expm1(-law.tau)
    elif law.family == "stretched":
        if not (law.tau and law.tau > 0 and law.theta and law.theta > 0):
            raise ParameterError("stretched law needs tau, theta > 0")
        s = _stretched_tail(law.tau, law.theta, int(n))
    else:
        raise ParameterError(f"unknown family {law.family!r}")
    return law.C * s / c


# -------------------------------------------------------------- observables

def _phi2_values(d, delta):
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    near = d < delta
    mid = (d >= delta) & (d < 2 * delta)
    with np.errstate(divide="ignore"):
        out[near] = -np.log(d[near])
    out[mid] = (math.log(delta) / delta) * (d[mid] - 2 * delta)
    return out


def recurrence_observable(m: PiecewiseMap, delta: float) -> Observable:
    """``-log d(x, C)`` within ``delta``, a linear ramp to 0 at ``2 delta``, then 0."""
    if not 0.0 < delta < 0.25:
        raise PreconditionError("delta must lie in (0, 0.25)")
    if not m.critical_set:
        raise PreconditionError(f"{m.label}: empty critical set, recurrence observable undefined")
    return Observable(lambda x: _phi2_values(dist_to_critical(m, x), delta),
                      alpha=1.0, label=f"phi2(delta={delta:g})")


def distance_observable(m: PiecewiseMap) -> Observable:
    """``-log d(x, C)``."""
    if not m.critical_set:
        raise PreconditionError(f"{m.label}: empty critical set")

    def f(x):
        with np.errstate(divide="ignore"):
            return -np.log(dist_to_critical(m, x))
    return Observable(f, alpha=1.0, label="-log d(x,C)")


def special_observables(m: PiecewiseMap, delta: float):
    """``(log||Df^-1||, recurrence observable at delta)``."""
    phi1 = Observable(m.log_inv_derivative, alpha=1.0, label="log|Df^-1|")
    return phi1, recurrence_observable(m, delta)


def truncate(phi, k: float, alpha: float = 1.0, calibration: float = 1.0):
    """Cap ``phi`` at ``k``; return the capped observable and ``calibration * k e^{alpha k} / alpha``."""
    if not k > 0:
        raise PreconditionError("k must be > 0")
    if not 0.0 < alpha <= 1.0:
        raise PreconditionError("alpha must lie in (0, 1]")
    phi = as_observable(phi)
    f = phi.func
    capped = Observable(lambda x: np.minimum(np.asarray(f(x), dtype=float), k),
                        alpha=phi.alpha, label=f"min({phi.label},{k:g})")
    return capped, calibration * k * math.exp(alpha * k) / alpha


def schedule_k(regime: str, p: BoundParams, n: float) -> dict:
    """Truncation level ``k`` (and Hoelder exponent ``alpha``) for time ``n``.

    ``"stretched_ld"``: ``k = n^{1/(theta+2)}`` (truncation of the martingale
    sum).  ``"polynomial"``: ``k = ((beta+1-gamma)/zeta) log n`` and
    ``alpha = gamma zeta / (2 (beta+1-gamma))``.  ``"stretched"``:
    ``k = n^{theta'/3 - gamma}``.

    Raises
    ------
    ScheduleInfeasibleError
        When the slack makes the exponent or the log coefficient non-positive.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if regime == "stretched_ld":
        if p.theta is None or p.theta <= 0:
            raise ParameterError("needs theta > 0")
        e = 1.0 / (p.theta + 2.0)
        return {"k": float(n) ** e, "exponent": e}
    g = p.gamma_slack
    if g is None:
        raise ParameterError("schedule needs gamma_slack")
    if regime == "polynomial":
        if p.beta is None or p.zeta is None:
            raise ParameterError("polynomial schedule needs beta and zeta")
        lead = p.beta + 1.0 - g
        if lead <= 0:
            raise ScheduleInfeasibleError("beta + 1 - gamma must be > 0")
        return {"k": lead / p.zeta * math.log(n), "alpha": g * p.zeta / (2.0 * lead)}
    if regime == "stretched":
        if p.theta is None:
            raise ParameterError("stretched schedule needs theta")
        e = theta_prime(p.theta) / 3.0 - g
        if e <= 0:
            raise ScheduleInfeasibleError(
                f"exponent theta'/3 - gamma = {e:.4g} is not positive")
        return {"k": float(n) ** e, "exponent": e}
    raise ParameterError(f"unknown schedule {regime!r}")


# -------------------------------------------------------------- A_{i,k}

@dataclass
class AikReport:
    k: np.ndarray
    fractions: np.ndarray
    stderr: np.ndarray
    zeta: float | None
    zeta_stderr: float | None
    deltas: np.ndarray = field(default_factory=lambda: np.empty(0))
    phi2_means: np.ndarray = field(default_factory=lambda: np.empty(0))
    phi2_stderr: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def sweep_monotone(self) -> bool:
        """Means decrease as delta shrinks, allowing 2 standard errors of slack."""
        if self.deltas.size < 2:
            return True
        order = np.argsort(self.deltas)[::-1]
        v = self.phi2_means[order]
        s = self.phi2_stderr[order]
        return bool(np.all(v[1:] <= v[:-1] + 2 * np.hypot(s[1:], s[:-1])))


def aik_measure(m: PiecewiseMap, ensemble: OrbitEnsemble, phi, k_grid, delta_grid=None) -> AikReport:
    """Ensemble fractions ``mu(phi >= k)``, a log-linear decay fit and a delta sweep.

    ``zeta`` is the negated slope of ``log mu(phi >= k)`` against ``k`` over
    the positive fractions.
    """
    phi = as_observable(phi)
    vals = phi(ensemble.points)
    ks = np.asarray(k_grid, dtype=float)
    frac = np.array([np.mean(vals >= k) for k in ks])
    se = np.sqrt(frac * (1 - frac) / vals.size)
    pos = frac > 0
    if not pos.all():
        warnings.warn("some k exceed the observed range; their fractions are zero",
                      RuntimeWarning, stacklevel=2)
    zeta = zse = None
    if pos.sum() >= 2:
        X = np.stack([ks[pos], np.ones(pos.sum())], axis=1)
        y = np.log(frac[pos])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        zeta = float(-coef[0])
        res = y - X @ coef
        if pos.sum() > 2:
            s2 = float(res @ res) / (pos.sum() - 2)
            zse = float(math.sqrt(s2 * np.linalg.inv(X.T @ X)[0, 0]))
    deltas = np.asarray(delta_grid if delta_grid is not None else [], dtype=float)
    means = np.empty(deltas.size)
    ses = np.empty(deltas.size)
    for i, d in enumerate(deltas):
        v = recurrence_observable(m, d)(ensemble.points)
        v = v[np.isfinite(v)]
        means[i] = _shifted_mean(v)
        ses[i] = float(np.std(v) / math.sqrt(v.size))
    return AikReport(ks, frac, se, zeta, zse, deltas, means, ses)


def ld_split_check(m: PiecewiseMap, ensemble: OrbitEnsemble, phi, k: float, eps: float,
                   n_grid, workers=None) -> list:
    """Check ``LD(phi) <= LD(min(phi, k)) + n mu(phi >= k)`` on the ensemble.

    Both deviations are measured from the ensemble mean of ``phi``, so on
    orbits that never enter ``{phi >= k}`` the two Birkhoff sums coincide.
    Returns rows ``(n, lhs, rhs, combined stderr, pass)``.
    """
    phi = as_observable(phi)
    capped, _ = truncate(phi, k)
    vals = phi(ensemble.points)
    center = _shifted_mean(vals[np.isfinite(vals)])
    ns = np.asarray(sorted(set(int(v) for v in n_grid)))
    a = np.mean(vals >= k)
    a_se = math.sqrt(a * (1 - a) / vals.size)
    S = ensemble_sums(ensemble, phi, ns, workers=workers)
    Sk = ensemble_sums(ensemble, capped, ns, workers=workers)
    out = []
    for j, n in enumerate(ns):
        l = float(np.mean(np.abs(S[:, j] / n - center) > eps))
        r0 = float(np.mean(np.abs(Sk[:, j] / n - center) > eps))
        cnt = ensemble.count
        se = math.sqrt(l * (1 - l) / cnt + r0 * (1 - r0) / cnt + (n * a_se) ** 2)
        rhs = r0 + n * a
        out.append((int(n), l, rhs, se, bool(l <= rhs + 3 * se)))
    return out
