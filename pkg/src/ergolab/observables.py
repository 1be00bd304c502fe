"""Observables: vectorized real functions with cached norms."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class Observable:
    """A real function on phase space.

    Attributes
    ----------
    func : callable
        Vectorized evaluation rule.
    alpha : float
        Hoelder exponent in ``(0, 1]``.
    sup_norm, holder : float or None
        Cached ``||.||_inf`` and Hoelder seminorm.
    provenance : dict
        ``"exact"`` or ``"estimated"`` for each cached norm.
    """
    func: Callable
    alpha: float = 1.0
    sup_norm: Optional[float] = None
    holder: Optional[float] = None
    provenance: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"Hoelder exponent must lie in (0, 1], got {self.alpha}")

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def with_norms(self, sup_norm=None, holder=None, provenance="exact") -> "Observable":
        prov = dict(self.provenance)
        if sup_norm is not None:
            prov["sup"] = provenance
        if holder is not None:
            prov["holder"] = provenance
        return replace(self, sup_norm=self.sup_norm if sup_norm is None else float(sup_norm),
                       holder=self.holder if holder is None else float(holder),
                       provenance=prov)

    @property
    def holder_norm(self) -> Optional[float]:
        if self.sup_norm is None or self.holder is None:
            return None
        return self.sup_norm + self.holder

    def shifted(self, c: float) -> "Observable":
        """``phi - c``; the seminorm is unchanged, the sup norm is dropped."""
        f = self.func
        return Observable(lambda x: np.asarray(f(x), dtype=float) - c, alpha=self.alpha,
                          holder=self.holder,
                          provenance={k: v for k, v in self.provenance.items() if k == "holder"},
                          label=f"{self.label}-{c:g}")


def constant(c: float, dim: int = 1) -> Observable:
    """Constant observable; ``dim=2`` for points carrying a trailing axis."""
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape if dim == 1 else x.shape[:-1], float(c))
    return Observable(f, alpha=1.0, sup_norm=abs(float(c)), holder=0.0,
                      provenance={"sup": "exact", "holder": "exact"}, label=f"const({c:g})")


def identity() -> Observable:
    """``phi(x) = x`` on ``[0, 1]``: sup norm 1, Lipschitz constant 1."""
    return Observable(lambda x: np.asarray(x, dtype=float), alpha=1.0, sup_norm=1.0,
                      holder=1.0, provenance={"sup": "exact", "holder": "exact"}, label="x")


def centered_identity() -> Observable:
    """``phi(x) = x - 1/2`` on ``[0, 1]``."""
    return Observable(lambda x: np.asarray(x, dtype=float) - 0.5, alpha=1.0, sup_norm=0.5,
                      holder=1.0, provenance={"sup": "exact", "holder": "exact"},
                      label="x-1/2")


def log_inv_derivative(m) -> Observable:
    """``phi(x) = log ||Df(x)^{-1}||`` of a map."""
    return Observable(m.log_inv_derivative, alpha=1.0, label=f"log|Df^-1| {m.label}")


def power(p: float) -> Observable:
    """``phi(x) = x^p`` on ``[0, 1]``; Hoelder exponent ``min(p, 1)``."""
    a = min(float(p), 1.0)
    semi = 1.0 if p <= 1 else float(p)
    return Observable(lambda x: np.power(np.asarray(x, dtype=float), p), alpha=a,
                      sup_norm=1.0, holder=semi,
                      provenance={"sup": "exact", "holder": "exact"}, label=f"x^{p:g}")


def from_callable(func, alpha: float = 1.0, label: str = "") -> Observable:
    return Observable(func, alpha=alpha, label=label)


def as_observable(phi) -> Observable:
    if isinstance(phi, Observable):
        return phi
    if callable(phi):
        return Observable(phi)
    return constant(float(phi))
