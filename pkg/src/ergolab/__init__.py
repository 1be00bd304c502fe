"""Numerical laboratory for decay of correlations and large deviations of
non-uniformly expanding interval maps.

Submodules: ``maps`` (test maps), ``measure`` (orbit ensembles and
invariant densities), ``transfer`` (Ulam transfer operators),
``correlation`` (correlation and deviation series, rate fits),
``martingale`` (martingale decompositions and concentration checks),
``bounds`` (large-deviation bound formulas), ``inducing`` (first-return
Gibbs-Markov maps) and ``runner``/``cli`` (batch experiments).
"""
from .errors import (ConfigError, ErgolabError, NumericError, ValidationError)
from .kernels import BACKEND
from .maps import PiecewiseMap, iterate, make_map
from .observables import Observable

__version__ = "0.1.0"

__all__ = ["ConfigError", "ErgolabError", "NumericError", "ValidationError", "PiecewiseMap",
           "Observable", "BACKEND", "iterate", "make_map", "__version__"]
