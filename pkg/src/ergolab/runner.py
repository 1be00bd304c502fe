"""Experiment configs and their execution.

A config is a JSON object::

    {"kind": "induce", "seed": 7,
     "map": {"family": "doubling"},
     "observable": "x",
     "params": {"base": [0, 0.5], "n_max": 30}}

``kind`` selects a handler; ``seed`` is mandatory.  Every stochastic call
receives a seed derived from the master seed and a task label (see
:func:`derive_seed`), so outputs depend only on the config.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bd
from . import correlation as cr
from . import inducing as ind
from . import martingale as mg
from . import measure as ms
from . import observables as ob
from . import transfer as tr
from .errors import ConfigError, ErgolabError, ParameterError
from .maps import check_nondegeneracy, make_map, sample_uniform
from .report import emit_report, series_rows

KINDS = ("density", "correlation", "ldev", "martingale", "bounds", "induce", "spectral",
         "nondegeneracy")


def derive_seed(master: int, label: str) -> int:
    """Stream seed for a task: BLAKE2b of ``"<master>:<label>"``, 63 bits."""
    h = hashlib.blake2b(f"{int(master)}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    map: dict
    observable: object = None
    psi: object = None
    params: dict = field(default_factory=dict)
    out: str | None = None
    name: str = ""

    def build_map(self):
        spec = dict(self.map)
        fam = spec.pop("family", None)
        if fam is None:
            raise ConfigError("map.family is required")
        return make_map(fam, **spec)


_REQUIRED = {
    "density": (),
    "correlation": ("n_max",),
    "ldev": ("eps", "n_grid"),
    "martingale": ("test",),
    "bounds": ("regime",),
    "induce": ("base", "n_max"),
    "spectral": ("N",),
    "nondegeneracy": ("eps_grid",),
}


def validate_config(raw) -> ExperimentConfig:
    """Check structure and types; map parameters are checked by building the map.

    Raises
    ------
    ConfigError / ParameterError
        Naming the violated precondition.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if "seed" not in raw:
        raise ConfigError("seed is required (no wall-clock seeding)")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    for key in _REQUIRED[kind]:
        if key not in params:
            raise ConfigError(f"{kind}: missing parameter {key!r}")
    mp = raw.get("map", {"family": "doubling"})
    if not isinstance(mp, dict):
        raise ConfigError("map must be an object")
    cfg = ExperimentConfig(kind=kind, seed=seed, map=mp, observable=raw.get("observable"),
                           psi=raw.get("psi"), params=params, out=raw.get("out"),
                           name=str(raw.get("name", "")))
    if kind != "bounds" and not (kind == "martingale" and params.get("test") in ("azuma", "rio")):
        cfg.build_map()
    if cfg.observable is not None:
        parse_observable(cfg.observable)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return validate_config(raw)


def parse_observable(spec, m=None):
    """Observable from a name or ``{"name": ..., params}``.

    Names: ``x``, ``x-1/2``, ``cos2pi``, ``power`` (p), ``indicator`` (lo, hi),
    ``log_inv_derivative``, ``recurrence`` (delta).
    """
    if spec is None:
        spec = "x"
    if isinstance(spec, str):
        name, kw = spec, {}
    elif isinstance(spec, dict) and "name" in spec:
        kw = dict(spec)
        name = kw.pop("name")
    else:
        raise ConfigError(f"cannot parse observable {spec!r}")
    if name == "x":
        return ob.identity()
    if name == "x-1/2":
        return ob.centered_identity()
    if name == "cos2pi":
        return ob.Observable(lambda x: np.cos(2 * np.pi * x), alpha=1.0, sup_norm=1.0,
                             holder=2 * np.pi, label="cos2pi",
                             provenance={"sup": "exact", "holder": "exact"})
    if name == "power":
        return ob.power(float(kw.get("p", 1.0)))
    if name == "indicator":
        lo, hi = float(kw.get("lo", 0.0)), float(kw.get("hi", 0.5))
        return ob.Observable(lambda x: ((x > lo) & (x <= hi)).astype(float), alpha=1.0,
                             sup_norm=1.0, label=f"1({lo:g},{hi:g}]")
    if name in ("log_inv_derivative", "recurrence"):
        if m is None:
            return None
        if name == "log_inv_derivative":
            return ob.log_inv_derivative(m)
        return bd.recurrence_observable(m, float(kw.get("delta", 0.1)))
    raise ConfigError(f"unknown observable {name!r}")


# -------------------------------------------------------------- handlers

def _fit(series, p):
    win = p.get("window")
    s = series
    if isinstance(win, list) and len(win) == 2:
        s = series.window(win[0], win[1])
    fit = cr.fit_rate(s, family=p.get("family", "auto"), min_points=int(p.get("min_points", 6)))
    return fit, s


def _run_density(cfg, m, workers):
    p = cfg.params
    ens = ms.simulate_ensemble(m, int(p.get("count", 100_000)), int(p.get("burn_in", 1000)),
                               seed=derive_seed(cfg.seed, "ensemble"), workers=workers)
    hist = ms.empirical_density(ens, int(p.get("bins", 100)))
    summary = {"count": ens.count, "burn_in": ens.burn_in, "bins": int(hist.masses.size)}
    tables = {"density": (["bin_left", "bin_right", "mass"], hist.rows())}
    if "lyapunov_n" in p:
        est, verdict, info = ms.lyapunov_check(m, ens, int(p["lyapunov_n"]), workers=workers)
        summary["lyapunov"] = {"estimate": est, "expanding": verdict, **info}
    if "ulam_N" in p:
        op = tr.ulam(m, int(p["ulam_N"]), workers=workers)
        rep = tr.leading_mode(op)
        summary["ulam"] = rep.to_dict()
        tables["ulam_density"] = (["lo", "hi", "density"],
                                  list(zip(op.edges[:-1], op.edges[1:], rep.h)))
    return summary, tables


def _run_correlation(cfg, m, workers):
    p = cfg.params
    phi = parse_observable(cfg.observable, m)
    psi = parse_observable(cfg.psi if cfg.psi is not None else cfg.observable, m)
    method = p.get("method", "ulam")
    op = tr.ulam(m, int(p.get("N", 4096)), workers=workers) if method == "ulam" else None
    series = cr.correlation_series(
        m, phi, psi, int(p["n_max"]), method=method, op=op,
        count=int(p.get("count", 100_000)), seed=derive_seed(cfg.seed, "correlation"),
        burn_in=int(p.get("burn_in", 1000)), norm_phi=p.get("norm_phi", "holder"),
        norm_psi=p.get("norm_psi", "linf"), workers=workers)
    summary = {"method": method, "n_max": int(p["n_max"])}
    if op is not None:
        summary["N"] = op.N
    q = None
    if op is not None and (p.get("window") == "gap" or p.get("compare_q")):
        q = tr.spectral_gap(op)
        summary["q"] = q
    if p.get("window") == "gap":
        # the Ulam gap cuts the decay off after about 1/(1-q) steps
        hi = max(int(p.get("gap_lo", 5)) + 6, int(0.5 / max(1.0 - q, 1e-12)))
        p = dict(p, window=[int(p.get("gap_lo", 5)), min(hi, int(p["n_max"]))])
    fit, used = _fit(series, p)
    summary["fit"] = fit.to_dict()
    summary["fit_window"] = [float(used.n[0]), float(used.n[-1])]
    if fit.family == "polynomial":
        summary["slope"] = -fit.params["beta"]
    else:
        summary["rate"] = math.exp(-fit.params["tau"]) if fit.family == "exponential" else None
    if q is not None and fit.family == "exponential":
        summary["rate_over_q"] = math.exp(-fit.params["tau"]) / q if q > 0 else None
    ref = p.get("reference")
    if ref:
        C, r = float(ref["C"]), float(ref["r"])
        err = np.abs(series.raw - C * r ** series.n)
        summary["reference_max_abs_error"] = float(err.max())
    header, rows = series_rows(series)
    rows = [r + (raw,) for r, raw in zip(rows, series.raw)]
    return summary, {"correlation": (header + ["raw_cov"], rows)}


def _run_ldev(cfg, m, workers):
    p = cfg.params
    phi = parse_observable(cfg.observable, m)
    ens = ms.simulate_ensemble(m, int(p.get("count", 100_000)), int(p.get("burn_in", 100)),
                               seed=derive_seed(cfg.seed, "ensemble"), workers=workers)
    series = cr.ld_series(m, phi, float(p["eps"]), p["n_grid"], ens, workers=workers,
                          center=p.get("center"))
    summary = {"eps": float(p["eps"]), "count": ens.count, "mean": series.meta["mean"]}
    tables = {"ld": series_rows(series)}
    if p.get("fit"):
        try:
            summary["fit"] = _fit(series, p)[0].to_dict()
        except ErgolabError as e:
            summary["fit_error"] = str(e)
    b = p.get("bound")
    if b:
        bp = dict(b)
        at = bp.pop("calibrate_at", None)
        params = bd.BoundParams(eps=float(p["eps"]), **bp).validate()
        if at is not None:
            k = int(np.flatnonzero(series.n == float(at))[0])
            if series.values[k] <= 0:
                raise ParameterError(f"no deviations observed at n={at}; cannot calibrate")
            raw_b = bd.ld_bound(params, float(at))
            params = params.with_(C_prime=params.C_prime * series.values[k] / raw_b)
        rows = bd.bound_curve(params, series.n, series.values)
        summary["bound"] = {"terms": bd.ld_terms(params), "C_prime": params.C_prime,
                            "all_below": bool(all(r[3] >= 0 for r in rows))}
        tables["bound"] = (["n", "bound", "empirical", "margin"], rows)
    return summary, tables


def _martingale_decomp(cfg, m, workers):
    p = cfg.params
    phi = parse_observable(cfg.observable or "x-1/2", m)
    Ns = [int(v) for v in p.get("N_list", [p.get("N", 4096)])]
    k = int(p.get("k", 10))
    orbits = int(p.get("orbits", 1000))
    length = int(p.get("length", 50))
    pts = sample_uniform(m, orbits, derive_seed(cfg.seed, "orbits"))
    rows = []
    for N in Ns:
        op = tr.ulam(m, N, workers=workers)
        dec = mg.decompose(op, m, phi, k=k)
        grid, _ = mg.verify_martingale(dec, pointwise=False)
        point, _ = mg.verify_martingale(dec, pointwise=True)
        sn1 = mg.verify_decomposition(dec, m, pts, length, seed=derive_seed(cfg.seed, "dither"))
        rows.append((N, grid, point, sn1))
    summary = {"k": k, "orbits": orbits, "length": length,
               "rows": [{"N": r[0], "grid_P_xi": r[1], "pointwise_P_xi": r[2],
                         "sn1_residual": r[3]} for r in rows]}
    if len(rows) > 1:
        summary["ratios"] = [{"pointwise_P_xi": rows[i][2] / rows[i + 1][2],
                              "sn1_residual": rows[i][3] / rows[i + 1][3]}
                             for i in range(len(rows) - 1)]
    return summary, {"martingale": (["N", "grid_P_xi", "pointwise_P_xi", "sn1_residual"], rows)}


def _run_martingale(cfg, m, workers):
    p = cfg.params
    test = p["test"]
    if test == "decomposition":
        return _martingale_decomp(cfg, m, workers)
    if test == "azuma":
        rep = mg.azuma_check("coin", a=float(p.get("a", 1.0)), b=float(p.get("b", 0.3)),
                             n=int(p.get("n", 100)), trials=int(p.get("trials", 1_000_000)),
                             seed=derive_seed(cfg.seed, "azuma"), workers=workers)
        d = rep.to_dict()
        if rep.empirical is not None and rep.exact:
            d["empirical_rel_error"] = abs(rep.empirical - rep.exact) / rep.exact
        return d, {}
    if test == "rio":
        rng = np.random.default_rng(derive_seed(cfg.seed, "rio"))
        rows = []
        for c in range(int(p.get("chains", 100))):
            s = int(rng.integers(2, int(p.get("max_states", 4)) + 1))
            n = int(rng.integers(1, int(p.get("max_n", 8)) + 1))
            pp = float(rng.choice(p.get("p_values", [1, 2])))
            rep = mg.rio_check(mg.ExactChain.random(rng, s), pp, n)
            rows.append((c, s, n, pp, rep.lhs, rep.rhs, rep.passed))
        coin = mg.rio_check(mg.ExactChain.coin(), 1.0, 8)
        summary = {"chains": len(rows), "failures": sum(not r[6] for r in rows),
                   "coin_n8_p1": coin.to_dict()}
        return summary, {"rio": (["chain", "states", "n", "p", "lhs", "rhs", "pass"], rows)}
    raise ConfigError(f"martingale: unknown test {test!r}")


def _run_bounds(cfg, m, workers):
    p = dict(cfg.params)
    ns = p.pop("n_grid", [10, 100, 1000])
    tail = p.pop("tail", None)
    params = bd.BoundParams(**p).validate()
    terms = bd.ld_terms(params)
    summary = {"regime": params.regime, "terms": terms}
    if params.theta is not None:
        summary["theta_prime"] = bd.theta_prime(params.theta)
    if params.tau is not None:
        summary["tau_prime"] = bd.tau_prime(params.tau, params.eps, params.norm_inf)
    tables = {"bound": (["n", "bound", "empirical", "margin"], bd.bound_curve(params, ns))}
    if tail:
        law = bd.RateLaw(**{k: v for k, v in tail.items() if k not in ("n_grid", "c")})
        trows = [(int(n), bd.tail_from_ld(law, float(tail.get("c", 1.0)), int(n)))
                 for n in tail.get("n_grid", [10, 100, 1000, 10000])]
        tables["tail"] = (["n", "tail"], trows)
        summary["tail"] = {str(n): v for n, v in trows}
    return summary, tables


def _run_induce(cfg, m, workers):
    p = cfg.params
    I = ind.first_return_partition(m, tuple(p["base"]), int(p["n_max"]))
    ts = ind.tail_series(I)
    summary = {"cells": I.ncells, "residual": I.residual, "complete": I.complete}
    win = p.get("fit_window")
    if win:
        fit = cr.fit_rate(ts.window(*win), family="polynomial")
        summary["tail_fit"] = fit.to_dict()
        summary["tail_slope"] = -fit.params["beta"]
    if p.get("verify", True):
        rep = ind.verify_gibbs_markov(I, int(p.get("sample_per_cell", 32)),
                                      seed=derive_seed(cfg.seed, "gibbs"),
                                      max_cells=int(p.get("max_cells", 256)))
        summary["gibbs_markov"] = rep.to_dict()
    if I.complete:
        summary["kac_m"] = ind.kac_check(I)[0]
    tables = {"tail": series_rows(ts),
              "cells": (["cell_left", "cell_right", "R", "mass"],
                        list(zip(I.cell_lo, I.cell_hi, I.cell_R, I.cell_mass)))}
    return summary, tables


def _run_spectral(cfg, m, workers):
    p = cfg.params
    op = tr.ulam(m, int(p["N"]), workers=workers)
    rep = tr.spectral_report(op, seed=derive_seed(cfg.seed, "probes"))
    summary = rep.to_dict()
    summary["N"] = op.N
    summary["row_defect"] = float(op.row_defect)
    if p.get("eig_oracle"):
        T = np.asarray(p["eig_oracle"], dtype=float)
        ev = np.sort(np.abs(np.linalg.eigvals(T)))[::-1]
        summary["oracle_q"] = float(ev[1])
    return summary, {"density": (["lo", "hi", "density"],
                                 list(zip(op.edges[:-1], op.edges[1:], rep.h)))}


def _run_nondegeneracy(cfg, m, workers):
    p = cfg.params
    rep = check_nondegeneracy(m, int(p.get("sample_count", 200_000)), p["eps_grid"],
                              seed=derive_seed(cfg.seed, "nondeg"),
                              slack=float(p.get("slack", 0.1)))
    summary = {"d_hat": rep.d_hat, "eta_hat": rep.eta_hat, "B_hat": rep.B_hat,
               "passed": rep.passed, "all_pass": rep.all_pass, "constants": rep.constants,
               "c2_slack": rep.c2_slack, "c3_slack": rep.c3_slack}
    return summary, {}


_HANDLERS = {"density": _run_density, "correlation": _run_correlation, "ldev": _run_ldev,
             "martingale": _run_martingale, "bounds": _run_bounds, "induce": _run_induce,
             "spectral": _run_spectral, "nondegeneracy": _run_nondegeneracy}


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers=None) -> dict:
    """Run a validated config and write ``summary.json`` plus CSV tables.

    Returns the results mapping (``summary``, ``tables``, ``paths``).
    """
    needs_map = not (cfg.kind == "bounds"
                     or (cfg.kind == "martingale" and cfg.params.get("test") in ("azuma", "rio")))
    m = cfg.build_map() if needs_map else None
    summary, tables = _HANDLERS[cfg.kind](cfg, m, workers)
    summary = {"kind": cfg.kind, "seed": cfg.seed, "name": cfg.name, "map": cfg.map,
               "params": cfg.params, "results": summary}
    results = {"summary": summary, "tables": tables}
    out = out_dir or cfg.out
    results["paths"] = emit_report(results, out) if out else []
    return results


def with_seed(cfg: ExperimentConfig, seed) -> ExperimentConfig:
    if seed is None:
        return cfg
    return ExperimentConfig(**{**cfg.__dict__, "seed": int(seed)})


def default_out(config_path) -> str:
    stem = os.path.splitext(os.path.basename(config_path))[0]
    return os.path.join("results", stem)
