"""Convergence experiments: Monte Carlo rate curves, deterministic proxies, rate fits and CLT tests."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import bernstein
from .bernstein import BernsteinSpec
from .process import STATIONARY, SimConfig, atom_indices, simulate_arrays
from .rng import stream, token
from .spectral import (
    _cutoff_for,
    _limit_term,
    expected_xi,
    psi_from_points,
    weighted_chisq_sampler,
    xi_r_batch,
)
from .torus import SpectralBasis, enumerate_modes
from .transport import (
    DiscreteMeasure,
    w2sq_circle_uniform,
    wp_discrete_exact,
    wp_sinkhorn,
)

ESTIMATORS = ("exact_1d", "discrete_exact", "sinkhorn")


class RegimeError(ValueError):
    """Parameters fall outside the regime an experiment is defined for."""


@dataclass
class RateCurve:
    t_values: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_values = np.asarray(self.t_values, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        if not (len(self.t_values) == len(self.means) == len(self.stderrs)):
            raise ValueError("curve arrays differ in length")
        if not np.all(np.isfinite(self.stderrs)):
            raise ValueError("non-finite stderr")


@dataclass(frozen=True)
class RateFit:
    model: str
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple[float, float]


def map_replicas(fn: Callable[[int], object], n: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]``, optionally on a thread pool; order is always replica order."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _w2sq_estimate(points: np.ndarray, estimator: str, rng: np.random.Generator) -> float:
    if estimator == "exact_1d":
        return float(w2sq_circle_uniform(points[:, 0]))
    n, d = points.shape
    # Sinkhorn is the slow path here, so it gets a smaller reference sample;
    # its rounded-plan cost stays an upper bound whatever the tolerance
    size = max(10 * n, 10_000 if estimator == "discrete_exact" else 2_000)
    ref = rng.uniform(0.0, 2.0 * np.pi, size=(size, d))
    a, b = DiscreteMeasure.uniform(points), DiscreteMeasure.uniform(ref)
    if estimator == "discrete_exact":
        return wp_discrete_exact(a, b, 2.0).cost ** 2
    return wp_sinkhorn(a, b, 2.0, eps=1e-2, tol=1e-5).cost_upper ** 2


def _check_estimator(d: int, estimator: str) -> None:
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "exact_1d" and d != 1:
        raise RegimeError("estimator exact_1d requires d = 1")


def w2sq_replicas(d: int, spec: BernsteinSpec, start, t: float, replicas: int, seed: int,
                  key: int = 0, estimator: str = "exact_1d", step: float = 0.01,
                  max_atoms: int = 2000, threads: int = 1) -> np.ndarray:
    """``W_2(mu_N, mu)^2`` for each replica path; replica ``i`` uses stream ``(seed, key, i)``."""
    _check_estimator(d, estimator)
    cfg = SimConfig(d=d, spec=spec, horizon=t, step=step, start=start, seed=seed)
    n_atoms = min(cfg.n_steps, max_atoms)
    idx = atom_indices(cfg.n_steps + 1, n_atoms)

    def one(rep: int) -> float:
        rng = stream(seed, key, rep)
        _, X = simulate_arrays(cfg, rng)
        return _w2sq_estimate(X[idx], estimator, rng)

    return np.asarray(map_replicas(one, replicas, threads))


def convergence_curve(d: int, spec: BernsteinSpec, start, t_grid: Sequence[float], replicas: int,
                      estimator: str = "exact_1d", seed: int = 0, step: float = 0.01,
                      max_atoms: int = 2000, threads: int = 1) -> RateCurve:
    """Mean and standard error of ``W_2(mu_t, mu)^2`` along ``t_grid``."""
    _check_estimator(d, estimator)
    means, errs = [], []
    for k, t in enumerate(t_grid):
        vals = w2sq_replicas(d, spec, start, float(t), replicas, seed, k, estimator, step, max_atoms, threads)
        means.append(vals.mean())
        errs.append(vals.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else 0.0)
    meta = {
        "d": d,
        "spec": bernstein.to_dict(spec),
        "estimator": estimator,
        "replicas": replicas,
        "seed": seed,
        "step": step,
        "start": start if isinstance(start, str) else [float(v) for v in np.ravel(getattr(start, "coords", start))],
        "quantity": "E W_2^2",
    }
    return RateCurve(np.asarray(t_grid, dtype=float), np.array(means), np.array(errs), meta)


def replica_tokens(seed: int, n_keys: int, replicas: int) -> list[list[int]]:
    return [[token(seed, k, rep) for rep in range(replicas)] for k in range(n_keys)]


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    sw = np.sqrt(w)
    A = np.column_stack([np.ones_like(x), x]) * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, y * sw, rcond=None)
    return float(coef[1]), float(coef[0])


def fit_rate(curve: RateCurve, model: str = "power", n_boot: int = 1000, seed: int = 0) -> RateFit:
    """Weighted least squares on log-log axes (``power``) or ``t * mean`` against ``log t`` (``power_log``).

    The slope interval is a 95% residual bootstrap.
    """
    t, m, se = curve.t_values, curve.means, curve.stderrs
    if len(t) < 4:
        raise ValueError("need at least 4 points")
    if np.any(m <= 0):
        raise ValueError("means must be positive")
    x = np.log(t)
    if model == "power":
        y, sy = np.log(m), se / m
    elif model == "power_log":
        y, sy = m * t, se * t
    else:
        raise ValueError(f"unknown model {model!r}")
    w = 1.0 / sy**2 if np.all(sy > 0) else np.ones_like(y)
    slope, icpt = _wls(x, y, w)
    fitted = icpt + slope * x
    resid = y - fitted
    ybar = np.average(y, weights=w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - float(np.sum(w * resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    rng = stream(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        boot[b] = _wls(x, fitted + rng.choice(resid, size=len(resid), replace=True), w)[0]
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return RateFit(model, slope, icpt, r2, (float(min(lo, slope)), float(max(hi, slope))))


def proxy_scale(d: int, spec: BernsteinSpec, t: float, schedule: str) -> float:
    if schedule == "power":
        alpha = bernstein.class_tags(spec).lower_index
        return t ** (-2.0 / (d - 2.0 * alpha))
    return math.log1p(t) / t


def upper_proxy_curve(d: int, spec: BernsteinSpec, t_grid: Sequence[float],
                      schedule: Optional[str] = None, rel_tol: float = 1e-10) -> RateCurve:
    """Deterministic bound ``r_t + E^mu Xi_{r_t}(t) / t`` along ``t_grid``.

    ``schedule`` ``power`` uses ``r_t = t^(-2/(d - 2 alpha))`` and needs
    ``d > 2(1+alpha)``; ``critical`` uses ``r_t = log(1+t)/t`` at ``d = 2(1+alpha)``.
    """
    crit = bernstein.critical_dimension(spec)
    if schedule is None:
        schedule = "critical" if d == crit else "power"
    if schedule == "power" and not d > crit:
        raise RegimeError(f"power schedule requires d > 2(1+alpha) = {crit:g}, got d={d}")
    if schedule == "critical" and d != crit:
        raise RegimeError(f"critical schedule requires d = 2(1+alpha) = {crit:g}, got d={d}")
    vals, cuts = [], []
    for t in t_grid:
        r = proxy_scale(d, spec, float(t), schedule)
        lead = float(_limit_term(spec, r)(np.asarray(1.0)))
        lam_max = _cutoff_for(d, spec, r, rel_tol * lead)
        xi = expected_xi(d, spec, r, float(t), lam_max)
        vals.append(r + xi.value / t)
        cuts.append(lam_max)
    meta = {"d": d, "spec": bernstein.to_dict(spec), "schedule": schedule, "estimator": "proxy",
            "replicas": 0, "lambda_max": cuts, "quantity": "r_t + E Xi_r_t(t) / t"}
    return RateCurve(np.asarray(t_grid, dtype=float), np.array(vals), np.zeros(len(vals)), meta)


@dataclass(frozen=True, eq=False)
class CLTResult:
    ks_distance: float
    samples: np.ndarray
    reference: np.ndarray
    statistic: str


def xi_basis(d: int, spec: BernsteinSpec, r: float, rel_tol: float = 1e-10) -> SpectralBasis:
    """Basis whose cutoff makes the neglected part of ``E Xi_r`` negligible."""
    lead = float(_limit_term(spec, r)(np.asarray(1.0)))
    return enumerate_modes(d, _cutoff_for(d, spec, r, rel_tol * lead))


def clt_experiment(d: int, spec: BernsteinSpec, r: float, t: float, replicas: int, seed: int,
                   statistic: Optional[str] = None, step: float = 0.01, n_reference: int = 100_000,
                   basis: Optional[SpectralBasis] = None, start=STATIONARY, threads: int = 1) -> CLTResult:
    """Kolmogorov-Smirnov distance between the replica law and the weighted chi-square limit.

    ``statistic="xi"`` (needs r > 0) uses ``Xi_r(t)``, which plays the role of
    ``t W_2(mu_{t,r}, mu)^2``; ``statistic="w2"`` (r = 0, d = 1) uses
    ``t W_2(mu_t, mu)^2`` from the exact circle solver.
    """
    if replicas < 200:
        raise ValueError("replicas must be >= 200")
    statistic = statistic or ("xi" if r > 0 else "w2")
    crit = bernstein.critical_dimension(spec)
    if statistic == "xi":
        if not r > 0:
            raise RegimeError("statistic xi requires r > 0")
        basis = basis or xi_basis(d, spec, r)
        lam = basis.eigenvalues[1:].astype(float)
        cfg = SimConfig(d=d, spec=spec, horizon=t, step=step, start=start, seed=seed)

        def one(rep: int) -> float:
            _, X = simulate_arrays(cfg, stream(seed, 0, rep))
            return float(xi_r_batch(psi_from_points(X, step, basis), lam, r))

        samples = np.asarray(map_replicas(one, replicas, threads))
    elif statistic == "w2":
        if r != 0 or d != 1:
            raise RegimeError("statistic w2 requires r = 0 and d = 1")
        if not d < crit:
            raise RegimeError(f"r=0 divergent: d >= 2(1+alpha) = {crit:g}")
        samples = t * w2sq_replicas(d, spec, start, t, replicas, seed, 0, "exact_1d", step, threads=threads)
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    reference = weighted_chisq_sampler(d, spec, r, n_reference, stream(seed, 1), basis=basis if statistic == "xi" else None)
    ks = stats.ks_2samp(samples, reference).statistic
    return CLTResult(float(ks), samples, reference, statistic)


@dataclass(frozen=True)
class UniformityResult:
    max_discrepancy: float
    scaled_means: np.ndarray
    scaled_stderrs: np.ndarray


def start_uniformity_check(d: int, spec: BernsteinSpec, t: float, starts: Sequence, replicas: int,
                           seed: int = 0, seeds: Optional[Sequence[int]] = None, step: float = 0.01,
                           threads: int = 1) -> UniformityResult:
    """Largest pairwise ``|difference| / stderr`` of ``t E W_2^2`` across start points."""
    if len(starts) < 2:
        raise ValueError("need at least two starts")
    if d != 1:
        raise RegimeError("start uniformity is checked with the exact d = 1 solver")
    seeds = list(seeds) if seeds is not None else [None] * len(starts)
    means, errs = [], []
    for j, (x0, s) in enumerate(zip(starts, seeds)):
        base, key = (seed, j) if s is None else (s, 0)
        vals = t * w2sq_replicas(d, spec, np.atleast_1d(np.asarray(x0, dtype=float)), t, replicas,
                                 base, key, "exact_1d", step, threads=threads)
        means.append(vals.mean())
        errs.append(vals.std(ddof=1) / math.sqrt(replicas))
    means, errs = np.array(means), np.array(errs)
    worst = 0.0
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            diff = abs(means[i] - means[j])
            if diff > 0:
                worst = max(worst, diff / math.hypot(errs[i], errs[j]))
    return UniformityResult(worst, means, errs)
