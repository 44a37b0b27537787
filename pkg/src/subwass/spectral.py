"""Spectral statistics of occupation measures and their closed-form limits.

Sums over the torus spectrum are organised by shells ``|m|^2 = n`` (see
:func:`subwass.torus.lattice_shells`) and truncated at an eigenvalue cutoff
with an explicit integral bound on the neglected tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import bernstein
from .bernstein import BernsteinSpec
from .process import PathSample
from .rng import as_generator
from .torus import MAX_SHELL_TABLE, ResourceLimitError, SpectralBasis, lattice_shells


class DivergenceError(ValueError):
    """The requested spectral series diverges."""


@dataclass(frozen=True, eq=False)
class PsiVector:
    basis: SpectralBasis
    values: np.ndarray  # one entry per nonconstant basis function
    t: float

    def __post_init__(self):
        if len(self.values) != len(self.basis) - 1:
            raise ValueError("need one value per nonconstant mode")


@dataclass(frozen=True)
class LimitSum:
    value: float
    lambda_max: int
    tail_bound: float


def psi_from_points(points: np.ndarray, step: float, basis: SpectralBasis, chunk: int = 8192) -> np.ndarray:
    """Left-endpoint Riemann sums ``t^-1/2 step sum_k phi_i(x_k)`` over ``points[:-1]``."""
    pts = np.asarray(points, dtype=float)[:-1]
    t = step * len(pts)
    acc = np.zeros(len(basis))
    for lo in range(0, len(pts), chunk):
        acc += basis.evaluate(pts[lo : lo + chunk]).sum(axis=0)
    return step * acc[1:] / math.sqrt(t)


def psi_statistics(path: PathSample, basis: SpectralBasis) -> PsiVector:
    if path.points.shape[1] != basis.d:
        raise ValueError("dimension mismatch")
    return PsiVector(basis, psi_from_points(path.points, path.step, basis), path.horizon)


def stationary_psi_second_moment(spec: BernsteinSpec, lam: float, t: float) -> float:
    """``E^mu |psi_i(t)|^2 = 2/B - 2 (1 - exp(-B t)) / (B^2 t)`` with ``B = B(lam)``."""
    if not (lam > 0 and t > 0):
        raise ValueError("lam and t must be positive")
    b = bernstein.evaluate(spec, lam)
    x = b * t
    if x < 1e-4:
        bracket = x / 2 - x * x / 6 + x**3 / 24
    else:
        bracket = 1.0 + math.expm1(-x) / x
    return 2.0 / b * bracket


def xi_r(psi: PsiVector, r: float) -> float:
    """``sum_i psi_i^2 / (lam_i exp(2 r lam_i))`` over the enumerated modes."""
    if r < 0:
        raise ValueError("r must be >= 0")
    lam = psi.basis.eigenvalues[1:].astype(float)
    return float(np.sum(psi.values**2 / lam * np.exp(-2.0 * r * lam)))


def xi_r_batch(psi: np.ndarray, lam: np.ndarray, r: float) -> np.ndarray:
    return np.sum(psi**2 * (np.exp(-2.0 * r * lam) / lam), axis=-1)


def _check_convergent(d: int, spec: BernsteinSpec, r: float) -> None:
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0 and d >= bernstein.critical_dimension(spec):
        alpha = bernstein.class_tags(spec).lower_index
        raise DivergenceError(
            f"r=0 divergent: d >= 2(1+alpha) (d={d}, alpha={alpha:g}, 2(1+alpha)={2 * (1 + alpha):g})")


def _limit_term(spec: BernsteinSpec, r: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda lam: 2.0 / (lam * bernstein.evaluate(spec, lam)) * np.exp(-2.0 * r * lam)


def lattice_tail_bound(d: int, h: Callable, lam_max: int) -> float:
    """Upper bound on ``sum_{m in Z^d, |m|^2 > lam_max} h(|m|^2)`` for decreasing ``h``.

    Each unit cell around ``m`` lies within ``|x| <= |m| + sqrt(d)/2``; comparing
    the sum with the integral over those cells gives
    ``|S^{d-1}| int_{R - sqrt d}^inf (u + sqrt(d)/2)^{d-1} h(u^2) du`` with
    ``R = sqrt(lam_max + 1)``.
    """
    s = math.sqrt(d) / 2.0
    lo = math.sqrt(lam_max + 1.0) - 2.0 * s
    if lo <= 0:
        return math.inf
    area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    f = lambda u: (u + s) ** (d - 1) * float(h(np.asarray(u * u)))
    val, err = integrate.quad(f, lo, np.inf, limit=200, epsabs=1e-16, epsrel=1e-10)
    return area * (val + err) * (1.0 + 1e-9)


def _shell_sum(d: int, term: Callable, lam_max: int) -> float:
    n, k = lattice_shells(d, lam_max)
    return math.fsum((k * term(n.astype(float)))[::-1])


def expected_xi(d: int, spec: BernsteinSpec, r: float, t: float, lam_max: int) -> LimitSum:
    """``E^mu Xi_r(t)`` summed exactly up to ``lam_max`` plus a tail bound.

    With ``t = inf`` this is the limit series ``sum 2 / (lam B(lam) exp(2 r lam))``.
    """
    _check_convergent(d, spec, r)
    term = _limit_term(spec, r) if math.isinf(t) else _vector_moment_term(spec, r, t)
    value = _shell_sum(d, term, lam_max)
    return LimitSum(value, int(lam_max), lattice_tail_bound(d, _limit_term(spec, r), lam_max))


def _vector_moment_term(spec: BernsteinSpec, r: float, t: float) -> Callable:
    def term(lam):
        lam = np.asarray(lam, dtype=float)
        b = np.asarray(bernstein.evaluate(spec, lam), dtype=float)
        x = b * t
        small = x < 1e-4
        xs = np.where(small, 1.0, x)
        bracket = np.where(small, x / 2 - x * x / 6 + x**3 / 24, 1.0 + np.expm1(-xs) / xs)
        return 2.0 / b * bracket * np.exp(-2.0 * r * lam) / lam
    return term


def _cutoff_for(d: int, spec: BernsteinSpec, r: float, tol: float, lam0: int = 16) -> int:
    h = _limit_term(spec, r)
    lam = lam0
    while lattice_tail_bound(d, h, lam) >= tol:
        lam *= 2
        if d > 1 and lam > MAX_SHELL_TABLE:
            raise ResourceLimitError(f"cannot certify tail < {tol:g} within the shell-table budget")
        if d == 1 and lam > 10**16:
            raise ResourceLimitError(f"cannot certify tail < {tol:g}")
    return lam


def limit_sum(d: int, spec: BernsteinSpec, r: float, tol: float = 1e-8) -> LimitSum:
    """``sum_i 2 / (lam_i B(lam_i) exp(2 r lam_i))`` with certified tail ``< tol``."""
    _check_convergent(d, spec, r)
    lam = _cutoff_for(d, spec, r, tol)
    return expected_xi(d, spec, r, math.inf, lam)


def density_f_tr(psi: PsiVector, r: float, x) -> np.ndarray | float:
    """Density of the heat-smoothed occupation measure at ``x`` (a point or array of points)."""
    if not r > 0:
        raise ValueError("r must be positive")
    pts = np.atleast_2d(np.asarray(getattr(x, "coords", x), dtype=float))
    lam = psi.basis.eigenvalues[1:].astype(float)
    phi = psi.basis.evaluate(pts)[:, 1:]
    out = 1.0 + phi @ (np.exp(-r * lam) * psi.values) / math.sqrt(psi.t)
    return float(out[0]) if np.ndim(getattr(x, "coords", x)) <= 1 and pts.shape[0] == 1 else out


def chisq_weights(d: int, spec: BernsteinSpec, r: float,
                  basis: Optional[SpectralBasis] = None) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``2 / (lam B(lam) exp(2 lam r))`` and their multiplicities.

    Without ``basis`` the spectrum is truncated where the neglected mean is
    below ``1e-6`` of the leading term (hence of the total).
    """
    h = _limit_term(spec, r)
    if basis is not None:
        lam = basis.eigenvalues[1:].astype(float)
        return h(lam), np.ones(len(lam), dtype=np.int64)
    _check_convergent(d, spec, r)
    n, k = lattice_shells(d, 1)
    if d == 1:
        n, k = np.array([1]), np.array([2])
    lead = float(k[0] * h(np.asarray(float(n[0]))))
    lam_max = _cutoff_for(d, spec, r, 1e-6 * lead)
    n, k = lattice_shells(d, lam_max)
    return h(n.astype(float)), k


def weighted_chisq_sampler(d: int, spec: BernsteinSpec, r: float, n: int, seed,
                           basis: Optional[SpectralBasis] = None) -> np.ndarray:
    """Draws of ``sum_i 2 xi_i^2 / (lam_i B(lam_i) exp(2 lam_i r))``, ``xi_i`` i.i.d. N(0, 1).

    Modes sharing an eigenvalue are grouped into one chi-square with the shell's
    multiplicity as degrees of freedom.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    weights, dof = chisq_weights(d, spec, r, basis)
    rng = as_generator(seed)
    out = np.zeros(n)
    for c, k in zip(weights, dof):
        out += c * rng.chisquare(int(k), size=n)
    return out


def chisq_moments(d: int, spec: BernsteinSpec, r: float,
                  basis: Optional[SpectralBasis] = None) -> tuple[float, float]:
    """Exact mean and variance of the (truncated) weighted chi-square law."""
    c, k = chisq_weights(d, spec, r, basis)
    return float(np.sum(c * k)), float(np.sum(2.0 * k * c * c))


@dataclass(frozen=True)
class CriticalCurve:
    r: np.ndarray
    values: np.ndarray
    tail_bounds: np.ndarray
    slope: float


def critical_log_curve(r_grid) -> CriticalCurve:
    """``sum_{m in Z^3 \\ 0} 2 exp(-2 |m|^2 r) / |m|^3`` along ``r_grid`` and its slope in ``log(1/r)``.

    Each sum keeps ``|m| <= 3 / sqrt(r)``; the remaining tail is bounded and reported.
    """
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    n_all, k_all = lattice_shells(3, int(math.ceil(9.0 / r.min())))
    nf = n_all.astype(float)
    vals, tails = [], []
    for rv in r:
        lam_max = int(math.ceil(9.0 / rv))
        keep = n_all <= lam_max
        h = lambda lam, rv=rv: 2.0 * np.exp(-2.0 * rv * lam) / lam**1.5
        vals.append(math.fsum((k_all[keep] * h(nf[keep]))[::-1]))
        tails.append(lattice_tail_bound(3, h, lam_max))
    vals = np.array(vals)
    slope = float(np.polyfit(np.log(1.0 / r), vals, 1)[0]) if len(r) > 1 else math.nan
    return CriticalCurve(r, vals, np.array(tails), slope)
