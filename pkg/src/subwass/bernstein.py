"""Bernstein functions from a closed catalog and exact subordinator sampling.

Each catalog member is a finite positive combination of powers,
``B(lam) = sum_k c_k * lam**a_k`` with exponents in ``(0, 1]``. A power with
exponent 1 is a deterministic drift; every other power is the Laplace exponent
of a positive stable law, which is sampled exactly with Kanter's
representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .rng import as_generator


def _check_exponent(name: str, value: float, *, allow_one: bool = True) -> None:
    hi_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 < value and hi_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"{name}={value!r} outside {bound}")


@dataclass(frozen=True)
class Stable:
    """``B(lam) = lam**alpha``."""

    alpha: float

    def __post_init__(self):
        _check_exponent("alpha", self.alpha)

    @property
    def components(self) -> tuple[tuple[float, float], ...]:
        return ((1.0, float(self.alpha)),)


@dataclass(frozen=True)
class DriftStable:
    """``B(lam) = drift * lam + lam**alpha``."""

    drift: float
    alpha: float

    def __post_init__(self):
        if not self.drift >= 0.0:
            raise ValueError(f"drift={self.drift!r} must be >= 0")
        _check_exponent("alpha", self.alpha, allow_one=False)

    @property
    def components(self) -> tuple[tuple[float, float], ...]:
        return ((float(self.drift), 1.0), (1.0, float(self.alpha)))


@dataclass(frozen=True)
class StableMix:
    """``B(lam) = weight * lam**alpha + (1 - weight) * lam**beta``."""

    alpha: float
    beta: float
    weight: float = 0.5

    def __post_init__(self):
        _check_exponent("alpha", self.alpha)
        _check_exponent("beta", self.beta)
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight={self.weight!r} outside [0, 1]")

    @property
    def components(self) -> tuple[tuple[float, float], ...]:
        w = float(self.weight)
        return ((w, float(self.alpha)), (1.0 - w, float(self.beta)))


BernsteinSpec = Union[Stable, DriftStable, StableMix]


@dataclass(frozen=True)
class ClassTags:
    lower_index: float
    upper_index: float
    in_bbb: bool


@dataclass(frozen=True)
class SubordinatorPath:
    grid: np.ndarray
    values: np.ndarray
    seed: object = field(default=None, compare=False)


@dataclass(frozen=True)
class LaplaceCheck:
    empirical: float
    exact: float
    stderr: float


def _active(spec: BernsteinSpec):
    return [(c, a) for c, a in spec.components if c > 0.0]


def evaluate(spec: BernsteinSpec, lam):
    """B(lam), vectorised over ``lam``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("B is evaluated on [0, inf) only")
    out = np.zeros_like(lam)
    for c, a in _active(spec):
        out = out + c * lam**a
    return out if out.ndim else float(out)


def class_tags(spec: BernsteinSpec) -> ClassTags:
    """Growth indices of B at infinity.

    For a finite sum of powers the dominant (largest) exponent governs both
    ``liminf lam**-a B(lam) > 0`` and ``limsup lam**-a B(lam) < inf``, so the
    lower and upper indices coincide. The integrability condition of the
    class holds for every member with a positive exponent.
    """
    exps = [a for _, a in _active(spec)]
    if not exps:
        return ClassTags(0.0, 0.0, False)
    top = max(exps)
    return ClassTags(top, top, top > 0.0)


def critical_dimension(spec: BernsteinSpec) -> float:
    """``2 (1 + alpha)`` with alpha the lower index."""
    return 2.0 * (1.0 + class_tags(spec).lower_index)


def positive_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draws with ``E exp(-lam X) = exp(-lam**alpha)`` (Kanter's method)."""
    if alpha == 1.0:
        return np.ones(size)
    _check_exponent("alpha", alpha, allow_one=False)
    u = np.pi * (1.0 - rng.random(size))  # (0, pi]
    e = rng.standard_exponential(size)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    return a * b


def increments(spec: BernsteinSpec, dt, rng: np.random.Generator, size=None) -> np.ndarray:
    """Independent subordinator increments over time steps ``dt``.

    ``dt`` broadcasts against ``size``; the result has the broadcast shape.
    """
    dt = np.asarray(dt, dtype=float)
    shape = np.broadcast_shapes(dt.shape, () if size is None else tuple(np.atleast_1d(size)))
    out = np.zeros(shape)
    for c, a in _active(spec):
        if a == 1.0:
            out = out + c * np.broadcast_to(dt, shape)
        else:
            out = out + (c * dt) ** (1.0 / a) * positive_stable(a, shape, rng)
    return out


def sample_increments(spec: BernsteinSpec, grid, seed) -> SubordinatorPath:
    """Subordinator path ``S`` observed on ``grid`` (which must start at 0)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
        raise ValueError("grid must be one-dimensional and start at 0")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise ValueError("grid must be strictly increasing")
    rng = as_generator(seed)
    values = np.concatenate([[0.0], np.cumsum(increments(spec, steps, rng))])
    return SubordinatorPath(grid=grid, values=values, seed=seed)


def sample_terminal(spec: BernsteinSpec, t: float, n: int, seed) -> np.ndarray:
    """``n`` independent copies of ``S_t``."""
    return increments(spec, float(t), as_generator(seed), size=n)


def laplace_mc_check(spec: BernsteinSpec, t: float, lam: float, n: int, seed) -> LaplaceCheck:
    if n < 1000:
        raise ValueError("laplace_mc_check needs n >= 1000")
    s = sample_terminal(spec, t, n, seed)
    y = np.exp(-lam * s)
    return LaplaceCheck(
        empirical=float(y.mean()),
        exact=float(np.exp(-t * evaluate(spec, lam))),
        stderr=float(y.std(ddof=1) / np.sqrt(n)),
    )


def to_dict(spec: BernsteinSpec) -> dict:
    if isinstance(spec, Stable):
        return {"variant": "stable", "alpha": spec.alpha}
    if isinstance(spec, DriftStable):
        return {"variant": "drift_stable", "drift": spec.drift, "alpha": spec.alpha}
    return {"variant": "stable_mix", "alpha": spec.alpha, "beta": spec.beta, "weight": spec.weight}


def from_dict(d: dict) -> BernsteinSpec:
    kind = d["variant"]
    if kind == "stable":
        return Stable(alpha=d["alpha"])
    if kind == "drift_stable":
        return DriftStable(drift=d["drift"], alpha=d["alpha"])
    if kind == "stable_mix":
        return StableMix(alpha=d["alpha"], beta=d["beta"], weight=d.get("weight", 0.5))
    raise ValueError(f"unknown Bernstein variant {kind!r}")


def label(spec: BernsteinSpec) -> str:
    if isinstance(spec, Stable):
        return f"Stable(alpha={spec.alpha:g})"
    if isinstance(spec, DriftStable):
        return f"DriftStable(drift={spec.drift:g}, alpha={spec.alpha:g})"
    return f"StableMix(alpha={spec.alpha:g}, beta={spec.beta:g}, weight={spec.weight:g})"
