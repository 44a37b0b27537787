"""Subordinated Brownian motion on the flat torus and its empirical measures.

The diffusion has generator ``Delta`` (per-coordinate variance ``2 s`` at time
``s``); running it along an independent subordinator ``S`` gives a process
whose marginals on any time grid are exact: given a subordinator increment
``dS`` the spatial increment is ``N(0, 2 dS I_d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bernstein
from .bernstein import BernsteinSpec, SubordinatorPath
from .rng import stream
from .torus import TWO_PI, LatticeMode, TorusPoint, wrap
from .transport import DiscreteMeasure

EmpiricalMeasure = DiscreteMeasure

STATIONARY = "stationary"


@dataclass(frozen=True)
class SimConfig:
    d: int
    spec: BernsteinSpec
    horizon: float
    step: float = 0.01
    start: object = STATIONARY  # TorusPoint, coordinate sequence, or "stationary"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.d <= 4:
            raise ValueError("d must be in 1..4")
        if not (self.horizon > 0 and self.step > 0):
            raise ValueError("horizon and step must be positive")
        if self.step > self.horizon * (1 + 1e-12):
            raise ValueError("step must not exceed the horizon")
        n = self.horizon / self.step
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"horizon/step = {n!r} is not an integer step count")
        if isinstance(self.start, str):
            if self.start != STATIONARY:
                raise ValueError(f"unknown start {self.start!r}")
        else:
            x = np.asarray(self.start.coords if isinstance(self.start, TorusPoint) else self.start, dtype=float)
            if x.shape != (self.d,):
                raise ValueError(f"start point must have {self.d} coordinates")
            object.__setattr__(self, "start", TorusPoint(x))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step


@dataclass(frozen=True, eq=False)
class PathSample:
    grid: np.ndarray
    points: np.ndarray  # (len(grid), d)
    subordinator: SubordinatorPath
    seed: object = field(default=None, compare=False)

    def __post_init__(self):
        if not (len(self.grid) == len(self.points) == len(self.subordinator.values)):
            raise ValueError("grid, points and subordinator lengths differ")

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        header = "time,S_t," + ",".join(f"x{k}" for k in range(d))
        data = np.column_stack([self.grid, self.subordinator.values, self.points])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def _start_points(start, d: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(start, str):
        if start != STATIONARY:
            raise ValueError(f"unknown start {start!r}")
        return rng.uniform(0.0, TWO_PI, size=(size, d))
    x = np.asarray(start.coords if isinstance(start, TorusPoint) else start, dtype=float)
    return np.broadcast_to(wrap(x), (size, d)).copy()


def simulate_arrays(config: SimConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Subordinator values (n+1,) and wrapped positions (n+1, d) on the config grid."""
    n = config.n_steps
    x0 = _start_points(config.start, config.d, 1, rng)[0]
    dS = bernstein.increments(config.spec, config.step, rng, size=n)
    S = np.concatenate([[0.0], np.cumsum(dS)])
    dX = rng.standard_normal((n, config.d)) * np.sqrt(2.0 * dS)[:, None]
    X = np.empty((n + 1, config.d))
    X[0] = x0
    # wrap cumulatively so positions stay in [0, 2pi) without drift in magnitude
    X[1:] = x0 + np.cumsum(dX, axis=0)
    return S, wrap(X)


def simulate_subordinated_path(config: SimConfig, rng: Optional[np.random.Generator] = None) -> PathSample:
    rng = stream(config.seed) if rng is None else rng
    S, X = simulate_arrays(config, rng)
    grid = config.grid
    return PathSample(grid, X, SubordinatorPath(grid, S, config.seed), config.seed)


def atom_indices(n_grid: int, n: int) -> np.ndarray:
    """Indices of ``n`` equally spaced atoms among ``n_grid`` grid points."""
    if n < 1:
        raise ValueError("need at least one atom")
    if n > n_grid:
        raise ValueError(f"{n} atoms requested from {n_grid} grid points")
    return (np.arange(n) * n_grid) // n


def empirical_measure(path: PathSample, n: Optional[int] = None) -> EmpiricalMeasure:
    """Discretised empirical measure with ``n`` uniformly weighted grid atoms."""
    n = len(path.grid) if n is None else int(n)
    idx = atom_indices(len(path.grid), n)
    return DiscreteMeasure.uniform(path.points[idx])


@dataclass(frozen=True)
class DecayCheck:
    empirical: float
    exact: float
    stderr: float


def char_decay_check(d: int, spec: BernsteinSpec, m: Sequence[int], t: float,
                     replicas: int, seed: int, start=None) -> DecayCheck:
    """Monte Carlo ``E cos<m, X_t - X_0>`` against ``exp(-t B(|m|^2))``."""
    if replicas < 1000:
        raise ValueError("replicas must be >= 1000")
    m = np.asarray(m.m if isinstance(m, LatticeMode) else m, dtype=float)
    if m.shape != (d,):
        raise ValueError("mode dimension mismatch")
    exact = math.exp(-t * bernstein.evaluate(spec, float(m @ m)))
    if t == 0:
        return DecayCheck(1.0, 1.0, 0.0)
    start = np.zeros(d) if start is None else start
    cfg = SimConfig(d=d, spec=spec, horizon=t, step=t, start=start, seed=seed)
    vals = np.empty(replicas)
    for rep in range(replicas):
        _, X = simulate_arrays(cfg, stream(seed, rep))
        vals[rep] = math.cos(float(m @ (X[-1] - X[0])))
    return DecayCheck(float(vals.mean()), exact, float(vals.std(ddof=1) / math.sqrt(replicas)))
