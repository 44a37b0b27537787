"""Flat torus ``[0, 2pi)^d`` with the normalised volume measure.

Eigenfunctions of the Laplacian are the lattice modes ``m in Z^d`` with
eigenvalue ``|m|^2``; we use the real orthonormal basis ``1``,
``sqrt(2) cos<m, x>``, ``sqrt(2) sin<m, x>`` with one representative of each
pair ``{m, -m}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve

TWO_PI = 2.0 * np.pi
MAX_BASIS_FUNCTIONS = 4_000_000
MAX_SHELL_TABLE = 50_000_000


class ResourceLimitError(RuntimeError):
    """Requested enumeration exceeds the memory budget."""


def wrap(x):
    """Reduce coordinates to ``[0, 2pi)``."""
    y = np.mod(x, TWO_PI)
    # mod can round up to exactly 2pi for tiny negative inputs
    return np.where(y >= TWO_PI, 0.0, y)


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[float, ...]

    def __init__(self, coords):
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        object.__setattr__(self, "coords", tuple(float(v) for v in wrap(c)))

    @property
    def d(self) -> int:
        return len(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def _coords(x) -> np.ndarray:
    return np.asarray(x.coords if isinstance(x, TorusPoint) else x, dtype=float)


def periodic_delta(x, y):
    """Coordinatewise wrapped separation in ``[0, pi]``."""
    diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % TWO_PI
    return np.minimum(diff, TWO_PI - diff)


def geodesic_distance(x, y) -> float:
    a, b = _coords(x), _coords(y)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum(periodic_delta(a, b) ** 2)))


def pairwise_distance(xs, ys) -> np.ndarray:
    """Geodesic distance matrix between point arrays of shape (n, d) and (m, d)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape[1] != ys.shape[1]:
        raise ValueError("dimension mismatch")
    sq = np.zeros((xs.shape[0], ys.shape[0]))
    for k in range(xs.shape[1]):
        sq += periodic_delta(xs[:, k, None], ys[None, :, k]) ** 2
    return np.sqrt(sq)


@dataclass(frozen=True)
class LatticeMode:
    m: tuple[int, ...]
    parity: str  # "const", "cos" or "sin"

    @property
    def eigenvalue(self) -> int:
        return int(sum(k * k for k in self.m))


def _ball_count_estimate(d: int, lam_max: float) -> float:
    r = math.sqrt(lam_max) + math.sqrt(d) / 2
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def _half_lattice(d: int, lam_max: int) -> np.ndarray:
    """Nonzero ``m`` with ``|m|^2 <= lam_max`` and first nonzero coordinate > 0."""
    R = int(math.isqrt(lam_max))
    axis = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.sum(grid**2, axis=1) <= lam_max]
    nz = grid != 0
    has = nz.any(axis=1)
    first = np.argmax(nz, axis=1)
    keep = has & (grid[np.arange(len(grid)), first] > 0)
    return grid[keep]


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Real eigenbasis of the torus Laplacian up to ``cutoff``.

    ``vectors`` holds one lattice vector per real eigenfunction (row 0 is the
    zero vector of the constant mode) and ``parity`` marks cos (0) / sin (1).
    """

    d: int
    cutoff: int
    vectors: np.ndarray
    parity: np.ndarray

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.sum(self.vectors.astype(np.int64) ** 2, axis=1)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def modes(self) -> list[LatticeMode]:
        out = []
        for v, p in zip(self.vectors, self.parity):
            m = tuple(int(k) for k in v)
            out.append(LatticeMode(m, "const" if not any(m) else ("cos", "sin")[int(p)]))
        return out

    def evaluate(self, points) -> np.ndarray:
        """Matrix ``phi_i(x_j)`` of shape (n_points, len(self))."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.d:
            raise ValueError("dimension mismatch")
        phase = pts @ self.vectors.T.astype(float)
        out = np.where(self.parity == 0, np.cos(phase), np.sin(phase)) * np.sqrt(2.0)
        out[:, self.eigenvalues == 0] = 1.0
        return out

    def truncate(self, n: int) -> SpectralBasis:
        """First ``n`` functions (including the constant)."""
        return SpectralBasis(self.d, int(self.eigenvalues[n - 1]) if n else 0,
                             self.vectors[:n], self.parity[:n])


def enumerate_modes(d: int, lam_max: int) -> SpectralBasis:
    if not 1 <= d <= 4:
        raise ValueError("d must be in 1..4")
    if lam_max < 1:
        raise ValueError("lam_max must be >= 1")
    lam_max = int(lam_max)
    if _ball_count_estimate(d, lam_max) > MAX_BASIS_FUNCTIONS:
        raise ResourceLimitError(f"basis with d={d}, lam_max={lam_max} exceeds memory budget")
    half = _half_lattice(d, lam_max)
    ev = np.sum(half**2, axis=1)
    # sort by eigenvalue, then lexicographically in m
    order = np.lexsort(tuple(half[:, k] for k in range(d - 1, -1, -1)) + (ev,))
    half = half[order]
    vectors = np.concatenate([np.zeros((1, d), dtype=np.int64), np.repeat(half, 2, axis=0)])
    parity = np.concatenate([[0], np.tile([0, 1], len(half))]).astype(np.int8)
    return SpectralBasis(d=d, cutoff=lam_max, vectors=vectors, parity=parity)


def eigenfunction_eval(mode: LatticeMode, x) -> float:
    xv = _coords(x)
    if len(mode.m) != xv.size:
        raise ValueError("dimension mismatch")
    if mode.parity == "const" or not any(mode.m):
        return 1.0
    phase = float(np.dot(mode.m, xv))
    return math.sqrt(2.0) * (math.cos(phase) if mode.parity == "cos" else math.sin(phase))


def lattice_shells(d: int, lam_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct nonzero values ``n = |m|^2 <= lam_max`` and their counts ``#{m in Z^d}``.

    The counts equal the number of real eigenfunctions with eigenvalue ``n``.
    """
    lam_max = int(lam_max)
    if d == 1:
        k = np.arange(1, math.isqrt(lam_max) + 1, dtype=np.int64)
        return k * k, np.full(k.shape, 2, dtype=np.int64)
    if lam_max + 1 > MAX_SHELL_TABLE:
        raise ResourceLimitError(f"shell table of size {lam_max} exceeds memory budget")
    r1 = np.zeros(lam_max + 1)
    k = np.arange(0, math.isqrt(lam_max) + 1)
    r1[k * k] = 2.0
    r1[0] = 1.0
    acc = r1
    for _ in range(d - 1):
        acc = np.rint(fftconvolve(acc, r1)[: lam_max + 1])
    counts = acc.astype(np.int64)
    n = np.nonzero(counts)[0]
    n = n[n > 0]
    return n.astype(np.int64), counts[n]


def _theta_spectral(t: float, delta: np.ndarray) -> np.ndarray:
    out = np.ones_like(delta)
    m = 1
    while True:
        q = math.exp(-m * m * t)
        out = out + 2.0 * q * np.cos(m * delta)
        if q / (1.0 - math.exp(-(2 * m + 1) * t)) < 1e-14:
            return out
        m += 1


def _theta_images(t: float, delta: np.ndarray, images: int = 4) -> np.ndarray:
    # density of the wrapped N(0, 2t) relative to dx / (2 pi)
    delta = np.where(delta > np.pi, delta - TWO_PI, delta)
    k = np.arange(-images, images + 1)
    z = delta[..., None] + TWO_PI * k
    return math.sqrt(math.pi / t) * np.exp(-(z**2) / (4.0 * t)).sum(axis=-1)


def heat_kernel(d: int, t: float, x, y) -> float | np.ndarray:
    """Heat kernel ``p_t(x, y)`` of ``Delta`` with respect to the normalised volume."""
    if not t > 0:
        raise ValueError("t must be positive")
    xv = np.asarray(_coords(x), dtype=float)
    yv = np.asarray(_coords(y), dtype=float)
    if xv.shape[-1] != d or yv.shape[-1] != d:
        raise ValueError("dimension mismatch")
    delta = periodic_delta(xv, yv)
    theta = _theta_images if t < 0.5 else _theta_spectral
    out = np.prod(theta(t, delta), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class WeylKappa:
    kappa_lower: float
    kappa_upper: float

    @property
    def kappa(self) -> float:
        return max(self.kappa_lower, self.kappa_upper)


def weyl_kappa(d: int, n: int) -> WeylKappa:
    """Measured constants in ``lam_i ~ i^(2/d)`` over the first ``n`` nonconstant modes."""
    lam_max = max(1, int(math.ceil((n / (math.pi ** (d / 2) / math.gamma(d / 2 + 1))) ** (2 / d))))
    while True:
        basis = enumerate_modes(d, lam_max)
        if len(basis) - 1 >= n:
            break
        lam_max *= 2
    lam = basis.eigenvalues[1 : n + 1].astype(float)
    i = np.arange(1, n + 1, dtype=float) ** (2.0 / d)
    return WeylKappa(float(np.max(lam / i)), float(np.max(i / lam)))
