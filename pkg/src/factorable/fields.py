"""Monte Carlo generators of random-field ensembles.

Each realization draws from its own stream, keyed by the master seed and the
realization index, so ensembles are bit-identical whatever the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .metric import DiscreteMetricSpace

THREADS_ENV = "FACTORABLE_THREADS"


@dataclass(frozen=True, eq=False)
class FieldEnsemble:
    """``M`` realizations of a field sampled at the points of a space.

    ``values[i, j]`` is realization ``i`` at point ``j``. Fields on tensor
    grids also carry ``axes`` (per-axis coordinates) so that ``grid_values``
    can restore the ``(M, n1, ..., nd)`` layout.
    """

    values: np.ndarray
    space: Optional[DiscreteMetricSpace] = None
    generator: str = "custom"
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)
    axes: Optional[tuple] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("ensemble values must be an (M, n) matrix with M >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("ensemble contains non-finite values")
        if self.space is not None and self.space.n != v.shape[1]:
            raise ValueError(f"space has {self.space.n} points, ensemble has {v.shape[1]}")
        if self.axes is not None:
            axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
            if int(np.prod([a.size for a in axes])) != v.shape[1]:
                raise ValueError("axes do not match the number of columns")
            object.__setattr__(self, "axes", axes)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def grid_shape(self) -> Optional[tuple]:
        return None if self.axes is None else tuple(a.size for a in self.axes)

    def grid_values(self) -> np.ndarray:
        if self.axes is None:
            raise ValueError("ensemble is not defined on a tensor grid")
        return self.values.reshape((self.M,) + self.grid_shape)

    def with_values(self, values, generator: Optional[str] = None, **params) -> "FieldEnsemble":
        return replace(self, values=values, generator=generator or self.generator,
                       params={**self.params, **params})

    def subset(self, rows) -> "FieldEnsemble":
        return replace(self, values=self.values[rows])


@dataclass(frozen=True)
class RngStreamSpec:
    """Master seed plus the rule deriving one stream per realization.

    Realization ``i`` uses ``SeedSequence(seed, spawn_key=(i,))``, i.e. the
    realization index acts as a counter appended to the key.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def stream(self, i: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=(int(i),))))

    def rows(self, M: int, width: int, draw: Callable, threads: Optional[int] = None) -> np.ndarray:
        """Stack ``draw(rng_i)`` (each of length ``width``) for ``i < M``."""
        out = np.empty((M, width))

        def fill(lo, hi):
            for i in range(lo, hi):
                out[i] = draw(self.stream(i))

        n_threads = resolve_threads(threads)
        if n_threads <= 1 or M < 64:
            fill(0, M)
        else:
            bounds = np.linspace(0, M, n_threads + 1).astype(int)
            with ThreadPoolExecutor(n_threads) as pool:
                list(pool.map(lambda k: fill(bounds[k], bounds[k + 1]), range(n_threads)))
        return out


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def _check_grid(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float).ravel()
    if t.size < 2:
        raise ValueError("grid needs at least two points")
    if np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing")
    return t


def _check_M(M: int) -> int:
    if int(M) < 1:
        raise ValueError("need at least one realization")
    return int(M)


def line_space(grid) -> DiscreteMetricSpace:
    return DiscreteMetricSpace.from_coordinates(np.asarray(grid, dtype=float))


def simulate_brownian(grid, M: int, seed: int, threads: Optional[int] = None,
                      scale: float = 1.0) -> FieldEnsemble:
    """Wiener process on a grid starting at 0."""
    t = _check_grid(grid)
    if t[0] != 0:
        raise ValueError("Brownian grid must start at 0")
    M = _check_M(M)
    sd = np.sqrt(np.diff(t))
    inc = RngStreamSpec(seed).rows(M, t.size - 1, lambda g: g.standard_normal(t.size - 1), threads)
    values = np.zeros((M, t.size))
    np.cumsum(inc * sd, axis=1, out=values[:, 1:])
    return FieldEnsemble(scale * values, line_space(t), "brownian", seed, {"scale": scale})


def symmetric_sqrt(cov, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a PSD matrix; small negative eigenvalues are
    clipped, larger ones rejected."""
    c = np.asarray(cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("covariance must be square")
    scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    if not np.allclose(c, c.T, rtol=0, atol=tol * scale):
        raise ValueError("covariance is not symmetric")
    lam, vec = np.linalg.eigh(0.5 * (c + c.T))
    if lam.size and lam.min() < -tol * scale:
        raise ValueError(f"covariance is indefinite (min eigenvalue {lam.min():.3g})")
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.T


def simulate_gaussian_field(points, covariance, M: int, seed: int,
                            threads: Optional[int] = None) -> FieldEnsemble:
    """Centered Gaussian vectors with the given covariance."""
    space = points if isinstance(points, DiscreteMetricSpace) else DiscreteMetricSpace.from_coordinates(points)
    root = symmetric_sqrt(covariance)
    if root.shape[0] != space.n:
        raise ValueError("covariance size does not match the points")
    M = _check_M(M)
    z = RngStreamSpec(seed).rows(M, space.n, lambda g: g.standard_normal(space.n), threads)
    return FieldEnsemble(z @ root, space, "gaussian", seed)


def fbm_covariance(grid, hurst: float) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    h2 = 2 * hurst
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (np.abs(s) ** h2 + np.abs(u) ** h2 - np.abs(s - u) ** h2)


def simulate_fbm(hurst: float, grid, M: int, seed: int, threads: Optional[int] = None) -> FieldEnsemble:
    """Fractional Brownian motion via the exact covariance square root."""
    if not 0 < hurst < 1:
        raise ValueError("Hurst index must lie in (0, 1)")
    t = _check_grid(grid)
    ens = simulate_gaussian_field(line_space(t), fbm_covariance(t, hurst), M, seed, threads)
    return replace(ens, generator="fbm", params={"hurst": hurst})


def symmetric_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Standard symmetric alpha-stable variates (Chambers-Mallows-Stuck)."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(u)
    return (np.sin(alpha * u) / np.cos(u) ** (1 / alpha)
            * (np.cos(u - alpha * u) / w) ** ((1 - alpha) / alpha))


def simulate_stable(alpha: float, grid, M: int, seed: int, threads: Optional[int] = None) -> FieldEnsemble:
    """Symmetric alpha-stable Levy motion: increments scaled by ``dt**(1/alpha)``."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    t = _check_grid(grid)
    if t[0] != 0:
        raise ValueError("stable path grid must start at 0")
    M = _check_M(M)
    k = t.size - 1
    inc = RngStreamSpec(seed).rows(M, k, lambda g: symmetric_stable(alpha, k, g), threads)
    values = np.zeros((M, t.size))
    np.cumsum(inc * np.diff(t) ** (1 / alpha), axis=1, out=values[:, 1:])
    return FieldEnsemble(values, line_space(t), "stable", seed, {"alpha": alpha})


def simulate_brownian_sheet(axes, M: int, seed: int, threads: Optional[int] = None) -> FieldEnsemble:
    """Brownian sheet (covariance ``prod_i min(s_i, t_i)``) on a tensor grid
    whose axes start at 0. Supports dimension 1 to 3."""
    axes = tuple(_check_grid(a) for a in axes)
    if not 1 <= len(axes) <= 3:
        raise ValueError("Brownian sheet supports 1 to 3 dimensions")
    if any(a[0] != 0 for a in axes):
        raise ValueError("every axis must start at 0")
    M = _check_M(M)
    cell = np.ones(())
    for a in axes:
        cell = np.multiply.outer(cell, np.diff(a))
    cell_sd = np.sqrt(cell)
    k = cell.size
    z = RngStreamSpec(seed).rows(M, k, lambda g: g.standard_normal(k), threads)
    vals = z.reshape((M,) + cell.shape) * cell_sd
    for ax in range(1, len(axes) + 1):
        vals = np.cumsum(vals, axis=ax)
    vals = np.pad(vals, [(0, 0)] + [(1, 0)] * len(axes))
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh])
    space = DiscreteMetricSpace.from_coordinates(coords)
    return FieldEnsemble(vals.reshape(M, -1), space, "brownian_sheet", seed, axes=axes)


def zm_transform(y, m: float) -> np.ndarray:
    """``sign(y) * ln(1 + |y|)**m``."""
    if not m > 0:
        raise ValueError("m must be positive")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.log1p(np.abs(y)) ** m


def apply_zm(ensemble: FieldEnsemble, m: float) -> FieldEnsemble:
    """Elementwise heavy-tail compression of every realization."""
    return ensemble.with_values(zm_transform(ensemble.values, m),
                                generator=f"zm({ensemble.generator})", zm_m=m)
