"""Finite metric spaces standing in for compact ones.

Covers the distance constructions used by the bounds (natural, Orlicz,
Gaussian, extended integers), closed balls, covering numbers and ball masses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .orlicz import OrliczFunction, PsiFunction, grand_lebesgue_norm, luxemburg_norm

EXHAUSTIVE_TRIPLES_MAX = 200


@dataclass(frozen=True, eq=False)
class DiscreteMetricSpace:
    """Finite (pseudo)metric space.

    Either ``dist`` (an ``n x n`` matrix) or ``coords`` (``n x d``, Euclidean
    distance) must be given; the matrix is built lazily from coordinates.
    """

    points: tuple
    coords: Optional[np.ndarray] = None
    _dist: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.coords is None and self._dist is None:
            raise ValueError("need coordinates or a distance matrix")
        n = len(self.points)
        if n == 0:
            raise ValueError("empty metric space")
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != n:
                raise ValueError("coordinate count does not match point count")
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)
        if self._dist is not None:
            d = np.array(self._dist, dtype=float)
            if d.shape != (n, n):
                raise ValueError(f"distance matrix must be {n}x{n}")
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise ValueError("distances must be finite and nonnegative")
            if not np.allclose(d, d.T, rtol=1e-12, atol=1e-14):
                raise ValueError("distance matrix is not symmetric")
            if np.any(np.diag(d) != 0):
                raise ValueError("distance matrix needs a zero diagonal")
            d = 0.5 * (d + d.T)
            d.setflags(write=False)
            object.__setattr__(self, "_dist", d)

    @classmethod
    def from_matrix(cls, dist, points=None) -> "DiscreteMetricSpace":
        dist = np.asarray(dist, dtype=float)
        pts = tuple(range(dist.shape[0])) if points is None else tuple(points)
        return cls(pts, None, dist)

    @classmethod
    def from_coordinates(cls, coords, points=None) -> "DiscreteMetricSpace":
        c = np.asarray(coords, dtype=float)
        pts = tuple(range(c.shape[0])) if points is None else tuple(points)
        return cls(pts, c)

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def dist(self) -> np.ndarray:
        if self._dist is not None:
            return self._dist
        c = self.coords
        if c.shape[1] == 1:
            d = np.abs(c[:, 0][:, None] - c[:, 0][None, :])
        else:
            diff = c[:, None, :] - c[None, :, :]
            d = np.sqrt(np.sum(diff * diff, axis=-1))
        d.setflags(write=False)
        return d

    @cached_property
    def line_coords(self) -> Optional[np.ndarray]:
        """Sorted 1-d coordinates when the space is a subset of the line with
        Euclidean distance and no explicit matrix, else ``None``."""
        if self._dist is not None or self.coords is None or self.coords.shape[1] != 1:
            return None
        x = self.coords[:, 0]
        if np.all(np.diff(x) > 0):
            return x
        return None

    @cached_property
    def diameter(self) -> float:
        if self.line_coords is not None:
            return float(self.line_coords[-1] - self.line_coords[0])
        return float(self.dist.max())

    @cached_property
    def distinct_distances(self) -> np.ndarray:
        """Sorted distinct pairwise distances, including 0."""
        if self.line_coords is not None:
            x = self.line_coords
            if self.n > 1 and np.allclose(np.diff(x), x[1] - x[0], rtol=1e-12, atol=0):
                return np.arange(self.n) * ((x[-1] - x[0]) / (self.n - 1))
        iu = np.triu_indices(self.n, 1)
        return np.unique(np.concatenate([[0.0], self.dist[iu]]))

    @cached_property
    def is_pseudometric(self) -> bool:
        """True when two distinct points sit at distance 0."""
        if self.n < 2:
            return False
        iu = np.triu_indices(self.n, 1)
        return bool(np.any(self.dist[iu] == 0))

    def index(self, label) -> int:
        return self.points.index(label)

    def ball(self, x: int, r: float) -> np.ndarray:
        """Indices of the closed ball of radius ``r`` around point index ``x``."""
        return np.flatnonzero(self.dist[x] <= r)

    def check_axioms(self, rtol: float = 1e-12, n_random: int = 100_000, seed: int = 0) -> dict:
        """Audit symmetry, zero diagonal and the triangle inequality.

        Exhaustive over all triples for ``n <= 200``, random triples above.
        Returns the worst triangle violation found.
        """
        d = self.dist
        sym = bool(np.allclose(d, d.T, rtol=rtol, atol=0))
        diag = bool(np.all(np.diag(d) == 0))
        scale = max(float(d.max()), 1e-300)
        worst = 0.0
        if self.n <= EXHAUSTIVE_TRIPLES_MAX:
            for k in range(self.n):
                excess = d - (d[:, k][:, None] + d[k, :][None, :])
                worst = max(worst, float(excess.max()))
        else:
            rng = np.random.default_rng(seed)
            i, j, k = rng.integers(0, self.n, size=(3, n_random))
            worst = max(0.0, float(np.max(d[i, j] - d[i, k] - d[k, j])))
        return {
            "symmetric": sym,
            "zero_diagonal": diag,
            "triangle_max_excess": worst,
            "triangle": worst <= rtol * scale,
            "pseudometric": self.is_pseudometric,
        }


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights on the points of a finite space."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))


def extended_integer_space(n_max: int) -> DiscreteMetricSpace:
    """Points ``1..n_max`` and ``inf`` with ``d(m, n) = |1/n - 1/m|`` and
    ``d(n, inf) = 1/n``."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    labels = tuple(range(1, n_max + 1)) + (math.inf,)
    inv = np.array([1.0 / k for k in range(1, n_max + 1)] + [0.0])
    d = np.abs(inv[:, None] - inv[None, :])
    return DiscreteMetricSpace(labels, None, d)


def _values(ensemble) -> np.ndarray:
    v = np.asarray(getattr(ensemble, "values", ensemble), dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("ensemble values must be a non-empty (M, n) matrix")
    return v


def _pairwise(values, column_norm, chunk_elems: int = 20_000_000) -> np.ndarray:
    m, n = values.shape
    iu, ju = np.triu_indices(n, 1)
    out = np.zeros((n, n))
    step = max(1, chunk_elems // m)
    for s in range(0, iu.size, step):
        i, j = iu[s:s + step], ju[s:s + step]
        vals = column_norm(values[:, i] - values[:, j])
        out[i, j] = vals
        out[j, i] = vals
    return out


def _space_from(ensemble, dist) -> DiscreteMetricSpace:
    base = getattr(ensemble, "space", None)
    points = base.points if base is not None else tuple(range(dist.shape[0]))
    return DiscreteMetricSpace(points, None, dist)


def natural_distance(ensemble, psi: PsiFunction, p_grid=None) -> DiscreteMetricSpace:
    """``d(x, y) = ||xi(x) - xi(y)||`` in the Grand Lebesgue norm of ``psi``."""
    values = _values(ensemble)
    if psi.zero:
        raise ValueError("psi vanishes identically (degenerate field)")
    if psi.is_degenerate and psi.param == 2.0:
        # |a - b|_2^2 = E a^2 + E b^2 - 2 E ab, via one Gram matrix
        gram = values.T @ values / values.shape[0]
        sq = np.diag(gram)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * gram, 0.0)
        dist = np.sqrt(d2)
        np.fill_diagonal(dist, 0.0)
        dist = 0.5 * (dist + dist.T)
    else:
        dist = _pairwise(values, lambda inc: grand_lebesgue_norm(inc, psi, p_grid, axis=0))
    return _space_from(ensemble, dist)


def orlicz_distance(ensemble, phi: OrliczFunction) -> DiscreteMetricSpace:
    """``d(x, y) = ||xi(x) - xi(y)||`` in the Luxemburg norm of ``phi``."""
    values = _values(ensemble)
    dist = _pairwise(values, lambda inc: luxemburg_norm(inc, phi, axis=0))
    return _space_from(ensemble, dist)


def gaussian_distance(ensemble) -> DiscreteMetricSpace:
    """``d(x, y) = sqrt(Var(xi(x) - xi(y)))`` from the empirical covariance."""
    values = _values(ensemble)
    if values.shape[0] < 2:
        raise ValueError("need at least 2 realizations for a variance")
    c = np.cov(values, rowvar=False, ddof=1)
    c = np.atleast_2d(c)
    v = np.diag(c)
    dist = np.sqrt(np.maximum(v[:, None] + v[None, :] - 2 * c, 0.0))
    np.fill_diagonal(dist, 0.0)
    return _space_from(ensemble, 0.5 * (dist + dist.T))


# ---------------------------------------------------------------------------
# covering numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverResult:
    lower: int
    upper: int
    exact: Optional[int]
    entropy_upper: float
    centers: tuple


def greedy_cover(adj: np.ndarray) -> list:
    """Greedy set cover where column ``j`` of the boolean matrix covers rows
    ``adj[:, j]``. Returns chosen column indices."""
    n = adj.shape[0]
    uncovered = np.ones(n, dtype=bool)
    counts = adj.sum(axis=0).astype(np.int64)
    chosen = []
    while uncovered.any():
        j = int(np.argmax(counts))
        newly = adj[:, j] & uncovered
        chosen.append(j)
        uncovered &= ~newly
        counts -= adj[newly].sum(axis=0)
    return chosen


def greedy_packing(dist: np.ndarray, sep: float) -> list:
    """Greedy set of points pairwise farther apart than ``sep``."""
    chosen = []
    blocked = np.zeros(dist.shape[0], dtype=bool)
    for i in range(dist.shape[0]):
        if not blocked[i]:
            chosen.append(i)
            blocked |= dist[i] <= sep
    return chosen


def exact_cover_size(adj: np.ndarray) -> int:
    """Minimal cover by exhaustive search (small instances only)."""
    n = adj.shape[0]
    full = (1 << n) - 1
    masks = [sum(1 << int(i) for i in np.flatnonzero(adj[:, j])) for j in range(adj.shape[1])]
    for k in range(1, n + 1):
        for combo in itertools.combinations(masks, k):
            acc = 0
            for mk in combo:
                acc |= mk
            if acc == full:
                return k
    return n


def covering_number(space: DiscreteMetricSpace, subset, eps: float,
                    exact_max: int = 12) -> CoverResult:
    """Bracket the number of closed ``eps``-balls (centered in the subset)
    needed to cover the subset (``None`` means the whole space).

    ``upper`` comes from greedy set cover, ``lower`` from a greedy packing with
    separation ``2 eps``; the exact value is computed for at most
    ``exact_max`` points.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    idx = np.arange(space.n) if subset is None else np.asarray(subset, dtype=int)
    d = space.dist[np.ix_(idx, idx)]
    adj = d <= eps
    centers = greedy_cover(adj)
    upper = len(centers)
    lower = len(greedy_packing(d, 2 * eps))
    exact = exact_cover_size(adj) if idx.size <= exact_max else None
    return CoverResult(lower, upper, exact, math.log(upper), tuple(int(idx[c]) for c in centers))


def covering_numbers_upper(space: DiscreteMetricSpace, eps_grid) -> np.ndarray:
    """Greedy cover sizes over a grid of radii (upper bounds only)."""
    d = space.dist
    out = np.empty(len(eps_grid), dtype=np.int64)
    for k, eps in enumerate(eps_grid):
        if eps >= space.diameter:
            out[k] = 1
        else:
            out[k] = len(greedy_cover(d <= eps))
    return out


def ball_mass(space: DiscreteMetricSpace, measure: DiscreteMeasure, x: int, r: float) -> float:
    """Measure of the closed ball ``{y : d(x, y) <= r}``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return float(measure.weights[space.dist[x] <= r].sum())
