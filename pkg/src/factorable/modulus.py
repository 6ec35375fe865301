"""Empirical moduli of continuity.

Ordinary moduli ``sup_{d(x,y) <= delta} |f(x) - f(y)|`` per realization and
in norm, plus the rectangle difference operator and rectangle modulus on
tensor grids.
"""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from .knots import EmpiricalModulus
from .metric import DiscreteMetricSpace

MAX_RECT_DIM = 3


class ModulusEngine:
    """Evaluates ``Delta(xi(omega), delta)`` for every realization at once.

    On a line with uniform spacing the pairs within lag ``K`` are handled with
    sparse-table range max/min queries; on a general finite space the pairs
    are sorted by distance once and swept cumulatively.
    """

    def __init__(self, values, space: DiscreteMetricSpace, chunk_elems: int = 8_000_000):
        v = np.asarray(getattr(values, "values", values), dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.shape[1] != space.n:
            raise ValueError(f"realizations have {v.shape[1]} points, space has {space.n}")
        self.values = v
        self.space = space
        self.chunk_elems = chunk_elems
        self._uniform_step = None
        x = space.line_coords
        if x is not None and space.n > 1:
            h = (x[-1] - x[0]) / (space.n - 1)
            if np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
                self._uniform_step = h
        self._pairs = None

    @property
    def M(self) -> int:
        return self.values.shape[0]

    def at(self, deltas) -> np.ndarray:
        """``(M, len(deltas))`` matrix of path moduli."""
        d = np.atleast_1d(np.asarray(deltas, dtype=float))
        if d.size == 0:
            raise ValueError("empty delta grid")
        if np.any(d < 0):
            raise ValueError("delta must be nonnegative")
        if self._uniform_step is not None:
            return self._uniform_line(d)
        return self._sweep(d)

    # uniform line -------------------------------------------------------
    def lags(self, deltas) -> np.ndarray:
        h = self._uniform_step
        return np.minimum(np.floor(np.asarray(deltas) / h * (1 + 1e-12)).astype(int), self.space.n - 1)

    def _uniform_line(self, deltas):
        n = self.space.n
        lags = self.lags(deltas)
        out = np.zeros((self.M, deltas.size))
        top = int(lags.max())
        if top == 0:
            return out
        levels = int(np.floor(np.log2(top + 1))) + 1
        step = max(1, self.chunk_elems // (n * levels))
        for lo in range(0, self.M, step):
            block = self.values[lo:lo + step]
            st_max, st_min = [block], [block]
            for k in range(1, levels):
                w = 1 << (k - 1)
                st_max.append(np.maximum(st_max[-1][:, :-w], st_max[-1][:, w:]))
                st_min.append(np.minimum(st_min[-1][:, :-w], st_min[-1][:, w:]))
            for j, K in enumerate(lags):
                if K == 0:
                    continue
                length = K + 1
                k = int(np.floor(np.log2(length)))
                off = length - (1 << k)
                count = n - length + 1
                mx = np.maximum(st_max[k][:, :count], st_max[k][:, off:off + count])
                mn = np.minimum(st_min[k][:, :count], st_min[k][:, off:off + count])
                out[lo:lo + step, j] = np.max(mx - mn, axis=1)
        return out

    # general finite space -------------------------------------------------
    def _pair_order(self):
        if self._pairs is None:
            iu, ju = np.triu_indices(self.space.n, 1)
            dd = self.space.dist[iu, ju]
            order = np.argsort(dd, kind="stable")
            self._pairs = (iu[order], ju[order], dd[order])
        return self._pairs

    def _sweep(self, deltas):
        iu, ju, dd = self._pair_order()
        out = np.zeros((self.M, deltas.size))
        if iu.size == 0:
            return out
        order = np.argsort(deltas, kind="stable")
        counts = np.searchsorted(dd, deltas[order], side="right")
        used = counts[-1]
        if used == 0:
            return out
        cuts = np.unique(np.concatenate([[0], counts[(counts > 0) & (counts < used)]]))
        step = max(1, self.chunk_elems // max(used, 1))
        for lo in range(0, self.M, step):
            block = self.values[lo:lo + step]
            diff = np.abs(block[:, iu[:used]] - block[:, ju[:used]])
            seg = np.maximum.accumulate(np.maximum.reduceat(diff, cuts, axis=1), axis=1)
            # segment s covers pairs [cuts[s], cuts[s+1]); count c maps to the
            # segment holding pair c - 1
            seg_idx = np.searchsorted(cuts, counts - 1, side="right") - 1
            vals = np.where(counts > 0, seg[:, np.maximum(seg_idx, 0)], 0.0)
            out[lo:lo + step, order] = vals
        return out


def _delta_grid(delta_grid) -> np.ndarray:
    d = np.unique(np.asarray(delta_grid, dtype=float))
    if d.size == 0:
        raise ValueError("empty delta grid")
    return d


def default_delta_grid(space: DiscreteMetricSpace, n_small: int = 32, n_log: int = 96,
                       max_all: int = 257) -> np.ndarray:
    """All distinct distances for small spaces; otherwise the smallest ones plus
    log-spaced values snapped down to attained distances."""
    dist = space.distinct_distances
    if dist.size <= max_all:
        return dist
    pos = dist[dist > 0]
    logs = np.geomspace(pos[0], pos[-1], n_log)
    snapped = dist[np.searchsorted(dist, logs * (1 + 1e-12), side="right") - 1]
    return np.unique(np.concatenate([dist[: n_small + 1], snapped, [pos[-1]]]))


def path_modulus(values, space: DiscreteMetricSpace, delta_grid) -> EmpiricalModulus:
    """Modulus of continuity of one realization on a delta grid."""
    v = np.asarray(values, dtype=float).ravel()
    d = _delta_grid(delta_grid)
    vals = ModulusEngine(v, space).at(d)[0]
    return EmpiricalModulus(d, vals)


def theta_function(ensemble, space: Optional[DiscreteMetricSpace], delta_grid, norm,
                   engine: Optional[ModulusEngine] = None) -> EmpiricalModulus:
    """``delta -> ||Delta(xi, delta)||`` with the norm taken across realizations.

    Tiny decreases from bisection jitter are removed by a running max.
    """
    space = space if space is not None else ensemble.space
    values = np.asarray(getattr(ensemble, "values", ensemble), dtype=float)
    if values.shape[0] < 2:
        raise ValueError("need at least 2 realizations")
    d = _delta_grid(delta_grid)
    engine = engine or ModulusEngine(values, space)
    moduli = engine.at(d)
    theta = np.maximum.accumulate(np.asarray(norm(moduli, axis=0), dtype=float))
    return EmpiricalModulus(d, theta, meta={"norm": getattr(norm, "name", str(norm))})


# ---------------------------------------------------------------------------
# rectangle operators
# ---------------------------------------------------------------------------


def _corners(d):
    for s in itertools.product((0, 1), repeat=d):
        yield s, (-1) ** (d - sum(s))


def rectangle_difference(f, x, y):
    """Alternating sum of ``f`` over the ``2**d`` corners of the box ``[x, y]``.

    ``f`` is either a callable on coordinates or an array on a grid; in the
    latter case ``x`` and ``y`` are index tuples addressing its last ``d``
    axes (leading axes, e.g. realizations, are carried along).
    """
    x, y = tuple(x), tuple(y)
    d = len(x)
    if len(y) != d:
        raise ValueError("corner dimensions differ")
    if not 1 <= d <= MAX_RECT_DIM:
        raise ValueError(f"rectangle operators support d <= {MAX_RECT_DIM}")
    if callable(f):
        return sum(sign * f(*[y[i] if s[i] else x[i] for i in range(d)]) for s, sign in _corners(d))
    arr = np.asarray(f, dtype=float)
    if arr.ndim < d:
        raise ValueError(f"grid has {arr.ndim} axes, corners have {d}")
    total = 0.0
    for s, sign in _corners(d):
        idx = tuple(y[i] if s[i] else x[i] for i in range(d))
        total = total + sign * arr[(Ellipsis,) + idx]
    return total


def _lag_difference(arr, lags):
    d = len(lags)
    for i, k in enumerate(lags):
        ax = arr.ndim - d + i
        n = arr.shape[ax]
        hi = [slice(None)] * arr.ndim
        lo = [slice(None)] * arr.ndim
        hi[ax] = slice(k, n)
        lo[ax] = slice(0, n - k)
        arr = arr[tuple(hi)] - arr[tuple(lo)]
    return arr


class RectangleEngine:
    """Rectangle moduli of grid fields; ``values`` has shape ``(M, n1, ..., nd)``."""

    def __init__(self, values, axes):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        d = len(self.axes)
        if not 1 <= d <= MAX_RECT_DIM:
            raise ValueError(f"rectangle operators support d <= {MAX_RECT_DIM}")
        v = np.asarray(values, dtype=float)
        if v.ndim == d:
            v = v[None]
        if v.shape[1:] != tuple(a.size for a in self.axes):
            raise ValueError("grid values do not match the axes")
        self.values = v
        self._cache = {}

    @property
    def d(self) -> int:
        return len(self.axes)

    def _lag_max(self, lags, masks):
        key = (lags, tuple(None if m is None else m.tobytes() for m in masks))
        if key not in self._cache:
            diff = np.abs(_lag_difference(self.values, lags))
            if any(m is not None for m in masks):
                full = np.ones(diff.shape[1:], dtype=bool)
                for i, m in enumerate(masks):
                    if m is not None:
                        shape = [1] * self.d
                        shape[i] = m.size
                        full = full & m.reshape(shape)
                diff = np.where(full, diff, 0.0)
            self._cache[key] = diff.reshape(diff.shape[0], -1).max(axis=1)
        return self._cache[key]

    def at(self, delta_vec) -> np.ndarray:
        """Per-realization ``Omega(xi, delta_vec)``."""
        dv = np.asarray(delta_vec, dtype=float).ravel()
        if dv.size != self.d:
            raise ValueError(f"delta vector needs {self.d} components")
        if np.any(dv < 0):
            raise ValueError("delta components must be nonnegative")
        per_axis = []
        for a, delta in zip(self.axes, dv):
            fudge = 1e-9 * float(np.min(np.diff(a))) if a.size > 1 else 0.0
            options = []
            for k in range(1, a.size):
                gaps = a[k:] - a[:-k]
                ok = gaps <= delta + fudge
                if not ok.any():
                    break
                options.append((k, None if ok.all() else ok))
            per_axis.append(options)
        out = np.zeros(self.values.shape[0])
        if any(len(o) == 0 for o in per_axis):
            return out
        for combo in itertools.product(*per_axis):
            lags = tuple(c[0] for c in combo)
            masks = tuple(c[1] for c in combo)
            out = np.maximum(out, self._lag_max(lags, masks))
        return out


def rectangle_modulus(values, axes, delta_vec):
    """``sup |box difference|`` over boxes with side ``i`` at most ``delta_vec[i]``.

    Only componentwise-ordered corner pairs are scanned; swapping corners along
    one axis flips the sign, so the sup of absolute values is unchanged.
    Returns a float for a single realization, else one value per realization.
    """
    v = np.asarray(getattr(values, "values", values), dtype=float)
    if hasattr(values, "grid_values"):
        v = values.grid_values()
        axes = values.axes if axes is None else axes
    single = v.ndim == len(axes)
    out = RectangleEngine(v, axes).at(delta_vec)
    return float(out[0]) if single else out


def gamma_function(ensemble, delta_vec_grid, phi_norm, axes=None) -> np.ndarray:
    """Norm across realizations of the rectangle modulus, one value per delta vector."""
    axes = ensemble.axes if axes is None else axes
    v = ensemble.grid_values() if hasattr(ensemble, "grid_values") else np.asarray(ensemble)
    engine = RectangleEngine(v, axes)
    grid = np.atleast_2d(np.asarray(delta_vec_grid, dtype=float))
    moduli = np.column_stack([engine.at(dv) for dv in grid])
    return np.asarray(phi_norm(moduli, axis=0), dtype=float)
