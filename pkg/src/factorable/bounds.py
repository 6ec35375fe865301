"""Deterministic bounds for the modulus of continuity.

* the metric-entropy integral for Grand Lebesgue norms;
* the pair functional ``V(d)``, the ``w``-distance built from ball masses,
  and the per-realization factor bound under a power moment condition;
* the norm bound on the ``w``-constrained supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .metric import DiscreteMeasure, DiscreteMetricSpace, covering_numbers_upper
from .orlicz import (OrliczFunction, PsiFunction, c2_constant, luxemburg_norm,
                     nabla2_constant, v_star)

ENTROPY_NODES = 512


def _as_matrix(values) -> np.ndarray:
    v = np.asarray(getattr(values, "values", values), dtype=float)
    return v[None, :] if v.ndim == 1 else v


# ---------------------------------------------------------------------------
# entropy integral
# ---------------------------------------------------------------------------


def entropy_integral_bound(space: DiscreteMetricSpace, psi: PsiFunction, delta,
                           n_nodes: int = ENTROPY_NODES):
    """``9 * int_0^delta exp(v_*(ln 2 + H(eps))) d eps`` with ``H`` the log of
    the greedy covering number.

    The integrand is non-increasing in ``eps``, so a left-endpoint rule on a
    log-spaced grid gives an upper estimate of the integral. Below the
    smallest positive distance every ball is a singleton (up to zero-distance
    twins) and the integrand is constant, which is integrated exactly.
    Accepts scalar or array ``delta``; the result is non-decreasing in it.
    """
    d_arr = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(d_arr < 0):
        raise ValueError("delta must be nonnegative")
    dist = space.distinct_distances
    pos = dist[dist > 0]
    top = float(d_arr.max()) if d_arr.size else 0.0

    def integrand(counts):
        vals = np.exp(v_star(psi, math.log(2.0) + np.log(counts.astype(float))))
        vals = np.atleast_1d(vals)
        if not np.all(np.isfinite(vals)):
            raise ValueError("entropy integrand is not finite for this psi")
        return vals

    if pos.size == 0:
        f0 = integrand(np.array([1]))[0]
        out = 9.0 * f0 * d_arr
        return float(out[0]) if np.ndim(delta) == 0 else out

    d_min = float(pos[0])
    n_singletons = covering_numbers_upper(space, [0.5 * d_min])[0]
    f_small = integrand(np.array([n_singletons]))[0]
    if top > d_min:
        nodes = np.unique(np.concatenate([np.geomspace(d_min, top, n_nodes),
                                          d_arr[d_arr > d_min]]))
        counts = covering_numbers_upper(space, nodes[:-1])
        f = integrand(counts)
        cum = np.concatenate([[0.0], np.cumsum(f * np.diff(nodes))])
    else:
        nodes, cum = np.array([d_min]), np.array([0.0])
    out = np.empty(d_arr.size)
    for k, d in enumerate(d_arr):
        if d <= d_min:
            out[k] = f_small * d
        else:
            j = int(np.searchsorted(nodes, d))
            out[k] = f_small * d_min + cum[j]
    out *= 9.0
    return float(out[0]) if np.ndim(delta) == 0 else out


# ---------------------------------------------------------------------------
# pair functional and w-distance
# ---------------------------------------------------------------------------


def v_functional(values, space, measure: DiscreteMeasure, phi: OrliczFunction,
                 chunk_elems: int = 10_000_000) -> float:
    """``sum_{i,j} m_i m_j Phi(|f_i - f_j| / d_ij)`` averaged over realizations.

    ``space`` is a metric space or a distance matrix. Pairs at distance 0 with
    equal values contribute nothing; at distance 0 with different values the
    functional is undefined.
    """
    v = _as_matrix(values)
    d = np.asarray(getattr(space, "dist", space), dtype=float)
    w = np.asarray(getattr(measure, "weights", measure), dtype=float)
    n = v.shape[1]
    if d.shape != (n, n) or w.size != n:
        raise ValueError("values, distances and measure disagree in size")
    iu, ju = np.triu_indices(n, 1)
    dd = d[iu, ju]
    mm = 2.0 * w[iu] * w[ju]
    zero = dd == 0
    step = max(1, chunk_elems // max(iu.size, 1))
    total = 0.0
    for lo in range(0, v.shape[0], step):
        block = v[lo:lo + step]
        inc = np.abs(block[:, iu] - block[:, ju])
        if np.any(inc[:, zero] != 0):
            bad = np.flatnonzero(np.any(inc[:, zero] != 0, axis=0))[0]
            i, j = iu[zero][bad], ju[zero][bad]
            raise ValueError(f"points {i} and {j} are at distance 0 but values differ")
        ratio = np.divide(inc, dd, out=np.zeros_like(inc), where=~zero)
        total += float(np.sum(phi(ratio) @ mm))
    return total / v.shape[0]


def _radial_profile(dist_row, weights):
    """Sorted jump radii and ball masses of ``r -> m(B(r, x))``."""
    order = np.argsort(dist_row, kind="stable")
    r = dist_row[order]
    mass = np.cumsum(weights[order])
    keep = np.append(r[1:] != r[:-1], True)
    return r[keep], mass[keep]


def _radial_integral(r_jump, mass, R, V, phi):
    """``int_0^R Phi^{-1}(4V / m(B(r,x))^2) dr`` exactly over the mass steps."""
    if R <= 0:
        return 0.0
    total = 0.0
    lo = 0.0
    for k in range(r_jump.size):
        seg_end = r_jump[k + 1] if k + 1 < r_jump.size else math.inf
        if r_jump[k] > lo:
            # gap before the first jump: the ball has zero mass there
            return math.inf
        hi = min(seg_end, R)
        if hi > lo:
            m = mass[k]
            if m <= 0:
                return math.inf
            total += (hi - lo) * float(phi.inverse(4.0 * V / (m * m)))
            lo = hi
        if lo >= R:
            break
    return total


def kr_w_distance(space: DiscreteMetricSpace, measure: DiscreteMeasure, x1: int, x2: int,
                  V: float, phi: OrliczFunction) -> float:
    """``6 int_0^{d(x1,x2)} [Phi^{-1}(4V/m^2(B(r,x1))) + Phi^{-1}(4V/m^2(B(r,x2)))] dr``.

    Returns ``inf`` when a ball has zero mass over a radius interval of
    positive length.
    """
    if not V > 0:
        raise ValueError("V must be positive")
    R = float(space.dist[x1, x2])
    if R == 0:
        return 0.0
    w = measure.weights
    total = 0.0
    for x in (x1, x2):
        r_jump, mass = _radial_profile(space.dist[x], w)
        total += _radial_integral(r_jump, mass, R, V, phi)
    return 6.0 * total


def kr_w_matrix(space: DiscreteMetricSpace, measure: DiscreteMeasure, V: float,
                phi: OrliczFunction) -> np.ndarray:
    """``w(x1, x2)`` for every pair, sharing the radial integrals per center."""
    if not V > 0:
        raise ValueError("V must be positive")
    n = space.n
    d = space.dist
    w = measure.weights
    half = np.zeros((n, n))
    for x in range(n):
        r_jump, mass = _radial_profile(d[x], w)
        safe = mass > 0
        inv = np.full(mass.size, math.inf)
        if safe.any():
            inv[safe] = phi.inverse(4.0 * V / mass[safe] ** 2)
        seg = np.diff(r_jump)
        with np.errstate(invalid="ignore"):
            cum = np.concatenate([[0.0], np.cumsum(np.where(seg > 0, seg * inv[:-1], 0.0))])
        k = np.searchsorted(r_jump, d[x], side="right") - 1
        with np.errstate(invalid="ignore"):
            half[x] = cum[k] + np.where(d[x] > r_jump[k], (d[x] - r_jump[k]) * inv[k], 0.0)
    out = 6.0 * (half + half.T)
    np.fill_diagonal(out, 0.0)
    return out


# ---------------------------------------------------------------------------
# factor bound under a power moment condition
# ---------------------------------------------------------------------------


def calibrate_c_theta(space: DiscreteMetricSpace, measure: DiscreteMeasure,
                      theta_reg: float) -> float:
    """Smallest ``C`` with ``m(B(r,x))^2 >= r^theta / C`` for all ``x`` and
    ``0 < r <= diam``.

    Ball masses are right-continuous steps, so the supremum of
    ``r^theta / m^2`` on each step is its left limit at the next jump.
    """
    if not theta_reg > 0:
        raise ValueError("theta_reg must be positive")
    diam = space.diameter
    w = measure.weights
    best = 0.0
    for x in range(space.n):
        r_jump, mass = _radial_profile(space.dist[x], w)
        ends = np.append(r_jump[1:], diam)
        ends = np.minimum(ends, diam)
        use = ends > 0
        if np.any(mass[use] <= 0):
            return math.inf
        ratio = ends[use] ** theta_reg / mass[use] ** 2
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


@dataclass(frozen=True, eq=False)
class KRFactorResult:
    """``coef[i, j]`` is the deterministic right side divided by ``Z^{1/p}``;
    ``z_samples`` the smallest factor per realization making the bound hold."""

    coef: np.ndarray
    z_samples: np.ndarray
    p: float
    theta_reg: float
    C_theta: float
    audits: dict = field(default_factory=dict)

    @property
    def z_mean(self) -> float:
        return float(np.mean(self.z_samples))


def kr_factor_bound(values, space: DiscreteMetricSpace, measure: DiscreteMeasure, p: float,
                    theta_reg: float, C_theta: Optional[float] = None, rtol: float = 1e-9,
                    r_grid=None) -> KRFactorResult:
    """Per-pair bound ``12 Z^{1/p} 4^{1/p} C^{1/p} d^{1-theta/p} / (1-theta/p)``.

    Audits the moment condition ``|xi(x1)-xi(x2)|_p <= d(x1,x2)`` on the
    ensemble and the ball-mass condition ``m^2(B(r,x)) >= r^theta / C`` on a
    radius grid; failures are rejected with the offending pair or radius.
    """
    if not p > theta_reg > 0:
        raise ValueError("need p > theta_reg > 0")
    v = _as_matrix(values)
    d = space.dist
    n = space.n
    iu, ju = np.triu_indices(n, 1)
    dd = d[iu, ju]

    # moment condition
    inc = np.abs(v[:, iu] - v[:, ju])
    mom = np.mean(inc ** p, axis=0) ** (1.0 / p)
    viol = mom > dd * (1 + rtol)
    if viol.any():
        k = int(np.argmax(mom - dd))
        raise ValueError(f"moment condition fails at pair ({iu[k]}, {ju[k]}): "
                         f"|inc|_p={mom[k]:.6g} > d={dd[k]:.6g}")

    # ball-mass condition
    C = calibrate_c_theta(space, measure, theta_reg) if C_theta is None else float(C_theta)
    if not math.isfinite(C) or C <= 0:
        raise ValueError("ball-mass condition cannot hold for this measure")
    radii = (np.geomspace(max(dd[dd > 0].min(), 1e-300) * 1e-3, space.diameter, 200)
             if r_grid is None else np.asarray(r_grid, dtype=float))
    w = measure.weights
    worst = None
    for x in range(n):
        masses = np.array([w[d[x] <= r].sum() for r in radii])
        bad = masses ** 2 < radii ** theta_reg / C * (1 - rtol)
        if bad.any():
            worst = (x, float(radii[np.argmax(bad)]))
            break
    if worst is not None:
        raise ValueError(f"ball-mass condition fails at point {worst[0]}, radius {worst[1]:.6g}")

    q = 1.0 - theta_reg / p
    scale = 12.0 * 4.0 ** (1.0 / p) * C ** (1.0 / p) / q
    coef = np.zeros((n, n))
    coef[iu, ju] = scale * dd ** q
    coef += coef.T
    pos = dd > 0
    ratio = np.zeros_like(inc)
    ratio[:, pos] = inc[:, pos] / (scale * dd[pos] ** q)
    z = np.max(ratio, axis=1) ** p if ratio.shape[1] else np.zeros(v.shape[0])
    audits = {"moment_max_ratio": float(np.max(mom[pos] / dd[pos])) if pos.any() else 0.0,
              "C_theta": C, "radii_checked": int(radii.size)}
    return KRFactorResult(coef, z, p, theta_reg, C, audits)


@dataclass(frozen=True)
class KRModulusBound:
    delta: float
    bound: float
    C2: float
    K: float
    empirical: Optional[float] = None


def kr_modulus_bound(space: DiscreteMetricSpace, measure: DiscreteMeasure, phi: OrliczFunction,
                     V: float, delta, K: Optional[float] = None, values=None,
                     w_matrix: Optional[np.ndarray] = None):
    """``delta / C2`` and, with an ensemble, the Luxemburg norm of
    ``sup_{w(x1,x2) <= delta} |xi(x1) - xi(x2)|`` for comparison."""
    K = nabla2_constant(phi) if K is None else K
    if K is None:
        raise ValueError(f"{phi.name} has no finite nabla_2 constant; bound inapplicable")
    C2 = c2_constant(phi, K)
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(deltas < 0):
        raise ValueError("delta must be nonnegative")
    emp = [None] * deltas.size
    if values is not None:
        v = _as_matrix(values)
        W = kr_w_matrix(space, measure, V, phi) if w_matrix is None else w_matrix
        iu, ju = np.triu_indices(space.n, 1)
        ww = W[iu, ju]
        inc = np.abs(v[:, iu] - v[:, ju])
        for k, dl in enumerate(deltas):
            sel = ww <= dl
            sup = inc[:, sel].max(axis=1) if sel.any() else np.zeros(v.shape[0])
            emp[k] = float(luxemburg_norm(sup, phi)) if np.any(sup > 0) else 0.0
    out = [KRModulusBound(float(dl), float(dl / C2), C2, float(K), e) for dl, e in zip(deltas, emp)]
    return out[0] if np.ndim(delta) == 0 else out
