"""Factorable decomposition ``Delta(xi, delta) <= tau(omega) * g(delta)``.

Pipeline: estimate ``theta(delta) = ||Delta(xi, delta)||`` on a delta grid,
solve ``theta(delta_n) = a_n`` for maximal knots, set
``tau = sum_n b_n Delta(xi, delta_n) / a_n`` and interpolate the scaling
function through ``(delta_n, a_n / b_n)``. The result is normalized so that
the random factor has unit norm.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import isotonic_regression

from .fields import FieldEnsemble, apply_zm
from .knots import EmpiricalModulus, KnotFunction
from .metric import DiscreteMetricSpace
from .modulus import ModulusEngine, RectangleEngine, default_delta_grid, theta_function
from .orlicz import LuxemburgNorm, OrliczFunction, is_weaker, luxemburg_norm

log = logging.getLogger(__name__)

PATHWISE_RTOL = 1e-12
MIN_KNOTS = 3


class DegenerateFieldError(ValueError):
    """The field has no variation the construction can scale against."""


@dataclass(frozen=True, eq=False)
class SequencePlan:
    """Sequences ``a_n`` (strictly decreasing to 0) and ``b_n`` (positive, sum 1)."""

    a: np.ndarray
    b: np.ndarray
    nu: Optional[float] = None
    theta_param: Optional[float] = None

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if a.size != b.size or a.size == 0:
            raise ValueError("a and b must be non-empty and of equal length")
        if np.any(a <= 0) or np.any(np.diff(a) >= 0):
            raise ValueError("a must be positive and strictly decreasing")
        if np.any(b <= 0):
            raise ValueError("b must be positive")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError(f"b sums to {b.sum()!r}; renormalize first")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def explicit(cls, a, b, **kw) -> "SequencePlan":
        b = np.asarray(b, dtype=float)
        return cls(a, b / b.sum(), **kw)

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def ratio(self) -> np.ndarray:
        return self.a / self.b

    def audit(self) -> dict:
        """Checks that are reported rather than enforced."""
        r = self.ratio
        return {
            "ratio_decay": bool(r[-1] < 1e-2 * r[0]),
            "ratio_monotone": bool(np.all(np.diff(r) < 0)),
            "b_decreasing": bool(np.all(np.diff(self.b) < 0)),
        }

    def restricted(self, mask) -> "SequencePlan":
        mask = np.asarray(mask, dtype=bool)
        return SequencePlan.explicit(self.a[mask], self.b[mask], nu=self.nu,
                                     theta_param=self.theta_param)

    def to_config(self) -> dict:
        if self.nu is not None and self.theta_param is not None:
            return {"nu": self.nu, "theta_param": self.theta_param, "N": self.N}
        return {"a": self.a.tolist(), "b": self.b.tolist()}


def default_sequences(nu: float = 1.0, theta_param: float = 1.0, N: int = 40) -> SequencePlan:
    """``b_n ~ nu / (n ln^{1+nu}(n+1))`` renormalized over ``n <= N`` and
    ``a_n = n^{-1-theta_param}``."""
    if not nu > 0 or not theta_param > 0:
        raise ValueError("nu and theta_param must be positive")
    if N < 3:
        raise ValueError("need N >= 3")
    n = np.arange(1, N + 1, dtype=float)
    b = nu / (n * np.log(n + 1) ** (1 + nu))
    a = n ** (-1 - theta_param)
    return SequencePlan.explicit(a, b, nu=nu, theta_param=theta_param)


@dataclass(frozen=True, eq=False)
class KnotSolution:
    deltas: np.ndarray
    clamped: np.ndarray
    unsolvable: np.ndarray
    theta_iso: EmpiricalModulus

    @property
    def usable(self) -> np.ndarray:
        return ~(self.clamped | self.unsolvable)


def solve_knots(theta: EmpiricalModulus, plan: SequencePlan) -> KnotSolution:
    """Maximal solutions of ``theta(delta_n) = a_n`` on the monotone
    (isotonic) piecewise-linear version of ``theta``.

    Levels above ``theta(diam)`` are clamped to the largest delta and flagged.
    """
    x, y = theta.x, theta.y
    if np.all(y == 0):
        raise DegenerateFieldError("theta vanishes identically; the field does not vary")
    iso = isotonic_regression(y, increasing=True).x
    iso = np.maximum.accumulate(iso)
    deltas = np.empty(plan.N)
    clamped = np.zeros(plan.N, dtype=bool)
    unsolvable = np.zeros(plan.N, dtype=bool)
    for i, a_n in enumerate(plan.a):
        j = int(np.searchsorted(iso, a_n, side="right")) - 1
        if j < 0:
            deltas[i] = x[0]
            unsolvable[i] = True
        elif j == x.size - 1:
            deltas[i] = x[-1]
            clamped[i] = iso[-1] < a_n
        else:
            t = (a_n - iso[j]) / (iso[j + 1] - iso[j])
            deltas[i] = x[j] + t * (x[j + 1] - x[j])
    return KnotSolution(deltas, clamped, unsolvable, EmpiricalModulus(x, iso))


@dataclass(frozen=True, eq=False)
class FactorizationResult:
    """Knots, scaling functions and random factors of one construction.

    ``deltas[k]`` is the knot of sequence index ``n_index[k]`` (1-based);
    ``moduli[:, k]`` holds ``Delta(xi(omega), deltas[k])``. ``g1`` is the raw
    scaling function and ``g = tau_norm * g1``; ``tau0 = tau / tau_norm``.
    """

    deltas: np.ndarray
    n_index: np.ndarray
    a: np.ndarray
    b: np.ndarray
    moduli: np.ndarray
    tau: np.ndarray
    tau_norm: float
    g1: KnotFunction
    theta: EmpiricalModulus
    plan: SequencePlan
    norm_name: str
    clamped_index: np.ndarray
    monotone_repaired: bool
    kind: str = "ordinary"
    meta: dict = field(default_factory=dict)

    @property
    def tau0(self) -> np.ndarray:
        return self.tau / self.tau_norm

    @property
    def g(self) -> KnotFunction:
        return KnotFunction(self.g1.x, self.tau_norm * self.g1.y)

    @property
    def knot_values(self) -> np.ndarray:
        """``a_n / b_n`` at each usable knot (before monotone repair)."""
        return self.a / self.b

    def pathwise_ok(self, rtol: float = PATHWISE_RTOL) -> np.ndarray:
        """Per realization: ``Delta(delta_n) <= tau * a_n / b_n`` at every knot."""
        return pathwise_check(self.moduli, self.tau, self.a, self.b, rtol)

    def tau_for(self, moduli_at_knots) -> np.ndarray:
        """Recompute the factor for fresh moduli at the same knots."""
        return np.asarray(moduli_at_knots, dtype=float) @ (self.b / self.a)

    def envelope(self, delta) -> np.ndarray:
        """Normalized scaling value at the nearest knot at or above ``delta``;
        ``tau0 * envelope(delta)`` dominates ``Delta(xi, delta)`` below the top
        knot. Beyond the top knot ``inf`` is returned."""
        d = np.atleast_1d(np.asarray(delta, dtype=float))
        knots = self.g1.x
        vals = self.tau_norm * self.g1.y
        idx = np.searchsorted(knots, d * (1 - 1e-15), side="left")
        out = np.where(idx < knots.size, vals[np.minimum(idx, knots.size - 1)], np.inf)
        out = np.where(d <= 0, 0.0, out)
        return out if np.ndim(delta) else float(out[0])

    def summary(self) -> dict:
        ok = self.pathwise_ok()
        return {
            "kind": self.kind,
            "norm": self.norm_name,
            "usable_knots": int(self.deltas.size),
            "clamped": self.clamped_index.tolist(),
            "tau_norm": float(self.tau_norm),
            "tau0_norm": float(self.meta.get("tau0_norm", float("nan"))),
            "pathwise_fraction": float(ok.mean()),
            "monotone_repaired": bool(self.monotone_repaired),
            "plan_audit": self.plan.audit(),
        }


def pathwise_check(moduli, tau, a, b, rtol: float = PATHWISE_RTOL) -> np.ndarray:
    bound = np.asarray(tau)[:, None] * (np.asarray(a) / np.asarray(b))[None, :]
    return np.all(np.asarray(moduli) <= bound * (1 + rtol), axis=1)


def _refine_down(delta, a_n, moduli_fn, norm, candidates, floor_delta):
    """Largest candidate in ``[floor_delta, delta]`` whose norm stays <= a_n.

    The norm of the modulus is monotone in delta, so a binary search over the
    sorted candidate deltas suffices.
    """
    lo = int(np.searchsorted(candidates, floor_delta * (1 - 1e-12), side="left"))
    hi = int(np.searchsorted(candidates, delta * (1 + 1e-12), side="right")) - 1
    lo = min(max(lo, 0), hi)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if norm(moduli_fn(candidates[mid:mid + 1])[:, 0]) <= a_n:
            lo = mid
        else:
            hi = mid - 1
    return float(candidates[lo])


def factorize_modulus(moduli_fn: Callable, theta: EmpiricalModulus, plan: SequencePlan, norm,
                      candidates=None, kind: str = "ordinary",
                      min_knots: int = MIN_KNOTS) -> FactorizationResult:
    """Run the construction for any monotone family of moduli.

    ``moduli_fn(deltas)`` returns the ``(M, len(deltas))`` per-realization
    moduli; ``theta`` their norm on a grid. When ``candidates`` (the deltas at
    which the empirical modulus can jump) are given, knots whose exact norm
    overshoots ``a_n`` are moved down to the largest admissible candidate.
    """
    sol = solve_knots(theta, plan)
    usable = sol.usable
    n_usable = int(usable.sum())
    if n_usable < min_knots:
        raise ValueError(
            f"only {n_usable} usable knots (need {min_knots}); theta(diam)={theta.y[-1]:.6g}, "
            f"a_1={plan.a[0]:.6g}, clamped={np.flatnonzero(sol.clamped) + 1}"
        )
    active = plan.restricted(usable)
    deltas = sol.deltas[usable].copy()
    D = moduli_fn(deltas)
    if candidates is not None:
        cand = np.asarray(candidates, dtype=float)
        exact = np.asarray(norm(D, axis=0), dtype=float)
        for k in np.flatnonzero(exact > active.a * (1 + 1e-12)):
            j = int(np.searchsorted(sol.theta_iso.y, active.a[k], side="right")) - 1
            floor_delta = sol.theta_iso.x[max(j, 0)]
            deltas[k] = _refine_down(deltas[k], active.a[k], moduli_fn, norm, cand, floor_delta)
            D[:, k] = moduli_fn(deltas[k:k + 1])[:, 0]
    tau = D @ (active.b / active.a)
    tau_norm = float(norm(tau))
    if not tau_norm > 0:
        jump = theta.y[theta.x > 0]
        if jump.size and jump[0] > 0:
            raise DegenerateFieldError(
                f"the random factor vanishes: every usable knot lies below the first positive "
                f"delta {theta.x[theta.x > 0][0]:.6g}, where theta already equals {jump[0]:.6g} "
                f"> a_n for all usable n (the modulus does not vanish as delta -> 0+)")
        raise DegenerateFieldError("the random factor vanishes; the field does not vary")

    # g1 through (delta_n, a_n/b_n), nondecreasing from the small-delta side
    order = np.argsort(deltas, kind="stable")
    xs, ys = deltas[order], active.ratio[order]
    keep = xs > 0
    xs, ys = xs[keep], ys[keep]
    repaired = bool(np.any(np.diff(ys) < 0))
    ys = np.maximum.accumulate(ys)
    ux, inv = np.unique(xs, return_inverse=True)
    uy = np.zeros(ux.size)
    np.maximum.at(uy, inv, ys)
    repaired = repaired or ux.size < xs.size
    g1 = KnotFunction(np.concatenate([[0.0], ux]), np.concatenate([[0.0], uy]))

    result = FactorizationResult(
        deltas=deltas,
        n_index=np.flatnonzero(usable) + 1,
        a=active.a,
        b=active.b,
        moduli=D,
        tau=tau,
        tau_norm=tau_norm,
        g1=g1,
        theta=theta,
        plan=plan,
        norm_name=getattr(norm, "name", str(norm)),
        clamped_index=np.flatnonzero(sol.clamped | sol.unsolvable) + 1,
        monotone_repaired=repaired,
        kind=kind,
    )
    result.meta["tau0_norm"] = float(norm(result.tau0))
    if repaired:
        log.info("a_n/b_n not monotone along the knots; running max applied")
    return result


def build_factorization(ensemble: FieldEnsemble, space: Optional[DiscreteMetricSpace] = None,
                        plan: Optional[SequencePlan] = None, norm=None, delta_grid=None,
                        refine: bool = True, engine: Optional[ModulusEngine] = None,
                        theta: Optional[EmpiricalModulus] = None) -> FactorizationResult:
    """Factorize the ordinary modulus of continuity of an ensemble."""
    space = space if space is not None else ensemble.space
    if space is None:
        raise ValueError("ensemble has no metric space attached")
    plan = plan or default_sequences()
    norm = norm or LuxemburgNorm(OrliczFunction.power(2))
    values = np.asarray(getattr(ensemble, "values", ensemble), dtype=float)
    if not np.any(values != values[:, :1]):
        raise DegenerateFieldError("every realization is constant")
    grid = default_delta_grid(space) if delta_grid is None else np.asarray(delta_grid, float)
    if grid.min() > 0:
        grid = np.concatenate([[0.0], grid])
    engine = engine or ModulusEngine(values, space)
    theta = theta or theta_function(values, space, grid, norm, engine=engine)
    candidates = space.distinct_distances if refine else None
    return factorize_modulus(engine.at, theta, plan, norm, candidates)


def weaker_norm_factorization(ensemble: FieldEnsemble, space, phi_strong: OrliczFunction,
                              psi_weak: OrliczFunction, plan=None, delta_grid=None,
                              **checks) -> FactorizationResult:
    """Factorization with every norm taken in a weaker Orlicz function."""
    report = is_weaker(psi_weak, phi_strong, **checks)
    if not report.holds:
        raise ValueError(f"{psi_weak.name} is not weaker than {phi_strong.name} on the probe grid")
    values = np.asarray(ensemble.values)
    sup_norm = luxemburg_norm(np.max(np.abs(values), axis=1), phi_strong)
    if not sup_norm > 0:
        raise DegenerateFieldError("the field vanishes identically")
    result = build_factorization(ensemble, space, plan, LuxemburgNorm(psi_weak), delta_grid)
    result.meta.update({"sup_norm_strong": sup_norm, "strong": phi_strong.name,
                        "weak": psi_weak.name})
    return result


def heavy_tail_factorization(ensemble: FieldEnsemble, m: float, plan=None, norm=None,
                             delta_grid=None) -> FactorizationResult:
    """Factorize ``Z_m(eta)`` (modified, weak factorable modulus of ``eta``)."""
    transformed = apply_zm(ensemble, m)
    result = build_factorization(transformed, None, plan, norm, delta_grid)
    object.__setattr__(result, "kind", "modified (weak) factorable modulus")
    result.meta["zm_m"] = m
    return result


def rectangle_path_grid(axes, direction) -> np.ndarray:
    """Path parameters ``s`` at which ``s * direction`` crosses a grid gap."""
    u = np.asarray(direction, dtype=float)
    if np.any(u <= 0):
        raise ValueError("path direction must be componentwise positive")
    s_max = min((a[-1] - a[0]) / ui for a, ui in zip(axes, u))
    vals = [np.array([0.0])]
    for a, ui in zip(axes, u):
        gaps = np.unique(np.concatenate([a[k:] - a[:-k] for k in range(1, a.size)]))
        vals.append(gaps / ui)
    s = np.unique(np.concatenate(vals))
    return s[s <= s_max * (1 + 1e-12)]


def rectangle_factorization(ensemble: FieldEnsemble, plan=None, norm=None, direction=None,
                            s_grid=None) -> FactorizationResult:
    """Factorize the rectangle modulus along the monotone path ``s * direction``."""
    if ensemble.axes is None:
        raise ValueError("rectangle factorization needs a field on a tensor grid")
    axes = ensemble.axes
    direction = np.ones(len(axes)) if direction is None else np.asarray(direction, float)
    plan = plan or default_sequences()
    norm = norm or LuxemburgNorm(OrliczFunction.power(2))
    engine = RectangleEngine(ensemble.grid_values(), axes)
    s = rectangle_path_grid(axes, direction) if s_grid is None else np.unique(s_grid)

    def moduli_fn(svals):
        return np.column_stack([engine.at(si * direction) for si in np.atleast_1d(svals)])

    omega = moduli_fn(s)
    gamma = np.maximum.accumulate(np.asarray(norm(omega, axis=0), dtype=float))
    if np.all(gamma == 0):
        raise DegenerateFieldError("rectangle modulus vanishes identically")
    theta = EmpiricalModulus(s, gamma, meta={"direction": direction.tolist()})
    result = factorize_modulus(moduli_fn, theta, plan, norm, candidates=s, kind="rectangle")
    result.meta["direction"] = direction.tolist()
    return result


def tune_sequences(ensemble: FieldEnsemble, delta_ref: float, nu_grid=(0.5, 1.0, 2.0),
                   theta_grid=(0.5, 1.0, 2.0), N: int = 40, norm=None, space=None,
                   delta_grid=None) -> dict:
    """Heuristic grid search for ``(nu, theta_param)`` minimizing ``g(delta_ref)``.

    No optimality is claimed; the choice of sequences has no known solution in
    general.
    """
    space = space if space is not None else ensemble.space
    norm = norm or LuxemburgNorm(OrliczFunction.power(2))
    engine = ModulusEngine(ensemble.values, space)
    grid = default_delta_grid(space) if delta_grid is None else np.asarray(delta_grid, float)
    theta = theta_function(ensemble.values, space, grid, norm, engine=engine)
    table = []
    for nu in nu_grid:
        for th in theta_grid:
            try:
                res = build_factorization(ensemble, space, default_sequences(nu, th, N), norm,
                                          grid, engine=engine, theta=theta)
                table.append({"nu": nu, "theta_param": th, "g_ref": float(res.g(delta_ref))})
            except ValueError as exc:
                table.append({"nu": nu, "theta_param": th, "g_ref": math.inf, "error": str(exc)})
    best = min(table, key=lambda r: r["g_ref"])
    return {"best": best, "table": table, "heuristic": True}
