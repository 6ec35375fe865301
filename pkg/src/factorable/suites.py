"""Named verification suites.

Each check returns a :class:`CheckResult` with status PASS, FAIL or SKIPPED
and a reason string. ``acceptance`` runs every criterion at full scale with
its own generators; the other suites run on the ensemble described by the
experiment config and skip checks whose generator assumptions do not hold.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .bounds import entropy_integral_bound, kr_factor_bound, v_functional
from .factorize import (DegenerateFieldError, build_factorization, default_sequences,
                        heavy_tail_factorization, rectangle_factorization)
from .fields import FieldEnsemble, line_space, simulate_brownian, simulate_stable, zm_transform
from .knots import KnotFunction
from .metric import (DiscreteMeasure, DiscreteMetricSpace, extended_integer_space,
                     natural_distance, orlicz_distance)
from .modulus import rectangle_difference, rectangle_modulus, theta_function
from .orlicz import (GLSNorm, LuxemburgNorm, OrliczFunction, PsiFunction, halving_holds,
                     legendre_transform, lp_norm, luxemburg_norm)

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"
T_END = 1.0 / math.e


@dataclass
class CheckResult:
    name: str
    status: str
    reason: str = ""
    values: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status != FAIL

    def line(self) -> str:
        return f"{self.status:7s} {self.name}: {self.reason}"


def _check(name, ok, reason, **values) -> CheckResult:
    return CheckResult(name, PASS if ok else FAIL, reason, values)


def combine(name: str, parts) -> CheckResult:
    """One verdict from several sub-checks (FAIL wins, then PASS)."""
    parts = list(parts)
    if any(p.status == FAIL for p in parts):
        status = FAIL
    elif any(p.status == PASS for p in parts):
        status = PASS
    else:
        status = SKIPPED
    reason = "; ".join(f"{p.name} {p.status}: {p.reason}" for p in parts)
    return CheckResult(name, status, reason, {p.name: p.values for p in parts})


# ---------------------------------------------------------------------------
# factorization on a generic ensemble
# ---------------------------------------------------------------------------


def factorization_checks(ensemble: FieldEnsemble, norm=None, plan=None, delta_grid=None,
                         norm_tol: float = 0.02):
    """Pathwise identity at knots, norm of the raw factor, normalization."""
    norm = norm or LuxemburgNorm(OrliczFunction.power(2))
    t0 = time.perf_counter()
    try:
        res = build_factorization(ensemble, None, plan, norm, delta_grid)
    except DegenerateFieldError as exc:
        return None, [CheckResult("factorization", FAIL, f"degenerate field: {exc}")]
    except ValueError as exc:
        return None, [CheckResult("factorization", FAIL, str(exc))]
    elapsed = time.perf_counter() - t0
    ok = res.pathwise_ok()
    tau0_norm = float(norm(res.tau0))
    checks = [
        _check("pathwise", ok.all(),
               f"{ok.mean():.2%} of {ok.size} realizations dominated at {res.deltas.size} knots",
               fraction=float(ok.mean()), seconds=elapsed),
        _check("tau_norm", res.tau_norm <= 1 + norm_tol,
               f"||tau|| = {res.tau_norm:.6f} (limit {1 + norm_tol})", tau_norm=res.tau_norm),
        _check("tau0_norm", abs(tau0_norm - 1) <= norm_tol,
               f"||tau0|| = {tau0_norm:.12f}", tau0_norm=tau0_norm),
    ]
    return res, checks


def loglog_slope(f: KnotFunction, lo: float, hi: float, n: int = 25) -> float:
    d = np.geomspace(lo, hi, n)
    y = f(d)
    if np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(d), np.log(y), 1)[0])


@lru_cache(maxsize=4)
def _brownian_phi2(seed: int, M: int, n: int):
    ens = simulate_brownian(np.linspace(0.0, T_END, n), M, seed)
    t0 = time.perf_counter()
    res, checks = factorization_checks(ens)
    return res, checks, time.perf_counter() - t0


def criterion_factorization(seed: int = 2024, M: int = 10_000, n: int = 2049):
    """Criteria 1-3 on the Brownian reference run."""
    res, checks, elapsed = _brownian_phi2(seed, M, n)
    if res is None:
        return [CheckResult(f"C{i}", FAIL, checks[0].reason) for i in (1, 2, 3)]
    path, tnorm, t0norm = checks
    c1 = _check("C1 pathwise identity", path.status == PASS and elapsed < 120,
                f"{path.reason}; {elapsed:.1f}s (target < 120s)", **path.values)
    c2 = CheckResult("C2 norm of tau", tnorm.status, tnorm.reason, tnorm.values)
    c3 = CheckResult("C3 normalization", t0norm.status, t0norm.reason, t0norm.values)
    return [c1, c2, c3]


def criterion_shape(seed: int = 2024, M: int = 10_000, n: int = 2049,
                    lo: float = 2.0 ** -9, hi: float = 2.0 ** -3):
    """Criterion 4: log-log slope of g in [alpha*th/(1+th) - 0.1, alpha + 0.1]."""
    res, checks, _ = _brownian_phi2(seed, M, n)
    if res is None:
        return CheckResult("C4 scaling-function shape", FAIL, checks[0].reason)
    alpha, th = 0.5, res.plan.theta_param
    band = (alpha * th / (1 + th) - 0.1, alpha + 0.1)
    slope = loglog_slope(res.g, lo, hi)
    top = float(res.g.x[-1])
    fitted = float(np.exp(np.mean(np.log(res.g(np.geomspace(lo, hi, 25))))
                           - alpha * np.mean(np.log(np.geomspace(lo, hi, 25)))))
    return _check("C4 scaling-function shape", band[0] <= slope <= band[1],
                  f"slope {slope:.4f}, band [{band[0]:.2f}, {band[1]:.2f}]; "
                  f"largest knot {top:.4g}; fitted C3 at alpha=1/2: {fitted:.4g}",
                  slope=slope, band=band, top_knot=top, fitted_constant=fitted)


# ---------------------------------------------------------------------------
# subgaussian tail
# ---------------------------------------------------------------------------


def tail_checks(tau0, u_points=(1.0, 1.5, 2.0, 2.5), u_range=(1.0, 2.5), n_slope: int = 7):
    t = np.asarray(tau0, dtype=float)
    parts = []
    for u in u_points:
        s = float(np.mean(t > u))
        se = math.sqrt(max(s * (1 - s), 0.0) / t.size)
        limit = math.exp(-u * u / 2) + 3 * se
        parts.append(_check(f"survival u={u:g}", s <= limit,
                            f"P(tau0>{u:g}) = {s:.5f} vs e^(-u^2/2)+3SE = {limit:.5f}",
                            survival=s, limit=limit))
    us = np.linspace(u_range[0], u_range[1], n_slope)
    surv = np.array([np.mean(t > u) for u in us])
    mono = bool(np.all(np.diff(surv) <= 0))
    slopes_ok = True
    slopes = []
    for k in range(us.size - 1):
        if surv[k + 1] == 0:
            slopes.append(-math.inf)
            continue
        if surv[k] == 0:
            continue
        sl = (math.log(surv[k + 1]) - math.log(surv[k])) / (us[k + 1] - us[k])
        slopes.append(sl)
        slopes_ok &= sl <= -us[k]
    parts.append(_check("log-survival decay", mono and slopes_ok,
                        f"monotone={mono}, slopes={np.round(slopes, 3).tolist()} vs -u",
                        slopes=slopes))
    return parts


def criterion_tails(seed: int = 2025, M: int = 100_000, n: int = 129):
    """Criterion 5 on a Gaussian (Wiener) ensemble under Phi_G."""
    ens = simulate_brownian(np.linspace(0.0, T_END, n), M, seed)
    res = build_factorization(ens, norm=LuxemburgNorm(OrliczFunction.gaussian()))
    return combine("C5 subgaussian tail", tail_checks(res.tau0))


# ---------------------------------------------------------------------------
# entropy bound, V functional, KR factor
# ---------------------------------------------------------------------------


def entropy_checks(ensemble: FieldEnsemble, psi=None, deltas=None):
    psi = psi or PsiFunction.degenerate(2.0)
    deltas = np.geomspace(2.0 ** -10, 2.0 ** -2, 20) if deltas is None else np.asarray(deltas)
    t0 = time.perf_counter()
    space = natural_distance(ensemble, psi)
    bound = entropy_integral_bound(space, psi, deltas)
    grid = np.concatenate([[0.0], deltas])
    emp = theta_function(ensemble.values, space, grid, GLSNorm(psi)).y[1:]
    elapsed = time.perf_counter() - t0
    ok = bound >= emp
    return _check("entropy bound dominance", bool(ok.all()),
                  f"{int(ok.sum())}/{ok.size} grid deltas dominated; min ratio "
                  f"{np.min(bound[emp > 0] / emp[emp > 0]) if np.any(emp > 0) else math.inf:.3g}; "
                  f"{elapsed:.1f}s",
                  deltas=deltas, bound=bound, empirical=emp, seconds=elapsed)


def criterion_entropy(seed: int = 2026, M: int = 10_000, n: int = 257):
    ens = simulate_brownian(np.linspace(0.0, T_END, n), M, seed)
    chk = entropy_checks(ens)
    ok = chk.status == PASS and chk.values["seconds"] < 180
    return CheckResult("C6 entropy-bound dominance", PASS if ok else FAIL,
                       chk.reason + " (target < 180s)", chk.values)


def calibrated_sqrt_distance(ensemble: FieldEnsemble, p: float):
    """``d(s,t) = c sqrt|t-s|`` with the smallest ``c`` satisfying the moment
    condition on the ensemble."""
    t = ensemble.space.line_coords
    v = ensemble.values
    iu, ju = np.triu_indices(t.size, 1)
    lag = np.abs(t[iu] - t[ju])
    mom = lp_norm(v[:, iu] - v[:, ju], p, axis=0)
    c = float(np.max(mom / np.sqrt(lag)))
    d = c * np.sqrt(np.abs(t[:, None] - t[None, :]))
    return DiscreteMetricSpace.from_matrix(d), c


def kr_checks(ensemble: FieldEnsemble, p: float = 4.0, theta_reg: float = 2.0, tol: float = 0.05):
    space, c = calibrated_sqrt_distance(ensemble, p)
    measure = DiscreteMeasure.uniform(space.n)
    res = kr_factor_bound(ensemble.values, space, measure, p, theta_reg)
    return _check("KR empirical factor", res.z_mean <= 1 + tol,
                  f"mean Z = {res.z_mean:.3e} (limit {1 + tol}); c = {c:.4f}, "
                  f"C(theta) = {res.C_theta:.4g}, p = {p:g}, theta = {theta_reg:g}",
                  z_mean=res.z_mean, c=c, C_theta=res.C_theta)


def criterion_kr(seed: int = 2027, M: int = 10_000, n: int = 129):
    ens = simulate_brownian(np.linspace(0.0, T_END, n), M, seed)
    chk = kr_checks(ens)
    return CheckResult("C7 KR empirical factor", chk.status, chk.reason, chk.values)


def v_checks(ensemble: FieldEnsemble, phi=None, tol: float = 0.05):
    phi = phi or OrliczFunction.gaussian()
    space = orlicz_distance(ensemble, phi)
    V = v_functional(ensemble.values, space, DiscreteMeasure.uniform(space.n), phi)
    return _check("V(d_Phi)", V <= 1 + tol, f"V = {V:.6f} (limit {1 + tol}) under {phi.name}", V=V)


def criterion_v(seed: int = 2028, M: int = 10_000, n: int = 65):
    ens = simulate_brownian(np.linspace(0.0, T_END, n), M, seed)
    chk = v_checks(ens)
    return CheckResult("C8 V-functional self-consistency", chk.status, chk.reason, chk.values)


# ---------------------------------------------------------------------------
# rectangle operators
# ---------------------------------------------------------------------------


def _random_poly(rng, degree: int = 4):
    coef = {(i, j): rng.normal() for i in range(degree + 1) for j in range(degree + 1 - i)}

    def f(x, y):
        return sum(c * x ** i * y ** j for (i, j), c in coef.items())

    def fxy(y, x):
        return sum(c * i * j * x ** (i - 1) * y ** (j - 1)
                   for (i, j), c in coef.items() if i and j)

    return f, fxy


def rectangle_oracle_checks(seed: int = 2029, n_poly: int = 10, n_boxes: int = 20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_poly):
        f, fxy = _random_poly(rng)
        x = rng.uniform(-1, 1, 2)
        y = x + rng.uniform(0.05, 1, 2)
        lhs = rectangle_difference(f, x, y)
        rhs, _ = integrate.dblquad(fxy, x[0], y[0], x[1], y[1], epsabs=1e-13, epsrel=1e-13)
        worst = max(worst, abs(lhs - rhs))
    poly = _check("polynomial quadrature", worst <= 1e-8,
                  f"max |box difference - integral of mixed partial| = {worst:.2e}", worst=worst)
    h = 1.0 / 64
    axis = np.arange(65) * h
    grid = np.multiply.outer(axis, axis)
    exact = True
    for _ in range(n_boxes):
        a, b = rng.integers(1, 65, 2) * h
        exact &= rectangle_modulus(grid, (axis, axis), (a, b)) == a * b
    prod = _check("x1*x2 modulus", bool(exact), f"Omega((a,b)) == ab on {n_boxes} dyadic pairs")
    return [poly, prod]


def criterion_rectangle(seed: int = 2029):
    return combine("C9 rectangle operator oracle", rectangle_oracle_checks(seed))


def sheet_checks(ensemble: FieldEnsemble):
    try:
        res = rectangle_factorization(ensemble)
    except ValueError as exc:
        return CheckResult("sheet pathwise", FAIL, str(exc))
    ok = res.pathwise_ok()
    return _check("sheet pathwise", ok.all(),
                  f"{ok.mean():.2%} of {ok.size} realizations at {res.deltas.size} knots")


# ---------------------------------------------------------------------------
# heavy tails
# ---------------------------------------------------------------------------


def batch_median_lp(values, p: float, M: int) -> float:
    """Median over disjoint batches of size ``M`` of ``max_x |eta(x)|_p``."""
    v = np.asarray(values)
    k = v.shape[0] // M
    return float(np.median([np.max(lp_norm(v[i * M:(i + 1) * M], p, axis=0)) for i in range(k)]))


def blowup_diagnostic(values, p: float = 4.0, sizes=(100, 1000, 10_000), factor: float = 3.0):
    """Fires when the moment estimate increases strictly with M and grows by
    more than ``factor`` over the size range."""
    est = [batch_median_lp(values, p, M) for M in sizes]
    fires = all(b > a for a, b in zip(est, est[1:])) and est[-1] > factor * est[0]
    return fires, est


def heavy_tail_checks(ensemble: FieldEnsemble, m: float = 1.0, p: float = 4.0,
                      sizes=(100, 1000, 10_000)):
    fires, est = blowup_diagnostic(ensemble.values, p, sizes)
    fires_z, est_z = blowup_diagnostic(zm_transform(ensemble.values, m), p, sizes)
    parts = [
        _check("raw blow-up", fires, f"|eta|_{p:g} by M: {np.round(est, 3).tolist()}", est=est),
        _check("transformed stable", not fires_z,
               f"|Z_{m:g}(eta)|_{p:g} by M: {np.round(est_z, 4).tolist()}", est=est_z),
    ]
    try:
        res = heavy_tail_factorization(ensemble, m)
        ok = res.pathwise_ok()
        parts.append(_check("transformed pathwise", ok.all(),
                            f"{ok.mean():.2%} of {ok.size} realizations; tag '{res.kind}'"))
    except ValueError as exc:
        parts.append(CheckResult("transformed pathwise", FAIL, str(exc)))
    return parts


def criterion_heavy_tail(seed: int = 2030, M: int = 10_000, n: int = 257):
    ens = simulate_stable(1.2, np.linspace(0.0, 1.0, n), M, seed)
    return combine("C10 heavy-tail pipeline", heavy_tail_checks(ens))


# ---------------------------------------------------------------------------
# transform / convexity micro-suite
# ---------------------------------------------------------------------------


CONVEX_TESTS = {
    "square": lambda x: x ** 2,
    "abs_cube": lambda x: np.abs(x) ** 3,
    "exp": np.exp,
    "cosh": np.cosh,
    "quartic_tilt": lambda x: x ** 4 + x,
}


def biconjugation_error(f, lo=-2.0, hi=2.0, n=401) -> float:
    x = np.linspace(lo, hi, n)
    fk = KnotFunction(x, f(x))
    slopes = np.diff(fk.y) / np.diff(x)
    conj = legendre_transform(fk, slopes, absolute=False)
    bi = legendre_transform(conj, x, absolute=False)
    return float(np.max(np.abs(bi.y - fk.y)))


def builtin_orlicz():
    return [OrliczFunction.power(1), OrliczFunction.power(2), OrliczFunction.power(3.5),
            OrliczFunction.exp_power(1), OrliczFunction.exp_power(2), OrliczFunction.gaussian(),
            OrliczFunction.table([(1.0, 0.5), (2.0, 2.0), (4.0, 9.0)])]


def micro_checks(seed: int = 2031):
    rng = np.random.default_rng(seed)
    errs = {k: biconjugation_error(f) for k, f in CONVEX_TESTS.items()}
    leg = _check("Legendre biconjugation", max(errs.values()) <= 1e-6,
                 f"max error {max(errs.values()):.2e} over {len(errs)} functions", errors=errs)
    probes = rng.uniform(0, 20, 1000)
    halving = {phi.name: halving_holds(phi, probes) for phi in builtin_orlicz()}
    halv = _check("halving inequality", all(halving.values()),
                  f"Phi(u/2) <= Phi(u)/2 on 1000 probes for {sorted(halving)}", result=halving)
    z = rng.standard_t(5, size=5000)
    rel = {}
    for p in (1.0, 1.5, 2.0, 3.0, 4.5):
        lux = luxemburg_norm(z, OrliczFunction.power(p))
        ref = float(np.mean(np.abs(z) ** p) ** (1 / p))
        rel[p] = abs(lux / ref - 1)
    lp = _check("Luxemburg vs |.|_p", max(rel.values()) <= 1e-9,
                f"max relative gap {max(rel.values()):.2e}", gaps=rel)
    audit = extended_integer_space(64).check_axioms()
    tri = _check("extended-integer triangle", audit["triangle"] and audit["symmetric"],
                 f"exhaustive over 65 points, max excess {audit['triangle_max_excess']:.2e}")
    return [leg, halv, lp, tri]


def criterion_micro(seed: int = 2031):
    return combine("C11 transform/convexity micro-suite", micro_checks(seed))


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def acceptance(seed: Optional[int] = None):
    """Every acceptance criterion at full scale, one result per criterion."""
    kw = {} if seed is None else {"seed": seed}
    out = list(criterion_factorization(**kw))
    out.append(criterion_shape(**kw))
    out.append(criterion_tails(**kw))
    out.append(criterion_entropy(**kw))
    out.append(criterion_kr(**kw))
    out.append(criterion_v(**kw))
    out.append(criterion_rectangle(**kw))
    out.append(criterion_heavy_tail(**kw))
    out.append(criterion_micro(**kw))
    return out


def _needs(families, cfg, name):
    fam = cfg.generator.family
    if fam in families:
        return None
    return CheckResult(name, SKIPPED, f"generator {fam!r} does not match (needs {sorted(families)})")


def _suite_factorization(cfg, ensemble):
    _, checks = factorization_checks(ensemble, cfg.norm_spec(), cfg.plan.build(), cfg.delta_grid)
    return checks


def _suite_wiener_tails(cfg, ensemble):
    skip = _needs({"brownian", "fbm", "gaussian"}, cfg, "wiener-tails")
    if skip:
        return [skip]
    res = build_factorization(ensemble, None, cfg.plan.build(),
                              LuxemburgNorm(OrliczFunction.gaussian()), cfg.delta_grid)
    return tail_checks(res.tau0)


def _suite_entropy(cfg, ensemble):
    skip = _needs({"brownian", "fbm", "gaussian"}, cfg, "entropy")
    if skip:
        return [skip]
    return [entropy_checks(thin(ensemble, 257), PsiFunction.from_config(cfg.options.entropy_psi))]


def _suite_kr(cfg, ensemble):
    out = []
    skip = _needs({"brownian"}, cfg, "KR empirical factor")
    out.append(skip or kr_checks(thin(ensemble, cfg.options.kr_points), cfg.options.kr_p,
                                 cfg.options.kr_theta))
    skip = _needs({"brownian", "fbm", "gaussian"}, cfg, "V(d_Phi)")
    out.append(skip or v_checks(thin(ensemble, 65)))
    return out


def _suite_rectangle(cfg, ensemble):
    out = rectangle_oracle_checks()
    skip = _needs({"brownian_sheet"}, cfg, "sheet pathwise")
    out.append(skip or sheet_checks(ensemble))
    return out


def _suite_heavy(cfg, ensemble):
    skip = _needs({"stable"}, cfg, "heavy-tail")
    if skip:
        return [skip]
    M = ensemble.M
    sizes = tuple(s for s in (100, 1000, 10_000, 100_000) if s <= M)
    if len(sizes) < 3:
        return [CheckResult("heavy-tail", SKIPPED, f"need M >= 10000 for the blow-up diagnostic, got {M}")]
    return heavy_tail_checks(ensemble, cfg.options.m, sizes=sizes[-3:])


def _suite_micro(cfg, ensemble):
    return micro_checks()


SUITES: dict = {
    "factorization": _suite_factorization,
    "wiener-tails": _suite_wiener_tails,
    "entropy": _suite_entropy,
    "kr": _suite_kr,
    "rectangle": _suite_rectangle,
    "heavy-tail": _suite_heavy,
    "micro": _suite_micro,
}
NO_ENSEMBLE = {"micro"}
SUITE_NAMES = tuple(SUITES) + ("acceptance",)


def thin(ensemble: FieldEnsemble, max_points: int) -> FieldEnsemble:
    """Keep roughly every k-th grid point of a line ensemble."""
    n = ensemble.n
    if n <= max_points or ensemble.space is None or ensemble.space.line_coords is None:
        return ensemble
    step = int(math.ceil((n - 1) / (max_points - 1)))
    idx = np.arange(0, n, step)
    coords = ensemble.space.line_coords[idx]
    return FieldEnsemble(ensemble.values[:, idx], line_space(coords), ensemble.generator,
                         ensemble.seed, {**ensemble.params, "thinned_from": n})


def run_suite(name: str, cfg=None, ensemble: Optional[FieldEnsemble] = None,
              threads: Optional[int] = None):
    if name == "acceptance":
        return acceptance(None if cfg is None else cfg.generator.seed)
    if name not in SUITES:
        raise KeyError(name)
    if ensemble is None and name not in NO_ENSEMBLE:
        ensemble = cfg.generator.simulate(threads)
    return SUITES[name](cfg, ensemble)
