"""Young-Orlicz functions, Luxemburg and Grand Lebesgue norms of samples.

All norms here are empirical: expectations are replaced by means over a
finite sample of realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .knots import KnotFunction

ORLICZ_FAMILIES = ("power", "exp_power", "gaussian", "table")
PSI_FAMILIES = ("constant", "power", "exp_power", "gaussian", "table", "degenerate")

BISECT_MAX_ITER = 200
DEFAULT_P_MAX = 32.0


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(getattr(samples, "values", samples), dtype=float)
    if arr.size == 0:
        raise ValueError("sample set is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample set contains non-finite values")
    return arr


def _log_expm1(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > 30.0
    with np.errstate(divide="ignore"):
        out[~big] = np.log(np.expm1(z[~big]))
    out[big] = z[big] + np.log1p(-np.exp(-z[big]))
    return out


@dataclass(frozen=True)
class OrliczFunction:
    """Even convex function with ``Phi(0) = 0``, evaluable on arrays.

    Families: ``power`` (``|u|**p``), ``exp_power`` (``exp(|u|**p) - 1``),
    ``gaussian`` (``exp(u**2/2) - 1``) and ``table`` (piecewise linear through
    ``knots`` on ``u >= 0``, extended with the last slope).
    """

    family: str
    param: Optional[float] = None
    knots: Optional[tuple] = None
    K: Optional[float] = None

    def __post_init__(self):
        if self.family not in ORLICZ_FAMILIES:
            raise ValueError(f"unknown Orlicz family {self.family!r}")
        if self.family in ("power", "exp_power"):
            if self.param is None or not self.param > 0:
                raise ValueError(f"{self.family} needs a positive param, got {self.param}")
            if self.family == "power" and self.param < 1:
                raise ValueError("power family needs p >= 1 to be convex")
        if self.family == "table":
            if not self.knots:
                raise ValueError("table family needs knots")
            pts = sorted((float(u), float(v)) for u, v in self.knots)
            if pts[0][0] != 0.0:
                pts.insert(0, (0.0, 0.0))
            u = np.array([q[0] for q in pts])
            v = np.array([q[1] for q in pts])
            if v[0] != 0.0:
                raise ValueError("table Orlicz function must vanish at 0")
            if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
                raise ValueError("table knots must be strictly increasing")
            if not KnotFunction(u, v).is_convex():
                raise ValueError("table knots are not convex")
            object.__setattr__(self, "knots", tuple(pts))

    # constructors -------------------------------------------------------
    @classmethod
    def power(cls, p: float) -> "OrliczFunction":
        return cls("power", float(p))

    @classmethod
    def exp_power(cls, p: float) -> "OrliczFunction":
        return cls("exp_power", float(p))

    @classmethod
    def gaussian(cls) -> "OrliczFunction":
        return cls("gaussian")

    @classmethod
    def table(cls, knots) -> "OrliczFunction":
        return cls("table", knots=tuple(tuple(k) for k in knots))

    @classmethod
    def from_config(cls, cfg: dict) -> "OrliczFunction":
        unknown = set(cfg) - {"family", "param", "knots", "K"}
        if unknown:
            raise ValueError(f"unknown Orlicz config keys: {sorted(unknown)}")
        knots = cfg.get("knots")
        return cls(
            cfg["family"],
            cfg.get("param"),
            tuple(tuple(k) for k in knots) if knots else None,
            cfg.get("K"),
        )

    def to_config(self) -> dict:
        out = {"family": self.family}
        if self.param is not None:
            out["param"] = self.param
        if self.knots is not None:
            out["knots"] = [list(k) for k in self.knots]
        if self.K is not None:
            out["K"] = self.K
        return out

    @property
    def name(self) -> str:
        if self.family == "power":
            return f"Phi_{self.param:g}"
        if self.family == "exp_power":
            return f"Theta_{self.param:g}"
        if self.family == "gaussian":
            return "Phi_G"
        return "Phi_table"

    # evaluation ---------------------------------------------------------
    def __call__(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        with np.errstate(over="ignore"):
            if self.family == "power":
                return a**self.param
            if self.family == "exp_power":
                return np.expm1(a**self.param)
            if self.family == "gaussian":
                return np.expm1(0.5 * a * a)
        u_k = np.array([k[0] for k in self.knots])
        v_k = np.array([k[1] for k in self.knots])
        slope = (v_k[-1] - v_k[-2]) / (u_k[-1] - u_k[-2])
        out = np.interp(a, u_k, v_k)
        beyond = a > u_k[-1]
        return np.where(beyond, v_k[-1] + slope * (a - u_k[-1]), out)

    def log(self, u):
        """``log Phi(u)``, finite where ``Phi`` itself would overflow."""
        a = np.abs(np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            if self.family == "power":
                return self.param * np.log(a)
            if self.family == "exp_power":
                return _log_expm1(a**self.param)
            if self.family == "gaussian":
                return _log_expm1(0.5 * a * a)
            return np.log(self(a))

    def inverse(self, y, tol: float = 1e-12):
        """Inverse on ``[0, inf)`` by monotone bisection."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(np.isnan(y)):
            raise ValueError("Orlicz inverse needs nonnegative arguments")
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.zeros_like(y)
        inf = np.isinf(y)
        out[inf] = np.inf
        todo = (y > 0) & ~inf
        if np.any(todo):
            out[todo] = self._bisect_inverse(y[todo], tol)
        return float(out[0]) if scalar else out

    def _bisect_inverse(self, y, tol):
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(2100):
            short = self(hi) < y
            if not np.any(short):
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2.0 * hi, hi)
        for _ in range(BISECT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            below = self(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= tol * np.maximum(hi, 1e-300)):
                break
        return hi


# ---------------------------------------------------------------------------
# psi functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiFunction:
    """Generating function ``p -> psi(p)`` of a Grand Lebesgue norm.

    ``support`` is the closed interval of admissible ``p``. The ``degenerate``
    family pins the order ``r = param``: ``psi(r) = 1`` and ``+inf`` elsewhere.
    ``zero`` marks a psi that vanishes identically (e.g. the natural function
    of a zero field); norm operations refuse it.
    """

    family: str
    param: Optional[float] = None
    knots: Optional[tuple] = None
    support: tuple = (1.0, math.inf)
    zero: bool = False

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise ValueError(f"unknown psi family {self.family!r}")
        if self.family == "table":
            if not self.knots:
                raise ValueError("table psi needs knots")
            pts = sorted((float(p), float(v)) for p, v in self.knots)
            ps = np.array([q[0] for q in pts])
            if np.any(np.diff(ps) <= 0):
                raise ValueError("table psi knots must have distinct p")
            object.__setattr__(self, "knots", tuple(pts))
            object.__setattr__(self, "support", (pts[0][0], pts[-1][0]))
        elif self.family == "degenerate":
            if self.param is None or not self.param >= 1:
                raise ValueError("degenerate psi needs an order r >= 1")
        elif self.family in ("constant", "power", "exp_power"):
            if self.param is None or not self.param > 0:
                raise ValueError(f"psi family {self.family} needs a positive param")
        lo, hi = self.support
        if not (lo >= 1 and hi > lo):
            raise ValueError(f"bad psi support {self.support}")

    @classmethod
    def constant(cls, c: float) -> "PsiFunction":
        return cls("constant", float(c))

    @classmethod
    def degenerate(cls, r: float) -> "PsiFunction":
        return cls("degenerate", float(r))

    @classmethod
    def from_table(cls, p, values) -> "PsiFunction":
        p = np.asarray(p, dtype=float)
        values = np.asarray(values, dtype=float)
        zero = bool(np.all(values == 0))
        return cls("table", knots=tuple(zip(p.tolist(), values.tolist())), zero=zero)

    @classmethod
    def from_config(cls, cfg: dict) -> "PsiFunction":
        unknown = set(cfg) - {"family", "param", "knots", "support"}
        if unknown:
            raise ValueError(f"unknown psi config keys: {sorted(unknown)}")
        knots = cfg.get("knots")
        kwargs = {}
        if "support" in cfg:
            lo, hi = cfg["support"]
            kwargs["support"] = (float(lo), math.inf if hi is None else float(hi))
        return cls(cfg["family"], cfg.get("param"),
                   tuple(tuple(k) for k in knots) if knots else None, **kwargs)

    def to_config(self) -> dict:
        out = {"family": self.family}
        if self.param is not None:
            out["param"] = self.param
        if self.knots is not None:
            out["knots"] = [list(k) for k in self.knots]
        elif self.support != (1.0, math.inf):
            lo, hi = self.support
            out["support"] = [lo, None if math.isinf(hi) else hi]
        return out

    @property
    def is_degenerate(self) -> bool:
        return self.family == "degenerate"

    def in_support(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo, hi = self.support
        return (p >= lo) & (p <= hi)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if not np.all(self.in_support(p)):
            raise ValueError(f"p outside psi support {self.support}")
        if self.family == "constant":
            return np.full_like(p, self.param)
        if self.family == "power":
            return p**self.param
        if self.family == "gaussian":
            return np.sqrt(p)
        if self.family == "exp_power":
            return p ** (1.0 / self.param)
        if self.family == "degenerate":
            return np.where(np.isclose(p, self.param, rtol=0, atol=1e-12), 1.0, np.inf)
        ps = np.array([k[0] for k in self.knots])
        vs = np.array([k[1] for k in self.knots])
        return np.interp(p, ps, vs)

    def default_grid(self, lower: float = 2.0, n: int = 31) -> np.ndarray:
        if self.is_degenerate:
            return np.array([self.param])
        if self.family == "table":
            ps = np.array([k[0] for k in self.knots])
            return ps[ps >= lower] if np.any(ps >= lower) else ps
        lo = max(lower, self.support[0])
        hi = min(self.support[1], DEFAULT_P_MAX)
        return np.geomspace(lo, hi, n)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def lp_norm(samples, p: float, axis=None):
    """Empirical ``(mean |z|**p) ** (1/p)``, scaled by the max for stability."""
    a = np.abs(_as_samples(samples))
    top = np.max(a, axis=axis, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    m = np.mean((a / safe) ** p, axis=axis, keepdims=True) ** (1.0 / p)
    out = np.squeeze(m * top, axis=axis) if axis is not None else float((m * top).item())
    return out


def luxemburg_norm(samples, phi: OrliczFunction, axis=None, rtol: float = 1e-12):
    """Luxemburg norm ``inf{k > 0 : mean Phi(|z|/k) <= 1}``.

    The returned value is the upper end of the final bisection bracket, so
    ``mean Phi(|z|/k) <= 1`` holds at it. With ``axis=0`` every column of a
    2-d array is normed separately.
    """
    a = np.abs(_as_samples(samples))
    if axis is None:
        a = a.reshape(-1, 1)
    elif axis != 0:
        a = np.moveaxis(a, axis, 0)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    m = a.shape[0]
    top = a.max(axis=0)
    out = np.zeros(a.shape[1])
    live = top > 0
    if np.any(live):
        s = a[:, live] / top[live]
        # at k = 1/Phi^-1(m) the single largest term alone reaches 1;
        # at k = 1/Phi^-1(1) every term is at most 1
        lo = np.full(s.shape[1], 1.0 / phi.inverse(float(m)))
        hi = np.full(s.shape[1], 1.0 / phi.inverse(1.0))
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(BISECT_MAX_ITER):
                if np.all(hi <= lo * (1.0 + rtol)):
                    break
                mid = np.sqrt(lo * hi)
                ok = np.mean(phi(s / mid), axis=0) <= 1.0
                hi = np.where(ok, mid, hi)
                lo = np.where(ok, lo, mid)
        out[live] = hi * top[live]
    if axis is None:
        return float(out[0])
    return out


def grand_lebesgue_norm(samples, psi: PsiFunction, p_grid: Optional[Sequence[float]] = None,
                        axis=None):
    """Grand Lebesgue norm ``sup_p |z|_p / psi(p)`` over a p-grid."""
    if psi.zero:
        raise ValueError("psi vanishes identically; the norm is undefined")
    if psi.is_degenerate:
        return lp_norm(samples, psi.param, axis=axis)
    grid = psi.default_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty p-grid")
    if not np.all(psi.in_support(grid)):
        raise ValueError(f"p-grid leaves psi support {psi.support}")
    weights = psi(grid)
    if np.any(weights <= 0):
        raise ValueError("psi must be positive on the p-grid")
    best = None
    for p, w in zip(grid, weights):
        if np.isinf(w):
            continue
        val = lp_norm(samples, p, axis=axis) / w
        best = val if best is None else np.maximum(best, val)
    if best is None:
        raise ValueError("psi is infinite on the whole p-grid")
    return best if axis is not None else float(best)


def natural_psi(ensemble, p_grid: Sequence[float]) -> PsiFunction:
    """Natural function ``p -> max_x |xi(x)|_p`` tabulated on ``p_grid``."""
    values = np.asarray(getattr(ensemble, "values", ensemble), dtype=float)
    if values.size == 0:
        raise ValueError("empty ensemble")
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    grid = np.asarray(p_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 1):
        raise ValueError("p-grid must be non-empty with p >= 1")
    table = [float(np.max(lp_norm(values, p, axis=0))) for p in grid]
    return PsiFunction.from_table(grid, table)


# ---------------------------------------------------------------------------
# growth conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    """Outcome of a numeric check of an asymptotic condition.

    The verdict comes from finitely many probes; ``trace`` keeps the probed
    ratios so callers can audit it.
    """

    holds: bool
    trace: dict = field(default_factory=dict)
    heuristic: bool = True

    def __bool__(self):
        return self.holds


def check_delta2(phi: OrliczFunction, u_grid=None, growth_tol: float = 1.5) -> GrowthReport:
    """Numeric Delta_2 check: is ``Phi(2u)/Phi(u)`` bounded on the grid tail?"""
    u = np.geomspace(1.0, 50.0, 64) if u_grid is None else np.asarray(u_grid, dtype=float)
    if np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise ValueError("u-grid must be positive and increasing")
    log_ratio = phi.log(2 * u) - phi.log(u)
    with np.errstate(over="ignore"):
        ratio = np.exp(log_ratio)
    tail = log_ratio[len(u) // 2:]
    holds = bool(np.all(np.isfinite(tail)) and tail[-1] - tail[0] <= math.log(growth_tol)
                 and np.max(tail) < math.log(1e12))
    return GrowthReport(holds, {"u": u, "ratio": ratio})


def nabla2_constant(phi: OrliczFunction, pairs=None, K_grid=None) -> Optional[float]:
    """Smallest ``K`` on ``K_grid`` with ``Phi(x)Phi(y) <= Phi(K(x+y))`` on all pairs.

    Returns ``None`` when no grid value works.
    """
    if pairs is None:
        g = np.geomspace(1e-3, 1e4, 48)
        xs, ys = np.meshgrid(g, g)
        pairs = np.column_stack([xs.ravel(), ys.ravel()])
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if np.any(pairs < 0):
        raise ValueError("nabla_2 pairs must be nonnegative")
    Ks = np.geomspace(1.0, 1e3, 601) if K_grid is None else np.sort(np.asarray(K_grid, float))
    x, y = pairs[:, 0], pairs[:, 1]
    lhs = phi.log(x) + phi.log(y)
    for K in Ks:
        rhs = phi.log(K * (x + y))
        slack = 1e-12 * np.maximum(1.0, np.abs(np.where(np.isfinite(rhs), rhs, 0.0)))
        if np.all(lhs <= rhs + slack):
            return float(K)
    return None


def c2_constant(phi: OrliczFunction, K: float) -> float:
    """``Phi^{-1}(1) / (54 K^2)``."""
    if K < 1:
        raise ValueError(f"nabla_2 constant must be >= 1, got {K}")
    return phi.inverse(1.0) / (54.0 * K * K)


def is_weaker(psi_fn: OrliczFunction, phi_fn: OrliczFunction, v_probe=None, u_grid=None,
              threshold: float = 1e-6) -> GrowthReport:
    """Numeric check of ``Psi(u v) / Phi(u) -> 0`` for every probed ``v``."""
    v = np.array([0.5, 1.0, 2.0, 10.0]) if v_probe is None else np.asarray(v_probe, float)
    u = np.geomspace(1.0, 1e3, 64) if u_grid is None else np.asarray(u_grid, float)
    if np.any(u <= 0) or np.any(np.diff(u) <= 0) or np.any(v <= 0):
        raise ValueError("probe grids must be positive (u increasing)")
    log_ratio = psi_fn.log(np.outer(v, u)) - phi_fn.log(u)[None, :]
    holds = bool(np.all(log_ratio[:, -1] < math.log(threshold)))
    return GrowthReport(holds, {"u": u, "v": v, "log_ratio": log_ratio})


def halving_holds(phi: OrliczFunction, u) -> bool:
    """``Phi(u/2) <= Phi(u)/2`` on all probes (convexity plus ``Phi(0) = 0``)."""
    u = np.abs(np.asarray(u, dtype=float))
    lhs, rhs = phi(u / 2), phi(u) / 2
    return bool(np.all(lhs <= rhs * (1 + 1e-12)))


# ---------------------------------------------------------------------------
# Legendre transforms
# ---------------------------------------------------------------------------


def legendre_transform(f: KnotFunction, lambda_grid, absolute: bool = True) -> KnotFunction:
    """Discrete conjugate ``lam -> sup_p (|lam| p - f(p))`` over the knots of ``f``.

    With ``absolute=False`` the ordinary ``lam * p`` pairing is used.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size == 0 or len(f) == 0:
        raise ValueError("Legendre transform needs non-empty grids")
    p, fp = f.x, f.y
    slope = np.abs(lam) if absolute else lam
    out = np.empty(lam.size)
    chunk = max(1, 4_000_000 // p.size)
    for i in range(0, lam.size, chunk):
        s = slope[i:i + chunk, None]
        out[i:i + chunk] = np.max(s * p[None, :] - fp[None, :], axis=1)
    return KnotFunction(lam, out)


def phi_from_psi(psi: PsiFunction, p_grid) -> KnotFunction:
    """The function ``p -> [p / psi(p)]^{-1}`` on a p-grid."""
    p = np.asarray(p_grid, dtype=float)
    return KnotFunction(p, psi(p) / p)


def v_star(psi: PsiFunction, w, n_grid: int = 2001, zmin: float = 1e-12):
    """``inf_{z in (0,1)} (z w + ln psi(1/z))``: grid search plus golden-section.

    Accepts scalar or array ``w``.
    """
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    if psi.zero:
        raise ValueError("psi vanishes identically; ln psi undefined")
    if psi.is_degenerate:
        out = w_arr / psi.param
        return float(out[0]) if np.ndim(w) == 0 else out
    lo_p, hi_p = psi.support
    z_lo = max(zmin, 1.0 / hi_p) if math.isfinite(hi_p) else zmin
    z_hi = min(1.0 - 1e-12, 1.0 / lo_p)
    if not z_hi > z_lo:
        raise ValueError("psi support leaves no admissible z in (0,1)")
    z = np.geomspace(z_lo, z_hi, n_grid)
    pz = np.clip(1.0 / z, lo_p, hi_p)
    psi_vals = psi(pz)
    if np.any(psi_vals <= 0):
        raise ValueError("psi evaluates to 0; ln psi undefined")
    vz = np.log(psi_vals)

    def h(zz, ww):
        return zz * ww + float(np.log(psi(np.clip(1.0 / zz, lo_p, hi_p))))

    out = np.empty(w_arr.size)
    for k, ww in enumerate(w_arr):
        vals = z * ww + vz
        i = int(np.argmin(vals))
        best = vals[i]
        if 0 < i < z.size - 1:
            best = min(best, _golden_min(lambda t: h(t, ww), z[i - 1], z[i + 1]))
        out[k] = best
    return float(out[0]) if np.ndim(w) == 0 else out


def _golden_min(fn, a: float, b: float, tol: float = 1e-14, max_iter: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    best = min(fc, fd)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        best = min(best, fc, fd)
    return best


# ---------------------------------------------------------------------------
# norm specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LuxemburgNorm:
    phi: OrliczFunction

    def __call__(self, samples, axis=None):
        return luxemburg_norm(samples, self.phi, axis=axis)

    @property
    def name(self) -> str:
        return f"Luxemburg[{self.phi.name}]"

    def to_config(self) -> dict:
        return {"kind": "orlicz", "phi": self.phi.to_config()}


@dataclass(frozen=True)
class GLSNorm:
    psi: PsiFunction
    p_grid: Optional[tuple] = None

    def __call__(self, samples, axis=None):
        return grand_lebesgue_norm(samples, self.psi, self.p_grid, axis=axis)

    @property
    def name(self) -> str:
        return f"GLS[{self.psi.family}]"

    def to_config(self) -> dict:
        out = {"kind": "gls", "psi": self.psi.to_config()}
        if self.p_grid is not None:
            out["p_grid"] = list(self.p_grid)
        return out


def norm_from_config(cfg: dict):
    """``{"kind": "orlicz", "phi": {...}}`` or ``{"kind": "gls", "psi": {...}, "p_grid": [...]}``."""
    kind = cfg.get("kind")
    if kind == "orlicz":
        unknown = set(cfg) - {"kind", "phi"}
        if unknown:
            raise ValueError(f"unknown norm keys: {sorted(unknown)}")
        return LuxemburgNorm(OrliczFunction.from_config(cfg["phi"]))
    if kind == "gls":
        unknown = set(cfg) - {"kind", "psi", "p_grid"}
        if unknown:
            raise ValueError(f"unknown norm keys: {sorted(unknown)}")
        grid = cfg.get("p_grid")
        return GLSNorm(PsiFunction.from_config(cfg["psi"]), tuple(grid) if grid else None)
    raise ValueError(f"unknown norm kind {kind!r}")
