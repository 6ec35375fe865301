import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from factorable.fields import simulate_brownian
from factorable.knots import KnotFunction
from factorable.orlicz import (GLSNorm, LuxemburgNorm, OrliczFunction, PsiFunction,
                               c2_constant, check_delta2, grand_lebesgue_norm, halving_holds,
                               is_weaker, legendre_transform, lp_norm, luxemburg_norm,
                               nabla2_constant, natural_psi, norm_from_config, v_star)

FAMILIES = [
    OrliczFunction.power(1), OrliczFunction.power(2), OrliczFunction.power(3.5),
    OrliczFunction.exp_power(1), OrliczFunction.exp_power(2), OrliczFunction.gaussian(),
    OrliczFunction.table([(1.0, 0.5), (2.0, 2.0), (4.0, 9.0)]),
]

finite_samples = arrays(np.float64, st.integers(1, 60),
                        elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


# --- Orlicz functions ------------------------------------------------------


@pytest.mark.parametrize("phi", FAMILIES, ids=lambda p: p.name)
def test_orlicz_basic_invariants(phi):
    u = np.linspace(0.01, 6, 300)
    assert phi(0.0) == 0.0
    np.testing.assert_array_equal(phi(u), phi(-u))
    assert np.all(np.diff(phi(u)) > 0)
    v = u[::-1]
    assert np.all(phi((u + v) / 2) <= (phi(u) + phi(v)) / 2 * (1 + 1e-12))
    assert halving_holds(phi, u)


@pytest.mark.parametrize("phi", FAMILIES, ids=lambda p: p.name)
def test_inverse_round_trip(phi):
    y = np.array([1e-6, 0.3, 1.0, 7.5, 1e4])
    x = phi.inverse(y)
    np.testing.assert_allclose(phi(x), y, rtol=1e-10)


def test_table_requires_convex_knots():
    with pytest.raises(ValueError):
        OrliczFunction.table([(1.0, 1.0), (2.0, 1.5), (3.0, 1.7)])


def test_config_round_trip_and_unknown_keys():
    for phi in FAMILIES:
        assert OrliczFunction.from_config(phi.to_config()) == phi
    with pytest.raises(ValueError):
        OrliczFunction.from_config({"family": "power", "param": 2, "colour": 1})
    with pytest.raises(ValueError):
        norm_from_config({"kind": "sobolev"})


# --- Luxemburg norm --------------------------------------------------------


def test_luxemburg_trivial_examples():
    assert luxemburg_norm(np.full(10, 2.5), OrliczFunction.power(3)) == pytest.approx(2.5, rel=1e-11)
    assert luxemburg_norm(np.zeros(7), OrliczFunction.gaussian()) == 0.0
    signs = np.array([1.0, -1.0] * 50)
    assert luxemburg_norm(signs, OrliczFunction.power(2)) == pytest.approx(1.0, rel=1e-11)


def test_luxemburg_gaussian_constant_closed_form():
    # exp(c^2 / 2k^2) - 1 = 1  =>  k = c / sqrt(2 ln 2)
    c = 1.7
    assert luxemburg_norm(np.full(5, c), OrliczFunction.gaussian()) == pytest.approx(
        c / math.sqrt(2 * math.log(2)), rel=1e-11)


def test_luxemburg_returned_value_is_feasible(rng):
    z = rng.standard_normal(1000)
    for phi in FAMILIES:
        k = luxemburg_norm(z, phi)
        assert np.mean(phi(z / k)) <= 1.0


def test_luxemburg_rejects_non_finite():
    with pytest.raises(ValueError):
        luxemburg_norm(np.array([1.0, np.nan]), OrliczFunction.power(2))


def test_luxemburg_axis_matches_columns(rng):
    z = rng.standard_normal((500, 4))
    phi = OrliczFunction.gaussian()
    cols = luxemburg_norm(z, phi, axis=0)
    np.testing.assert_allclose(cols, [luxemburg_norm(z[:, j], phi) for j in range(4)], rtol=1e-12)


@given(finite_samples, st.floats(1.0, 6.0))
def test_luxemburg_power_equals_lp(z, p):
    lux = luxemburg_norm(z, OrliczFunction.power(p))
    ref = lp_norm(z, p)
    assert lux == pytest.approx(ref, rel=1e-9, abs=0)


@given(finite_samples, st.floats(0.01, 100.0))
def test_luxemburg_homogeneous(z, c):
    phi = OrliczFunction.gaussian()
    assert luxemburg_norm(c * z, phi) == pytest.approx(c * luxemburg_norm(z, phi), rel=1e-9, abs=1e-300)


@given(st.integers(0, 10_000))
def test_luxemburg_triangle_and_monotone(seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(200), r.standard_t(3, 200)
    phi = OrliczFunction.exp_power(1)
    n = lambda v: luxemburg_norm(v, phi)
    assert n(x + y) <= (n(x) + n(y)) * (1 + 1e-10)
    assert n(0.5 * x) <= n(x)


# --- Grand Lebesgue norms --------------------------------------------------


@given(finite_samples, st.sampled_from([1.0, 2.0, 3.0, 4.5]))
def test_gls_degenerate_is_lp(z, r):
    assert grand_lebesgue_norm(z, PsiFunction.degenerate(r)) == lp_norm(z, r)


def test_gls_trivial_examples():
    assert grand_lebesgue_norm(np.full(9, 3.0), PsiFunction.constant(1.0)) == pytest.approx(3.0)
    assert grand_lebesgue_norm(np.zeros(4), PsiFunction("gaussian")) == 0.0


def test_gls_rejects_p_outside_support():
    psi = PsiFunction("power", 1.0, support=(2.0, 8.0))
    with pytest.raises(ValueError):
        grand_lebesgue_norm(np.ones(3), psi, p_grid=[2.0, 10.0])


def test_gls_norm_spec_round_trip():
    spec = GLSNorm(PsiFunction("gaussian"), (2.0, 4.0, 8.0))
    again = norm_from_config(spec.to_config())
    z = np.linspace(-1, 2, 50)
    assert again(z) == spec(z)
    lux = LuxemburgNorm(OrliczFunction.power(2))
    assert norm_from_config(lux.to_config())(z) == lux(z)


def test_natural_psi_examples():
    zero = natural_psi(np.zeros((20, 3)), [2.0, 4.0])
    assert zero.zero
    with pytest.raises(ValueError):
        grand_lebesgue_norm(np.ones(3), zero)
    signs = natural_psi(np.array([[1.0], [-1.0]] * 10), [2.0, 3.0, 6.0])
    np.testing.assert_allclose(signs([2.0, 3.0, 6.0]), 1.0)


def test_natural_psi_brownian_second_moment():
    grid = np.linspace(0, 1 / math.e, 33)
    ens = simulate_brownian(grid, 20_000, seed=11)
    psi = natural_psi(ens, [2.0, 4.0, 8.0])
    # E w(t)^2 = t is maximal at the end point; a max over 33 columns biases upward slightly
    target = math.exp(-0.5)
    assert abs(float(psi(2.0)) - target) < 0.02
    vals = psi([2.0, 4.0, 8.0])
    assert np.all(np.diff(vals) >= 0)


# --- growth conditions -----------------------------------------------------


def test_delta2_examples():
    rep = check_delta2(OrliczFunction.power(3))
    assert rep.holds and rep.heuristic
    np.testing.assert_allclose(rep.trace["ratio"], 8.0, rtol=1e-12)
    assert not check_delta2(OrliczFunction.exp_power(2)).holds
    assert not check_delta2(OrliczFunction.gaussian()).holds


def test_nabla2_examples():
    assert nabla2_constant(OrliczFunction.power(2)) is None
    K = nabla2_constant(OrliczFunction.exp_power(1))
    assert K is not None and 1.0 <= K < 3.0
    # grid-search oracle over (0, 10]
    g = np.linspace(0.05, 10, 60)
    x, y = np.meshgrid(g, g)
    phi = OrliczFunction.exp_power(1)
    assert np.all(phi(x) * phi(y) <= phi(K * (x + y)) * (1 + 1e-12))
    assert nabla2_constant(OrliczFunction.gaussian(), pairs=[(0.0, 0.0)]) == 1.0


def test_c2_constant_examples():
    g = OrliczFunction.gaussian()
    assert c2_constant(g, 1.0) == pytest.approx(math.sqrt(2 * math.log(2)) / 54, rel=1e-11)
    assert c2_constant(g, 1.0) == pytest.approx(0.02180, abs=5e-6)
    assert c2_constant(g, 2.0) == pytest.approx(c2_constant(g, 1.0) / 4, rel=1e-12)
    assert c2_constant(OrliczFunction.power(1), 1.0) == pytest.approx(1 / 54, rel=1e-12)
    with pytest.raises(ValueError):
        c2_constant(g, 0.5)


def test_is_weaker_examples():
    assert is_weaker(OrliczFunction.exp_power(1), OrliczFunction.exp_power(2)).holds
    assert is_weaker(OrliczFunction.power(2), OrliczFunction.exp_power(1)).holds
    g = OrliczFunction.gaussian()
    assert not is_weaker(g, g, v_probe=[1.0]).holds


# --- transforms ------------------------------------------------------------


def test_legendre_self_dual_quadratic():
    p = np.linspace(-6, 6, 4001)
    f = KnotFunction(p, p ** 2 / 2)
    lam = np.linspace(-3, 3, 61)
    conj = legendre_transform(f, lam, absolute=False)
    np.testing.assert_allclose(conj.y, lam ** 2 / 2, atol=1e-5)
    assert conj.is_convex()


def test_legendre_linear_is_indicator():
    p = np.linspace(0, 10, 101)
    f = KnotFunction(p, 2.0 * p)
    conj = legendre_transform(f, [0.5, 1.9, 2.0, 3.0])
    np.testing.assert_allclose(conj.y[:3], 0.0, atol=1e-12)
    assert conj.y[3] == pytest.approx(10.0)   # grid-capped: sup at p = 10


@given(st.integers(0, 1000))
def test_fenchel_young(seed):
    r = np.random.default_rng(seed)
    p = np.sort(r.uniform(1, 20, 40))
    f = KnotFunction(np.unique(p), np.unique(p) ** 1.5 / 3)
    lam = np.unique(r.uniform(-5, 5, 30))
    conj = legendre_transform(f, lam)
    assert np.all(np.abs(lam)[:, None] * f.x[None, :] <= f.y[None, :] + conj.y[:, None] + 1e-9)


def test_v_star_examples():
    assert v_star(PsiFunction.constant(3.0), 2.0) == pytest.approx(math.log(3.0), abs=1e-9)
    assert v_star(PsiFunction.degenerate(2.0), 3.0) == 1.5
    psi = PsiFunction("power", 1.0)
    w = np.array([1.0, 2.0, 5.0, 40.0])
    np.testing.assert_allclose(v_star(psi, w), 1 + np.log(w), atol=1e-10)
    z0 = np.geomspace(1e-3, 1, 20)
    for ww in w:
        assert np.all(v_star(psi, ww) <= z0 * ww - np.log(z0) + 1e-12)
    with pytest.raises(ValueError):
        v_star(PsiFunction.from_table([2.0, 4.0], [0.0, 0.0]), 1.0)
