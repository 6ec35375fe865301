import math

import numpy as np
import pytest

from factorable.bounds import (calibrate_c_theta, entropy_integral_bound, kr_factor_bound,
                               kr_modulus_bound, kr_w_distance, kr_w_matrix, v_functional)
from factorable.fields import simulate_brownian
from factorable.metric import DiscreteMeasure, DiscreteMetricSpace
from factorable.orlicz import OrliczFunction, PsiFunction, c2_constant

PHI2 = OrliczFunction.power(2)


def two_points():
    return DiscreteMetricSpace.from_coordinates([0.0, 1.0]), DiscreteMeasure.uniform(2)


def test_v_two_point():
    sp, mu = two_points()
    assert v_functional(np.array([0.0, 1.0]), sp, mu, PHI2) == pytest.approx(0.5)
    assert v_functional(np.array([[0.0, 1.0], [0.0, 3.0]]), sp, mu, PHI2) == pytest.approx(2.5)
    assert v_functional(np.array([2.0, 2.0]), sp, mu, PHI2) == 0.0


def test_v_rejects_jump_at_zero_distance():
    sp = DiscreteMetricSpace.from_matrix([[0, 0], [0, 0]])
    mu = DiscreteMeasure.uniform(2)
    assert v_functional(np.array([1.0, 1.0]), sp, mu, PHI2) == 0.0
    with pytest.raises(ValueError):
        v_functional(np.array([1.0, 2.0]), sp, mu, PHI2)


def test_v_luxemburg_distance_at_most_one():
    from factorable.metric import orlicz_distance
    ens = simulate_brownian(np.linspace(0, 1, 17), 2000, seed=0)
    g = OrliczFunction.gaussian()
    sp = orlicz_distance(ens, g)
    assert v_functional(ens.values, sp, DiscreteMeasure.uniform(17), g) <= 1.0


def test_w_two_point_closed_form():
    sp, mu = two_points()
    for phi in (PHI2, OrliczFunction.gaussian()):
        V = 0.5
        assert kr_w_distance(sp, mu, 0, 1, V, phi) == pytest.approx(12 * phi.inverse(16 * V))
        W = kr_w_matrix(sp, mu, V, phi)
        assert W[0, 1] == pytest.approx(12 * phi.inverse(16 * V))
    assert kr_w_distance(sp, mu, 0, 0, 0.5, PHI2) == 0.0
    with pytest.raises(ValueError):
        kr_w_distance(sp, mu, 0, 1, 0.0, PHI2)


def test_w_matrix_matches_pairwise(rng):
    sp = DiscreteMetricSpace.from_coordinates(np.sort(rng.uniform(0, 1, 12)))
    mu = DiscreteMeasure(rng.dirichlet(np.ones(12)))
    g = OrliczFunction.gaussian()
    W = kr_w_matrix(sp, mu, 0.7, g)
    for i, j in [(0, 11), (3, 4), (5, 9)]:
        assert W[i, j] == pytest.approx(kr_w_distance(sp, mu, i, j, 0.7, g), rel=1e-12)
    assert np.allclose(W, W.T)


def test_w_infinite_on_massless_interval():
    sp = DiscreteMetricSpace.from_coordinates([0.0, 1.0, 2.0])
    mu = DiscreteMeasure(np.array([0.0, 0.5, 0.5]))
    assert math.isinf(kr_w_distance(sp, mu, 0, 2, 0.5, PHI2))


def test_entropy_single_ball():
    sp = DiscreteMetricSpace.from_coordinates([0.0])
    assert entropy_integral_bound(sp, PsiFunction.constant(1.5), 1.0) == pytest.approx(13.5)


def test_entropy_monotone_and_zero():
    sp = DiscreteMetricSpace.from_coordinates(np.linspace(0, 1, 65))
    psi = PsiFunction.degenerate(2.0)
    d = np.array([0.0, 0.005, 0.02, 0.1, 0.5, 1.0])
    vals = entropy_integral_bound(sp, psi, d)
    assert vals[0] == 0.0
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        entropy_integral_bound(sp, psi, -1.0)


def test_entropy_left_rule_dominates_oracle():
    # integrand exp(v_*(ln 2 + ln N(eps))) with psi_(2) is (2N)^{1/2}; compare
    # with a dense midpoint quadrature using the same greedy covers
    from factorable.metric import covering_numbers_upper
    sp = DiscreteMetricSpace.from_coordinates(np.linspace(0, 1, 33))
    psi = PsiFunction.degenerate(2.0)
    delta = 0.4
    eps = np.linspace(1e-6, delta, 4001)
    mid = 0.5 * (eps[1:] + eps[:-1])
    f = np.sqrt(2.0 * covering_numbers_upper(sp, mid))
    oracle = 9 * float(np.sum(f * np.diff(eps)))
    got = entropy_integral_bound(sp, psi, delta)
    assert got >= oracle * (1 - 1e-3)
    assert got <= oracle * 1.1


def test_calibrate_c_theta_brute_force():
    x = np.linspace(0, 1, 9)
    sp = DiscreteMetricSpace.from_coordinates(x)
    mu = DiscreteMeasure.uniform(9)
    C = calibrate_c_theta(sp, mu, 2.0)
    r = np.linspace(1e-6, 1.0, 20_001)
    worst = max(float(np.max(r ** 2 / np.array([mu.weights[sp.dist[i] <= rr].sum() for rr in r]) ** 2))
                for i in (0, 4))
    assert worst <= C * (1 + 1e-12)
    assert C == pytest.approx(worst, rel=1e-3)


def test_kr_factor_toy_and_constant():
    x = np.linspace(0, 1, 17)
    sp = DiscreteMetricSpace.from_coordinates(x)
    mu = DiscreteMeasure.uniform(17)
    const = np.ones((50, 17))
    res = kr_factor_bound(const, sp, mu, p=4.0, theta_reg=2.0)
    assert np.all(res.z_samples == 0.0)
    # a deterministic Lipschitz path meets the moment condition with equality
    lin = np.tile(x, (3, 1))
    res = kr_factor_bound(lin, sp, mu, p=4.0, theta_reg=2.0)
    inc = np.abs(x[:, None] - x[None, :])
    bound = res.z_samples[0] ** 0.25 * res.coef
    assert np.all(inc <= bound * (1 + 1e-12))
    assert res.audits["moment_max_ratio"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        kr_factor_bound(2 * lin, sp, mu, p=4.0, theta_reg=2.0)
    with pytest.raises(ValueError):
        kr_factor_bound(lin, sp, mu, p=2.0, theta_reg=2.0)


def test_kr_modulus_bound_linear_and_rejections():
    sp, mu = two_points()
    g = OrliczFunction.gaussian()
    out = kr_modulus_bound(sp, mu, g, 0.5, [0.0, 1.0, 2.0], K=1.0)
    C2 = c2_constant(g, 1.0)
    np.testing.assert_allclose([o.bound for o in out], np.array([0.0, 1.0, 2.0]) / C2)
    single = kr_modulus_bound(sp, mu, g, 0.5, 1.0, K=1.0)
    assert single.bound == pytest.approx(1 / C2)
    with pytest.raises(ValueError):
        kr_modulus_bound(sp, mu, PHI2, 0.5, 1.0)


def test_kr_modulus_bound_with_values():
    ens = simulate_brownian(np.linspace(0, 1, 17), 500, seed=1)
    sp = DiscreteMetricSpace.from_coordinates(np.linspace(0, 1, 17))
    mu = DiscreteMeasure.uniform(17)
    g = OrliczFunction.gaussian()
    from factorable.metric import orlicz_distance
    d = orlicz_distance(ens, g)
    V = v_functional(ens.values, d, mu, g)
    W = kr_w_matrix(d, mu, V, g)
    top = float(W.max())
    res = kr_modulus_bound(d, mu, g, V, top, K=1.0, values=ens.values, w_matrix=W)
    assert res.empirical is not None
    assert res.empirical <= res.bound
