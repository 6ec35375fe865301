import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from factorable.factorize import (DegenerateFieldError, SequencePlan, build_factorization,
                                  default_sequences, factorize_modulus, heavy_tail_factorization,
                                  rectangle_factorization, solve_knots, tune_sequences,
                                  weaker_norm_factorization)
from factorable.fields import FieldEnsemble, simulate_brownian, simulate_brownian_sheet
from factorable.knots import EmpiricalModulus, KnotFunction
from factorable.metric import DiscreteMetricSpace
from factorable.modulus import ModulusEngine, theta_function
from factorable.orlicz import LuxemburgNorm, OrliczFunction

L2 = LuxemburgNorm(OrliczFunction.power(2))


@pytest.fixture(scope="module")
def brownian():
    return simulate_brownian(np.linspace(0, 1 / math.e, 513), 2000, seed=1)


def linear_ensemble(M=1000, n=257, seed=0, signs=False):
    """``eta * x`` on [0, 1]; with ``signs`` the slope is +-1 so ``|eta|_2 = 1``."""
    r = np.random.default_rng(seed)
    eta = r.choice([-1.0, 1.0], M) if signs else r.standard_normal(M)
    x = np.linspace(0, 1, n)
    return FieldEnsemble(eta[:, None] * x[None, :], DiscreteMetricSpace.from_coordinates(x))


# --- sequences -------------------------------------------------------------


def test_default_sequences_values():
    plan = default_sequences()
    n = np.arange(1, 41)
    np.testing.assert_allclose(plan.a, n ** -2.0)
    raw = 1 / (n * np.log(n + 1) ** 2)
    np.testing.assert_allclose(plan.b, raw / raw.sum(), rtol=1e-14)
    assert plan.b.sum() == pytest.approx(1.0, abs=1e-14)
    assert plan.b[0] == pytest.approx(0.66750636, rel=1e-7)


def test_default_sequences_audit():
    audit = default_sequences().audit()
    assert audit["b_decreasing"]
    # a_n / b_n ~ ln^2(n+1) / n decays only logarithmically
    assert not audit["ratio_decay"]
    assert default_sequences(N=40).ratio[-1] / default_sequences(N=40).ratio[0] == pytest.approx(0.72, abs=0.01)


@pytest.mark.parametrize("bad", [
    dict(a=[1.0, 1.0], b=[0.5, 0.5]),
    dict(a=[1.0, 0.5], b=[0.5, -0.5]),
    dict(a=[1.0, 0.5], b=[0.3, 0.3]),
    dict(a=[1.0], b=[0.5, 0.5]),
])
def test_plan_validation(bad):
    with pytest.raises(ValueError):
        SequencePlan(**bad)


def test_default_sequences_validation():
    with pytest.raises(ValueError):
        default_sequences(nu=0)
    with pytest.raises(ValueError):
        default_sequences(N=2)


@given(st.floats(0.2, 4.0), st.floats(0.2, 4.0), st.integers(3, 80))
def test_default_sequences_invariants(nu, th, N):
    plan = default_sequences(nu, th, N)
    assert np.all(np.diff(plan.a) < 0) and np.all(plan.a > 0)
    assert np.all(plan.b > 0)
    assert plan.b.sum() == pytest.approx(1.0, abs=1e-12)


# --- knot solver -----------------------------------------------------------


def test_solve_knots_linear_theta():
    x = np.linspace(0, 1, 10_001)
    sol = solve_knots(EmpiricalModulus(x, x), default_sequences())
    np.testing.assert_allclose(sol.deltas, np.arange(1, 41) ** -2.0, atol=1e-12)
    assert not sol.clamped.any() and sol.usable.all()


def test_solve_knots_clamps_high_levels():
    x = np.linspace(0, 1, 101)
    sol = solve_knots(EmpiricalModulus(x, 0.3 * x), default_sequences())
    # a_1 = 1 and a_2 = 0.25 versus theta(1) = 0.3
    assert sol.clamped[0] and not sol.clamped[1]
    assert sol.deltas[0] == 1.0
    assert sol.deltas[1] == pytest.approx(0.25 / 0.3)


def test_solve_knots_isotonic_repair():
    x = np.linspace(0, 1, 5)
    y = np.array([0.0, 0.4, 0.3, 0.8, 1.0])
    sol = solve_knots(KnotFunction(x, y), SequencePlan.explicit([0.9, 0.35], [1, 1]))
    # the isotonic fit pools 0.4 and 0.3 into 0.35; the maximal solution is the pool's end
    np.testing.assert_allclose(sol.theta_iso.y, [0.0, 0.35, 0.35, 0.8, 1.0])
    assert sol.deltas[1] == pytest.approx(0.5)
    assert sol.deltas[0] == pytest.approx(0.875)


def test_solve_knots_rejects_zero_theta():
    x = np.linspace(0, 1, 5)
    with pytest.raises(DegenerateFieldError):
        solve_knots(EmpiricalModulus(x, np.zeros(5)), default_sequences())


# --- construction ----------------------------------------------------------


def test_single_knot_toy():
    ens = linear_ensemble(signs=True)
    engine = ModulusEngine(ens.values, ens.space)
    grid = ens.space.distinct_distances
    theta = theta_function(ens, None, grid, L2, engine=engine)
    plan = SequencePlan.explicit([0.5], [1.0])
    res = factorize_modulus(engine.at, theta, plan, L2, candidates=grid, min_knots=1)
    # |eta| = 1, Delta(delta) = delta: the knot is 1/2 and tau = Delta(1/2) / (1/2) = 1
    assert res.deltas[0] == pytest.approx(0.5)
    np.testing.assert_allclose(res.tau, 1.0)
    assert res.g(0.5) == pytest.approx(0.5)
    assert res.pathwise_ok().all()
    with pytest.raises(ValueError):
        factorize_modulus(engine.at, theta, plan, L2, candidates=grid)


def test_linear_field_knots_and_tau():
    ens = linear_ensemble(signs=True, n=4097)
    res = build_factorization(ens)
    # theta(delta) = delta, so the knots are a_n rounded down to the grid
    h = 1 / 4096
    expected = np.floor(res.a / h * (1 + 1e-12)) * h
    np.testing.assert_allclose(np.floor(res.deltas / h * (1 + 1e-9)) * h, expected, atol=1e-15)
    assert res.pathwise_ok().all()
    assert res.meta["tau0_norm"] == pytest.approx(1.0)


def test_brownian_factorization_invariants(brownian):
    res = build_factorization(brownian)
    assert res.pathwise_ok().all()
    assert res.meta["tau0_norm"] == pytest.approx(1.0, rel=1e-9)
    assert res.g.is_nondecreasing()
    assert res.g(0.0) == 0.0
    exact = L2(res.moduli, axis=0)
    assert np.all(exact <= res.a * (1 + 1e-12))
    assert np.all(np.isinf(res.envelope([res.deltas.max() * 1.5])))
    # the bound holds off the knots too, at every grid delta below the top knot
    deltas = brownian.space.distinct_distances[1:200]
    deltas = deltas[deltas <= res.deltas.max()]
    D = ModulusEngine(brownian.values, brownian.space).at(deltas)
    bound = res.tau0[:, None] * res.envelope(deltas)[None, :]
    assert np.all(D <= bound * (1 + 1e-12))


def test_scaling_covariance():
    # multiplying the field by c and the levels a_n by c leaves knots and factor unchanged
    ens = linear_ensemble(n=1025, seed=3)
    plan = default_sequences()
    c = 3.0
    scaled_plan = SequencePlan(plan.a * c, plan.b)
    r1 = build_factorization(ens, plan=plan)
    r2 = build_factorization(ens.with_values(c * ens.values), plan=scaled_plan)
    np.testing.assert_allclose(r2.deltas, r1.deltas, rtol=1e-12)
    np.testing.assert_allclose(r2.tau, r1.tau, rtol=1e-9)
    np.testing.assert_allclose(r2.g.y, c * r1.g.y, rtol=1e-9)


def test_held_out_factor(brownian):
    res = build_factorization(brownian)
    fresh = simulate_brownian(brownian.space.line_coords, 2000, seed=2)
    D = ModulusEngine(fresh.values, fresh.space).at(res.deltas)
    tau = res.tau_for(D)
    assert np.all(D <= tau[:, None] * (res.a / res.b)[None, :] * (1 + 1e-12))
    assert L2(tau) == pytest.approx(res.tau_norm, rel=0.1)


def test_constant_ensemble_rejected():
    ens = FieldEnsemble(np.ones((10, 5)), DiscreteMetricSpace.from_coordinates(np.arange(5.0)))
    with pytest.raises(DegenerateFieldError):
        build_factorization(ens)


def test_weaker_norm(brownian):
    res = weaker_norm_factorization(brownian, None, OrliczFunction.gaussian(),
                                    OrliczFunction.exp_power(1))
    assert res.pathwise_ok().all()
    assert res.meta["weak"] == "Theta_1"
    assert res.meta["sup_norm_strong"] > 0
    g = OrliczFunction.gaussian()
    with pytest.raises(ValueError):
        weaker_norm_factorization(brownian, None, g, g)


def test_heavy_tail_on_gaussian_input(brownian):
    res = heavy_tail_factorization(brownian, 1.0)
    assert res.kind == "modified (weak) factorable modulus"
    assert res.pathwise_ok().all()
    assert res.meta["zm_m"] == 1.0


def test_rectangle_product_knots():
    a = np.arange(33) / 32
    r = np.random.default_rng(0)
    eta = r.choice([-1.0, 1.0], 400)
    values = eta[:, None] * np.multiply.outer(a, a).ravel()[None, :]
    ens = FieldEnsemble(values, axes=(a, a))
    res = rectangle_factorization(ens)
    # Omega(s, s) = s^2 on the grid, so the effective knot is the largest k/32 with (k/32)^2 <= a_n
    k = np.floor(32 * np.sqrt(res.a) * (1 + 1e-12))
    np.testing.assert_allclose(np.floor(32 * res.deltas * (1 + 1e-12)), k)
    np.testing.assert_allclose(res.moduli[0], (k / 32) ** 2, rtol=1e-12)
    assert res.kind == "rectangle"
    assert res.pathwise_ok().all()


def test_rectangle_brownian_sheet():
    ax = np.linspace(0, 1, 33)
    ens = simulate_brownian_sheet((ax, ax), 500, seed=4)
    res = rectangle_factorization(ens)
    assert res.pathwise_ok().all()
    assert res.meta["tau0_norm"] == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValueError):
        rectangle_factorization(simulate_brownian(ax, 10, seed=0))


def test_tune_sequences_is_heuristic():
    ens = simulate_brownian(np.linspace(0, 1 / math.e, 129), 300, seed=5)
    out = tune_sequences(ens, 0.01, nu_grid=(1.0, 2.0), theta_grid=(1.0,), N=20)
    assert out["heuristic"]
    assert len(out["table"]) == 2
    assert out["best"]["g_ref"] == min(r["g_ref"] for r in out["table"])
