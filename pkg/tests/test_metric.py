import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from factorable.fields import simulate_brownian
from factorable.metric import (DiscreteMeasure, DiscreteMetricSpace, ball_mass, covering_number,
                               covering_numbers_upper, extended_integer_space, gaussian_distance,
                               natural_distance, orlicz_distance)
from factorable.orlicz import OrliczFunction, PsiFunction


def brute_cover(dist, eps):
    n = dist.shape[0]
    adj = dist <= eps
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            if adj[:, list(combo)].any(axis=1).all():
                return k
    return n


def test_space_validation():
    with pytest.raises(ValueError):
        DiscreteMetricSpace.from_matrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        DiscreteMetricSpace.from_matrix([[1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        DiscreteMetricSpace.from_matrix([[0.0, -1.0], [-1.0, 0.0]])


def test_extended_integer_distances():
    sp = extended_integer_space(10)
    i3, i2, i4, inf = sp.index(3), sp.index(2), sp.index(4), sp.index(math.inf)
    assert sp.dist[i3, inf] == pytest.approx(1 / 3)
    assert sp.dist[inf, inf] == 0.0
    assert sp.dist[i2, i4] == pytest.approx(1 / 4)
    assert sp.diameter == 1.0
    audit = sp.check_axioms()
    assert audit["symmetric"] and audit["triangle"] and not audit["pseudometric"]


def test_pseudometric_flagged_not_rejected():
    sp = DiscreteMetricSpace.from_matrix([[0, 0, 1], [0, 0, 1], [1, 1, 0]])
    assert sp.check_axioms()["pseudometric"]


def test_triangle_violation_reported():
    sp = DiscreteMetricSpace.from_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    audit = sp.check_axioms()
    assert not audit["triangle"]
    assert audit["triangle_max_excess"] == pytest.approx(3.0)


def test_covering_fine_grid():
    grid = np.arange(1001) / 1000.0
    sp = DiscreteMetricSpace.from_coordinates(grid)
    res = covering_number(sp, None, 0.25)
    # two closed balls of radius 1/4 centered at 1/4 and 3/4 cover [0, 1]
    assert res.lower <= 2 <= res.upper
    assert res.upper == 2


def test_covering_extended_integers_against_brute_force():
    sp = extended_integer_space(64)
    for eps in (0.1, 0.2, 0.35):
        res = covering_number(sp, None, eps)
        # brute force on the same instance is too large; the points beyond
        # 1/eps cluster in one ball, so compress them for the oracle
        inv = np.array([1.0 / k for k in range(1, 65)] + [0.0])
        keep = inv > eps / 4
        small = np.concatenate([inv[keep], [0.0]])
        oracle = brute_cover(np.abs(small[:, None] - small[None, :]), eps)
        assert res.lower <= oracle + 1
        assert oracle <= res.upper + 1
        assert res.lower <= res.upper


def test_covering_exact_small(rng):
    for _ in range(5):
        pts = rng.uniform(0, 1, (9, 2))
        sp = DiscreteMetricSpace.from_coordinates(pts)
        for eps in (0.15, 0.3, 0.6):
            res = covering_number(sp, None, eps)
            assert res.exact == brute_cover(sp.dist, eps)
            assert res.lower <= res.exact <= res.upper
            centers = list(res.centers)
            assert np.all((sp.dist[:, centers] <= eps).any(axis=1))


@given(st.integers(0, 5000))
def test_cover_bracket_property(seed):
    r = np.random.default_rng(seed)
    sp = DiscreteMetricSpace.from_coordinates(r.uniform(0, 1, (30, 2)))
    eps = r.uniform(0.05, 0.6)
    res = covering_number(sp, None, eps)
    assert 1 <= res.lower <= res.upper <= sp.n
    assert covering_numbers_upper(sp, [sp.diameter])[0] == 1


def test_covering_numbers_upper_monotone():
    sp = DiscreteMetricSpace.from_coordinates(np.linspace(0, 1, 101))
    eps = np.geomspace(0.005, 1, 30)
    n = covering_numbers_upper(sp, eps)
    assert np.all(np.diff(n) <= 0)


def test_ball_mass_cases():
    sp = DiscreteMetricSpace.from_coordinates(np.arange(5.0))
    mu = DiscreteMeasure.uniform(5)
    assert ball_mass(sp, mu, 0, 0.0) == pytest.approx(0.2)
    assert ball_mass(sp, mu, 2, 1.0) == pytest.approx(0.6)
    assert ball_mass(sp, mu, 0, 10.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ball_mass(sp, mu, 0, -1.0)
    with pytest.raises(ValueError):
        DiscreteMeasure(np.array([0.5, 0.6]))


def test_natural_distance_l2_brownian():
    grid = np.linspace(0, 1, 9)
    ens = simulate_brownian(grid, 40_000, seed=3)
    sp = natural_distance(ens, PsiFunction.degenerate(2.0))
    # E (w_t - w_s)^2 = |t - s|
    target = np.sqrt(np.abs(grid[:, None] - grid[None, :]))
    np.testing.assert_allclose(sp.dist, target, atol=0.02)
    assert sp.check_axioms()["triangle"]


def test_natural_distance_gls_matches_pairwise():
    r = np.random.default_rng(0)
    v = r.standard_normal((500, 4))
    psi = PsiFunction("power", 0.5)
    sp = natural_distance(v, psi, p_grid=[2.0, 4.0])
    from factorable.orlicz import grand_lebesgue_norm
    assert sp.dist[0, 3] == pytest.approx(grand_lebesgue_norm(v[:, 0] - v[:, 3], psi, [2.0, 4.0]))


def test_orlicz_and_gaussian_distance():
    v = np.array([[0.0, 1.0, -1.0], [0.0, -1.0, 1.0]])
    sp = orlicz_distance(v, OrliczFunction.power(2))
    assert sp.dist[0, 1] == pytest.approx(1.0)
    assert sp.dist[1, 2] == pytest.approx(2.0)
    g = gaussian_distance(v)
    # sample variance (ddof 1) of (1 - (-1), -1 - 1) = (2, -2) is 8
    assert g.dist[1, 2] == pytest.approx(math.sqrt(8.0))
    assert g.dist[0, 0] == 0.0
