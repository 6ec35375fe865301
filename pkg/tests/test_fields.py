import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from factorable.fields import (FieldEnsemble, RngStreamSpec, apply_zm, simulate_brownian,
                               simulate_brownian_sheet, simulate_fbm, simulate_gaussian_field,
                               simulate_stable, zm_transform)

GRID = np.linspace(0, 1, 33)


def test_brownian_starts_at_zero_and_variance():
    ens = simulate_brownian(GRID, 20_000, seed=1)
    assert np.all(ens.values[:, 0] == 0.0)
    var = ens.values[:, -1].var()
    # chi-square sd of a variance estimate is sqrt(2/M)
    assert abs(var - 1.0) < 5 * math.sqrt(2 / 20_000)
    inc = np.diff(ens.values, axis=1)
    assert abs(np.corrcoef(inc[:, 3], inc[:, 10])[0, 1]) < 0.05


def test_determinism_across_threads():
    a = simulate_brownian(GRID, 300, seed=99, threads=1).values
    b = simulate_brownian(GRID, 300, seed=99, threads=4).values
    np.testing.assert_array_equal(a, b)
    c = simulate_brownian(GRID, 300, seed=100, threads=1).values
    assert not np.array_equal(a, c)


def test_prefix_stability():
    # realization i does not depend on M
    a = simulate_stable(1.5, GRID, 50, seed=4).values
    b = simulate_stable(1.5, GRID, 120, seed=4).values
    np.testing.assert_array_equal(a, b[:50])


def test_stream_rejects_bad_seed():
    with pytest.raises(ValueError):
        RngStreamSpec(-1)


def test_fbm_variance_and_validation():
    ens = simulate_fbm(0.3, GRID, 20_000, seed=2)
    np.testing.assert_allclose(ens.values.var(axis=0)[[8, 16, 32]],
                               GRID[[8, 16, 32]] ** 0.6, rtol=0.05)
    with pytest.raises(ValueError):
        simulate_fbm(1.2, GRID, 10, seed=0)


def test_fbm_half_is_brownian_in_law():
    ens = simulate_fbm(0.5, GRID, 20_000, seed=5)
    c = np.cov(ens.values[:, [8, 24]], rowvar=False)
    assert c[0, 1] == pytest.approx(min(GRID[8], GRID[24]), abs=0.02)


def test_gaussian_field_rejects_indefinite():
    with pytest.raises(ValueError):
        simulate_gaussian_field(np.arange(2.0), [[1.0, 2.0], [2.0, 1.0]], 10, seed=0)


def test_stable_tail_index():
    ens = simulate_stable(1.2, np.array([0.0, 1.0]), 100_000, seed=7)
    x = np.abs(ens.values[:, 1])
    # Hill estimator on the top 1% order statistics
    top = np.sort(x)[-1000:]
    hill = 1.0 / np.mean(np.log(top / top[0]))
    assert hill == pytest.approx(1.2, rel=0.15)
    # scale-1 symmetric stable: compare the median with scipy's quantile
    assert np.median(x) == pytest.approx(stats.levy_stable.ppf(0.75, 1.2, 0.0), rel=0.03)


def test_brownian_sheet_covariance():
    axes = (np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    ens = simulate_brownian_sheet(axes, 20_000, seed=8)
    g = ens.grid_values()
    assert np.all(g[:, 0, :] == 0) and np.all(g[:, :, 0] == 0)
    assert g[:, 4, 4].var() == pytest.approx(1.0, rel=0.05)
    cov = np.mean(g[:, 2, 4] * g[:, 4, 2])
    assert cov == pytest.approx(0.25, abs=0.03)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        FieldEnsemble(np.array([[1.0, np.inf]]))


def test_zm_examples():
    assert zm_transform(math.e - 1, 1.0) == pytest.approx(1.0)
    assert zm_transform(0.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        zm_transform(1.0, 0.0)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False),
       st.floats(0.1, 4.0))
def test_zm_odd_and_monotone(a, b, m):
    assert zm_transform(-a, m) == -zm_transform(a, m)
    lo, hi = min(a, b), max(a, b)
    assert zm_transform(lo, m) <= zm_transform(hi, m)


def test_apply_zm_records_provenance():
    ens = simulate_brownian(GRID, 10, seed=0)
    out = apply_zm(ens, 2.0)
    assert out.params["zm_m"] == 2.0
    np.testing.assert_array_equal(out.values, zm_transform(ens.values, 2.0))
