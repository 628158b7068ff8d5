import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gfrk.diagnostics import (
    RefinementResult,
    TimeSeries,
    fit_order,
    gauss_dissipation_residual,
    l2_error,
    linf_error,
    loglog_slope,
    mass,
    roughness,
)
from gfrk.integrators import first_step, History, leqrk_pc_step
from gfrk.models import make_cahn_hilliard, make_mbe
from gfrk.spectral import Field, Grid
from gfrk.tableau import dirk4, gauss4

from conftest import smooth_random

seeds = st.integers(0, 2**32 - 1)


def brute_dot(g, u, v):
    total = 0.0
    for i in range(g.nx):
        for j in range(g.ny):
            total += u[i, j] * v[i, j]
    return total * g.hx * g.hy


def test_l2_error_examples(grid16):
    f = Field.from_function(grid16, lambda x, y: np.sin(x + 2 * y))
    assert l2_error(f, f) == 0
    shifted = Field(grid16, f.data + 1)
    assert l2_error(shifted, f) == pytest.approx(2 * math.pi, rel=1e-14)


@given(seed=seeds)
def test_l2_error_matches_loop_oracle(seed):
    g = Grid(8, 6, 1.3, 0.4)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=g.shape), rng.normal(size=g.shape)
    expected = math.sqrt(brute_dot(g, a - b, a - b))
    assert l2_error(Field(g, a), Field(g, b)) == pytest.approx(expected, rel=1e-14)


@given(seed=seeds, scale=st.floats(1e-3, 1e3))
def test_norms_scale_linearly_and_are_ordered(seed, scale):
    g = Grid(8, 8, 2.0, 1.0)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=g.shape), rng.normal(size=g.shape)
    zero = Field(g, np.zeros(g.shape))
    e2, ei = l2_error(Field(g, a - b), zero), linf_error(Field(g, a - b), zero)
    assert l2_error(Field(g, scale * (a - b)), zero) == pytest.approx(scale * e2, rel=1e-13)
    assert linf_error(Field(g, scale * (a - b)), zero) == pytest.approx(scale * ei, rel=1e-14)
    assert ei <= e2 / math.sqrt(g.hx * g.hy) * (1 + 1e-14)


def test_linf_examples(grid16):
    f = Field(grid16, np.zeros(grid16.shape))
    assert linf_error(f, f) == 0
    bumped = f.data.copy()
    bumped[3, 5] = 1e-3
    assert linf_error(Field(grid16, bumped), f) == 1e-3
    with pytest.raises(ValueError):
        linf_error(f, Field(Grid(16, 16, 1.0, 1.0), f.data))


def test_roughness_examples(grid16):
    assert roughness(Field(grid16, np.full(grid16.shape, 2.0))) == pytest.approx(0.0, abs=1e-15)
    s = Field.from_function(grid16, lambda x, y: np.sin(x))
    assert roughness(s) == pytest.approx(1 / math.sqrt(2), rel=1e-14)


@given(seed=seeds, shift=st.floats(-10, 10))
def test_roughness_shift_invariant_and_oracle(seed, shift):
    g = Grid(8, 8, 1.0, 3.0)
    u = np.random.default_rng(seed).normal(size=g.shape)
    r = roughness(Field(g, u))
    assert roughness(Field(g, u + shift)) == pytest.approx(r, abs=1e-13 * max(1.0, abs(shift)))
    mean = brute_dot(g, u, np.ones(g.shape)) / g.area
    assert r == pytest.approx(math.sqrt(brute_dot(g, u - mean, u - mean) / g.area), rel=1e-13)


def test_mass_examples(grid16):
    assert mass(Field(grid16, np.ones(grid16.shape))) == pytest.approx(4 * math.pi**2, rel=1e-15)
    assert abs(mass(Field.from_function(grid16, lambda x, y: np.cos(x) * np.sin(y)))) < 1e-12
    u = np.random.default_rng(0).normal(size=grid16.shape)
    assert mass(Field(grid16, u)) == pytest.approx(brute_dot(grid16, u, np.ones(grid16.shape)), rel=1e-13)


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0, -1 / 3])
def test_slopes_of_pure_powers(p):
    x = np.array([0.1, 0.05, 0.025, 0.0125])
    assert loglog_slope(x, x**p) == pytest.approx(p, abs=1e-10)


def test_constant_series_has_zero_slope():
    assert loglog_slope([1, 2, 4, 8], [3.0] * 4) == pytest.approx(0.0, abs=1e-14)


def test_fit_order():
    dts = [0.1, 0.05, 0.025, 0.0125]
    r = RefinementResult(dts, [d**2 for d in dts], [d**4 for d in dts])
    l2, linf = fit_order(r)
    assert l2 == pytest.approx(2.0, abs=1e-10) and linf == pytest.approx(4.0, abs=1e-10)
    assert r.fitted_order_l2 == l2 and r.fitted_order_linf == linf
    with pytest.raises(ValueError):
        fit_order(RefinementResult(dts[:2], [1, 2], [1, 2]))


@pytest.mark.parametrize(
    "dts,l2,linf",
    [([0.1, 0.2, 0.05], [1, 1, 1], [1, 1, 1]), ([0.1, 0.05], [1, 0], [1, 1]), ([0.1], [1, 2], [1])],
)
def test_refinement_result_validation(dts, l2, linf):
    with pytest.raises(ValueError):
        RefinementResult(dts, l2, linf)


def test_refinement_csv_round_trip(tmp_path):
    r = RefinementResult([0.1, 0.05, 0.025], [1e-3, 1.2345678901234567e-4, 3e-5], [2e-3, 2e-4, 2e-5])
    path = tmp_path / "ref.csv"
    r.to_csv(path)
    assert path.read_text().splitlines()[0] == "dt,l2,linf"
    back = RefinementResult.from_csv(path)
    assert back.dts == r.dts and back.l2_errors == r.l2_errors and back.linf_errors == r.linf_errors


def test_timeseries_csv_round_trip(tmp_path):
    ts = TimeSeries()
    rng = np.random.default_rng(0)
    for i in range(5):
        ts.append(0.1 * i, *rng.normal(size=4))
    path = tmp_path / "series.csv"
    ts.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,energy,energy_eq,mass,roughness"
    back = TimeSeries.from_csv(path)
    assert list(back.rows()) == list(ts.rows())


def test_timeseries_requires_increasing_time():
    ts = TimeSeries()
    ts.append(0.0, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        ts.append(0.0, 1, 1, 1, 1)


def test_timeseries_rejects_foreign_csv(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        TimeSeries.from_csv(path)


def test_dissipation_identity_equilibrium(grid16):
    m = make_cahn_hilliard(grid16, 1.0, 0.5)
    state = m.initial_state(np.ones(grid16.shape))
    new, rec = first_step(m, gauss4(), state, 0.1)
    assert gauss_dissipation_residual(m, gauss4(), rec, state, new, 0.1) < 1e-12


@pytest.mark.parametrize("factory", [make_cahn_hilliard, make_mbe])
def test_dissipation_identity_random(factory):
    g = Grid(32, 32)
    m = factory(g, 1.0, 0.3)
    rng = np.random.default_rng(12)
    for _ in range(3):
        state = m.initial_state(smooth_random(g, rng))
        mid, rec0 = first_step(m, gauss4(), state, 1e-3)
        new, rec = leqrk_pc_step(m, gauss4(), mid, History(state, rec0), 1e-3)
        res = gauss_dissipation_residual(m, gauss4(), rec, mid, new, 1e-3)
        assert res < 1e-8 * abs(m.energy_of(mid))


def test_dissipation_identity_refuses_dirk(grid16):
    m = make_cahn_hilliard(grid16, 1.0, 0.5)
    state = m.initial_state(np.ones(grid16.shape))
    new, rec = first_step(m, dirk4(), state, 0.1)
    with pytest.raises(ValueError):
        gauss_dissipation_residual(m, dirk4(), rec, state, new, 0.1)
