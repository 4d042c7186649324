"""Hand-derived reference values for every module, one small case each."""

import math

import numpy as np
import pytest

from wpmelab import (BoundaryData, DomainError, ExplicitFamily, GridFunction, ProblemParams,
                     SolverOptions, WeightSpec, derive_exponents, existence_time,
                     explicit_value, make_grid, shoot_profile, solve)
from wpmelab.grid import integrate_weighted
from wpmelab.harness import experiment_config
from wpmelab.harness.experiments import _smoothing_run
from wpmelab.model import weight_cell_mass, weight_eval
from wpmelab.norms import (cutoff_norm_pr, ell_tail, embedding_check, limsup_rate, norm_1r,
                           norm_inf_r, norm_phi_alpha, norm_pr, truncate)
from wpmelab.profiles import (barrier_value, calibrate_barrier, compact_profile,
                              separable_solution)
from wpmelab.solver import bc_value, detect_blowup, step_implicit

P = ProblemParams(3, 2.0, WeightSpec(1.0))
TWO_PI = 2 * math.pi


def test_unweighted_exponents():
    # classical N/(N(m-1)+2) with N=3, m=2
    e = derive_exponents(ProblemParams(3, 2.0, WeightSpec(0.0)))
    assert e.lambda1 == pytest.approx(0.6) and e.theta == pytest.approx(2 / 3)


def test_weight_values():
    assert weight_eval(WeightSpec(1.0), 2.0) == 0.5
    assert weight_eval(WeightSpec(1.0, kind="regularized_power", eps=0.0), 2.0) == 0.5
    with pytest.raises(DomainError):
        weight_eval(WeightSpec(1.0), 0.0)


def test_ball_masses():
    w = WeightSpec(1.0)
    assert weight_cell_mass(w, 3, 0.0, 1.0) == pytest.approx(TWO_PI, rel=1e-14)
    assert weight_cell_mass(w, 3, 0.0, 3.0) == pytest.approx(TWO_PI * 9, rel=1e-14)
    assert weight_cell_mass(w, 3, 2.0, 2.0) == 0.0


def test_existence_time_values():
    assert existence_time(0.0, 2.0, 1.0) == math.inf
    assert existence_time(2.0, 2.0, 1.0) == 0.5


def test_grid_values():
    assert np.allclose(np.diff(make_grid(1.0, 100).nodes), 0.01)
    g = make_grid(1e3, 400, 1.01)
    assert g.widths[-1] / g.widths[0] == pytest.approx(1.01**399, rel=1e-9)
    g = make_grid(50.0, 200, 1.02, weight=WeightSpec(1.0))
    assert g.cell_weight_mass.sum() == pytest.approx(TWO_PI * 2500, rel=1e-10)
    one = g.sample(np.ones_like)
    assert integrate_weighted(one, 1.0) == pytest.approx(TWO_PI, rel=1e-10)
    assert integrate_weighted(g.sample(np.zeros_like)) == 0.0
    lin = integrate_weighted(g.sample(lambda y: y), 10.0)
    assert lin == pytest.approx(4 * math.pi / 3 * 1000, rel=1e-3)


@pytest.fixture(scope="module")
def g50():
    return make_grid(50.0, 400, weight=WeightSpec(1.0))


def test_norm_values(g50):
    one, lin, zero = (g50.sample(np.ones_like), g50.sample(lambda y: y), g50.sample(np.zeros_like))
    assert norm_1r(one, 2.0, 1.0).value == pytest.approx(TWO_PI, rel=1e-10)
    assert norm_1r(one, 2.0, 1.0).argmax_R == 1.0
    for r in (1.0, 3.0, 10.0):
        assert norm_1r(lin, 2.0, r).value == pytest.approx(4 * math.pi / 3, rel=1e-3)
        assert norm_inf_r(lin, 2.0, r).value == pytest.approx(1.0)
        assert norm_inf_r(one, 2.0, r).value == pytest.approx(1 / r)
    assert norm_1r(zero, 2.0).value == 0.0
    cut = cutoff_norm_pr(lin, 2.0, 1.0, 1.0).value
    assert 4 * math.pi / 3 <= cut <= 8 * 4 * math.pi / 3


def test_cutoff_agrees_inside_support(g50):
    f = g50.sample(lambda y: np.maximum(1 - y, 0.0))
    plain = norm_pr(f, 2.0, 1.0, 1.0)
    cut = cutoff_norm_pr(f, 2.0, 1.0, 1.0)
    assert plain.argmax_R == 1.0 and cut.value == pytest.approx(plain.value, rel=1e-14)


def test_tail_values():
    g = make_grid(1000.0, 1200, 1.006, weight=WeightSpec(1.0))
    one = ell_tail(g.sample(np.ones_like), 2.0)
    np.testing.assert_allclose(one.values, TWO_PI / np.asarray(one.radii), rtol=1e-3)
    assert one.in_X0
    lin = ell_tail(g.sample(lambda y: y), 2.0)
    np.testing.assert_allclose(lin.values, 4 * math.pi / 3, rtol=5e-3)
    assert not lin.in_X0
    assert ell_tail(g.sample(np.zeros_like), 2.0).limit_estimate == 0.0
    assert limsup_rate(g.sample(lambda y: y), 2.0).far_field_ratio == pytest.approx(1.0)
    assert limsup_rate(g.sample(np.ones_like), 2.0).norm_tail < 3e-3
    osc = limsup_rate(g.sample(lambda y: y + np.sin(y)), 2.0)
    assert osc.norm_tail == pytest.approx(1.0, abs=3e-3)
    assert osc.far_field_ratio == pytest.approx(1.0, abs=3e-3)


def test_phi_alpha_values():
    # fixed spacing, so only the tail beyond R changes
    vals = [norm_phi_alpha(make_grid(R, int(40 * R), weight=WeightSpec(1.0)).sample(np.ones_like),
                           5.0, 2.0).value for R in (5.0, 10.0, 20.0)]
    # tail of 4 pi y (1 + y^2)^-5 decays like R^-8
    assert (vals[2] - vals[1]) / (vals[1] - vals[0]) == pytest.approx(2.0**-8, rel=0.2)
    g = make_grid(50.0, 200, weight=WeightSpec(1.0))
    assert norm_phi_alpha(g.sample(np.zeros_like), 3.0, 2.0).value == 0.0
    chk = embedding_check(g.sample(lambda y: y), 3.0, 2.0)
    assert chk.slack >= 0


def test_truncation_values():
    g = make_grid(10.0, 100)
    f = g.sample(lambda y: y)
    t2 = truncate(f, 2.0)
    y = g.nodes
    np.testing.assert_allclose(t2.values, np.where(y < 2, np.minimum(y, 2), 0.0))
    assert np.all(np.abs(t2.values) <= np.abs(f.values))
    gw = make_grid(50.0, 200, weight=WeightSpec(1.0))
    h = gw.sample(lambda s: s * (1 + np.sin(s)))
    norms = [norm_1r(truncate(h, n), 2.0).value for n in (2.0, 5.0, 20.0, 50.0)]
    assert np.all(np.diff(norms) >= 0) and norms[-1] <= norm_1r(h, 2.0).value * (1 + 1e-12)


def test_explicit_values():
    fam = ExplicitFamily(P, 1.0, 1 / 6)
    assert explicit_value(fam, 0.0, 0.0) == 1.0
    for t in (0.9, 0.99, 0.999):
        assert explicit_value(fam, 0.0, t) * (1 - t) ** (2 / 3) == pytest.approx(1.0)
    sep = ExplicitFamily(P, 0.0, 1 / 6)
    y = np.array([1.0, 2.0, 5.0])
    np.testing.assert_allclose(explicit_value(sep, y, 0.5), (1 / 6) * y / 0.5)


def test_separable_values(g50):
    prof = shoot_profile(P, 1.0, 1.0, g50)
    np.testing.assert_array_equal(separable_solution(prof, 0.0).values, prof.W_samples)
    U = separable_solution(prof, 0.5)
    np.testing.assert_allclose(U.values, 2 * prof.W_samples)
    assert norm_inf_r(U, 2.0).value == pytest.approx(2 * norm_inf_r(prof.W, 2.0).value)
    bc = BoundaryData.separable(prof.W, 1.0, 2.0)
    assert bc_value(bc, 0.0, 50.0) == prof.W_samples[-1]


def test_barrier_values(g50):
    zero = calibrate_barrier(g50.sample(np.zeros_like), P)
    assert zero.A > 0
    lin = calibrate_barrier(g50.sample(lambda y: y), P)
    assert lin.A >= 1.0
    assert np.all(np.diff([barrier_value(lin, 3.0, t) for t in np.linspace(0, 0.9 * lin.S, 9)]) > 0)


def test_compact_values():
    g = make_grid(10.0, 100, weight=WeightSpec(1.0))
    f = compact_profile(g, 2.0, 3.0, 2.0, 1.0)
    assert f.values[0] == 6.0 and np.all(f.values[g.nodes >= 2.0] == 0)
    masses = [integrate_weighted(compact_profile(make_grid(10.0, M, weight=WeightSpec(1.0)),
                                                 2.0, 3.0, 2.0, 1.0)) for M in (100, 200, 400)]
    # 3 (2 - y) on B_2 with rho = 1/y: 12 pi int_0^2 (2 - y) y dy = 16 pi, second order
    err = np.abs(np.array(masses) - 16 * math.pi)
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.05) and err[2] < 1e-4 * 16 * math.pi


def test_step_values(g50):
    c = g50.sample(lambda y: np.full_like(y, 3.0))
    np.testing.assert_allclose(step_implicit(c, 0.1, BoundaryData(), 2.0).values, 3.0, rtol=1e-14)
    fam = ExplicitFamily(P, 1.0, 1 / 6)
    bc = BoundaryData("dirichlet_explicit", family=fam)
    assert bc_value(bc, 0.0, 50.0) == pytest.approx(1 + 50 / 6)
    dt = 1e-3
    one = step_implicit(g50.sample(fam.datum), dt, bc, 2.0)
    exact = explicit_value(fam, g50.nodes, dt)
    assert np.max(np.abs(one.values - exact) / exact) < 1e-3


def test_blowup_values():
    t = np.linspace(0, 0.95, 40)
    assert detect_blowup(t, (1 - t) ** -1.0, 2.0).T_fit == pytest.approx(1.0, rel=1e-12)
    assert detect_blowup(t, np.exp(-t), 2.0) is None
    g = make_grid(20.0, 64, weight=WeightSpec(1.0))
    tr = solve(P, g.sample(lambda y: np.exp(-y)), 1.0)
    assert tr.blowup is None
    assert all(ev["kind"] != "blowup" for ev in tr.events)


def test_smoothing_rejects_zero_datum():
    cfg = experiment_config("smoothing")
    zero = GridFunction(cfg.grid.build(cfg.params), np.zeros(cfg.grid.M + 1))
    with pytest.raises(DomainError):
        _smoothing_run(cfg, zero, 5, 1.0)


def test_zero_flux_explicit_growth_monotone():
    fam = ExplicitFamily(P, 1.0, 1 / 6)
    g = make_grid(50.0, 100, weight=WeightSpec(1.0))
    tr = solve(P, g.sample(fam.datum), 0.5, SolverOptions(bc_mode="dirichlet_explicit"),
               BoundaryData("dirichlet_explicit", family=fam))
    scaled = tr.times[1:, None] * tr.values()[1:]
    assert np.all(np.diff(scaled, axis=0) >= 0)
