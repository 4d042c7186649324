import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from wpmelab import DomainError, ProblemParams, WeightSpec, derive_exponents, existence_time
from wpmelab.model import sphere_area, weight_cell_mass, weight_eval, weight_moment


def test_sphere_area_low_dimensions():
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)


def test_exponents_reference_case(params):
    # lambda1 = 2/(2+1), theta = 1/2, kappa = 2/3, rate = 1
    e = derive_exponents(params)
    assert e.lambda1 == pytest.approx(2 / 3, abs=1e-15)
    assert e.theta == pytest.approx(0.5, abs=1e-15)
    assert e.kappa == pytest.approx(2 / 3, abs=1e-15)
    assert e.critical_rate == pytest.approx(1.0, abs=1e-15)
    assert params.exponents == e


def test_exponents_unweighted_case():
    # gamma=0, N=3, m=3: lambda1 = 3/(6+2) = 3/8, theta = 2/3
    e = derive_exponents(ProblemParams(3, 3.0, WeightSpec(0.0)))
    assert e.lambda1 == pytest.approx(0.375)
    assert e.theta == pytest.approx(2 / 3)
    assert e.critical_rate == pytest.approx(1.0)


@given(N=st.integers(3, 12), gamma=st.floats(0.0, 1.999), m=st.floats(1.001, 20.0))
def test_exponent_identity(N, gamma, m):
    e = derive_exponents(ProblemParams(N, m, WeightSpec(gamma)))
    assert abs(e.identity_defect) <= 1e-14
    assert 0 < e.lambda1 and 0 < e.theta <= 1


@pytest.mark.parametrize("kwargs", [
    {"gamma": 2.0}, {"gamma": -0.1}, {"gamma": 1.0, "k": 2.0, "K": 1.0},
    {"gamma": 1.0, "k": 0.0}, {"gamma": 1.0, "kind": "bogus"},
    {"gamma": 1.0, "kind": "user_radial", "table_y": (1.0,), "table_rho": (1.0,)},
])
def test_weight_rejects_bad_specs(kwargs):
    with pytest.raises(DomainError):
        WeightSpec(**kwargs)


def test_weight_rejects_violated_sandwich():
    # rho = 10 y^-1 exceeds K y^-1 with K = 1
    y = np.geomspace(1e-3, 1e3, 20)
    with pytest.raises(DomainError):
        WeightSpec(1.0, kind="user_radial", table_y=tuple(y), table_rho=tuple(10 / y))


@pytest.mark.parametrize("bad", [(3, 1.0), (2, 2.0), (3.5, 2.0)])
def test_problem_params_domain(bad):
    with pytest.raises(DomainError):
        ProblemParams(bad[0], bad[1], WeightSpec(1.0))


def test_user_table_reproduces_power_law():
    y = np.geomspace(1e-2, 1e2, 9)
    w = WeightSpec(1.0, kind="user_radial", table_y=tuple(y), table_rho=tuple(y**-1.0))
    probe = np.array([1e-4, 0.3, 7.0, 5e3])
    np.testing.assert_allclose(weight_eval(w, probe), probe**-1.0, rtol=1e-12)


def test_regularized_weight_with_zero_eps_is_pure():
    w = WeightSpec(1.0, kind="regularized_power", eps=0.0)
    assert w.is_pure_power
    assert weight_moment(w, 2, 0.5, 3.0) == pytest.approx(weight_moment(WeightSpec(1.0), 2, 0.5, 3.0))


@given(gamma=st.floats(0.0, 1.95), power=st.integers(2, 6),
       a=st.floats(0.0, 5.0), width=st.floats(1e-3, 10.0))
def test_pure_power_moment_matches_quadrature(gamma, power, a, width):
    b = a + width
    ref, _ = integrate.quad(lambda y: y ** (power - gamma), a, b, epsrel=1e-12)
    got = weight_moment(WeightSpec(gamma), power, a, b)
    # quad loses digits at the algebraic endpoint singularity
    assert got == pytest.approx(ref, rel=1e-7)


def test_regularized_moment_matches_quadrature():
    w = WeightSpec(1.5, kind="regularized_power", eps=0.2, k=0.5)
    ref, _ = integrate.quad(lambda y: y**2 * (0.04 + y**2) ** -0.75, 0.0, 4.0, epsrel=1e-12)
    assert weight_moment(w, 2, 0.0, 4.0) == pytest.approx(ref, rel=1e-9)
    assert weight_cell_mass(w, 3, 0.0, 4.0) == pytest.approx(4 * math.pi * ref, rel=1e-9)


def test_existence_time():
    assert existence_time(2.0, 3.0, C1=0.5) == pytest.approx(0.125)
    assert existence_time(0.0, 2.0) == math.inf
    with pytest.raises(DomainError):
        existence_time(-1.0, 2.0)
