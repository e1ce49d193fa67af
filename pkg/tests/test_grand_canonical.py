import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diamag.contour import CompactK, build_contour
from diamag.exceptions import AnalyticityRadiusError, ConfigurationError, DomainError
from diamag.grand_canonical import (EnsembleParams, PressureFunction, admissible_e0_prime,
                                    analyticity_probe, cauchy_derivative, fd_derivative,
                                    fd_weights, log_series_pressure, pressure, pressure_dunford,
                                    susceptibility_cauchy, susceptibility_fd)
from diamag.lattice import FieldConfig, SinusoidalVectorPotential
from diamag.spectral import eigendecompose, heat_operator, trace_norm

from conftest import coulomb_config, family


def test_zero_activity():
    assert pressure(np.array([1.0, 2.0]), EnsembleParams(z=0.0), 1.0).value == 0


def test_single_level_fermi():
    P = pressure(np.array([0.0]), EnsembleParams(beta=1.0, z=1.0, epsilon=1), 1.0)
    assert P.real == pytest.approx(np.log(2), rel=1e-15)


@pytest.mark.parametrize("eps", [1, -1])
def test_small_activity_leading_order(eps):
    fam = family(4, cfg=coulomb_config())
    S = eigendecompose(fam(0.0), want_vectors=True)
    beta, z = 0.7, 1e-4
    P = pressure(S, EnsembleParams(beta=beta, z=z, epsilon=eps), fam.volume).real
    lead = z / (beta * fam.volume) * trace_norm(heat_operator(S, beta))
    assert abs(P / lead - 1) < 1e-3


def test_tiny_complex_activity_accurate():
    # ln(1 + u) for |u| ~ 1e-12 complex: the two leading series terms are exact to roundoff
    E = np.array([0.5, 1.0, 3.0])
    z = 1e-12 * np.exp(0.7j)
    P = pressure(E, EnsembleParams(beta=1.0, z=z, epsilon=1), 1.0).value
    u = z * np.exp(-E)
    ref = np.sum(u - u * u / 2)
    assert abs(P - ref) <= 1e-15 * abs(ref)


def test_parameters_validated():
    with pytest.raises(ConfigurationError):
        EnsembleParams(beta=0.0)
    with pytest.raises(ConfigurationError):
        EnsembleParams(epsilon=0)


def test_bose_activity_outside_domain():
    with pytest.raises(DomainError):
        pressure(np.array([1.0]), EnsembleParams(z=np.e, epsilon=-1), 1.0)


def test_dunford_scalar():
    E, beta, z = 1.5, 0.8, 0.6
    for eps in (1, -1):
        C = build_contour(CompactK.point(z), np.array([E]), beta, eps, E - 1)
        P = pressure_dunford(np.array([[E]]), C, EnsembleParams(beta, 0, z, eps), 2.0)
        assert abs(P.value - eps / (2 * beta) * np.log1p(eps * z * np.exp(-beta * E))) < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 4), st.floats(0.2, 2.0), st.floats(0.05, 0.95), st.sampled_from([1, -1]),
       st.booleans())
def test_dunford_matches_eigen(omega, beta, frac, eps, sinus):
    fam = family(3, cfg=coulomb_config(sinus=sinus))
    E0 = eigendecompose(fam(omega)).E0
    z = 3 * frac if eps == 1 else frac * np.exp(beta * (E0 - 1))
    p = EnsembleParams(beta=beta, omega=omega, z=z, epsilon=eps)
    a = PressureFunction(fam, p)(omega)
    b = PressureFunction(fam, p, method="dunford")(omega)
    assert abs(a - b) <= 1e-8 * abs(a)


@pytest.mark.parametrize("method", ["eigen", "dunford"])
def test_schwarz_reflection(method):
    fam = family(3, cfg=coulomb_config(sinus=True))
    p = EnsembleParams(beta=1.0, z=0.8, epsilon=1)
    P = PressureFunction(fam, p, method=method)
    w = 0.9 + 0.05j
    a, b = P(w), P(np.conj(w))
    assert np.isfinite(a) and abs(a.imag) > 0
    assert abs(b - np.conj(a)) <= 1e-10 * abs(a)


def test_first_order_vanishes_without_periodic_field():
    fam = family(3, cfg=FieldConfig())
    chi = susceptibility_cauchy(fam, EnsembleParams(beta=1.0, z=1.0), 1)
    assert abs(chi) < 1e-9


@pytest.mark.parametrize("order, tol", [(1, 1e-5), (2, 1e-5), (3, 1e-4), (4, 1e-4)])
def test_cauchy_matches_finite_differences(order, tol):
    fam = family(3, cfg=coulomb_config(sinus=True))
    p = EnsembleParams(beta=0.5, omega=0.8, z=0.8, epsilon=1)
    a = susceptibility_cauchy(fam, p, order)
    b = susceptibility_fd(fam, p, order)
    assert abs(a - b) <= tol * abs(b)


def test_cauchy_node_doubling():
    fam = family(3, cfg=coulomb_config(sinus=True))
    p = EnsembleParams(beta=0.5, omega=0.8, z=0.8, epsilon=1)
    for order in (1, 2):
        a = susceptibility_cauchy(fam, p, order, nodes=32)
        b = susceptibility_cauchy(fam, p, order, nodes=64)
        assert abs(a - b) < 1e-9 * max(1.0, abs(b))


def test_cauchy_derivative_of_exponential():
    for order in range(5):
        d, r = cauchy_derivative(np.exp, 0.3, order)
        # roundoff is amplified by order! / r^order
        assert abs(d - np.exp(0.3)) < 1e-15 * math.factorial(order) / r ** order * 10
        assert r == 0.1


def test_cauchy_radius_shrinks_then_gives_up():
    def f(x):
        if abs(x) > 0.03:
            raise DomainError("outside")
        return np.exp(x)

    d, r = cauchy_derivative(f, 0.0, 1)
    assert r == pytest.approx(0.025) and abs(d - 1) < 1e-12

    def never(x):
        raise DomainError("never")

    with pytest.raises(AnalyticityRadiusError):
        cauchy_derivative(never, 0.0, 1, max_halvings=2)


def test_fd_weights_second_derivative():
    assert np.allclose(fd_weights(2, [-1, 0, 1]), [1, -2, 1])
    assert abs(fd_derivative(np.sin, 0.4, 3) + np.cos(0.4)) < 1e-6


def test_power_series_oracle():
    S = eigendecompose(family(3, cfg=coulomb_config())(0.5))
    z = 0.3 * np.exp(S.E0) * np.exp(0.7j)
    for eps in (1, -1):
        p = EnsembleParams(beta=1.0, z=z, epsilon=eps)
        a = pressure(S, p, 1.0).value
        b = log_series_pressure(S.eigenvalues, p, 1.0)
        assert abs(a - b) <= 1e-12 * abs(a)


def test_analyticity_probe_reports_pass():
    fam = family(3, cfg=coulomb_config())
    rep = analyticity_probe(fam, EnsembleParams(beta=1.0, z=0.6), 0.5 + 0.1j,
                            K=CompactK.disc(0.6, 0.1), nodes=32)
    assert rep["passed"]
    assert rep["omega_loop_ratio"] < 1e-7 and rep["cr_residual"] < 1e-5


def test_fermi_pressure_increasing_in_activity():
    S = eigendecompose(family(3, cfg=coulomb_config())(0.0))
    zs = np.geomspace(1e-3, 1e6, 30)
    P = [pressure(S, EnsembleParams(z=z), 1.0).real for z in zs]
    assert np.all(np.diff(P) > 0)


def test_bose_pressure_increasing_and_divergent():
    S = eigendecompose(family(3)(0.0))
    beta = 0.5
    zmax = np.exp(beta * S.E0)
    gaps = np.geomspace(0.9, 1e-12, 40)
    P = [pressure(S, EnsembleParams(beta=beta, z=zmax * (1 - g), epsilon=-1), 1.0).real
         for g in gaps]
    assert np.all(np.diff(P) > 0)
    # ground-level term -ln(1 - z exp(-beta E0)) / beta grows without bound
    assert P[-1] > -np.log(1e-12) / beta * 0.99


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0), st.booleans())
def test_evenness_in_field(omega, coulomb):
    cfg = coulomb_config(sinus=True) if coulomb else FieldConfig(
        vector_potential=SinusoidalVectorPotential(0.3))
    fam = family(3, cfg=cfg)
    a = eigendecompose(fam(omega)).eigenvalues
    b = eigendecompose(fam(-omega)).eigenvalues
    assert np.max(np.abs(a - b)) < 1e-10
    p = EnsembleParams(beta=0.9, z=0.7)
    assert abs(pressure(a, p, 1.0).value - pressure(b, p, 1.0).value) < 1e-12


def test_admissible_offset_for_bose():
    K = CompactK.disc(2.0, 0.5)
    e0p = admissible_e0_prime(3.0, K, 1.0, -1)
    assert e0p < 3.0 and np.exp(e0p) > 2.5
    assert admissible_e0_prime(3.0, K, 1.0, 1) == 2.0
    with pytest.raises(DomainError):
        admissible_e0_prime(0.5, K, 1.0, -1)
