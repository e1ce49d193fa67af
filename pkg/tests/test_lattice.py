import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diamag.exceptions import ConfigurationError
from diamag.lattice import (BoxSpec, CoulombWells, FieldConfig, HamiltonianFamily,
                            InversePowerWells, SinusoidalVectorPotential, TabulatedPotential,
                            ZeroPotential, build_grid, dirichlet_laplacian_eigenvalues,
                            peierls_phase, sample_potential)
from diamag.spectral import eigendecompose

from conftest import coulomb_config


@pytest.mark.parametrize("n, scale, sites", [(2, 1, 1), (4, 1, 27), (4, 2, 343)])
def test_interior_site_count(n, scale, sites):
    box = BoxSpec(n=n, scale=scale)
    assert box.n_sites == sites
    assert build_grid(box).coordinates.shape == (sites, 3)


def test_interior_sites_by_enumeration():
    box = BoxSpec(n=4, scale=2)
    pts = build_grid(box).coordinates
    expected = {(i, j, k) for i in range(1, 8) for j in range(1, 8) for k in range(1, 8)}
    got = {tuple(np.rint(p / box.h).astype(int)) for p in pts}
    assert got == expected


def test_invalid_box_rejected():
    with pytest.raises(ConfigurationError):
        BoxSpec(n=1)
    with pytest.raises(ConfigurationError):
        BoxSpec(n=4, scale=0)


def test_zero_potential():
    cfg = FieldConfig(potential=ZeroPotential())
    assert sample_potential(cfg, [0.3, 0.2, 0.7], h=0.25) == 0.0


def test_coulomb_values():
    cfg = FieldConfig(potential=CoulombWells(1.0), r_cut=0.05)
    assert sample_potential(cfg, [0.5, 0.5, 0.0]) == pytest.approx(-2.0, abs=1e-14)
    assert sample_potential(cfg, [0.5, 0.5, 0.5]) == pytest.approx(-20.0, abs=1e-12)


def test_default_cutoff_is_half_spacing():
    cfg = FieldConfig(potential=CoulombWells(1.0))
    assert sample_potential(cfg, [0.5, 0.5, 0.5], h=0.25) == pytest.approx(-8.0)


def test_inverse_power_exponent_range():
    with pytest.raises(ConfigurationError):
        InversePowerWells(1.0, 2.0)
    cfg = FieldConfig(potential=InversePowerWells(1.0, 1.5), r_cut=0.1)
    assert sample_potential(cfg, [0.5, 0.5, 0.5]) == pytest.approx(-0.1 ** -1.5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.tuples(st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2)))
def test_potential_periodicity(x, shift):
    x = np.array(x)
    for pot in (CoulombWells(1.3), InversePowerWells(0.7, 1.2)):
        cfg = FieldConfig(potential=pot, r_cut=0.05)
        a = sample_potential(cfg, x)
        b = sample_potential(cfg, x + np.array(shift, dtype=float))
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_tabulated_potential_parse_and_periodicity(tmp_path):
    text = "# x y z v\n0.25 0.25 0.25 -1.5\n0.75 0.75 0.75 2.0\n\n"
    path = tmp_path / "v.tab"
    path.write_text(text)
    pot = TabulatedPotential.from_file(path)
    assert pot(np.array([[0.2, 0.3, 0.25]]))[0] == -1.5
    assert pot(np.array([[1.2, 2.3, -0.75]]))[0] == -1.5
    assert pot(np.array([[0.7, 0.8, 0.75]]))[0] == 2.0


@pytest.mark.parametrize("text", ["", "0 0 0\n", "0 0 0 x\n", "0 0 0 nan\n"])
def test_tabulated_potential_rejects_bad_input(text):
    with pytest.raises(ConfigurationError):
        TabulatedPotential.from_text(text)


def test_phase_trivial_without_field():
    cfg = FieldConfig(omega=0.0, vector_potential=SinusoidalVectorPotential())
    assert peierls_phase(cfg, [0.25, 0.5, 0.5], [0.5, 0.5, 0.5]) == 1


@pytest.mark.parametrize("start", [[0.3, 0.7, 0.1], [1.5, -2.0, 0.4], [0.0, 0.0, 0.9]])
def test_phase_along_field_axis(start):
    cfg = FieldConfig(omega=2.7)
    a = np.array(start)
    assert peierls_phase(cfg, a, a + [0, 0, 0.25]) == pytest.approx(1.0, abs=1e-15)


def test_phase_x_link():
    # a_c(0.5, 1, 0) = (-0.5, 0.25, 0); x-link of length h carries exp(-i * (-0.5) * h)
    h = 0.25
    cfg = FieldConfig(omega=1.0)
    ph = peierls_phase(cfg, [0.5 - h / 2, 1.0, 0.0], [0.5 + h / 2, 1.0, 0.0], h=h)
    assert ph == pytest.approx(np.exp(0.5j * h), abs=1e-15)


def test_phase_rejects_non_neighbours():
    with pytest.raises(AssertionError):
        peierls_phase(FieldConfig(), [0, 0, 0], [0.25, 0.25, 0])


def test_one_site_matrix():
    H = HamiltonianFamily(BoxSpec(n=2), FieldConfig())(0.0)
    assert H.n == 1
    assert H.dense()[0, 0] == pytest.approx(12.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-6, 6), st.booleans(), st.booleans())
def test_hermitian_for_real_omega(omega, sinus, coulomb):
    cfg = coulomb_config(sinus=sinus) if coulomb else FieldConfig(
        vector_potential=SinusoidalVectorPotential() if sinus else FieldConfig().vector_potential)
    M = HamiltonianFamily(BoxSpec(n=4), cfg)(omega).dense()
    assert np.max(np.abs(M - M.conj().T)) < 1e-13


def test_complex_omega_not_hermitian_but_reflects():
    fam = HamiltonianFamily(BoxSpec(n=3), coulomb_config(sinus=True))
    w = 0.8 + 0.2j
    A, B = fam(w), fam(np.conj(w))
    assert not A.is_hermitian
    assert np.allclose(B.dense(), A.dense().conj().T, atol=1e-14)
    assert np.allclose(fam(-w).dense(), A.dense().T, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(0.1, 1.0))
def test_gauge_covariance(omega, amp):
    box = BoxSpec(n=4)
    chi = lambda x: amp * np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * (x[:, 1] + x[:, 2]))
    base = coulomb_config(sinus=True)
    gauged = FieldConfig(vector_potential=base.vector_potential, potential=base.potential,
                         gauge=chi)
    e1 = eigendecompose(HamiltonianFamily(box, base)(omega)).eigenvalues
    e2 = eigendecompose(HamiltonianFamily(box, gauged)(omega)).eigenvalues
    assert np.max(np.abs(e1 - e2) / np.maximum(np.abs(e1), 1)) < 1e-10


@pytest.mark.parametrize("omega", [0.0, 0.7, 1.3 - 0.4j])
def test_derivative_matches_central_difference(omega):
    fam = HamiltonianFamily(BoxSpec(n=4), coulomb_config(sinus=True))
    h = 1e-5
    fd = (fam(omega + h).dense() - fam(omega - h).dense()) / (2 * h)
    an = fam.derivative(omega).toarray()
    assert np.max(np.abs(fd - an)) / np.max(np.abs(an)) < 1e-6


def test_laplacian_closed_form():
    box = BoxSpec(n=8)
    ev = eigendecompose(HamiltonianFamily(box, FieldConfig())(0.0)).eigenvalues
    h = box.h
    assert ev[0] == pytest.approx(0.5 * (2 / h ** 2) * 3 * (1 - np.cos(np.pi * h)), rel=1e-12)
    assert np.max(np.abs(ev - dirichlet_laplacian_eigenvalues(box))) < 1e-10


def test_max_sites_guard():
    from diamag.exceptions import ResourceError
    with pytest.raises(ResourceError):
        HamiltonianFamily(BoxSpec(n=8, scale=4), FieldConfig(), max_sites=1000)
