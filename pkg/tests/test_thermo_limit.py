import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diamag.contour import CompactK
from diamag.exceptions import ConfigurationError, DomainError
from diamag.grand_canonical import EnsembleParams, pressure
from diamag.lattice import BoxSpec, CoulombWells, FieldConfig
from diamag.thermo_limit import (IDSample, box_spectrum, continuum_free_pressure, ids_estimate,
                                 integrated_ids, limit_scan, pressure_from_density,
                                 pressure_from_ids, richardson, weyl_exponent)

from conftest import coulomb_config

# -Li_{5/2}(-1) = (1 - 2^{-3/2}) zeta(5/2), tabulated independently
ETA_FIVE_HALVES = 0.8671998890121841


def coulomb_sample(n=3, L=2):
    box = BoxSpec(n=n, scale=L)
    e, _ = box_spectrum(box, FieldConfig(potential=CoulombWells(1.0)))
    return IDSample(float(L), e, box.volume)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.2, 3.0), st.sampled_from([1, -1]))
def test_ids_pressure_identity(frac, beta, eps):
    s = coulomb_sample()
    z = frac if eps == 1 else 0.99 * frac / 5.0 * np.exp(beta * s.E0)
    p = EnsembleParams(beta=beta, z=z, epsilon=eps)
    a = pressure_from_ids(s, p)
    b = pressure(s.energies, p, s.volume).real
    assert abs(a - b) <= 1e-12 * abs(b)


def test_tabulated_density_identity():
    s = coulomb_sample()
    p = EnsembleParams(beta=0.8, z=1.3)
    E = np.unique(s.energies)
    assert pressure_from_density(E, s.rho(E), p) == pytest.approx(pressure_from_ids(s, p),
                                                                  rel=1e-12)


def test_zero_activity():
    assert pressure_from_ids(coulomb_sample(), EnsembleParams(z=0.0)) == 0


def test_bose_domain_checked():
    s = coulomb_sample()
    with pytest.raises(DomainError):
        pressure_from_ids(s, EnsembleParams(z=np.exp(s.E0) * 1.01, epsilon=-1))


def test_counting_function_total_and_floor():
    s = coulomb_sample()
    assert s.counting(np.inf) == s.energies.size == BoxSpec(n=3, scale=2).n_sites
    assert s.counting(s.E0 - 1e-9) == 0
    assert s.counting(s.E0) >= 1
    assert np.all(np.diff(s.rho(np.linspace(s.E0 - 1, 60, 200))) >= 0)


def test_below_ground_energy_every_box_is_empty():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        samples = ids_estimate([1, 2, 3], BoxSpec(n=3), FieldConfig(), [0.0, 1.0])
    for s in samples:
        assert np.all(s.rho(np.array([0.0, 1.0, s.E0 - 1e-6])) == 0)
    with pytest.warns(RuntimeWarning):
        ids_estimate([1], BoxSpec(n=3), FieldConfig(), [0.0, 1.0])


def test_iterative_path_below_cutoff():
    box = BoxSpec(n=4, scale=2)
    dense, complete = box_spectrum(box, coulomb_config())
    part, partial = box_spectrum(box, coulomb_config(), e_max=25.0, dense_cap=100)
    assert complete and not partial
    expected = dense[dense <= 25.0]
    assert part.size == expected.size and np.max(np.abs(part - expected)) < 1e-8


def test_weyl_exponent():
    samples = [IDSample(float(L), box_spectrum(BoxSpec(n=4, scale=L), FieldConfig())[0],
                        float(L) ** 3) for L in (2, 3, 4)]
    assert abs(weyl_exponent(samples) - 1.5) < 0.2


def test_integrated_ids_definition():
    s = IDSample(1.0, np.array([1.0, 2.0, 4.0]), 2.0)
    assert integrated_ids(s, 3.0)[0] == pytest.approx((2.0 + 1.0) / 2.0)


def test_ids_stabilizes_under_doubling():
    samples = ids_estimate([1, 2, 4, 8], BoxSpec(n=2), FieldConfig(), [15.0, 22.0])
    # energies above the ground energy of every box in the sequence
    for E in np.arange(15.0, 23.0):
        rho = np.array([s.rho(E) for s in samples])
        assert np.all(np.diff(np.abs(np.diff(rho))) < 0)
        smooth = np.array([integrated_ids(s, E)[0] for s in samples])
        assert np.all(np.diff(np.abs(np.diff(smooth))) < 0)


def test_coulomb_sequence_is_cauchy():
    p = EnsembleParams(beta=1.0, z=1.0, epsilon=1)
    rep = limit_scan([2, 3, 4, 5], BoxSpec(n=3), FieldConfig(potential=CoulombWells(1.0)), p)
    assert rep.monotone and rep.cauchy
    assert np.all(np.diff(rep.pressures) > 0)


def test_grid_refinement_below_box_increment():
    p = EnsembleParams(beta=1.0, z=1.0, epsilon=1)
    coarse = pressure_from_ids(coulomb_sample(n=2, L=4), p)
    fine = [pressure_from_ids(coulomb_sample(n=4, L=L), p) for L in (3, 4)]
    assert abs(fine[1] - coarse) < abs(fine[1] - fine[0])


def test_extrapolation_self_consistency():
    p = EnsembleParams(beta=1.0, z=1.0, epsilon=1)
    full = limit_scan([2, 3, 4, 5], BoxSpec(n=2), FieldConfig(), p)
    dropped = limit_scan([3, 4, 5], BoxSpec(n=2), FieldConfig(), p)
    assert abs(full.p_inf - dropped.p_inf) <= 3 * full.uncertainty


def test_uniformity_over_activity_mesh():
    p = EnsembleParams(beta=1.0, z=1.0, epsilon=1)
    rep = limit_scan([2, 3, 4, 5], BoxSpec(n=2), FieldConfig(), p, K=CompactK.disc(1.0, 0.2))
    assert len(rep.mesh_last_increments) == len(CompactK.disc(1.0, 0.2).mesh(8))
    assert rep.uniformity <= 2 * rep.center_increment
    assert '"p_inf"' in rep.to_json()


def test_limit_scan_needs_three_scales():
    with pytest.raises(ConfigurationError):
        limit_scan([1, 2], BoxSpec(n=2), FieldConfig(), EnsembleParams())


def test_continuum_oracle():
    ref = ETA_FIVE_HALVES * (2 * np.pi) ** -1.5
    assert continuum_free_pressure(1.0, 1.0, 1) == pytest.approx(ref, rel=1e-10)
    # Bose at small z: leading term z (2 pi beta)^{-3/2} / beta
    assert continuum_free_pressure(2.0, 1e-6, -1) == pytest.approx(
        1e-6 * (4 * np.pi) ** -1.5 / 2.0, rel=1e-5)
    with pytest.raises(DomainError):
        continuum_free_pressure(1.0, 1.0, -1)


def test_richardson_exact_for_polynomials():
    xs = [1.0, 0.5, 1 / 3, 0.25]
    ys = [3.0 - 2 * x + 0.5 * x ** 2 - x ** 3 for x in xs]
    est, unc, tab = richardson(xs, ys)
    assert est == pytest.approx(3.0, abs=1e-12)
    assert len(tab) == 4
