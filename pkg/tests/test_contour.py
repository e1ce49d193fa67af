import numpy as np
from scipy import special
import pytest
from hypothesis import given, settings, strategies as st

from diamag.contour import (ActivityDomain, CompactK, branch_margin, build_contour, dunford_exp,
                            dunford_integral, dunford_log, eta_for_compact, sector_contour,
                            winding_number)
from diamag.exceptions import ContourError, DomainError
from diamag.spectral import eigendecompose, heat_operator, numerical_range_fit

from conftest import coulomb_config, family


def eigen_log(S, z, beta, eps):
    V = S.eigenvectors
    return (V * special.log1p(eps * z * np.exp(-beta * S.eigenvalues))) @ V.conj().T


@pytest.mark.parametrize("eps, centre", [(-1, -2.0), (1, 2.0)])
def test_eta_disc_examples(eps, centre):
    eta = eta_for_compact(CompactK.disc(centre, 0.1), eps, 1.0, 0.0)
    assert eta == pytest.approx(0.5 * (np.pi - np.arcsin(0.05)), rel=1e-12)


def test_eta_inside_ball_is_default():
    assert eta_for_compact(CompactK.disc(0.2, 0.1), 1, 1.0, 0.0) == pytest.approx(np.pi / 2)


def test_eta_rejects_ray():
    with pytest.raises(DomainError):
        eta_for_compact(CompactK.disc(-2.0, 0.1), 1, 1.0, 0.0)
    with pytest.raises(DomainError):
        eta_for_compact(CompactK.point(3.0), -1, 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, -1]), st.floats(1.2, 4.0), st.floats(-np.pi, np.pi),
       st.floats(0.05, 0.9), st.floats(0.1, 0.95))
def test_eta_monotone_under_inclusion(eps, modulus, arg, rel_radius, shrink):
    centre = modulus * np.exp(1j * arg)
    r = rel_radius * (modulus - 1.0) if modulus > 1.0 else 0.05
    K = CompactK.disc(centre, r)
    domain = ActivityDomain(eps, 0.0, 1.0)
    if K.distance_to_ray(domain) <= 1e-9:
        return
    Ks = CompactK.disc(centre + (1 - shrink) * r * 0.3, shrink * r * 0.7)
    assert Ks.is_subset_of(K)
    assert eta_for_compact(Ks, eps, 1.0, 0.0) >= eta_for_compact(K, eps, 1.0, 0.0) - 1e-15


def test_scalar_winding_inside_and_outside():
    C = build_contour(CompactK.point(0.5), np.array([1.0]), 1.0, 1, 0.0)
    assert abs(winding_number(C, 1.0) - 1) < 1e-8
    outside = 1.0 + 3j * C.half_width
    assert abs(winding_number(C, outside)) < 1e-8
    assert abs(winding_number(C, C.e0_prime - 0.5)) < 1e-8


def test_winding_on_random_probes(rng):
    S = eigendecompose(family(3, cfg=coulomb_config())(0.0))
    C = build_contour(CompactK.disc(0.5 + 0.2j, 0.1), S, 1.0, 1, S.E0 - 1)
    for lam in S.eigenvalues:
        assert abs(winding_number(C, lam) - 1) < 1e-8
    for _ in range(10):
        p = C.e0_prime - rng.uniform(0.01, 5) + 1j * rng.uniform(-1, 1)
        assert abs(winding_number(C, p)) < 1e-8


def test_contour_geometry():
    C = build_contour(CompactK.point(2.0), np.array([1.0, 5.0]), 2.0, 1, 0.5)
    names = [s.name for s in C.segments]
    assert names == ["upper_ray", "upper_line", "left_edge", "lower_line", "lower_ray",
                     "closing_edge"]
    assert C.half_width == pytest.approx(C.eta_K / 4)
    assert C.xi_K >= 2 * 1.0 - 0.5 and 2.0 * np.exp(-2.0 * C.xi_K) <= 0.5 + 1e-15
    assert '"segments"' in C.to_json()


def test_spectrum_must_lie_above_e0_prime():
    with pytest.raises(ContourError):
        build_contour(CompactK.point(1.0), np.array([1.0]), 1.0, 1, 1.5)


def test_ray_truncation_doubling():
    E, z, beta = 1.3, 0.7, 1.0
    K = CompactK.point(z)
    C1 = build_contour(K, np.array([E]), beta, 1, 0.0, ray_tol=1e-14)
    length = C1.re_end - C1.xi_K
    tol2 = z * np.exp(-2 * beta * length)
    C2 = build_contour(K, np.array([E]), beta, 1, 0.0, ray_tol=tol2)
    assert C2.re_end - C2.xi_K == pytest.approx(2 * length)
    a = dunford_log(np.array([[E]]), C1, z, beta, 1)[0, 0]
    b = dunford_log(np.array([[E]]), C2, z, beta, 1)[0, 0]
    assert abs(a - b) < 1e-14


def test_scalar_log():
    E = 0.8
    C = build_contour(CompactK.point(0.5), np.array([E]), 1.0, 1, E - 1)
    val = dunford_log(np.array([[E]]), C, 0.5, 1.0, 1)[0, 0]
    assert abs(val - np.log1p(0.5 * np.exp(-E))) < 1e-9


def test_zero_activity_gives_zero_matrix():
    H = family(3)(0.0)
    S = eigendecompose(H)
    C = build_contour(CompactK.point(0.0), S, 1.0, 1, S.E0 - 1)
    assert np.all(dunford_log(H, C, 0.0, 1.0, 1) == 0)


def test_bose_negative_activity_matches_eigen(rng):
    omega = rng.uniform(0, 3)
    H = family(3, cfg=coulomb_config(sinus=True))(omega)
    S = eigendecompose(H, want_vectors=True)
    beta = 0.7
    C = build_contour(CompactK.point(-0.3), S, beta, -1, S.E0 - 1)
    err = np.max(np.abs(dunford_log(H, C, -0.3, beta, -1) - eigen_log(S, -0.3, beta, -1)))
    assert err < 1e-8


def test_eight_by_eight_oracle(rng):
    # n=3 gives 8 sites
    H = family(3, cfg=coulomb_config(sinus=True))(rng.uniform(0.5, 4))
    assert H.n == 8
    S = eigendecompose(H, want_vectors=True)
    C = build_contour(CompactK.point(-0.3), S, 1.0, -1, S.E0 - 1)
    err = np.max(np.abs(dunford_log(H, C, -0.3, 1.0, -1) - eigen_log(S, -0.3, 1.0, -1)))
    assert err < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, -1]), st.floats(0.2, 2.0), st.floats(0.05, 0.9), st.floats(0, 3))
def test_oracle_equivalence_property(eps, beta, frac, omega):
    H = family(3, cfg=coulomb_config(sinus=True))(omega)
    S = eigendecompose(H, want_vectors=True)
    e0p = S.E0 - 1
    z = frac * 3.0 if eps == 1 else frac * np.exp(beta * e0p)
    C = build_contour(CompactK.point(z), S, beta, eps, e0p)
    assert np.max(np.abs(dunford_log(H, C, z, beta, eps) - eigen_log(S, z, beta, eps))) < 1e-8


def test_spectral_data_input_matches_matrix_input():
    H = family(3, cfg=coulomb_config())(0.4)
    S = eigendecompose(H, want_vectors=True)
    C = build_contour(CompactK.point(0.9), S, 1.0, 1, S.E0 - 1)
    f = np.log1p(0.9 * np.exp(-C.nodes))
    a = dunford_integral(H, C, f)
    b = dunford_integral(S, C, f)
    assert np.max(np.abs(a - b)) < 1e-10


def test_node_doubling_is_converged():
    H = family(3, cfg=coulomb_config(sinus=True))(1.1)
    S = eigendecompose(H)
    K = CompactK.disc(0.8, 0.2)
    C1 = build_contour(K, S, 1.0, 1, S.E0 - 1)
    C2 = build_contour(K, S, 1.0, 1, S.E0 - 1, min_panels_segment=8, min_panels_ray=16)
    assert C2.node_count() > C1.node_count()
    a = dunford_log(H, C1, 0.8, 1.0, 1)
    b = dunford_log(H, C2, 0.8, 1.0, 1)
    assert np.max(np.abs(a - b)) < 1e-9


def test_exp_scalar_and_hermitian():
    C = build_contour(CompactK.point(1.0), np.array([2.0]), 1.0, 1, 1.0)
    assert abs(dunford_exp(np.array([[2.0]]), C, 1.0)[0, 0] - np.exp(-2.0)) < 1e-9
    H = family(3, cfg=coulomb_config())(0.9)
    S = eigendecompose(H, want_vectors=True)
    C = build_contour(CompactK.point(1.0), S, 0.3, 1, S.E0 - 1)
    W = heat_operator(S, 0.3).matrix
    assert np.max(np.abs(dunford_exp(H, C, 0.3) - W)) < 1e-8


def test_exp_non_hermitian_sector_contour(rng):
    H = family(3, cfg=coulomb_config(sinus=True))(1.0 + 0.05j)
    S = eigendecompose(H, want_vectors=True)
    assert np.linalg.cond(S.eigenvectors) < 1e8
    se = numerical_range_fit(H, samples=1000, rng=rng)
    C = sector_contour(se, S, 0.2)
    W = heat_operator(S, 0.2).matrix
    assert np.max(np.abs(dunford_exp(H, C, 0.2) - W)) / np.max(np.abs(W)) < 1e-6
    for lam in S.eigenvalues:
        assert abs(winding_number(C, lam) - 1) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1, -1]), st.floats(1.5, 5.0), st.floats(-3.0, 3.0), st.floats(0.05, 0.4),
       st.floats(0.3, 3.0))
def test_branch_safety(eps, modulus, arg, rel, beta):
    centre = modulus * np.exp(1j * arg)
    K = CompactK.disc(centre, rel * (modulus - 1))
    if K.distance_to_ray(ActivityDomain(eps, 0.0, beta)) <= 1e-6:
        return
    C = build_contour(K, np.array([0.5, 1.0, 3.0]), beta, eps, 0.0)
    assert branch_margin(C, K.mesh(32), beta, eps) > 0


def test_branch_margin_detects_activity_off_the_domain():
    C = build_contour(CompactK.point(0.5), np.array([1.0]), 1.0, 1, 0.0)
    node = C.nodes[len(C.nodes) // 3]
    bad = -2.0 * np.exp(node)
    assert branch_margin(C, [bad], 1.0, 1) < 1e-12
    assert branch_margin(C, [0.5], 1.0, 1) > 0.1
