"""Property checks run by ``diamag verify``.

Each check is small enough for a laptop and draws its randomness from the
generator it is handed, so a fixed seed reproduces the whole table.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .canonical import CanonicalParams, canonical_Z_contour, canonical_Z_oracle
from .contour import (CompactK, branch_margin, build_contour, dunford_log, eta_for_compact,
                      winding_number)
from .grand_canonical import (EnsembleParams, PressureFunction, analyticity_probe, pressure,
                              susceptibility_cauchy, susceptibility_fd)
from .lattice import (BoxSpec, CoulombWells, FieldConfig, HamiltonianFamily,
                      SinusoidalVectorPotential, dirichlet_laplacian_eigenvalues)
from .spectral import (diamagnetic_check, eigendecompose, heat_operator, hs_norm,
                       numerical_range_fit, trace_norm)
from .thermo_limit import IDSample, pressure_from_ids

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _coulomb(omega=0.0, sinus=False):
    vp = SinusoidalVectorPotential() if sinus else None
    kw = {"vector_potential": vp} if vp is not None else {}
    return FieldConfig(omega=omega, potential=CoulombWells(1.0), **kw)


def check_laplacian(rng):
    box = BoxSpec(n=5)
    ev = eigendecompose(HamiltonianFamily(box, FieldConfig())(0.0)).eigenvalues
    err = np.max(np.abs(ev - dirichlet_laplacian_eigenvalues(box)))
    return err < 1e-10, f"max deviation from closed form {err:.2e}"


def check_hermiticity(rng):
    fam = HamiltonianFamily(BoxSpec(n=4), _coulomb(sinus=True))
    worst = 0.0
    for w in rng.uniform(-5, 5, 5):
        M = fam(w).dense()
        worst = max(worst, np.max(np.abs(M - M.conj().T)))
    return worst < 1e-12, f"max |H - H^*| {worst:.2e}"


def check_gauge(rng):
    box = BoxSpec(n=4)
    chi = lambda x: np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 2])
    w = rng.uniform(0.5, 3)
    base = FieldConfig(omega=w, potential=CoulombWells(1.0))
    gauged = FieldConfig(omega=w, potential=CoulombWells(1.0), gauge=chi)
    e1 = eigendecompose(HamiltonianFamily(box, base)(w)).eigenvalues
    e2 = eigendecompose(HamiltonianFamily(box, gauged)(w)).eigenvalues
    err = np.max(np.abs(e1 - e2) / np.maximum(np.abs(e1), 1))
    return err < 1e-10, f"relative spectral change {err:.2e}"


def check_diamagnetic(rng):
    worst = 0.0
    for _ in range(4):
        cfg = _coulomb(rng.uniform(0, 5)) if rng.random() < 0.5 else FieldConfig(omega=rng.uniform(0, 5))
        rep = diamagnetic_check(BoxSpec(n=4), cfg, rng.uniform(0.1, 5))
        worst = max(worst, rep.max_violation)
    return worst == 0, f"max violation beyond 1e-12: {worst:.2e}"


def check_e0_monotone(rng):
    fam = HamiltonianFamily(BoxSpec(n=4), _coulomb())
    e0 = eigendecompose(fam(0.0)).E0
    gaps = [eigendecompose(fam(w)).E0 - e0 for w in rng.uniform(-4, 4, 5)]
    return min(gaps) >= -1e-10, f"min E0(w) - E0(0) {min(gaps):.2e}"


def check_trace_hs(rng):
    S = eigendecompose(HamiltonianFamily(BoxSpec(n=4), _coulomb(1.0))(1.0), want_vectors=True)
    b = rng.uniform(0.01, 0.2)
    t2 = trace_norm(heat_operator(S, 2 * b))
    hs = hs_norm(heat_operator(S, b)) ** 2
    rel = abs(t2 - hs) / t2
    return rel < 1e-12, f"|Tr W(2b) - ||W(b)||_2^2| / Tr = {rel:.2e}"


def check_semigroup(rng):
    S = eigendecompose(HamiltonianFamily(BoxSpec(n=4), _coulomb(0.7))(0.7), want_vectors=True)
    b1, b2 = rng.uniform(0.01, 0.1, 2)
    W = heat_operator(S, b1).matrix @ heat_operator(S, b2).matrix
    err = np.max(np.abs(W - heat_operator(S, b1 + b2).matrix))
    return err < 1e-9, f"semigroup defect {err:.2e}"


def check_sector(rng):
    H = HamiltonianFamily(BoxSpec(n=4), _coulomb(sinus=True))(1.0 + 0.1j)
    se = numerical_range_fit(H, samples=2000, rng=rng)
    ev = eigendecompose(H).eigenvalues
    inside = bool(np.all(se.contains(ev)))
    return inside, f"theta {se.theta:.4f}, gamma {se.gamma:.4f}, spectrum inside: {inside}"


def check_winding(rng):
    S = eigendecompose(HamiltonianFamily(BoxSpec(n=3), _coulomb())(0.0))
    C = build_contour(CompactK.disc(0.5, 0.1), S, 1.0, 1, S.E0 - 1)
    inner = max(abs(winding_number(C, lam) - 1) for lam in S.eigenvalues[:3])
    outer = abs(winding_number(C, S.E0 - 1.5))
    return inner < 1e-8 and outer < 1e-8, f"inside {inner:.1e}, outside {outer:.1e}"


def check_dunford(rng):
    fam = HamiltonianFamily(BoxSpec(n=4), _coulomb(sinus=True))
    worst = 0.0
    for _ in range(3):
        w, beta = rng.uniform(0, 3), rng.uniform(0.2, 2)
        H = fam(w)
        S = eigendecompose(H, want_vectors=True)
        eps = int(rng.choice([1, -1]))
        z = rng.uniform(0.1, 2) if eps == 1 else rng.uniform(0.1, 0.9) * np.exp(beta * (S.E0 - 1))
        C = build_contour(CompactK.point(z), S, beta, eps, S.E0 - 1)
        D = dunford_log(H, C, z, beta, eps)
        V = S.eigenvectors
        E = (V * special.log1p(eps * z * np.exp(-beta * S.eigenvalues))) @ V.conj().T
        worst = max(worst, np.max(np.abs(D - E)))
    return worst < 1e-8, f"max |dunford - eigen| {worst:.2e}"


def check_pressure_paths(rng):
    fam = HamiltonianFamily(BoxSpec(n=4), _coulomb())
    p = EnsembleParams(beta=0.8, omega=1.1, z=0.7, epsilon=1)
    a = PressureFunction(fam, p)(1.1)
    b = PressureFunction(fam, p, method="dunford")(1.1)
    rel = abs(a - b) / abs(a)
    return rel < 1e-8, f"relative difference {rel:.2e}"


def check_susceptibility(rng):
    fam = HamiltonianFamily(BoxSpec(n=3), _coulomb(sinus=True))
    p = EnsembleParams(beta=0.5, omega=rng.uniform(0.2, 1.5), z=0.8, epsilon=1)
    r1 = abs(susceptibility_cauchy(fam, p, 1) - susceptibility_fd(fam, p, 1))
    r1 /= abs(susceptibility_fd(fam, p, 1))
    free = HamiltonianFamily(BoxSpec(n=3), FieldConfig())
    chi0 = abs(susceptibility_cauchy(free, EnsembleParams(beta=1.0, z=1.0), 1))
    return r1 < 1e-5 and chi0 < 1e-9, f"chi1 rel diff {r1:.1e}, chi1 at w=0 {chi0:.1e}"


def check_analyticity(rng):
    fam = HamiltonianFamily(BoxSpec(n=3), _coulomb())
    p = EnsembleParams(beta=1.0, z=0.6, epsilon=1)
    rep = analyticity_probe(fam, p, 0.5 + 0.1j, K=CompactK.disc(0.6, 0.1), nodes=32)
    return rep["passed"], (f"loop {rep['omega_loop_ratio']:.1e}, z-loop {rep['z_loop_ratio']:.1e}, "
                           f"CR {rep['cr_residual']:.1e}")


def check_canonical(rng):
    worst = 0.0
    for _ in range(10):
        E = np.sort(rng.uniform(-2, 6, rng.integers(4, 32)))
        beta = rng.uniform(0.3, 2)
        for eps in (1, -1):
            for N in range(1, 9):
                if eps == 1 and N > E.size:
                    continue
                a = canonical_Z_contour(E, CanonicalParams(N), beta, eps)
                b = canonical_Z_oracle(E, N, beta, eps)
                worst = max(worst, abs(a - b) / b)
    return worst < 1e-10, f"max relative deviation {worst:.2e}"


def check_ids_identity(rng):
    box = BoxSpec(n=3, scale=2)
    ev = eigendecompose(HamiltonianFamily(box, _coulomb())(0.0)).eigenvalues
    p = EnsembleParams(beta=1.0, z=1.0, epsilon=1)
    a = pressure_from_ids(IDSample(2.0, ev, box.volume), p)
    b = pressure(ev, p, box.volume).real
    return abs(a - b) <= 1e-12 * abs(b), f"|ids - eigen| {abs(a - b):.1e}"


def check_eta(rng):
    ok, margin = True, np.inf
    for eps in (1, -1):
        for _ in range(5):
            c = (2.0 * eps * rng.uniform(0.5, 2)) + 1j * rng.uniform(-1, 1)
            r = rng.uniform(0.05, 0.4)
            K, Ks = CompactK.disc(c, r), CompactK.disc(c, 0.5 * r)
            ok &= eta_for_compact(Ks, eps, 1.0, 0.0) >= eta_for_compact(K, eps, 1.0, 0.0)
            C = build_contour(K, np.array([0.5, 1.0, 3.0]), 1.0, eps, 0.0)
            margin = min(margin, branch_margin(C, K.mesh(32), 1.0, eps))
    return bool(ok and margin > 0), f"monotone {bool(ok)}, branch margin {margin:.2e}"


def check_bose_monotone(rng):
    S = eigendecompose(HamiltonianFamily(BoxSpec(n=3), FieldConfig())(0.0))
    beta = 0.5
    zmax = np.exp(beta * S.E0)
    zs = zmax * np.array([0.1, 0.5, 0.9, 0.99, 1 - 1e-6])
    P = [pressure(S, EnsembleParams(beta=beta, z=z, epsilon=-1), 1.0).real for z in zs]
    # the ground level alone contributes -ln(1 - z exp(-beta E0)) / beta
    jump = P[-1] - P[-2]
    grows = jump >= 0.99 * np.log(1e-2 / 1e-6) / beta
    return bool(np.all(np.diff(P) > 0) and grows), f"P near the pole {P[-1]:.3g}"


CHECKS: dict = {
    "laplacian_closed_form": check_laplacian,
    "hermiticity": check_hermiticity,
    "gauge_covariance": check_gauge,
    "diamagnetic_inequality": check_diamagnetic,
    "ground_energy_monotone": check_e0_monotone,
    "trace_hs_identity": check_trace_hs,
    "semigroup_law": check_semigroup,
    "sector_containment": check_sector,
    "contour_winding": check_winding,
    "dunford_vs_eigen": check_dunford,
    "pressure_two_paths": check_pressure_paths,
    "susceptibility_cauchy_vs_fd": check_susceptibility,
    "analyticity_probe": check_analyticity,
    "canonical_oracle": check_canonical,
    "ids_pressure_identity": check_ids_identity,
    "eta_monotone_branch_safe": check_eta,
    "bose_monotone_divergent": check_bose_monotone,
}


def run_checks(seed: int = 0, names=None, progress: Callable = None) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS.items():
        if names is not None and name not in names:
            continue
        sub = np.random.default_rng(rng.integers(2 ** 63))
        t0 = time.perf_counter()
        try:
            passed, detail = fn(sub)
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(passed), detail, time.perf_counter() - t0)
        out.append(res)
        if progress is not None:
            progress(res)
    return out
