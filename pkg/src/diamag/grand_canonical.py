"""Grand-canonical pressure, its analyticity diagnostics and susceptibilities."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import special

from .contour import GL_ORDER, CompactK, build_contour, dunford_log
from .exceptions import (AnalyticityRadiusError, ConditioningError, ConfigurationError,
                         ContourError, DomainError)
from .lattice import HamiltonianFamily
from .spectral import SpectralData, eigendecompose

__all__ = [
    "EnsembleParams",
    "PressureValue",
    "PressureFunction",
    "pressure",
    "pressure_dunford",
    "admissible_e0_prime",
    "cauchy_derivative",
    "susceptibility_cauchy",
    "fd_weights",
    "fd_derivative",
    "susceptibility_fd",
    "log_series_pressure",
    "analyticity_probe",
]


@dataclass(frozen=True)
class EnsembleParams:
    """Inverse temperature, field parameter, activity and statistics."""

    beta: float = 1.0
    omega: complex = 0.0
    z: complex = 1.0
    epsilon: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigurationError(f"beta must be positive, got {self.beta!r}")
        if self.epsilon not in (1, -1):
            raise ConfigurationError(f"epsilon must be +1 or -1, got {self.epsilon!r}")

    @property
    def statistics(self) -> str:
        return "fermi" if self.epsilon == 1 else "bose"

    def with_omega(self, omega) -> "EnsembleParams":
        return replace(self, omega=omega)

    def with_z(self, z) -> "EnsembleParams":
        return replace(self, z=z)


@dataclass(frozen=True)
class PressureValue:
    value: complex
    method: str
    volume: float

    @property
    def real(self) -> float:
        return float(np.real(self.value))


def _check_bose(eigenvalues, p: EnsembleParams):
    if p.epsilon != -1:
        return
    E0 = float(np.min(np.real(eigenvalues)))
    z = complex(p.z)
    if z.imag == 0 and z.real >= np.exp(p.beta * E0):
        raise DomainError(f"z = {z.real} lies outside D_-1(E0): need z < exp(beta E0) = "
                          f"{np.exp(p.beta * E0)}")


def pressure(S, p: EnsembleParams, volume: float) -> PressureValue:
    """``(eps / (beta |V|)) sum_i ln(1 + eps z exp(-beta E_i))``."""
    lam = np.asarray(S.eigenvalues if isinstance(S, SpectralData) else S)
    _check_bose(lam, p)
    u = p.epsilon * complex(p.z) * np.exp(-p.beta * lam)
    w = 1.0 + u
    if np.any((w.imag == 0) & (w.real <= 0)):
        raise DomainError("1 + eps z exp(-beta E) reaches the logarithm's cut")
    total = np.sum(special.log1p(u))
    return PressureValue(value=complex(p.epsilon * total / (p.beta * volume)),
                         method="eigen", volume=float(volume))


def admissible_e0_prime(E0: float, K: CompactK, beta: float, epsilon: int,
                        offset: float = 1.0) -> float:
    """Lower bound ``e0' < E0`` that keeps ``K`` off the excluded ray.

    For Bose statistics the ray ``[exp(beta e0'), inf)`` must clear the
    largest real part reached by ``K``; the offset is reduced if needed.
    """
    if epsilon == 1:
        return E0 - offset
    reach = max(d.center.real + d.radius for d in K.discs)
    if reach <= 0:
        return E0 - offset
    limit = np.log(reach) / beta
    if limit >= E0:
        raise DomainError(f"K reaches {reach}, beyond the Bose bound exp(beta E0)")
    return E0 - min(offset, 0.5 * (E0 - limit))


def pressure_dunford(H, contour, p: EnsembleParams, volume: float) -> PressureValue:
    """Pressure from the trace of the contour-integral logarithm."""
    L = dunford_log(H, contour, p.z, p.beta, p.epsilon)
    value = p.epsilon * np.trace(L) / (p.beta * volume)
    return PressureValue(value=complex(value), method="dunford", volume=float(volume))


class PressureFunction:
    """``omega -> P(omega)`` for a fixed box, field and ensemble.

    ``method="eigen"`` sums over eigenvalues of ``H(omega)`` (general complex
    solver off the real axis); ``method="dunford"`` integrates over a contour
    built for each ``omega`` around the current spectrum.
    """

    def __init__(self, family: HamiltonianFamily, p: EnsembleParams, method: str = "eigen",
                 K: Optional[CompactK] = None, e0_offset: float = 1.0, ray_tol: float = 1e-14,
                 segment_nodes: int = 64, ray_nodes: int = 128):
        if method not in ("eigen", "dunford"):
            raise ConfigurationError(f"unknown pressure method {method!r}")
        self.family = family
        self.params = p
        self.method = method
        self.K = K
        self.e0_offset = e0_offset
        self.ray_tol = ray_tol
        self.segment_nodes = segment_nodes
        self.ray_nodes = ray_nodes

    def spectrum(self, omega) -> SpectralData:
        return eigendecompose(self.family(omega))

    def __call__(self, omega, z=None) -> complex:
        p = self.params if z is None else self.params.with_z(z)
        H = self.family(omega)
        S = eigendecompose(H)
        if self.method == "eigen":
            return pressure(S, p, self.family.volume).value
        K = self.K if self.K is not None else CompactK.point(p.z)
        e0p = admissible_e0_prime(S.E0, K, p.beta, p.epsilon, self.e0_offset)
        C = build_contour(K, S, p.beta, p.epsilon, e0p, ray_tol=self.ray_tol,
                          min_panels_segment=max(1, self.segment_nodes // GL_ORDER),
                          min_panels_ray=max(1, self.ray_nodes // GL_ORDER))
        return pressure_dunford(H, C, p, self.family.volume).value


_RECOVERABLE = (ContourError, DomainError, ConditioningError, FloatingPointError,
                np.linalg.LinAlgError)


def cauchy_derivative(func: Callable[[complex], complex], x0: complex, order: int,
                      radius: float = 0.1, nodes: int = 32, max_halvings: int = 6):
    """``order``-th derivative of an analytic ``func`` at ``x0``.

    Trapezoidal rule on the circle ``|x - x0| = radius``.  The radius is
    halved when an evaluation fails (up to ``max_halvings`` times).

    Returns
    -------
    value : complex
    radius : float
        The radius that was finally used.
    """
    if order < 0:
        raise ConfigurationError("derivative order must be nonnegative")
    nodes = max(nodes, 2 * order + 2)
    theta = 2 * np.pi * np.arange(nodes) / nodes
    r = radius
    for _ in range(max_halvings + 1):
        try:
            vals = np.array([func(x0 + r * np.exp(1j * t)) for t in theta], dtype=complex)
            if not np.all(np.isfinite(vals)):
                raise FloatingPointError("non-finite value on the circle")
        except _RECOVERABLE:
            r *= 0.5
            continue
        coef = np.mean(vals * np.exp(-1j * order * theta)) / r ** order
        return complex(math.factorial(order) * coef), r
    raise AnalyticityRadiusError(f"evaluation failed on every circle down to radius {2 * r}",
                                 radius=2 * r)


def susceptibility_cauchy(family: HamiltonianFamily, p: EnsembleParams, order: int,
                          radius: float = 0.1, nodes: int = 32, method: str = "eigen",
                          **kwargs) -> complex:
    """``d^N P / d omega^N`` at ``p.omega`` (code units, e/c = 1)."""
    if order < 1:
        raise ConfigurationError("susceptibility order must be at least 1")
    P = PressureFunction(family, p, method=method, **kwargs)
    value, _ = cauchy_derivative(P, complex(p.omega), order, radius, nodes)
    return value


def fd_weights(order: int, offsets) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative on ``offsets``."""
    x = np.asarray(offsets, dtype=float)
    m = len(x)
    if order >= m:
        raise ConfigurationError("stencil too small for the requested derivative")
    A = np.vander(x, m, increasing=True).T
    b = np.zeros(m)
    b[order] = math.factorial(order)
    return np.linalg.solve(A, b)


def fd_derivative(func: Callable[[float], complex], x0: float, order: int,
                  step: Optional[float] = None, accuracy: int = 4) -> complex:
    """Central difference of ``order`` with truncation error ``O(step^accuracy)``."""
    if step is None:
        # higher orders amplify eigensolver roundoff by step^-order
        step = 1e-3 if order <= 2 else 2e-2
    half = (order + 1) // 2 - 1 + accuracy // 2
    offsets = np.arange(-half, half + 1)
    w = fd_weights(order, offsets)
    vals = np.array([func(x0 + k * step) if wk != 0 else 0.0
                     for k, wk in zip(offsets, w)], dtype=complex)
    return complex(np.dot(w, vals) / step ** order)


def susceptibility_fd(family: HamiltonianFamily, p: EnsembleParams, order: int,
                      step: Optional[float] = None) -> complex:
    """Finite-difference oracle for :func:`susceptibility_cauchy` (real omega)."""
    P = PressureFunction(family, p, method="eigen")
    return fd_derivative(P, complex(p.omega).real, order, step)


def log_series_pressure(eigenvalues, p: EnsembleParams, volume: float,
                        terms: int = 200) -> complex:
    """Pressure from the power series of ``ln(1 + u)`` summed level by level."""
    u = p.epsilon * complex(p.z) * np.exp(-p.beta * np.asarray(eigenvalues))
    if np.max(np.abs(u)) >= 1:
        raise DomainError("power series needs |z| exp(-beta E_i) < 1 for all levels")
    m = np.arange(1, terms + 1)
    series = np.sum(((-1.0) ** (m + 1))[None, :] * u[:, None] ** m[None, :] / m[None, :])
    return complex(p.epsilon * series / (p.beta * volume))


def _loop(func, center, radius, nodes):
    theta = 2 * np.pi * np.arange(nodes) / nodes
    pts = center + radius * np.exp(1j * theta)
    vals = np.array([func(x) for x in pts], dtype=complex)
    dx = 1j * radius * np.exp(1j * theta) * (2 * np.pi / nodes)
    return complex(np.sum(vals * dx)), float(np.max(np.abs(vals))), 2 * np.pi * radius


def analyticity_probe(family: HamiltonianFamily, p: EnsembleParams, omega0: complex,
                      K: Optional[CompactK] = None, radius: float = 1e-2, nodes: int = 64,
                      cr_step: float = 1e-4, method: str = "dunford",
                      loop_tol: float = 1e-7, cr_tol: float = 1e-5) -> dict:
    """Numerical analyticity diagnostics of the pressure in ``omega`` and ``z``.

    Reports the closed-loop integral of ``P`` over a circle around
    ``omega0``, the Cauchy-Riemann residual there, the loop integral in
    ``z`` over the boundary of the first disc of ``K`` and a comparison
    with the small-activity power series.
    """
    if K is None:
        K = CompactK.point(p.z)
    PF = PressureFunction(family, p, method=method, K=K)
    omega0 = complex(omega0)
    loop, vmax, length = _loop(PF, omega0, radius, nodes)
    ratio_w = abs(loop) / (length * vmax) if vmax > 0 else 0.0

    h = cr_step
    dx = (PF(omega0 + h) - PF(omega0 - h)) / (2 * h)
    dy = (PF(omega0 + 1j * h) - PF(omega0 - 1j * h)) / (2 * h)
    cr = abs(dy - 1j * dx) / max(abs(dx), abs(PF(omega0)), 1e-300)

    disc = K.discs[0]
    z_radius = disc.radius if disc.radius > 0 else 0.1 * max(abs(disc.center), 1e-3)
    PZ = PressureFunction(family, p.with_omega(omega0), method=method, K=K)
    z_loop, z_max, z_len = _loop(lambda z: PZ(omega0, z), disc.center, z_radius, nodes)
    ratio_z = abs(z_loop) / (z_len * z_max) if z_max > 0 else 0.0

    S = eigendecompose(family(omega0))
    z_small = 0.5 * np.exp(p.beta * S.E0) * np.exp(1j * 0.3)
    ps = p.with_z(z_small)
    exact = pressure(S, ps, family.volume).value
    series = log_series_pressure(S.eigenvalues, ps, family.volume)
    series_err = abs(exact - series) / max(abs(exact), 1e-300)
    return {
        "omega0": [omega0.real, omega0.imag],
        "loop_radius": radius,
        "omega_loop_abs": abs(loop),
        "omega_loop_ratio": ratio_w,
        "cr_residual": cr,
        "z_loop_abs": abs(z_loop),
        "z_loop_ratio": ratio_z,
        "series_rel_error": series_err,
        "passed": bool(ratio_w < loop_tol and ratio_z < loop_tol and cr < cr_tol
                       and series_err < 1e-10),
    }
