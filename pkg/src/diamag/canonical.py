"""Canonical partition functions by coefficient extraction from the grand partition function."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .exceptions import ConfigurationError, ConvergenceError, DomainError
from .grand_canonical import EnsembleParams, cauchy_derivative, fd_derivative, pressure
from .lattice import HamiltonianFamily
from .spectral import SpectralData, eigendecompose

__all__ = [
    "CanonicalParams",
    "grand_partition",
    "saddle_radius",
    "log_canonical_Z_contour",
    "canonical_Z_contour",
    "canonical_Z_oracle",
    "free_energy",
    "canonical_free_energy",
    "canonical_susceptibility",
    "canonical_susceptibility_fd",
]


@dataclass(frozen=True)
class CanonicalParams:
    """Particle number (or density) and an optional activity-circle radius."""

    N_particles: int
    rho0: Optional[float] = None
    contour_radius: Optional[float] = None

    def __post_init__(self):
        if int(self.N_particles) != self.N_particles or self.N_particles < 0:
            raise ConfigurationError(f"particle number must be a nonnegative integer, "
                                     f"got {self.N_particles!r}")
        if self.contour_radius is not None and not self.contour_radius > 0:
            raise ConfigurationError("contour radius must be positive")

    @classmethod
    def from_density(cls, rho0: float, volume: float, **kwargs) -> "CanonicalParams":
        N = int(round(rho0 * volume))
        if N < 1:
            raise ConfigurationError(f"density {rho0} gives no particle in volume {volume}")
        return cls(N_particles=N, rho0=rho0, **kwargs)


def _levels(S) -> np.ndarray:
    return np.asarray(S.eigenvalues if isinstance(S, SpectralData) else S)


def grand_partition(S, beta: float, z: complex, epsilon: int, volume: float = 1.0,
                    rtol: float = 1e-10) -> complex:
    """``prod_i (1 + eps z exp(-beta E_i))^eps``, checked against ``exp(beta |V| P)``."""
    lam = _levels(S)
    u = epsilon * complex(z) * np.exp(-beta * lam)
    if epsilon == -1 and np.min(np.abs(1.0 + u)) < 1e-12:
        raise DomainError("activity sits on a Bose pole: |1 - z exp(-beta E_i)| < 1e-12")
    xi = complex(np.prod((1.0 + u) ** epsilon))
    p = EnsembleParams(beta=beta, z=z, epsilon=epsilon)
    via_p = np.exp(beta * volume * pressure(lam, p, volume).value)
    if abs(xi - via_p) > rtol * max(abs(xi), 1e-300) * max(1.0, lam.size):
        raise ConvergenceError(f"product form {xi} and pressure form {via_p} disagree")
    return xi


def saddle_radius(x: np.ndarray, N: int, epsilon: int) -> float:
    """Radius ``r`` with ``sum r x_i / (1 + eps r x_i) = N`` (mean occupation ``N``).

    ``x`` are Boltzmann weights scaled so that ``max x = 1``.
    """
    x = np.abs(np.asarray(x))
    if N == 0:
        return 1.0
    target = float(N)
    if epsilon == 1:
        target = min(target, x.size - 0.5)

    def g(logr):
        r = np.exp(logr)
        return np.sum(r * x / (1 + epsilon * r * x)) - target

    lo = -50.0
    if epsilon == 1:
        hi = 50.0
        while g(hi) < 0:
            hi *= 2
    else:
        hi = math.log1p(-1e-15)
        if g(hi) < 0:
            return float(np.exp(hi))
    return float(np.exp(brentq(g, lo, hi, xtol=1e-12)))


def log_canonical_Z_contour(S, p: CanonicalParams, beta: float, epsilon: int,
                            nodes: Optional[int] = None, max_nodes: int = 1 << 16,
                            tol: float = 1e-13, real_tol: float = 1e-10,
                            allow_complex: bool = False) -> complex:
    """``ln Z_N`` where ``Z_N = (1 / 2 pi i) \\oint Xi(z) z^{-N-1} dz``.

    The trapezoidal rule runs on a circle centred at the origin, with
    energies shifted by the ground energy to avoid overflow.  The default
    radius is the saddle point of ``|Xi(z) z^{-N}|`` on the positive axis.
    Fermi rules use more nodes than levels (exact for the polynomial);
    Bose rules double the node count until the result is stable to ``tol``.
    """
    if epsilon not in (1, -1):
        raise ConfigurationError("epsilon must be +1 or -1")
    lam = np.asarray(_levels(S), dtype=complex)
    N = int(p.N_particles)
    if epsilon == 1 and N > lam.size:
        return complex(-np.inf)
    if N == 0:
        return 0j
    E0 = float(lam.real.min())
    x = np.exp(-beta * (lam - E0))
    if p.contour_radius is not None:
        r = p.contour_radius * np.exp(-beta * E0)
    else:
        r = saddle_radius(x, N, epsilon)
    if epsilon == -1 and r >= 1.0:
        raise DomainError(f"circle radius {r * np.exp(beta * E0)} reaches the Bose pole "
                          f"exp(beta E0) = {np.exp(beta * E0)}")

    def extract(M):
        theta = 2 * np.pi * np.arange(M) / M
        zk = r * np.exp(1j * theta)
        logxi = epsilon * np.sum(special.log1p(epsilon * zk[:, None] * x[None, :]), axis=1)
        L = logxi - 1j * N * theta
        shift = L.real.max()
        c = np.mean(np.exp(L - shift))
        return shift, c

    if epsilon == 1:
        M = nodes or 1 << int(np.ceil(np.log2(lam.size + 2)))
        shift, c = extract(M)
    else:
        M = nodes or 64
        shift, c = extract(M)
        while nodes is None:
            M *= 2
            if M > max_nodes:
                raise ConvergenceError("Bose coefficient extraction did not stabilize",
                                       iterations=M)
            s2, c2 = extract(M)
            change = abs(c2 * np.exp(s2 - shift) - c) / abs(c)
            shift, c = s2, c2
            if change < tol:
                break
    if not allow_complex and abs(c.imag) > real_tol * abs(c):
        raise ConvergenceError(f"imaginary residual {abs(c.imag) / abs(c):.2e} of Z_N")
    if c.real <= 0 and not allow_complex:
        raise ConvergenceError("nonpositive Z_N from the quadrature")
    c = c if allow_complex else complex(c.real)
    return complex(shift + np.log(c) - N * np.log(r) - beta * N * E0)


def canonical_Z_contour(S, p: CanonicalParams, beta: float, epsilon: int, **kwargs) -> float:
    """``Z_N = [z^N] Xi(z)`` by contour quadrature."""
    return float(np.exp(log_canonical_Z_contour(S, p, beta, epsilon, **kwargs).real))


def canonical_Z_oracle(S, N: int, beta: float, epsilon: int) -> float:
    """``e_N`` (Fermi) or ``h_N`` (Bose) of ``exp(-beta E_i)`` in exact arithmetic.

    Newton's identities on power sums, evaluated with ``Fraction``.
    Intended for small ``N`` and few levels.
    """
    lam = np.asarray(_levels(S), dtype=float)
    if N == 0:
        return 1.0
    E0 = float(lam.min())
    xs = [Fraction(float(v)) for v in np.exp(-beta * (lam - E0))]
    power = [None] + [sum(x ** k for x in xs) for k in range(1, N + 1)]
    coef = [Fraction(1)]
    for m in range(1, N + 1):
        if epsilon == 1:
            acc = sum((-1) ** (k - 1) * coef[m - k] * power[k] for k in range(1, m + 1))
        else:
            acc = sum(coef[m - k] * power[k] for k in range(1, m + 1))
        coef.append(acc / m)
    return float(coef[N]) * math.exp(-beta * N * E0)


def free_energy(Z: float, beta: float, is_log: bool = False) -> float:
    """Helmholtz free energy ``-ln Z / beta``."""
    if is_log:
        return float(-np.real(Z) / beta)
    if not Z > 0:
        raise ConvergenceError(f"partition function must be positive, got {Z}")
    return float(-np.log(Z) / beta)


def canonical_free_energy(S, p: CanonicalParams, beta: float, epsilon: int) -> float:
    return free_energy(log_canonical_Z_contour(S, p, beta, epsilon), beta, is_log=True)


def _complex_free_energy(family: HamiltonianFamily, p: CanonicalParams, beta: float,
                         epsilon: int):
    def f(omega):
        S = eigendecompose(family(omega))
        logZ = log_canonical_Z_contour(S, p, beta, epsilon, allow_complex=True)
        if not np.cos(logZ.imag) > 0:
            raise DomainError(f"Re Z_N <= 0 at omega = {omega}")
        return -logZ / beta
    return f


def canonical_susceptibility(family: HamiltonianFamily, p: CanonicalParams, beta: float,
                             epsilon: int, omega0: complex = 0.0, order: int = 1,
                             radius: float = 0.1, nodes: int = 32) -> complex:
    """``m^N = -(1/|V|) d^N f / d omega^N`` by a Cauchy circle in ``omega``.

    ``Re Z_N > 0`` is required at every node; failures shrink the circle.
    """
    f = _complex_free_energy(family, p, beta, epsilon)
    d, _ = cauchy_derivative(f, complex(omega0), order, radius, nodes)
    return complex(-d / family.volume)


def canonical_susceptibility_fd(family: HamiltonianFamily, p: CanonicalParams, beta: float,
                                epsilon: int, omega0: float = 0.0, order: int = 1,
                                step: Optional[float] = None) -> float:
    """Finite-difference oracle for :func:`canonical_susceptibility`."""
    def f(omega):
        S = eigendecompose(family(omega))
        return canonical_free_energy(S, p, beta, epsilon)
    return float(np.real(-fd_derivative(f, float(np.real(omega0)), order, step) / family.volume))
