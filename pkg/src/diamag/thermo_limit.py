"""Box-scaling scans, integrated density of states and infinite-volume estimates."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special
from scipy.integrate import quad

from .contour import CompactK
from .exceptions import ConfigurationError, DomainError
from .grand_canonical import EnsembleParams
from .lattice import BoxSpec, FieldConfig, HamiltonianFamily
from .spectral import DEFAULT_DENSE_CAP, eigendecompose, eigenvalues_below

__all__ = [
    "IDSample",
    "LimitReport",
    "box_spectrum",
    "ids_estimate",
    "pressure_from_ids",
    "pressure_from_density",
    "continuum_free_pressure",
    "richardson",
    "limit_scan",
    "integrated_ids",
    "weyl_exponent",
]


@dataclass(frozen=True)
class IDSample:
    """Eigenvalue counting function of one box.

    ``complete`` is false when only the part of the spectrum below some
    cutoff was computed.
    """

    L: float
    energies: np.ndarray
    volume: float
    complete: bool = True

    @property
    def E0(self) -> float:
        return float(self.energies[0])

    def counting(self, E) -> np.ndarray:
        """``N(E) = #{i : E_i <= E}`` (right-continuous step function)."""
        return np.searchsorted(self.energies, np.asarray(E, dtype=float), side="right")

    def rho(self, E) -> np.ndarray:
        return self.counting(E) / self.volume


def box_spectrum(box: BoxSpec, cfg: FieldConfig, e_max: Optional[float] = None,
                 dense_cap: int = DEFAULT_DENSE_CAP) -> tuple:
    """Sorted real spectrum of a box at real ``omega`` and a completeness flag."""
    omega = complex(cfg.omega)
    if omega.imag != 0:
        raise ConfigurationError("box scans need a real omega")
    H = HamiltonianFamily(box, cfg)(omega.real)
    if H.n <= dense_cap:
        return np.sort(eigendecompose(H, dense_cap=dense_cap, hermitian=True).eigenvalues), True
    if e_max is None:
        raise ConfigurationError(f"dimension {H.n} exceeds the dense cap; give e_max for the "
                                 "iterative path")
    S = eigenvalues_below(H, e_max, dense_cap=dense_cap)
    return np.sort(S.eigenvalues), False


def ids_estimate(scales: Sequence[float], box: BoxSpec, cfg: FieldConfig, E_grid,
                 dense_cap: int = DEFAULT_DENSE_CAP) -> list:
    """Counting functions ``N_L(E) / |Lambda_L|`` for each scale ``L``."""
    E_grid = np.asarray(E_grid, dtype=float)
    e_max = float(E_grid.max()) if E_grid.size else None
    out = []
    for L in scales:
        b = box.with_scale(L)
        energies, complete = box_spectrum(b, cfg, e_max, dense_cap)
        if e_max is not None and energies.size and e_max < energies[0]:
            warnings.warn(f"E grid lies below the ground energy {energies[0]:.4g} at L={L}; "
                          "all counts are zero", RuntimeWarning, stacklevel=2)
        out.append(IDSample(L=float(L), energies=energies, volume=b.volume, complete=complete))
    return out


def _check_admissible(E0: float, p: EnsembleParams):
    z = complex(p.z)
    if p.epsilon == -1 and z.imag == 0 and z.real >= np.exp(p.beta * E0):
        raise DomainError(f"Bose activity {z.real} not below exp(beta E0) = "
                          f"{np.exp(p.beta * E0)}")


def pressure_from_ids(rho: IDSample, p: EnsembleParams) -> float:
    """``(eps / beta) \\int ln(1 + eps z exp(-beta E)) d rho(E)`` for a step ``rho``.

    The Stieltjes integral against the counting function reduces to a sum
    over its jumps, so it reproduces the eigenvalue formula exactly.
    """
    _check_admissible(rho.E0, p)
    f = special.log1p(p.epsilon * complex(p.z) * np.exp(-p.beta * rho.energies))
    value = p.epsilon * np.sum(f) / (p.beta * rho.volume)
    return float(value.real) if complex(p.z).imag == 0 else complex(value)


def pressure_from_density(E_grid, rho_values, p: EnsembleParams) -> float:
    """Stieltjes sum of ``(eps / beta) f(E)`` against a tabulated nondecreasing IDS."""
    E = np.asarray(E_grid, dtype=float)
    r = np.asarray(rho_values, dtype=float)
    jumps = np.diff(np.concatenate([[0.0], r]))
    f = special.log1p(p.epsilon * complex(p.z) * np.exp(-p.beta * E)).real
    return float(p.epsilon * np.sum(f * jumps) / p.beta)


def continuum_free_pressure(beta: float, z: float, epsilon: int) -> float:
    """``(eps / beta) (2 pi)^-3 \\int ln(1 + eps z exp(-beta k^2 / 2)) d^3k``."""
    if epsilon == -1 and not z < 1:
        raise DomainError("the continuum Bose gas needs z < 1")

    def integrand(k):
        return k * k * np.log1p(epsilon * z * np.exp(-beta * k * k / 2))

    val, _ = quad(integrand, 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(epsilon * 4 * np.pi * val / ((2 * np.pi) ** 3 * beta))


def richardson(xs, ys) -> tuple:
    """Polynomial extrapolation of ``ys(x)`` to ``x = 0`` (Neville tableau).

    Returns
    -------
    estimate : float
        Top of the tableau.
    uncertainty : float
        Difference between the last two tableau levels.
    tableau : list of lists
    """
    xs = [float(x) for x in xs]
    T = [list(map(float, ys))]
    for k in range(1, len(xs)):
        prev = T[-1]
        T.append([(xs[i] * prev[i + 1] - xs[i + k] * prev[i]) / (xs[i] - xs[i + k])
                  for i in range(len(prev) - 1)])
    est = T[-1][-1]
    unc = abs(T[-1][-1] - T[-2][-1]) if len(T) > 1 else float("inf")
    return est, unc, T


@dataclass
class LimitReport:
    scales: list
    pressures: list
    increments: list
    monotone: bool
    cauchy: bool
    p_inf: float
    uncertainty: float
    uniformity: float = float("nan")
    center_increment: float = float("nan")
    z_mesh: list = field(default_factory=list)
    mesh_last_increments: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "scales", "pressures", "increments", "monotone", "cauchy", "p_inf", "uncertainty",
            "uniformity", "center_increment", "z_mesh", "mesh_last_increments", "params")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def limit_scan(scales: Sequence[float], box: BoxSpec, cfg: FieldConfig, p: EnsembleParams,
               K: Optional[CompactK] = None, mesh_points: int = 8,
               dense_cap: int = DEFAULT_DENSE_CAP) -> LimitReport:
    """Pressure over increasing boxes and its extrapolation in ``1/L``.

    The pressure at the centre of ``K`` (or at ``p.z``) is extrapolated;
    the last increment is also evaluated on a mesh of ``K`` to measure
    uniformity in the activity.
    """
    scales = sorted(float(s) for s in scales)
    if len(scales) < 3:
        raise ConfigurationError("a limit scan needs at least three scales")
    spectra = [box_spectrum(box.with_scale(L), cfg, dense_cap=dense_cap)[0] for L in scales]
    samples = [IDSample(L, E, box.with_scale(L).volume) for L, E in zip(scales, spectra)]

    z_center = K.center if K is not None else complex(p.z)
    pc = p.with_z(z_center.real if z_center.imag == 0 else z_center)
    P = [float(np.real(pressure_from_ids(s, pc))) for s in samples]
    inc = [abs(b - a) for a, b in zip(P[:-1], P[1:])]
    monotone = all(b < a for a, b in zip(inc[:-1], inc[1:]))
    est, unc, _ = richardson([1 / L for L in scales], P)

    zs, last = [], []
    if K is not None:
        for zk in K.mesh(mesh_points):
            pk = p.with_z(zk)
            a = pressure_from_ids(samples[-2], pk)
            b = pressure_from_ids(samples[-1], pk)
            zs.append([float(np.real(zk)), float(np.imag(zk))])
            last.append(float(abs(b - a)))
    uniformity = max(last) if last else inc[-1]
    return LimitReport(scales=scales, pressures=P, increments=inc, monotone=monotone,
                       cauchy=monotone and inc[-1] < inc[0], p_inf=float(est),
                       uncertainty=float(unc), uniformity=float(uniformity),
                       center_increment=float(inc[-1]), z_mesh=zs, mesh_last_increments=last,
                       params={"beta": p.beta, "epsilon": p.epsilon,
                               "z": [float(np.real(z_center)), float(np.imag(z_center))],
                               "n": box.n})


def integrated_ids(sample: IDSample, E) -> np.ndarray:
    """``\\int_{-inf}^E rho(e) de = sum_i (E - E_i)_+ / |Lambda|``."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    return np.maximum(E[:, None] - sample.energies[None, :], 0.0).sum(axis=1) / sample.volume


def weyl_exponent(samples: Sequence[IDSample], window=(3.0, 15.0), points: int = 25) -> float:
    """Growth exponent of the IDS, which is ``3/2`` for the free Weyl law.

    The integrated IDS (smoother than the step function) is extrapolated in
    ``1/L`` at every energy to remove the Dirichlet surface term, fitted by
    a power law on ``window`` and the exponent reduced by one.
    """
    if len(samples) < 2:
        raise ConfigurationError("need at least two box sizes")
    grid = np.geomspace(window[0], window[1], points)
    vals = np.array([integrated_ids(s, grid) for s in samples])
    xs = [1 / s.L for s in samples]
    ext = np.array([richardson(xs, vals[:, i])[0] for i in range(points)])
    if np.any(ext <= 0):
        raise DomainError("window reaches below the extrapolated band bottom")
    slope = np.polyfit(np.log(grid), np.log(ext), 1)[0]
    return float(slope - 1)
