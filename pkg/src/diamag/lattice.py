"""Finite-difference magnetic Schrodinger operators on Dirichlet boxes.

The continuum operator ``1/2 (-i grad - omega a)^2 + V`` on the dilated box
``(0, L)^3`` is replaced by a 7-point stencil on the interior points of a
cubic grid with spacing ``h = 1/n``.  The magnetic field enters through
Peierls phases ``exp(-i omega a(mid) . d)`` attached to each nearest-neighbour
link, with ``a = a_c + a_p`` and ``a_c(x) = 1/2 e x x`` the symmetric gauge
of a unit field along ``e = (0, 0, 1)``.

Entries of the assembled matrix are entire functions of ``omega``; complex
``omega`` is handled by evaluating the same formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .exceptions import ConfigurationError, ResourceError

__all__ = [
    "BoxSpec",
    "FieldConfig",
    "GridIndexMap",
    "HamiltonianMatrix",
    "HamiltonianFamily",
    "ZeroPotential",
    "CoulombWells",
    "InversePowerWells",
    "TabulatedPotential",
    "ZeroVectorPotential",
    "SinusoidalVectorPotential",
    "symmetric_gauge",
    "build_grid",
    "sample_potential",
    "peierls_phase",
    "assemble_hamiltonian",
    "dirichlet_laplacian_eigenvalues",
    "DEFAULT_MAX_SITES",
]

DEFAULT_MAX_SITES = 200_000


@dataclass(frozen=True)
class BoxSpec:
    """Dilated box ``Lambda_L = L * Lambda_1`` sampled at ``n`` points per unit.

    Parameters
    ----------
    n : int
        Grid points per unit length; spacing is ``h = 1/n``.
    scale : float
        Dilation factor ``L >= 1``.
    base_cell : tuple of float
        Side lengths of ``Lambda_1`` (the unit cube by default).
    """

    n: int = 4
    scale: float = 1.0
    base_cell: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"points_per_unit n must be an integer >= 2, got {self.n!r}")
        if not np.isfinite(self.scale) or self.scale < 1:
            raise ConfigurationError(f"scale L must be >= 1, got {self.scale!r}")
        sides = tuple(float(s) for s in self.base_cell)
        if len(sides) != 3 or any(not np.isfinite(s) or s <= 0 for s in sides):
            raise ConfigurationError(f"degenerate base cell {self.base_cell!r}")
        object.__setattr__(self, "base_cell", sides)
        for s in sides:
            cells = s * self.scale * self.n
            if abs(cells - round(cells)) > 1e-9:
                raise ConfigurationError(
                    f"side {s} * L {self.scale} is not a multiple of the grid spacing 1/{self.n}")
            if round(cells) < 2:
                raise ConfigurationError("box has no interior grid points")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        """Interior points per axis."""
        return tuple(int(round(s * self.scale * self.n)) - 1 for s in self.base_cell)

    @property
    def n_sites(self) -> int:
        mx, my, mz = self.shape
        return mx * my * mz

    @property
    def volume(self) -> float:
        return float(np.prod(self.base_cell)) * self.scale ** 3

    @property
    def extent(self) -> tuple:
        return tuple(s * self.scale for s in self.base_cell)

    def with_scale(self, scale: float) -> "BoxSpec":
        return BoxSpec(n=self.n, scale=scale, base_cell=self.base_cell)


@dataclass(frozen=True)
class GridIndexMap:
    """Bijection between interior sites and matrix rows (x slowest, z fastest)."""

    shape: tuple
    h: float

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.shape))

    def index(self, i, j, k):
        _, my, mz = self.shape
        return (np.asarray(i) * my + np.asarray(j)) * mz + np.asarray(k)

    def multi_index(self, idx):
        return np.unravel_index(idx, self.shape)

    @property
    def coordinates(self) -> np.ndarray:
        """``(N, 3)`` site positions; the box occupies ``(0, L)^3``."""
        axes = [self.h * np.arange(1, m + 1) for m in self.shape]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


def build_grid(box: BoxSpec) -> GridIndexMap:
    """Enumerate the interior sites of ``box`` in lexicographic (x, y, z) order."""
    return GridIndexMap(shape=box.shape, h=box.h)


# --- potential samplers -----------------------------------------------------
# Scalar samplers are called as ``V(points, r_cut)`` on an ``(M, 3)`` array;
# vector samplers as ``a(points)`` returning ``(M, 3)``.


def _offset_from_cell_center(points):
    pts = np.asarray(points, dtype=float)
    return pts - (np.floor(pts) + 0.5)


class ZeroPotential:
    name = "zero"

    def __call__(self, points, r_cut=None):
        return np.zeros(len(np.atleast_2d(points)))

    def params(self):
        return {}


@dataclass(frozen=True)
class CoulombWells:
    """Attractive wells ``-g / |x - x_j|`` at the unit-cell centres.

    Only the nearest centre contributes (the full lattice sum diverges), and
    distances below ``r_cut`` are clamped.
    """

    coupling: float = 1.0
    name = "coulomb"

    def __call__(self, points, r_cut):
        d = np.linalg.norm(_offset_from_cell_center(np.atleast_2d(points)), axis=1)
        return -self.coupling / np.maximum(d, r_cut)

    def params(self):
        return {"coupling": self.coupling}


@dataclass(frozen=True)
class InversePowerWells:
    """Wells ``-g / |x - x_j|^alpha`` with ``alpha < 2`` (Kato class in 3D)."""

    coupling: float = 1.0
    alpha: float = 1.5
    name = "inverse_power"

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ConfigurationError(f"inverse-power exponent must lie in (0, 2), got {self.alpha}")

    def __call__(self, points, r_cut):
        d = np.linalg.norm(_offset_from_cell_center(np.atleast_2d(points)), axis=1)
        return -self.coupling / np.maximum(d, r_cut) ** self.alpha

    def params(self):
        return {"coupling": self.coupling, "alpha": self.alpha}


class TabulatedPotential:
    """Periodic potential given as samples on the unit cell.

    Values are looked up at the nearest tabulated point under periodic
    wrapping, so the sampler is exactly ``Z^3``-periodic.
    """

    name = "tabulated"

    def __init__(self, points, values):
        pts = np.mod(np.asarray(points, dtype=float), 1.0)
        vals = np.asarray(values, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) != len(vals) or len(vals) == 0:
            raise ConfigurationError("tabulated potential needs N x 3 points and N values")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("tabulated potential contains non-finite values")
        # cKDTree requires coordinates strictly below boxsize
        pts[pts >= 1.0] = 0.0
        self._tree = cKDTree(pts, boxsize=1.0)
        self._values = vals

    @classmethod
    def from_text(cls, text: str) -> "TabulatedPotential":
        """Parse ``x y z value`` lines; blank lines and ``#`` comments are skipped."""
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ConfigurationError(f"line {lineno}: expected 'x y z value', got {line!r}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: {exc}") from None
        if not rows:
            raise ConfigurationError("tabulated potential file is empty")
        arr = np.array(rows)
        return cls(arr[:, :3], arr[:, 3])

    @classmethod
    def from_file(cls, path) -> "TabulatedPotential":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def __call__(self, points, r_cut=None):
        pts = np.mod(np.atleast_2d(np.asarray(points, dtype=float)), 1.0)
        pts[pts >= 1.0] = 0.0
        _, idx = self._tree.query(pts)
        return self._values[idx]

    def params(self):
        return {"n_samples": len(self._values)}


class ZeroVectorPotential:
    name = "zero"

    def __call__(self, points):
        return np.zeros_like(np.atleast_2d(np.asarray(points, dtype=float)))

    def params(self):
        return {}


@dataclass(frozen=True)
class SinusoidalVectorPotential:
    """Smooth periodic ``a_p(x) = A (sin 2pi y, sin 2pi z, sin 2pi x)``."""

    amplitude: float = 0.5
    name = "sinusoidal"

    def __call__(self, points):
        x, y, z = np.atleast_2d(np.asarray(points, dtype=float)).T
        tau = 2 * np.pi
        return self.amplitude * np.stack([np.sin(tau * y), np.sin(tau * z), np.sin(tau * x)], axis=1)

    def params(self):
        return {"amplitude": self.amplitude}


def symmetric_gauge(points) -> np.ndarray:
    """``a_c(x) = 1/2 e x x`` for a unit field along the third axis."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros_like(p)
    out[:, 0] = -0.5 * p[:, 1]
    out[:, 1] = 0.5 * p[:, 0]
    return out


@dataclass(frozen=True)
class FieldConfig:
    """Field strength and periodic perturbations.

    ``gauge`` is an optional scalar function ``chi``; it adds
    ``chi(to) - chi(from)`` to every link integral, i.e. replaces ``a_p`` by
    ``a_p + grad chi`` on the lattice.
    """

    omega: complex = 0.0
    vector_potential: Callable = field(default_factory=ZeroVectorPotential)
    potential: Callable = field(default_factory=ZeroPotential)
    r_cut: Optional[float] = None
    gauge: Optional[Callable] = None

    def __post_init__(self):
        if self.r_cut is not None and not self.r_cut > 0:
            raise ConfigurationError(f"singularity cutoff must be positive, got {self.r_cut}")
        if not np.isfinite(complex(self.omega)):
            raise ConfigurationError("omega must be finite")

    def cutoff(self, h: float) -> float:
        return self.r_cut if self.r_cut is not None else 0.5 * h

    def vector_field(self, points) -> np.ndarray:
        return symmetric_gauge(points) + self.vector_potential(points)

    def with_omega(self, omega) -> "FieldConfig":
        return FieldConfig(omega=omega, vector_potential=self.vector_potential,
                           potential=self.potential, r_cut=self.r_cut, gauge=self.gauge)


def sample_potential(cfg: FieldConfig, site, h: float = None) -> float:
    """Value of the scalar potential at ``site`` (cutoff ``cfg.r_cut`` or ``h/2``)."""
    if cfg.r_cut is None and h is None:
        raise ConfigurationError("sampling needs either cfg.r_cut or the grid spacing h")
    return float(cfg.potential(np.atleast_2d(site), cfg.cutoff(h))[0])


def _link_integrals(cfg: FieldConfig, start, disp):
    """Midpoint-rule line integrals of ``a`` along links (plus gauge terms)."""
    mid = start + 0.5 * disp
    s = np.einsum("ij,ij->i", cfg.vector_field(mid), disp)
    if cfg.gauge is not None:
        s = s + np.asarray(cfg.gauge(start + disp)) - np.asarray(cfg.gauge(start))
    return s


def peierls_phase(cfg: FieldConfig, site_from, site_to, h: float = None) -> complex:
    """Hopping phase ``exp(-i omega int a.dl)`` from ``site_from`` to ``site_to``."""
    a = np.asarray(site_from, dtype=float)
    b = np.asarray(site_to, dtype=float)
    d = b - a
    nonzero = np.flatnonzero(np.abs(d) > 1e-12)
    if len(nonzero) != 1 or (h is not None and abs(abs(d[nonzero[0]]) - h) > 1e-9 * h):
        raise AssertionError(f"sites {a} and {b} are not nearest neighbours")
    s = _link_integrals(cfg, a[None, :], d[None, :])[0]
    return complex(np.exp(-1j * complex(cfg.omega) * s))


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Assembled lattice operator ``H_Lambda(omega, V)``."""

    matrix: sp.csr_matrix
    box: BoxSpec
    field: FieldConfig

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def omega(self) -> complex:
        return complex(self.field.omega)

    @property
    def is_hermitian(self) -> bool:
        return self.omega.imag == 0

    def dense(self) -> np.ndarray:
        m = self.matrix.toarray()
        if self.is_hermitian and not np.any(m.imag):
            return m.real.copy()
        return m


class HamiltonianFamily:
    """The entire map ``omega -> H_Lambda(omega, V)`` for a fixed geometry.

    Link geometry and potential samples are computed once; evaluating the
    family at a new ``omega`` only recomputes the phases.
    """

    def __init__(self, box: BoxSpec, cfg: FieldConfig, max_sites: int = DEFAULT_MAX_SITES):
        if box.n_sites > max_sites:
            raise ResourceError(
                f"box has {box.n_sites} sites, above the configured cap of {max_sites}")
        self.box = box
        self.cfg = cfg
        grid = build_grid(box)
        self.grid = grid
        coords = grid.coordinates
        h = box.h
        n = grid.n_sites
        mx, my, mz = box.shape
        idx = np.arange(n).reshape(mx, my, mz)

        rows, cols, integ = [], [], []
        for axis in range(3):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            p = idx[tuple(lo)].ravel()
            q = idx[tuple(hi)].ravel()
            if len(p) == 0:
                continue
            disp = np.zeros((len(p), 3))
            disp[:, axis] = h
            rows.append(p)
            cols.append(q)
            integ.append(_link_integrals(cfg, coords[p], disp))
        self._p = np.concatenate(rows) if rows else np.zeros(0, int)
        self._q = np.concatenate(cols) if cols else np.zeros(0, int)
        self._s = np.concatenate(integ) if integ else np.zeros(0)
        v = np.asarray(cfg.potential(coords, cfg.cutoff(h)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("potential sampler returned non-finite values")
        self.potential_values = v
        self._diag = 3.0 / h ** 2 + v
        self._hop = 1.0 / (2.0 * h ** 2)

    @property
    def n(self) -> int:
        return self.grid.n_sites

    @property
    def volume(self) -> float:
        return self.box.volume

    def _assemble(self, values_pq, values_qp, diag):
        n = self.n
        data = np.concatenate([diag, values_pq, values_qp])
        r = np.concatenate([np.arange(n), self._p, self._q])
        c = np.concatenate([np.arange(n), self._q, self._p])
        return sp.csr_matrix((data, (r, c)), shape=(n, n))

    def __call__(self, omega) -> HamiltonianMatrix:
        w = complex(omega)
        fwd = -self._hop * np.exp(-1j * w * self._s)
        bwd = -self._hop * np.exp(1j * w * self._s)
        m = self._assemble(fwd, bwd, self._diag.astype(complex))
        return HamiltonianMatrix(matrix=m, box=self.box, field=self.cfg.with_omega(w))

    def derivative(self, omega) -> sp.csr_matrix:
        """Exact ``dH/domega`` (the entries are entire in ``omega``)."""
        w = complex(omega)
        fwd = -self._hop * (-1j * self._s) * np.exp(-1j * w * self._s)
        bwd = -self._hop * (1j * self._s) * np.exp(1j * w * self._s)
        return self._assemble(fwd, bwd, np.zeros(self.n, dtype=complex))


def assemble_hamiltonian(box: BoxSpec, cfg: FieldConfig,
                         max_sites: int = DEFAULT_MAX_SITES) -> HamiltonianMatrix:
    """Build ``H = 1/2 (magnetic discrete Laplacian) + diag(V)`` at ``cfg.omega``."""
    return HamiltonianFamily(box, cfg, max_sites=max_sites)(cfg.omega)


def dirichlet_laplacian_eigenvalues(box: BoxSpec) -> np.ndarray:
    """Sorted closed-form spectrum of ``-1/2 Delta_h`` with Dirichlet walls."""
    h = box.h
    per_axis = []
    for m in box.shape:
        k = np.arange(1, m + 1)
        per_axis.append((1.0 - np.cos(k * np.pi / (m + 1))) / h ** 2)
    ex, ey, ez = per_axis
    return np.sort((ex[:, None, None] + ey[None, :, None] + ez[None, None, :]).ravel())
