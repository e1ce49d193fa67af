"""Eigendecompositions, heat semigroups and bound checks for lattice operators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import special

from .exceptions import (ConditioningError, ConfigurationError, ConvergenceError,
                         ResourceError)
from .lattice import BoxSpec, FieldConfig, HamiltonianFamily, HamiltonianMatrix, build_grid

__all__ = [
    "SpectralData",
    "HeatOperator",
    "BoundReport",
    "SectorEstimate",
    "DEFAULT_DENSE_CAP",
    "as_dense",
    "eigendecompose",
    "eigenvalues_below",
    "heat_operator",
    "heat_kernel_column",
    "heat_trace",
    "volume_fit",
    "trace_norm",
    "hs_norm",
    "kernel_bound_check",
    "diamagnetic_check",
    "numerical_range_fit",
    "resolvent_norm",
]

DEFAULT_DENSE_CAP = 4096


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues sorted by real part, optional eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    is_hermitian: bool = True
    complete: bool = True

    @property
    def E0(self) -> float:
        return float(np.min(np.real(self.eigenvalues)))

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @classmethod
    def from_levels(cls, levels) -> "SpectralData":
        """Wrap a plain list of real energy levels (no operator behind it)."""
        ev = np.sort(np.asarray(levels, dtype=float))
        return cls(eigenvalues=ev, is_hermitian=True)


@dataclass(frozen=True)
class HeatOperator:
    beta: float
    matrix: np.ndarray
    is_hermitian: bool
    eigenvalues: Optional[np.ndarray] = None


@dataclass
class BoundReport:
    """Outcome of a report-only bound check; serializable to JSON."""

    name: str
    constants: dict = field(default_factory=dict)
    max_violation: float = 0.0
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "constants": self.constants,
                "max_violation": self.max_violation, "records": self.records}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def as_dense(H) -> np.ndarray:
    if isinstance(H, HamiltonianMatrix):
        return H.dense()
    if sp.issparse(H):
        return H.toarray()
    return np.asarray(H)


def _is_hermitian(H, dense=None) -> bool:
    if isinstance(H, HamiltonianMatrix):
        return H.is_hermitian
    m = dense if dense is not None else as_dense(H)
    return np.allclose(m, m.conj().T, rtol=0, atol=1e-13 * max(1.0, np.abs(m).max()))


def _sparse(H):
    if isinstance(H, HamiltonianMatrix):
        return H.matrix
    return sp.csr_matrix(H)


def eigendecompose(H, want_vectors: bool = False, k: Optional[int] = None,
                   dense_cap: int = DEFAULT_DENSE_CAP, hermitian: Optional[bool] = None,
                   tol: float = 1e-8) -> SpectralData:
    """Spectrum of ``H``.

    The dense path returns the full spectrum.  With ``k`` set and a
    Hermitian operator, the ``k`` lowest eigenpairs are computed by
    shift-invert Lanczos; residuals are verified against ``tol``.
    """
    n = H.n if isinstance(H, HamiltonianMatrix) else np.shape(H)[0]
    herm = _is_hermitian(H) if hermitian is None else hermitian
    if k is not None and k < n:
        if not herm:
            raise ConfigurationError("the iterative path is only available for Hermitian operators")
        return _lowest_eigenpairs(H, k, want_vectors, tol)
    if n > dense_cap:
        raise ResourceError(f"dense eigensolver cap is {dense_cap}, operator has dimension {n}")
    m = as_dense(H)
    if herm:
        if np.iscomplexobj(m) and not np.any(m.imag):
            m = m.real
        if want_vectors:
            w, v = la.eigh(m)
        else:
            w, v = la.eigh(m, eigvals_only=True), None
        return SpectralData(eigenvalues=w, eigenvectors=v, is_hermitian=True)
    try:
        # geev balances the matrix before the QR iteration
        if want_vectors:
            w, v = la.eig(m)
        else:
            w, v = la.eigvals(m), None
    except la.LinAlgError as exc:
        raise ConvergenceError(f"general eigensolver failed: {exc}") from exc
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if v is not None:
        v = v[:, order]
    return SpectralData(eigenvalues=w, eigenvectors=v, is_hermitian=False)


def _gershgorin_lower(A) -> float:
    A = sp.csr_matrix(A)
    diag = A.diagonal().real
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(A.diagonal())
    return float(np.min(diag - radius))


def _lowest_eigenpairs(H, k, want_vectors, tol, maxiter=None) -> SpectralData:
    A = _sparse(H)
    if not np.any(A.data.imag):
        A = A.real
    sigma = _gershgorin_lower(A) - 1.0
    try:
        w, v = spla.eigsh(A, k=k, sigma=sigma, which="LM", maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos did not converge for k={k}",
                               iterations=maxiter or 10 * A.shape[0]) from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    scale = max(1.0, float(spla.norm(A, 1)))
    resid = np.linalg.norm(A @ v - v * w, axis=0).max() / scale
    if resid > tol:
        raise ConvergenceError(f"Lanczos residual {resid:.2e} above {tol:.0e}")
    return SpectralData(eigenvalues=w, eigenvectors=v if want_vectors else None,
                        is_hermitian=True, complete=False)


def eigenvalues_below(H, e_max: float, dense_cap: int = DEFAULT_DENSE_CAP,
                      k0: int = 64) -> SpectralData:
    """All eigenvalues ``<= e_max`` of a Hermitian operator."""
    n = H.n if isinstance(H, HamiltonianMatrix) else np.shape(H)[0]
    if n <= dense_cap:
        S = eigendecompose(H, dense_cap=dense_cap, hermitian=True)
        return SpectralData(eigenvalues=S.eigenvalues[S.eigenvalues <= e_max], is_hermitian=True)
    k = min(k0, n - 2)
    while True:
        S = eigendecompose(H, k=k, hermitian=True)
        if S.eigenvalues[-1] > e_max or k >= n - 2:
            ev = S.eigenvalues[S.eigenvalues <= e_max]
            return SpectralData(eigenvalues=ev, is_hermitian=True, complete=False)
        k = min(2 * k, n - 2)


def heat_operator(S: SpectralData, beta: float) -> HeatOperator:
    """``W = exp(-beta H)`` from an eigendecomposition."""
    if S.eigenvectors is None:
        raise ConfigurationError("heat_operator needs eigenvectors (want_vectors=True)")
    if beta < 0:
        raise ConfigurationError("beta must be nonnegative")
    V = S.eigenvectors
    d = np.exp(-beta * S.eigenvalues)
    if S.is_hermitian:
        W = (V * d) @ V.conj().T
        W = 0.5 * (W + W.conj().T)
    else:
        cond = np.linalg.cond(V)
        if not cond < 1e12:
            raise ConditioningError(
                f"eigenbasis condition number {cond:.2e} exceeds 1e12; use dunford_exp instead")
        W = np.linalg.solve(V.T, (V * d).T).T
    return HeatOperator(beta=beta, matrix=W, is_hermitian=S.is_hermitian,
                        eigenvalues=np.asarray(S.eigenvalues))


def heat_kernel_column(H, beta: float, site: int) -> np.ndarray:
    """Column ``exp(-beta H) e_site`` without forming the dense semigroup."""
    A = _sparse(H)
    e = np.zeros(A.shape[0], dtype=A.dtype)
    e[site] = 1.0
    return spla.expm_multiply(-beta * A, e)


def heat_trace(H, beta: float, block: int = 1024, tol: float = 1e-15) -> float:
    """``Tr exp(-beta H)`` for a real field without an eigendecomposition.

    Chebyshev expansion of ``exp(-beta x)`` on ``[E0, upper Gershgorin
    bound]`` with modified Bessel coefficients, applied to blocks of unit
    vectors; only the diagonal of each block is kept.  Anchoring the
    interval at the ground energy keeps every term of order one.
    """
    if isinstance(H, HamiltonianMatrix) and not H.is_hermitian:
        raise ConfigurationError("heat traces are computed for real fields only")
    A = _sparse(H).tocsr()
    if np.iscomplexobj(A.data) and np.max(np.abs(A.data.imag), initial=0.0) == 0:
        A = A.real.tocsr()
    n = A.shape[0]
    diag = A.diagonal().real
    radius = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    hi = float(np.max(diag + radius))
    E0 = eigendecompose(A, k=1, hermitian=True).E0 if n > 1 else float(diag[0])
    lo = E0 - 1e-10 * max(1.0, abs(E0))
    mid, half = 0.5 * (lo + hi), max(0.5 * (hi - lo), 1e-300)
    rho = beta * half
    # exp(-beta x) = exp(-beta lo) sum_k c_k T_k(t), t = (x - mid) / half
    c0 = special.ive(0, rho)
    degree = 1
    while special.ive(degree, rho) > tol * c0:
        degree += 1
    coef = 2 * special.ive(np.arange(degree + 1), rho) * (-1.0) ** np.arange(degree + 1)
    coef[0] = c0
    B = ((A - mid * sp.eye(n, format="csr", dtype=A.dtype)) / half).tocsr()
    total = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        rows, cols = np.arange(start, stop), np.arange(stop - start)
        T0 = np.zeros((n, stop - start), dtype=A.dtype)
        T0[rows, cols] = 1.0
        T1 = B @ T0
        acc = coef[0] * T0[rows, cols].real + coef[1] * T1[rows, cols].real
        for k in range(2, degree + 1):
            T0, T1 = T1, 2 * (B @ T1) - T0
            acc += coef[k] * T1[rows, cols].real
        total += float(np.sum(acc))
    return total * float(np.exp(-beta * lo))


def volume_fit(traces, volumes) -> tuple:
    """Best ``c`` for ``traces ~ c |V|`` in the minimax relative sense.

    Returns
    -------
    c : float
    deviations : ndarray
        ``traces / (c |V|) - 1`` per point.
    """
    r = np.asarray(traces, dtype=float) / np.asarray(volumes, dtype=float)
    c = 0.5 * (r.min() + r.max())
    return float(c), r / c - 1


def _require_positive(W: HeatOperator):
    if not W.is_hermitian:
        raise ConfigurationError("trace and Hilbert-Schmidt norms need a real field (positive W)")


def trace_norm(W: HeatOperator) -> float:
    """``||W||_1 = Tr W = sum exp(-beta E_i)`` for positive ``W``."""
    _require_positive(W)
    if W.eigenvalues is not None:
        return float(np.sum(np.exp(-W.beta * np.real(W.eigenvalues))))
    return float(np.trace(W.matrix).real)


def hs_norm(W: HeatOperator) -> float:
    """Frobenius norm of the semigroup matrix."""
    _require_positive(W)
    return float(np.linalg.norm(W.matrix, "fro"))


def _pair_distances_sq(box: BoxSpec) -> np.ndarray:
    x = build_grid(box).coordinates
    sq = np.sum(x ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2 * x @ x.T
    return np.maximum(d2, 0.0)


def kernel_bound_check(S: SpectralData, box: BoxSpec, betas, reference=None) -> BoundReport:
    """Fit ``|G(x,y)| <= c0 beta^-3/2 exp(C0 beta) exp(-|x-y|^2 / 4 beta)``.

    ``G = W / h^3`` is the lattice kernel.  For each ``beta`` the smallest
    admissible prefactor ``c(beta)`` is measured; ``C0`` is the steepest
    slope of ``log c`` between neighbouring grid values, so that
    ``c0 exp(C0 beta)`` envelopes every measurement.  Violations are
    reported against ``reference = (c0, C0)`` when given.
    """
    if not S.is_hermitian:
        raise ConfigurationError("kernel bounds are checked for real fields only")
    betas = np.sort(np.asarray(betas, dtype=float))
    d2 = _pair_distances_sq(box)
    h3 = box.h ** 3
    log_c = []
    records = []
    for b in betas:
        G = np.abs(heat_operator(S, b).matrix) / h3
        with np.errstate(divide="ignore"):
            lg = np.log(G) + 1.5 * np.log(b) + d2 / (4 * b)
        lc = float(np.max(lg[np.isfinite(lg)]))
        log_c.append(lc)
        records.append({"beta": float(b), "c_beta": float(np.exp(lc))})
    log_c = np.array(log_c)
    if len(betas) > 1:
        slopes = np.diff(log_c) / np.diff(betas)
        C0 = float(np.max(slopes))
        for rec, s in zip(records[1:], slopes):
            rec["local_C0"] = float(s)
    else:
        C0 = 0.0
    c0 = float(np.max(np.exp(log_c - C0 * betas)))
    violation = 0.0
    if reference is not None:
        rc0, rC0 = reference
        violation = float(np.max(np.exp(log_c) - rc0 * np.exp(rC0 * betas)))
        violation = max(violation, 0.0)
    return BoundReport(name="kernel_bound", constants={"c0": c0, "C0": C0, "E0": S.E0},
                       max_violation=violation, records=records)


def diamagnetic_check(box: BoxSpec, cfg: FieldConfig, beta: float, atol: float = 1e-12,
                      dense_cap: int = DEFAULT_DENSE_CAP) -> BoundReport:
    """Entrywise ``|exp(-beta H(omega))| <= exp(-beta H(0)) + atol``."""
    omega = complex(cfg.omega)
    if omega.imag != 0:
        raise ConfigurationError("the diamagnetic inequality is checked for real omega")
    family = HamiltonianFamily(box, cfg)
    Wm = heat_operator(eigendecompose(family(omega.real), True, dense_cap=dense_cap), beta).matrix
    W0 = heat_operator(eigendecompose(family(0.0), True, dense_cap=dense_cap), beta).matrix
    excess = np.abs(Wm) - W0.real
    worst = float(np.max(excess))
    return BoundReport(
        name="diamagnetic",
        constants={"omega": omega.real, "beta": beta, "atol": atol},
        max_violation=max(worst - atol, 0.0),
        records=[{"max_excess": worst, "min_W0": float(np.min(W0.real))}],
    )


@dataclass(frozen=True)
class SectorEstimate:
    """Sector ``{|Im xi| <= |Im omega| (c1 Re xi + c2), Re xi >= c3}`` and derived data.

    ``gamma = -c2/c1`` is the vertex and ``theta = arctan(slope)`` the
    half-angle, where ``slope = c1 |Im omega|``.  ``c_delta`` bounds the
    resolvent outside the widened sector ``|arg(xi - gamma)| <= theta + delta``.
    """

    gamma: float
    theta: float
    c1: float
    c2: float
    c3: float
    slope: float
    delta_margin: float
    c_delta: float
    omega_im: float
    c_delta_observed: float = float("nan")

    def contains(self, xi, tol: float = 1e-9) -> np.ndarray:
        xi = np.asarray(xi, dtype=complex)
        re_ok = xi.real >= self.c3 - tol
        im_ok = np.abs(xi.imag) <= self.slope * (xi.real - self.gamma) + tol
        return re_ok & im_ok

    def outside_widened(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=complex)
        return np.abs(np.angle(xi - self.gamma)) > self.theta + self.delta_margin


def _hermitian_part(M):
    return 0.5 * (M + M.conj().T)


def _sector_violation(M, gamma, s):
    # max over the numerical range of Im xi - s (Re xi - gamma), both edges
    up = la.eigvalsh(_hermitian_part((-s - 1j) * M), subset_by_index=[M.shape[0] - 1] * 2)[0]
    lo = la.eigvalsh(_hermitian_part((-s + 1j) * M), subset_by_index=[M.shape[0] - 1] * 2)[0]
    return max(up, lo) + s * gamma


def resolvent_norm(M: np.ndarray, xi: complex) -> float:
    """Operator 2-norm of ``(M - xi)^-1``."""
    smin = la.svdvals(M - xi * np.eye(M.shape[0]))[-1]
    return float(np.inf) if smin == 0 else float(1.0 / smin)


def numerical_range_fit(H, samples: int = 10_000, rng=None, n_eigvecs: int = 8,
                        n_boundary: int = 64, vertex_gap: float = 1.0,
                        delta: float = 0.1) -> SectorEstimate:
    """Fit the sector containing the numerical range of ``H``.

    Points ``<H phi, phi>`` are sampled from random unit vectors, low-lying
    eigenvectors and support points of the numerical range.  ``c3`` is the
    exact left edge (lowest eigenvalue of the Hermitian part).  The vertex
    is placed at ``gamma = c3 - vertex_gap`` and the opening slope is the
    larger of the sampled hull slope and the certified slope obtained by
    bisection on the support function, so the whole numerical range (and
    hence the spectrum) lies inside the sector.
    """
    if samples < 100:
        raise ConfigurationError(f"numerical range fit needs at least 100 samples, got {samples}")
    rng = np.random.default_rng(rng)
    M = as_dense(H).astype(complex)
    n = M.shape[0]
    omega_im = abs(H.omega.imag) if isinstance(H, HamiltonianMatrix) else float("nan")

    herm = _hermitian_part(M)
    c3 = float(la.eigvalsh(herm, subset_by_index=[0, 0])[0])
    gamma = c3 - vertex_gap

    phi = rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    vecs = [phi / np.linalg.norm(phi, axis=0)]
    k = min(n_eigvecs, n)
    w, v = la.eig(M)
    low = np.argsort(w.real)[:k]
    vecs.append(v[:, low] / np.linalg.norm(v[:, low], axis=0))
    for ang in np.linspace(0, 2 * np.pi, n_boundary, endpoint=False):
        _, u = la.eigh(_hermitian_part(np.exp(-1j * ang) * M), subset_by_index=[n - 1, n - 1])
        vecs.append(u)
    Phi = np.concatenate(vecs, axis=1)
    pts = np.einsum("ij,ij->j", Phi.conj(), M @ Phi)

    slope_sampled = float(np.max(np.abs(pts.imag) / (pts.real - gamma)))
    slope = slope_sampled
    if _sector_violation(M, gamma, slope) > 0:
        lo, hi = slope, max(2 * slope, 1e-12)
        while _sector_violation(M, gamma, hi) > 0:
            lo, hi = hi, 2 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _sector_violation(M, gamma, mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * hi:
                break
        slope = hi
    theta = float(np.arctan(slope))
    if omega_im and np.isfinite(omega_im):
        c1 = slope / omega_im
    else:
        c1 = 0.0
    c2 = -gamma * c1
    # Kato: ||(H - xi)^-1|| <= 1/dist(xi, numerical range) <= 1/(|xi - gamma| sin(delta))
    c_delta = 1.0 / np.sin(min(delta, np.pi / 2))

    probes = []
    for sign in (1, -1):
        for r in np.geomspace(0.05, 50, 12) * max(1.0, abs(gamma)):
            probes.append(gamma + r * np.exp(sign * 1j * min(theta + delta, np.pi)))
    observed = max(abs(p - gamma) * resolvent_norm(M, p) for p in probes)
    return SectorEstimate(gamma=gamma, theta=theta, c1=c1, c2=c2, c3=c3, slope=slope,
                          delta_margin=delta, c_delta=float(c_delta), omega_im=omega_im,
                          c_delta_observed=float(observed))
