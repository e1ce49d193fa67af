"""Activity domains, strip widths and contour quadrature for operator functions.

Operator functions ``f(H)`` are evaluated as

    f(H) = (i / 2 pi) \\oint f(xi) (H - xi)^{-1} dxi

over a closed, positively oriented polygonal contour enclosing the
spectrum.  Each edge carries composite Gauss-Legendre panels that are
bisected until every panel is short compared with its distance to the
nearest singularity of the integrand.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy import special

from .exceptions import BranchError, ConfigurationError, ContourError, DomainError
from .lattice import HamiltonianMatrix
from .spectral import SectorEstimate, SpectralData, as_dense

__all__ = [
    "ActivityDomain",
    "Disc",
    "CompactK",
    "Segment",
    "ContourSpec",
    "DEFAULT_ETA",
    "GL_ORDER",
    "eta_for_compact",
    "build_contour",
    "sector_contour",
    "winding_number",
    "branch_margin",
    "dunford_log",
    "dunford_exp",
    "dunford_integral",
]

DEFAULT_ETA = np.pi / 2
GL_ORDER = 16


def _check_epsilon(epsilon) -> int:
    if epsilon not in (1, -1):
        raise ConfigurationError(f"epsilon must be +1 (Fermi) or -1 (Bose), got {epsilon!r}")
    return int(epsilon)


@dataclass(frozen=True)
class ActivityDomain:
    """Complex plane minus the ray ``(-inf, -R]`` (Fermi) or ``[R, inf)`` (Bose).

    ``R = exp(beta e0')`` where ``e0'`` is a lower bound on the ground energy.
    """

    epsilon: int
    e0_prime: float
    beta: float

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")

    @property
    def radius(self) -> float:
        return float(np.exp(self.beta * self.e0_prime))

    @property
    def excluded_ray(self) -> tuple:
        R = self.radius
        return (-np.inf, -R) if self.epsilon == 1 else (R, np.inf)

    def contains(self, z) -> bool:
        z = complex(z)
        if z.imag != 0:
            return True
        return z.real > -self.radius if self.epsilon == 1 else z.real < self.radius

    def distance_to_ray(self, z) -> float:
        z = complex(z)
        R = self.radius
        x = -self.epsilon * z.real
        if x >= R:
            return abs(z.imag)
        return float(np.hypot(R - x, z.imag))


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ConfigurationError("disc radius must be nonnegative")

    def contains(self, z, tol: float = 0.0) -> bool:
        return abs(complex(z) - self.center) <= self.radius + tol


@dataclass(frozen=True)
class CompactK:
    """A finite union of closed discs in the activity plane."""

    discs: tuple

    def __post_init__(self):
        if len(self.discs) == 0:
            raise ConfigurationError("K needs at least one disc")
        object.__setattr__(self, "discs", tuple(self.discs))

    @classmethod
    def disc(cls, center, radius) -> "CompactK":
        return cls((Disc(complex(center), float(radius)),))

    @classmethod
    def point(cls, z) -> "CompactK":
        return cls.disc(z, 0.0)

    @property
    def sup_abs(self) -> float:
        return max(abs(d.center) + d.radius for d in self.discs)

    @property
    def center(self) -> complex:
        return self.discs[0].center

    def contains(self, z, tol: float = 1e-12) -> bool:
        return any(d.contains(z, tol) for d in self.discs)

    def is_subset_of(self, other: "CompactK") -> bool:
        """Exact for single discs; sufficient (disc-wise) for unions."""
        return all(any(abs(d.center - o.center) + d.radius <= o.radius + 1e-15
                       for o in other.discs) for d in self.discs)

    def mesh(self, n: int = 32) -> np.ndarray:
        """``n`` points per disc: the centre, an inner ring and the boundary."""
        pts = []
        for d in self.discs:
            if d.radius == 0:
                pts.append(np.full(n, d.center))
                continue
            n_out = n // 2
            n_in = n - n_out - 1
            t_out = np.exp(2j * np.pi * np.arange(n_out) / n_out)
            t_in = np.exp(2j * np.pi * (np.arange(n_in) + 0.5) / max(n_in, 1))
            pts.append(np.concatenate([[d.center], d.center + 0.5 * d.radius * t_in,
                                       d.center + d.radius * t_out]))
        return np.concatenate(pts)

    def distance_to_ray(self, domain: ActivityDomain) -> float:
        return min(domain.distance_to_ray(d.center) - d.radius for d in self.discs)

    def to_dict(self) -> dict:
        return {"discs": [{"center": [d.center.real, d.center.imag], "radius": d.radius}
                          for d in self.discs]}


def _disc_extremal_points(d: Disc, R: float) -> list:
    """Points of ``d minus B(0,R)`` where the argument can be extremal."""
    c, r = d.center, d.radius
    a = abs(c)
    out = []
    if r == 0:
        return [c] if a >= R else []
    if a > r:
        t = np.sqrt(a * a - r * r)
        if t >= R:
            half = np.arcsin(r / a)
            phase = c / a
            out += [t * phase * np.exp(1j * half), t * phase * np.exp(-1j * half)]
    # intersections of |w| = R with |w - c| = r
    if a > 0 and abs(R - r) <= a <= R + r:
        x = (a * a + R * R - r * r) / (2 * a)
        y = np.sqrt(max(R * R - x * x, 0.0))
        phase = c / a
        out += [(x + 1j * y) * phase, (x - 1j * y) * phase]
    return out


def eta_for_compact(K: CompactK, epsilon: int, beta: float, e0_prime: float,
                    default: float = DEFAULT_ETA) -> float:
    """Half-width (in units of ``1/beta``) of the joint analyticity strip.

    Let ``Kt`` be the part of ``K`` outside the open ball of radius
    ``exp(beta e0')``.  With ``theta_m`` and ``theta_M`` the extremal
    arguments of ``Kt`` measured away from the excluded ray,

    * Bose (args in ``(0, 2 pi)``): ``eta = min(theta_m, 2 pi - theta_M) / 2``
    * Fermi (args in ``(-pi, pi)``): ``eta = min(pi - theta_m, pi + theta_M) / 2``

    where for Fermi ``theta_m`` is the largest nonnegative and ``theta_M``
    the smallest negative argument.  An empty ``Kt`` yields ``default``.
    """
    epsilon = _check_epsilon(epsilon)
    dom = ActivityDomain(epsilon, e0_prime, beta)
    if K.distance_to_ray(dom) <= 0:
        raise DomainError(f"K meets the excluded ray {dom.excluded_ray} of D_{epsilon:+d}")
    R = dom.radius
    pts = []
    for d in K.discs:
        pts += _disc_extremal_points(d, R)
    if not pts:
        return float(default)
    args = np.angle(np.asarray(pts, dtype=complex))
    if epsilon == -1:
        args = np.mod(args, 2 * np.pi)
        eta = 0.5 * min(args.min(), 2 * np.pi - args.max())
    else:
        upper = args[args >= 0]
        lower = args[args < 0]
        terms = []
        if upper.size:
            terms.append(np.pi - upper.max())
        if lower.size:
            terms.append(np.pi + lower.min())
        eta = 0.5 * min(terms)
    if not eta > 0:
        raise DomainError("K touches the excluded ray; no analyticity strip")
    return float(min(eta, default))


@dataclass(frozen=True)
class Segment:
    name: str
    start: complex
    end: complex
    nodes: np.ndarray
    weights: np.ndarray
    min_panels: int = 4

    def to_dict(self) -> dict:
        return {"name": self.name,
                "start": [self.start.real, self.start.imag],
                "end": [self.end.real, self.end.imag],
                "nodes": [[x.real, x.imag] for x in self.nodes],
                "weights": [[w.real, w.imag] for w in self.weights]}


@dataclass(frozen=True)
class ContourSpec:
    """Closed positively oriented polygon with Gauss-Legendre quadrature."""

    segments: tuple
    eta_K: float = float("nan")
    xi_K: float = float("nan")
    e0_prime: float = float("nan")
    beta: float = float("nan")
    epsilon: int = 0
    re_end: float = float("nan")
    kind: str = "strip"
    info: dict = field(default_factory=dict)
    singular: np.ndarray = field(default=None, repr=False, compare=False)
    decay: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def half_width(self) -> float:
        return self.eta_K / (2 * self.beta)

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([s.nodes for s in self.segments])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([s.weights for s in self.segments])

    @property
    def vertices(self) -> np.ndarray:
        return np.array([s.start for s in self.segments])

    def refined(self, points) -> "ContourSpec":
        """Same polygon with panels also refined around ``points``."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        base = self.singular if self.singular is not None else np.empty(0, dtype=complex)
        sing = np.concatenate([base, pts])
        order = self.info.get("order", GL_ORDER)
        segs = _build_segments(self.vertices, [s.name for s in self.segments],
                               [s.min_panels for s in self.segments], sing, order, self.decay)
        return replace(self, segments=segs, singular=sing)

    def node_count(self) -> int:
        return sum(len(s.nodes) for s in self.segments)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eta_K": self.eta_K, "xi_K": self.xi_K,
                "e0_prime": self.e0_prime, "beta": self.beta, "epsilon": self.epsilon,
                "re_end": self.re_end, "info": self.info,
                "segments": [s.to_dict() for s in self.segments]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _segment_distance(a: complex, b: complex, pts: np.ndarray) -> float:
    if pts.size == 0:
        return np.inf
    d = b - a
    t = np.clip(((pts - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return float(np.min(np.abs(pts - (a + t * d))))


def _panelize(a: complex, b: complex, singular: np.ndarray, min_panels: int,
              order: int, decay=None, max_depth: int = 40):
    """Gauss-Legendre panels on ``[a, b]``, refined near ``singular``.

    ``decay = (beta, x_ref)`` additionally limits panels where an integrand
    factor ``exp(-beta xi)`` oscillates with non-negligible amplitude: the
    allowed length is ``(4 + beta max(0, Re xi - x_ref)) / beta``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    stack = []
    edges = np.linspace(0.0, 1.0, min_panels + 1)
    for t0, t1 in zip(edges[:-1], edges[1:]):
        stack.append((a + t0 * (b - a), a + t1 * (b - a), 0))
    nodes, weights = [], []
    while stack:
        p, q, depth = stack.pop()
        length = abs(q - p)
        limit = 2 * _segment_distance(p, q, singular)
        if decay is not None:
            beta, x_ref = decay
            limit = min(limit, (4.0 + beta * max(0.0, min(p.real, q.real) - x_ref)) / beta)
        if depth < max_depth and length > limit:
            m = 0.5 * (p + q)
            stack += [(m, q, depth + 1), (p, m, depth + 1)]
            continue
        if depth >= max_depth:
            raise ContourError("panel refinement did not terminate; a singularity sits on the contour")
        mid, half = 0.5 * (p + q), 0.5 * (q - p)
        nodes.append((p, mid + half * x, half * w))
    nodes.sort(key=lambda item: abs(item[0] - a))
    xs = np.concatenate([n[1] for n in nodes])
    ws = np.concatenate([n[2] for n in nodes])
    return xs, ws


def _build_segments(vertices, names, min_panels, singular, order, decay=None) -> tuple:
    segs = []
    nv = len(vertices)
    for i in range(nv):
        a, b = complex(vertices[i]), complex(vertices[(i + 1) % nv])
        xs, ws = _panelize(a, b, singular, min_panels[i], order, decay)
        segs.append(Segment(names[i], a, b, xs, ws, min_panels[i]))
    return tuple(segs)


def _inside_polygon(pts: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule for points strictly off the boundary."""
    x, y = pts.real, pts.imag
    inside = np.zeros(pts.shape, dtype=bool)
    vx, vy = vertices.real, vertices.imag
    n = len(vertices)
    for i in range(n):
        x0, y0, x1, y1 = vx[i], vy[i], vx[(i + 1) % n], vy[(i + 1) % n]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xc)
    return inside


def _check_enclosed(eigs: np.ndarray, contour: ContourSpec, min_gap: float = 1e-10):
    if eigs.size == 0:
        return
    verts = contour.vertices
    inside = _inside_polygon(eigs, verts)
    for lam, ok in zip(eigs, inside):
        gap = min(_segment_distance(s.start, s.end, np.array([lam])) for s in contour.segments)
        if not ok or gap < min_gap:
            raise ContourError(f"contour does not enclose eigenvalue {lam}; "
                               "lower e0' or widen the strip")


def _log_singularities(K: CompactK, beta: float, epsilon: int, im_range: float,
                       n_mesh: int = 32) -> np.ndarray:
    """Zeros of ``1 + eps z exp(-beta xi)`` for ``z`` on a mesh of ``K``."""
    zs = K.mesh(n_mesh)
    zs = zs[zs != 0]
    if zs.size == 0:
        return np.empty(0, dtype=complex)
    base = np.log(-epsilon / zs)  # -beta xi = base + 2 pi i k
    kmax = int(np.ceil(beta * im_range / (2 * np.pi))) + 1
    ks = np.arange(-kmax, kmax + 1)
    return (-(base[:, None] + 2j * np.pi * ks[None, :]) / beta).ravel()


def _spectrum(S) -> np.ndarray:
    if isinstance(S, SpectralData):
        return np.asarray(S.eigenvalues, dtype=complex)
    return np.atleast_1d(np.asarray(S, dtype=complex))


def build_contour(K: CompactK, S, beta: float, epsilon: int, e0_prime: float,
                  ray_tol: float = 1e-14, order: int = GL_ORDER, min_panels_segment: int = 4,
                  min_panels_ray: int = 8, eta: Optional[float] = None) -> ContourSpec:
    """Contour for ``ln(1 + eps z exp(-beta xi))`` uniformly in ``z`` on ``K``.

    Edges in traversal order: upper ray (inward), upper horizontal line at
    ``Im xi = eta_K / (2 beta)``, left vertical edge at ``Re xi = e0'``,
    lower horizontal line, lower ray (outward) and a vertical closing edge
    placed beyond the spectrum where the integrand has decayed below
    ``ray_tol``.  The rays open at 45 degrees from ``xi_K``, the abscissa
    beyond which ``sup_K |z| exp(-beta xi) <= 1/2``.

    ``S`` is the spectrum (``SpectralData`` or an array of eigenvalues) and
    must lie strictly inside the contour.
    """
    epsilon = _check_epsilon(epsilon)
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    lam = _spectrum(S)
    E0 = float(lam.real.min())
    if not e0_prime < E0:
        raise ContourError(f"e0' = {e0_prime} must lie below the spectrum (E0 = {E0})")
    if eta is None:
        eta = eta_for_compact(K, epsilon, beta, e0_prime)
    hw = eta / (2 * beta)
    sup = K.sup_abs
    xi_K = 2 * E0 - e0_prime
    if sup > 0:
        xi_K = max(xi_K, np.log(2 * sup) / beta)
    max_re = float(lam.real.max())
    margin = max(1.0, 0.25 * (max_re - e0_prime))
    re_end = max_re + margin
    if sup > 0:
        re_end = max(re_end, xi_K + np.log(sup * lam.size / ray_tol) / beta)
    re_end = max(re_end, xi_K + 1.0)
    top = hw + (re_end - xi_K)
    verts = [re_end + 1j * top, xi_K + 1j * hw, e0_prime + 1j * hw,
             e0_prime - 1j * hw, xi_K - 1j * hw, re_end - 1j * top]
    names = ["upper_ray", "upper_line", "left_edge", "lower_line", "lower_ray", "closing_edge"]
    mins = [min_panels_ray, min_panels_segment, min_panels_segment, min_panels_segment,
            min_panels_ray, min_panels_segment]
    sing = np.concatenate([lam, _log_singularities(K, beta, epsilon, top)])
    decay = (beta, xi_K)
    segs = _build_segments(verts, names, mins, sing, order, decay)
    spec = ContourSpec(segments=segs, eta_K=float(eta), xi_K=float(xi_K),
                       e0_prime=float(e0_prime), beta=float(beta), epsilon=epsilon,
                       re_end=float(re_end), kind="strip",
                       info={"K": K.to_dict(), "ray_tol": ray_tol, "order": order},
                       singular=sing, decay=decay)
    _check_enclosed(lam, spec)
    return spec


def sector_contour(sector: SectorEstimate, S, beta: float, eps_tilde: Optional[float] = None,
                   tol: float = 1e-16, order: int = GL_ORDER, min_panels_ray: int = 8,
                   min_panels_segment: int = 4) -> ContourSpec:
    """Sector boundary with vertex ``gamma - 1`` for ``exp(-beta xi)``.

    The half-angle is ``theta + eps_tilde < pi/2``; the sector is closed
    by a vertical edge where ``exp(-beta (Re xi - E0))`` drops below ``tol``.
    """
    if eps_tilde is None:
        eps_tilde = min(0.1, 0.5 * (np.pi / 2 - sector.theta))
    phi = sector.theta + eps_tilde
    if not phi < np.pi / 2:
        raise ContourError("sector half-angle must stay below pi/2")
    lam = _spectrum(S)
    vertex = sector.gamma - 1.0
    E0 = float(lam.real.min())
    max_re = float(lam.real.max())
    re_end = max(max_re + max(1.0, 0.25 * (max_re - vertex)),
                 E0 + np.log(max(lam.size, 1) / tol) / beta)
    top = (re_end - vertex) * np.tan(phi)
    verts = [re_end + 1j * top, vertex + 0j, re_end - 1j * top]
    names = ["upper_ray", "lower_ray", "closing_edge"]
    mins = [min_panels_ray, min_panels_ray, min_panels_segment]
    decay = (beta, E0)
    segs = _build_segments(verts, names, mins, lam, order, decay)
    spec = ContourSpec(segments=segs, beta=float(beta), re_end=float(re_end), kind="sector",
                       e0_prime=float(vertex),
                       info={"gamma": sector.gamma, "half_angle": phi, "tol": tol, "order": order},
                       singular=lam, decay=decay)
    _check_enclosed(lam, spec)
    return spec


def winding_number(contour: ContourSpec, point: complex, refine: bool = True) -> complex:
    """``(1 / 2 pi i) \\oint d xi / (xi - point)`` by the contour's quadrature.

    With ``refine`` the panels are first adapted to ``point``.
    """
    if refine:
        contour = contour.refined(point)
    return complex(np.sum(contour.weights / (contour.nodes - point)) / (2j * np.pi))


def _log_values(nodes, z, beta, epsilon):
    u = epsilon * z * np.exp(-beta * nodes)
    w = 1.0 + u
    bad = (w.imag == 0) & (w.real <= 0)
    if np.any(bad):
        raise BranchError(f"1 + eps z exp(-beta xi) = {w[bad][0]} hits the cut at "
                          f"xi = {nodes[bad][0]}")
    return special.log1p(u)


def branch_margin(contour: ContourSpec, zs, beta: float, epsilon: int) -> float:
    """Smallest distance of ``1 + eps z exp(-beta xi)`` to ``(-inf, 0]``.

    Taken over all contour nodes and all ``z`` in ``zs``.
    """
    nodes = contour.nodes
    w = 1.0 + epsilon * np.asarray(zs, dtype=complex)[:, None] * np.exp(-beta * nodes)[None, :]
    d = np.where(w.real > 0, np.abs(w), np.abs(w.imag))
    return float(d.min())


def _resolvent(M: np.ndarray, xi: complex) -> np.ndarray:
    n = M.shape[0]
    A = M - xi * np.eye(n)
    lu, piv = la.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * max(pivots.max(), 1.0):
        raise ContourError(f"resolvent is numerically singular at node {xi}; "
                           "increase the margin between e0' and the spectrum")
    return la.lu_solve((lu, piv), np.eye(n, dtype=complex), check_finite=False)


def dunford_integral(H, contour: ContourSpec, f_values: np.ndarray,
                     skip_rel: float = 1e-18) -> np.ndarray:
    """``(i / 2 pi) sum_j w_j f(xi_j) (H - xi_j)^{-1}``.

    ``H`` may be a matrix, a ``HamiltonianMatrix`` or ``SpectralData``; for
    spectral data the resolvents are applied in the eigenbasis (diagonal
    output when eigenvectors are absent).  Nodes whose weighted value is
    below ``skip_rel`` times the largest one are skipped.
    """
    nodes, weights = contour.nodes, contour.weights
    coef = weights * f_values
    scale = np.abs(coef).max() if coef.size else 0.0
    if scale == 0:
        n = H.size if isinstance(H, SpectralData) else as_dense(H).shape[0]
        return np.zeros((n, n), dtype=complex)
    keep = np.abs(coef) > skip_rel * scale
    if isinstance(H, SpectralData):
        lam = np.asarray(H.eigenvalues, dtype=complex)
        vals = (1j / (2 * np.pi)) * np.sum(
            coef[keep][None, :] / (lam[:, None] - nodes[keep][None, :]), axis=1)
        if H.eigenvectors is None:
            return np.diag(vals)
        V = H.eigenvectors
        if H.is_hermitian:
            return (V * vals) @ V.conj().T
        return np.linalg.solve(V.T, (V * vals).T).T
    M = np.asarray(as_dense(H), dtype=complex)
    acc = np.zeros_like(M)
    for c, xi in zip(coef[keep], nodes[keep]):
        acc += c * _resolvent(M, xi)
    return (1j / (2 * np.pi)) * acc


def dunford_log(H, contour: ContourSpec, z: complex, beta: float, epsilon: int,
                skip_rel: float = 1e-18) -> np.ndarray:
    """``ln(1 + eps z exp(-beta H))`` by contour quadrature (principal branch)."""
    epsilon = _check_epsilon(epsilon)
    f = _log_values(contour.nodes, complex(z), beta, epsilon)
    return dunford_integral(H, contour, f, skip_rel)


def dunford_exp(H, contour: ContourSpec, beta: float, skip_rel: float = 1e-18) -> np.ndarray:
    """``exp(-beta H)`` by contour quadrature; valid for non-normal ``H``."""
    f = np.exp(-beta * contour.nodes)
    return dunford_integral(H, contour, f, skip_rel)
