"""Sensitivity of a functional to grafting a thin bar, and the best-bar scan.

The first-order change of ``J`` when a tube of half-width ``eps`` around a
curve ``sigma`` is filled with the inclusion material is ``eps * J'`` with

    J' = int_sigma  M(y) e(u0) : e(p0)  dl(y),

where ``M`` is the thin-tube polarization tensor built from the local Lame
pairs and the tangent ``tau`` / normal ``n`` of ``sigma``, ``u0`` is the
background state and ``p0`` the adjoint state.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .elasticity import strain
from .errors import InsufficientCandidates, InvalidDirection, InvalidMaterial, NotInDomain

logger = logging.getLogger("topolig")

# Settled by validation.resolve_rho (FD discrimination) and a thin-layer
# transmission computation; see docs/findings.md.
DEFAULT_RHO_CHOICE = "mu1"
RHO_CHOICES = ("mu0", "mu1")


@dataclass(frozen=True, eq=False)
class Segment:
    """Polyline base curve of a ligament; ``eps`` is the tube half-width."""
    points: np.ndarray
    eps: float = 0.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if len(pts) < 2:
            raise ValueError("a segment needs at least two points")
        if np.any(np.hypot(*np.diff(pts, axis=0).T) == 0.0):
            raise ValueError("consecutive polyline points must be distinct")
        object.__setattr__(self, "points", pts)

    @classmethod
    def line(cls, z1, z2, eps=0.0):
        return cls(np.array([z1, z2], dtype=float), eps)

    @property
    def lengths(self):
        return np.hypot(*np.diff(self.points, axis=0).T)

    @property
    def length(self):
        return float(self.lengths.sum())

    @property
    def tangents(self):
        d = np.diff(self.points, axis=0)
        return d / self.lengths[:, None]

    @property
    def normals(self):
        t = self.tangents
        return np.column_stack([-t[:, 1], t[:, 0]])

    def transformed(self, rotation=None, shift=(0.0, 0.0)):
        R = np.eye(2) if rotation is None else np.asarray(rotation)
        return Segment(self.points @ R.T + np.asarray(shift), self.eps)


@dataclass(frozen=True)
class PolarizationCoeffs:
    alpha: object
    beta: object
    gamma: object
    rho: object
    rho_choice: str = DEFAULT_RHO_CHOICE


def polarization_coeffs(l0, m0, l1, m1, rho_choice=DEFAULT_RHO_CHOICE):
    """Coefficients of the thin-tube polarization tensor (scalars or arrays).

    ``rho_choice`` selects the shear modulus in the denominator of ``rho``.
    """
    if rho_choice not in RHO_CHOICES:
        raise ValueError(f"rho_choice must be one of {RHO_CHOICES}")
    l0, m0, l1, m1 = (np.asarray(a, dtype=float) for a in (l0, m0, l1, m1))
    if np.any(m1 <= 0) or np.any(l1 + 2 * m1 <= 0) or np.any(m0 <= 0):
        raise InvalidMaterial("need mu0 > 0, mu1 > 0 and lambda1 + 2 mu1 > 0")
    p1 = l1 + 2.0 * m1
    dm = m1 - m0
    alpha = 2.0 * (l1 - l0) * (l0 + 2.0 * m0) / p1
    beta = 4.0 * dm * m0 / m1
    gamma = 4.0 * dm * ((2.0 * l1 + 2.0 * m1 - l0) / p1 - m0 / m1)
    mu_den = m1 if rho_choice == "mu1" else m0
    rho = 4.0 * dm * (m1 * l0 - m0 * l1) / (mu_den * p1)
    if alpha.ndim == 0:
        alpha, beta, gamma, rho = float(alpha), float(beta), float(gamma), float(rho)
    return PolarizationCoeffs(alpha, beta, gamma, rho, rho_choice)


def _unit(tau):
    tau = np.asarray(tau, dtype=float)
    if abs(np.hypot(tau[0], tau[1]) - 1.0) > 1e-12:
        raise InvalidDirection(f"tangent {tau.tolist()} is not a unit vector")
    return tau


def polarization_apply(coeffs, tau, e):
    """``M e`` for a symmetric 2x2 strain ``e`` and unit tangent ``tau``."""
    tau = _unit(tau)
    n = np.array([-tau[1], tau[0]])
    e = np.asarray(e, dtype=float)
    return (coeffs.alpha * np.trace(e) * np.eye(2) + coeffs.beta * e
            + coeffs.gamma * (tau @ e @ tau) * np.outer(tau, tau)
            + coeffs.rho * (n @ e @ n) * np.outer(n, n))


@dataclass(frozen=True, eq=False)
class QuarticForm:
    """Coefficients of ``t1^4, t1^3 t2, t1^2 t2^2, t1 t2^3, t2^4`` (last axis)."""
    c: np.ndarray

    def __call__(self, tau):
        t1, t2 = np.asarray(tau, dtype=float)[..., 0], np.asarray(tau, dtype=float)[..., 1]
        mono = np.stack([t1 ** 4, t1 ** 3 * t2, t1 ** 2 * t2 ** 2, t1 * t2 ** 3, t2 ** 4], axis=-1)
        return (self.c * mono).sum(axis=-1)


def _quad_product(q, r):
    # (q0 t1^2 + q1 t1 t2 + q2 t2^2)(r0 t1^2 + ...)
    return np.stack([q[..., 0] * r[..., 0],
                     q[..., 0] * r[..., 1] + q[..., 1] * r[..., 0],
                     q[..., 0] * r[..., 2] + q[..., 1] * r[..., 1] + q[..., 2] * r[..., 0],
                     q[..., 1] * r[..., 2] + q[..., 2] * r[..., 1],
                     q[..., 2] * r[..., 2]], axis=-1)


def quartic_coeffs(coeffs, e_u, e_p):
    """Homogeneous quartic ``P(tau) = M(tau) e_u : e_p`` (vectorised over leading axes)."""
    e_u = np.asarray(e_u, dtype=float)
    e_p = np.asarray(e_p, dtype=float)
    a_u, b_u, c_u = e_u[..., 0, 0], e_u[..., 0, 1], e_u[..., 1, 1]
    a_p, b_p, c_p = e_p[..., 0, 0], e_p[..., 0, 1], e_p[..., 1, 1]
    iso = (coeffs.alpha * (a_u + c_u) * (a_p + c_p)
           + coeffs.beta * (a_u * a_p + 2.0 * b_u * b_p + c_u * c_p))
    # e tau.tau and e n.n as quadratic forms in (t1, t2), n = (-t2, t1)
    tt_u = np.stack([a_u, 2.0 * b_u, c_u], axis=-1)
    tt_p = np.stack([a_p, 2.0 * b_p, c_p], axis=-1)
    nn_u = np.stack([c_u, -2.0 * b_u, a_u], axis=-1)
    nn_p = np.stack([c_p, -2.0 * b_p, a_p], axis=-1)
    ring = np.array([1.0, 0.0, 2.0, 0.0, 1.0])
    c = (np.asarray(iso)[..., None] * ring
         + np.asarray(coeffs.gamma)[..., None] * _quad_product(tt_u, tt_p)
         + np.asarray(coeffs.rho)[..., None] * _quad_product(nn_u, nn_p))
    return QuarticForm(c)


def element_quartics(u0, p0, pair, rho_choice=DEFAULT_RHO_CHOICE):
    """Per-triangle quartic coefficients, shape (n_tri, 5), computed once per background."""
    mesh = u0.mesh
    bg = pair.background.on_elements(mesh)
    inc = pair.inclusion.on_elements(mesh)
    coeffs = polarization_coeffs(bg.lam, bg.mu, inc.lam, inc.mu, rho_choice)
    return np.ascontiguousarray(quartic_coeffs(coeffs, strain(u0), strain(p0)).c)


@dataclass(eq=False)
class SensitivityReport:
    segment: Segment
    value: float
    points: Optional[np.ndarray] = None
    contributions: Optional[np.ndarray] = None
    pair: Optional[tuple] = None
    flag: str = "ok"
    extra: dict = field(default_factory=dict)

    @property
    def improving(self):
        return self.flag == "ok" and self.value < 0.0


def quadrature_step(mesh, quad_step):
    if quad_step is None:
        return 0.5 * mesh.h
    if quad_step <= 0:
        raise ValueError("quad_step must be positive")
    return min(quad_step, 0.5 * mesh.h)


def quadrature_points(sigma, step):
    """Composite midpoint rule on each straight piece: (points, tangents, weights)."""
    pts, taus, wts = [], [], []
    for a, b, tau, L in zip(sigma.points[:-1], sigma.points[1:], sigma.tangents, sigma.lengths):
        nq = kernels.quadrature_count(L, step)
        s = (np.arange(nq) + 0.5) / nq
        pts.append(a + s[:, None] * (b - a))
        taus.append(np.broadcast_to(tau, (nq, 2)))
        wts.append(np.full(nq, L / nq))
    return np.concatenate(pts), np.concatenate(taus), np.concatenate(wts)


def _density(mesh, quart, pts, taus):
    vptr, vidx = mesh.vertex_triangles
    return kernels.segment_density(mesh.vertices, mesh.triangles, mesh.cell_neighbors, vptr, vidx,
                                   quart, pts, taus)


def segment_derivative(sigma, u0, p0, pair, quad_step=None, rho_choice=DEFAULT_RHO_CHOICE, quartics=None):
    """Predicted first-order coefficient ``J'`` for the ligament along ``sigma``."""
    mesh = u0.mesh
    quart = element_quartics(u0, p0, pair, rho_choice) if quartics is None else quartics
    pts, taus, w = quadrature_points(sigma, quadrature_step(mesh, quad_step))
    dens, _ = _density(mesh, quart, pts, taus)
    if not np.all(np.isfinite(dens)):
        bad = pts[~np.isfinite(dens)][0]
        raise NotInDomain(f"quadrature point {bad.tolist()} of the segment lies outside the mesh")
    contrib = dens * w
    return SensitivityReport(sigma, float(contrib.sum()), pts, contrib)


def scan_segments(candidates, u0, p0, pair, eps_display=0.0, quad_step=None,
                  rho_choice=DEFAULT_RHO_CHOICE, quartics=None):
    """Rank every straight bar between two candidate points by predicted ``J'``.

    Returns reports sorted by (value, i, j); bars leaving the domain are
    flagged ``outside`` and listed last, bars with ``J' >= 0`` are flagged
    ``non_improving``.
    """
    cand = np.asarray(candidates, dtype=float).reshape(-1, 2)
    if len(cand) < 2:
        raise InsufficientCandidates(f"need at least two candidate points, got {len(cand)}")
    mesh = u0.mesh
    quart = element_quartics(u0, p0, pair, rho_choice) if quartics is None else quartics
    pairs = np.array(list(itertools.combinations(range(len(cand)), 2)), dtype=np.int64)
    dist = np.hypot(*(cand[pairs[:, 1]] - cand[pairs[:, 0]]).T)
    live = dist > 1e-12
    vals = np.full(len(pairs), np.nan)
    ok = np.zeros(len(pairs), dtype=bool)
    if live.any():
        vptr, vidx = mesh.vertex_triangles
        v, o = kernels.scan_pairs(mesh.vertices, mesh.triangles, mesh.cell_neighbors, vptr, vidx,
                                  quart, cand, pairs[live], quadrature_step(mesh, quad_step))
        vals[live], ok[live] = v, o
    reports = []
    for k, (i, j) in enumerate(pairs):
        if not live[k]:
            flag = "degenerate"
        elif not ok[k]:
            flag = "outside"
        elif vals[k] >= 0.0:
            flag = "non_improving"
        else:
            flag = "ok"
        seg = Segment(cand[[i, j]], eps_display) if live[k] else None
        reports.append(SensitivityReport(seg, float(vals[k]), pair=(int(i), int(j)), flag=flag,
                                         extra={"z1": cand[i].copy(), "z2": cand[j].copy(),
                                                "length": float(dist[k])}))
    valid = [r for r in reports if r.flag in ("ok", "non_improving")]
    rest = [r for r in reports if r.flag not in ("ok", "non_improving")]
    valid.sort(key=lambda r: (r.value, r.pair[0], r.pair[1]))
    return valid + rest


def contour_points(phi):
    """Zero crossings of the level set along mesh edges (plus exact-zero vertices)."""
    mesh = phi.mesh
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    fa, fb = phi.phi[a], phi.phi[b]
    cross = (fa * fb < 0.0)
    s = fa[cross] / (fa[cross] - fb[cross])
    pa, pb = mesh.vertices[a[cross]], mesh.vertices[b[cross]]
    pts = pa + s[:, None] * (pb - pa)
    zero = mesh.vertices[phi.phi == 0.0]
    pts = np.concatenate([pts, zero])
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def thin_points(points, min_spacing):
    """Greedy deterministic subset with pairwise distances >= ``min_spacing``."""
    kept = []
    for p in np.asarray(points, dtype=float).reshape(-1, 2):
        if all(np.hypot(*(p - q)) >= min_spacing for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, 2)
