"""Level-set transport, redistancing and ligament grafting on a fixed triangulation."""
import logging
import warnings

import numpy as np

from . import kernels
from .material import LevelSet

logger = logging.getLogger("topolig")


class NoInterface(UserWarning):
    pass


def advect(phi, velocity, dt, cfl=0.5):
    """One explicit upwind step of ``phi_t + v |grad phi| = 0``.

    Positive ``v`` moves the boundary outward (the shape grows). ``dt`` is
    clamped to ``cfl * h / max|v|``.
    """
    v = np.asarray(velocity, dtype=float)
    vmax = np.abs(v).max() if v.size else 0.0
    if vmax == 0.0:
        return phi.with_values(phi.phi.copy())
    mesh = phi.mesh
    dt = min(dt, cfl * mesh.h / vmax)
    st, sp = mesh.axis_stencil
    grad = kernels.upwind_norm(phi.phi, st, sp, v)
    return phi.with_values(phi.phi - dt * v * grad)


def contour_segments(phi):
    """Pieces of the zero isoline of the P1 interpolant, one per cut triangle."""
    mesh = phi.mesh
    f = phi.phi[mesh.triangles]
    neg = f < 0.0
    cut = np.flatnonzero(neg.any(axis=1) & ~neg.all(axis=1))
    if cut.size == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    P = mesh.vertices[mesh.triangles[cut]]
    F = f[cut]
    N = neg[cut]
    ends = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        crosses = N[:, a] != N[:, b]
        s = np.where(crosses, F[:, a] / np.where(crosses, F[:, a] - F[:, b], 1.0), 0.0)
        ends.append((crosses, P[:, a] + s[:, None] * (P[:, b] - P[:, a])))
    pa = np.empty((cut.size, 2))
    pb = np.empty((cut.size, 2))
    first = np.ones(cut.size, dtype=bool)
    for crosses, pt in ends:
        take_a = crosses & first
        take_b = crosses & ~first
        pa[take_a] = pt[take_a]
        pb[take_b] = pt[take_b]
        first &= ~crosses
    return pa, pb


def reinitialize(phi):
    """Replace ``phi`` by the signed distance to its zero isoline."""
    pa, pb = contour_segments(phi)
    if len(pa) == 0:
        warnings.warn("level set has no interface; left unchanged", NoInterface)
        return phi.with_values(phi.phi.copy())
    d = kernels.segment_distance(phi.mesh.vertices, pa, pb)
    return phi.with_values(np.where(phi.phi < 0.0, -d, np.where(phi.phi > 0.0, d, 0.0)))


def insert_ligament(phi, sigma, eps_insert):
    """Add the tube ``dist(x, sigma) < eps_insert`` to the shape."""
    if eps_insert <= 0:
        raise ValueError("eps_insert must be positive")
    pts = sigma.points
    d = kernels.segment_distance(phi.mesh.vertices, pts[:-1], pts[1:])
    return phi.with_values(np.minimum(phi.phi, d - eps_insert))


def gradient_norm(phi):
    """Per-triangle |grad phi| of the P1 interpolant."""
    from .elasticity import basis_gradients
    g = np.einsum("tk,tkd->td", phi.phi[phi.mesh.triangles], basis_gradients(phi.mesh))
    return np.hypot(g[:, 0], g[:, 1])


def box_level_set(mesh, x0, y0, x1, y1):
    """Signed distance (negative inside) to an axis-aligned box."""
    x, y = mesh.vertices.T
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    qx = np.abs(x - cx) - 0.5 * (x1 - x0)
    qy = np.abs(y - cy) - 0.5 * (y1 - y0)
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return LevelSet(outside + inside, mesh)


def perforated(mesh, centers, radius):
    """Shape with circular holes: ``phi = max_i (radius - |x - c_i|)``."""
    x = mesh.vertices
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    d = np.sqrt(((x[:, None, :] - c[None]) ** 2).sum(axis=2))
    return LevelSet((radius - d).max(axis=1), mesh)
