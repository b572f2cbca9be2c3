"""P1 plane linear elasticity: assembly, Dirichlet elimination, solves, strains."""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import SingularSystem, SolveFailed
from .material import tube_material
from .mesh import BoundaryTag

logger = logging.getLogger("topolig")

DEFAULT_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class VectorField:
    """Nodal 2-vector field with solver diagnostics attached."""
    values: np.ndarray
    mesh: object
    info: dict = field(default_factory=dict)

    def __neg__(self):
        return VectorField(-self.values, self.mesh, dict(self.info))

    @property
    def flat(self):
        return self.values.reshape(-1)


@dataclass(frozen=True)
class LoadSpec:
    """Body force ``f`` (force/area) and traction ``g`` on GAMMA_N (force/length).

    Either may be a constant 2-vector or a callable ``(x, y) -> (n, 2)``.
    """
    body_force: object = (0.0, 0.0)
    traction: object = (0.0, 0.0)


@dataclass(eq=False)
class LinearSystem:
    K: sp.csr_matrix
    F: np.ndarray
    constrained: np.ndarray


def _evaluate(value, pts):
    if callable(value):
        return np.asarray(value(pts[:, 0], pts[:, 1]), dtype=float).reshape(len(pts), 2)
    return np.broadcast_to(np.asarray(value, dtype=float), (len(pts), 2))


def element_dofs(mesh):
    t = mesh.triangles
    d = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    d[:, 0::2] = 2 * t
    d[:, 1::2] = 2 * t + 1
    return d


def stiffness_matrix(mesh, material):
    em = material.on_elements(mesh)
    ke = kernels.element_stiffness(mesh.vertices, mesh.triangles, em.lam, em.mu)
    ke = 0.5 * (ke + ke.transpose(0, 2, 1))
    dofs = element_dofs(mesh)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_vertices
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def traction_vector(mesh, traction):
    """Exact integral of a per-edge constant traction against the P1 basis."""
    F = np.zeros((mesh.n_vertices, 2))
    sel = mesh.boundary_tags == BoundaryTag.GAMMA_N
    edges = mesh.boundary_edges[sel]
    if len(edges) == 0:
        return F.ravel()
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    g = _evaluate(traction, 0.5 * (a + b))
    contrib = 0.5 * np.hypot(*(b - a).T)[:, None] * g
    np.add.at(F, edges[:, 0], contrib)
    np.add.at(F, edges[:, 1], contrib)
    return F.ravel()


def body_force_vector(mesh, body_force):
    F = np.zeros((mesh.n_vertices, 2))
    f = _evaluate(body_force, mesh.centroids)
    contrib = (mesh.areas / 3.0)[:, None] * f
    for k in range(3):
        np.add.at(F, mesh.triangles[:, k], contrib)
    return F.ravel()


def load_vector(mesh, loads):
    return traction_vector(mesh, loads.traction) + body_force_vector(mesh, loads.body_force)


def dirichlet_dofs(mesh):
    v = mesh.tagged_vertices(BoundaryTag.GAMMA_D)
    return np.sort(np.concatenate([2 * v, 2 * v + 1]))


def assemble(mesh, material, loads):
    """Stiffness, load vector and clamped dofs (homogeneous Dirichlet on GAMMA_D)."""
    c = dirichlet_dofs(mesh)
    if c.size == 0:
        raise SingularSystem("no GAMMA_D edge: the system has rigid-body modes")
    return LinearSystem(stiffness_matrix(mesh, material), load_vector(mesh, loads), c)


def eliminate(K, F, constrained, values=None):
    """Row/column elimination with unit diagonal; returns (K_red, rhs)."""
    n = K.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[constrained] = True
    g = np.zeros(n)
    if values is not None:
        g[constrained] = values
    rhs = F - K @ g
    keep = sp.diags((~mask).astype(float))
    Kr = (keep @ K @ keep + sp.diags(mask.astype(float))).tocsr()
    Kr.eliminate_zeros()
    rhs[mask] = g[mask]
    return Kr, rhs


def solve_system(K, F, constrained, values=None, method="pcg", rtol=DEFAULT_RTOL, x0=None):
    """Solve with Dirichlet elimination. Returns (x, info)."""
    Kr, rhs = eliminate(K, F, constrained, values)
    n = Kr.shape[0]
    if method == "direct":
        x = spla.spsolve(Kr.tocsc(), rhs)
        it = 0
    elif method == "pcg":
        x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        x[constrained] = rhs[constrained]
        it = 0
        # restart on the true residual: the recursive one drifts
        for _ in range(4):
            x, k, _ = kernels.pcg(Kr, rhs, x, rtol, 20 * n - it)
            it += k
            bn = np.linalg.norm(rhs)
            if bn == 0 or np.linalg.norm(Kr @ x - rhs) <= rtol * bn or it >= 20 * n:
                break
    else:
        raise ValueError(f"unknown solver method {method!r}")
    bn = np.linalg.norm(rhs)
    res = float(np.linalg.norm(Kr @ x - rhs) / bn) if bn > 0 else 0.0
    if not np.all(np.isfinite(x)) or (method == "pcg" and res > 10 * rtol):
        raise SolveFailed(f"linear solve failed: {it} iterations, relative residual {res:.3e}",
                          iterations=it, residual=res)
    return x, {"method": method, "iterations": int(it), "residual": res}


def _solve_field(mesh, material, F, method, rtol, x0=None):
    c = dirichlet_dofs(mesh)
    if c.size == 0:
        raise SingularSystem("no GAMMA_D edge: the system has rigid-body modes")
    K = stiffness_matrix(mesh, material)
    x, info = solve_system(K, F, c, method=method, rtol=rtol,
                           x0=None if x0 is None else np.asarray(x0).reshape(-1))
    x[c] = 0.0
    logger.debug("solve: %s", info)
    return VectorField(x.reshape(-1, 2), mesh, info)


def solve_state(mesh, material, loads, method="pcg", rtol=DEFAULT_RTOL, x0=None):
    """Displacement of the background problem on the whole hold-all domain."""
    return _solve_field(mesh, material, load_vector(mesh, loads), method, rtol, x0)


def solve_adjoint(mesh, material, functional, u0, loads, method="pcg", rtol=DEFAULT_RTOL):
    from .functionals import adjoint_rhs
    rhs = adjoint_rhs(functional, u0, loads)
    if not np.any(rhs):
        return VectorField(np.zeros((mesh.n_vertices, 2)), mesh, {"method": method, "iterations": 0, "residual": 0.0})
    return _solve_field(mesh, material, rhs, method, rtol)


def solve_perturbed(mesh, pair, sigma, eps, loads, method="pcg", rtol=DEFAULT_RTOL, x0=None):
    """State with the sharp tube of half-width ``eps`` around ``sigma`` filled by the inclusion."""
    under = mesh.h > 0.5 * eps * (1.0 + 1e-9)
    if under:
        warnings.warn(f"tube under-resolved: h={mesh.h:.4g} > eps/2={eps / 2:.4g}", RuntimeWarning)
    u = solve_state(mesh, tube_material(pair, sigma, eps, mesh), loads, method, rtol, x0)
    u.info["under_resolved"] = bool(under)
    return u


def basis_gradients(mesh):
    """Gradients of the three P1 basis functions per triangle, shape (n_tri, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    a2 = 2.0 * mesh.areas
    g = np.empty((mesh.n_triangles, 3, 2))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        g[:, k, 0] = (p[:, i, 1] - p[:, j, 1]) / a2
        g[:, k, 1] = (p[:, j, 0] - p[:, i, 0]) / a2
    return g


def strain(u):
    """Per-element symmetric gradient of a P1 field, shape (n_tri, 2, 2)."""
    mesh = u.mesh
    grad = np.einsum("tka,tkb->tab", u.values[mesh.triangles], basis_gradients(mesh))
    return 0.5 * (grad + grad.transpose(0, 2, 1))
