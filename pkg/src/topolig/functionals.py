"""Objective and constraint functionals and the adjoint right-hand sides they induce."""
import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .elasticity import load_vector
from .errors import MissingLevelSet
from .material import smoothed_heaviside


class Kind(enum.Enum):
    COMPLIANCE = "compliance"
    VOLUME = "volume"
    DOMAIN_INTEGRAND = "domain_integrand"


# edge-midpoint rule: exact for quadratics on triangles
_MID_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass(frozen=True)
class FunctionalSpec:
    """``j`` maps nodal-type displacement samples (n, 2) -> (n,); ``dj`` -> (n, 2)."""
    kind: Kind
    j: Optional[Callable] = None
    dj: Optional[Callable] = None
    target: Optional[float] = None
    smoothing_width: Optional[float] = None

    def __post_init__(self):
        if self.kind is Kind.DOMAIN_INTEGRAND:
            if self.j is None or self.dj is None:
                raise ValueError("domain integrand needs both j and dj")
            _check_derivative(self.j, self.dj)

    @classmethod
    def compliance(cls, target=None):
        return cls(Kind.COMPLIANCE, target=target)

    @classmethod
    def volume(cls, target=None, smoothing_width=None):
        return cls(Kind.VOLUME, target=target, smoothing_width=smoothing_width)

    @classmethod
    def squared_norm(cls):
        """``j(u) = |u|^2``."""
        return cls(Kind.DOMAIN_INTEGRAND, j=lambda u: (u * u).sum(axis=-1), dj=lambda u: 2.0 * u)


def _check_derivative(j, dj, step=1e-6, rtol=1e-5, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(8, 2))
    v = rng.normal(size=(8, 2))
    fd = (j(u + step * v) - j(u - step * v)) / (2 * step)
    an = (dj(u) * v).sum(axis=-1)
    if not np.allclose(fd, an, rtol=rtol, atol=rtol * max(1.0, np.abs(an).max())):
        raise ValueError("dj is inconsistent with j (finite-difference check failed)")


def _quadrature_values(u):
    mesh = u.mesh
    vals = u.values[mesh.triangles]  # (t, 3, 2)
    return np.einsum("qk,tkd->tqd", _MID_BARY, vals)


def volume(phi, width=None):
    """Integral of the smoothed characteristic of ``{phi < 0}``."""
    mesh = phi.mesh
    w = 2.0 * mesh.h if width is None else width
    at_q = np.einsum("qk,tk->tq", _MID_BARY, phi.phi[mesh.triangles])
    return float((smoothed_heaviside(-at_q, w).mean(axis=1) * mesh.areas).sum())


def compliance(u, loads):
    """Work of the external loads, ``F . u``."""
    return float(load_vector(u.mesh, loads) @ u.flat)


def evaluate(spec, u, phi=None, loads=None):
    if spec.kind is Kind.COMPLIANCE:
        return compliance(u, loads)
    if spec.kind is Kind.VOLUME:
        if phi is None:
            raise MissingLevelSet("volume functional needs a level set")
        return volume(phi, spec.smoothing_width)
    q = _quadrature_values(u)
    return float((spec.j(q).mean(axis=1) * u.mesh.areas).sum())


def adjoint_rhs(spec, u0, loads):
    """Right-hand side of the adjoint problem, ``-int j'(u0) . phi_i``.

    Compliance uses the negated load vector (so the adjoint is ``-u0``).
    """
    mesh = u0.mesh
    if spec.kind is Kind.VOLUME:
        return np.zeros(2 * mesh.n_vertices)
    if spec.kind is Kind.COMPLIANCE:
        return -load_vector(mesh, loads)
    q = _quadrature_values(u0)
    g = spec.dj(q)  # (t, q, 2)
    out = np.zeros((mesh.n_vertices, 2))
    w = mesh.areas / 3.0
    for k in range(3):
        contrib = w[:, None] * np.einsum("q,tqd->td", _MID_BARY[:, k], g)
        np.add.at(out, mesh.triangles[:, k], contrib)
    return -out.ravel()

