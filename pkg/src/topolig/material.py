"""Isotropic Hooke laws, ersatz background media and sharp tube inclusions."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidMaterial


def hooke_apply(lam, mu, e):
    """Stress ``2 mu e + lam tr(e) I`` for a symmetric 2x2 strain (or a stack of them)."""
    e = np.asarray(e, dtype=float)
    tr = np.trace(e, axis1=-2, axis2=-1)
    return 2.0 * np.asarray(mu)[..., None, None] * e + np.asarray(lam)[..., None, None] * tr[..., None, None] * np.eye(2)


def smoothed_heaviside(s, width):
    """0 below -width, 1 above width, C1 sine ramp in between."""
    s = np.asarray(s, dtype=float)
    r = np.clip(s / width, -1.0, 1.0)
    return np.where(s <= -width, 0.0,
                    np.where(s >= width, 1.0, 0.5 * (1.0 + r + np.sin(np.pi * r) / np.pi)))


def _check_lame(lam, mu):
    if np.any(~np.isfinite(lam)) or np.any(~np.isfinite(mu)):
        raise InvalidMaterial("Lame coefficients must be finite")
    if np.any(mu <= 0.0) or np.any(lam + mu <= 0.0):
        raise InvalidMaterial("need mu > 0 and lambda + mu > 0 everywhere")


@dataclass(frozen=True, eq=False)
class LameField:
    """Per-vertex Lame coefficients."""
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        _check_lame(self.lam, self.mu)

    @classmethod
    def uniform(cls, mesh, lam, mu):
        return cls(np.full(mesh.n_vertices, float(lam)), np.full(mesh.n_vertices, float(mu)))

    def on_elements(self, mesh):
        # exact mean of the linear interpolant over each triangle
        return ElementMaterial(self.lam[mesh.triangles].mean(axis=1), self.mu[mesh.triangles].mean(axis=1))

    def scaled(self, factor):
        return LameField(factor * self.lam, factor * self.mu)


@dataclass(frozen=True, eq=False)
class ElementMaterial:
    """Per-triangle constant Lame coefficients, the form used by assembly."""
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        _check_lame(self.lam, self.mu)

    def on_elements(self, mesh):
        return self


def as_elements(material, mesh):
    return material.on_elements(mesh)


@dataclass(frozen=True, eq=False)
class MaterialPair:
    """Background medium and the material filling a thin inclusion."""
    background: LameField
    inclusion: LameField


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Nodal level set; the shape is ``{phi < 0}``."""
    phi: np.ndarray
    mesh: object

    def __post_init__(self):
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("level set values must be finite")

    def with_values(self, phi):
        return LevelSet(np.asarray(phi, dtype=float), self.mesh)


def ersatz_field(phi, solid, eta=1e-3, transition_width=None):
    """Blend ``solid = (lam, mu)`` with ``eta * solid`` across the zero level.

    The default transition half-width is two mesh cells.
    """
    if not 0.0 < eta < 1.0:
        raise InvalidMaterial(f"ersatz ratio eta must lie in (0, 1), got {eta}")
    w = 2.0 * phi.mesh.h if transition_width is None else transition_width
    if w <= 0:
        raise ValueError("transition_width must be positive")
    frac = eta + (1.0 - eta) * smoothed_heaviside(-phi.phi, w)
    lam, mu = solid
    return LameField(frac * lam, frac * mu)


def tube_elements(mesh, points, eps):
    """Boolean mask of triangles whose centroid is within ``eps`` of the polyline."""
    points = np.asarray(points, dtype=float)
    dist = kernels.segment_distance(mesh.centroids, points[:-1], points[1:])
    return dist < eps


def tube_material(pair, sigma, eps, mesh):
    """Sharp inclusion: triangles centred in the tube take the inclusion values."""
    if eps <= 0:
        raise ValueError("tube thickness must be positive")
    bg = pair.background.on_elements(mesh)
    inc = pair.inclusion.on_elements(mesh)
    inside = tube_elements(mesh, sigma.points, eps)
    return ElementMaterial(np.where(inside, inc.lam, bg.lam), np.where(inside, inc.mu, bg.mu))
