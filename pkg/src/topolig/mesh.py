"""Structured triangulations of the hold-all domain, boundary tags, point location."""
import dataclasses
import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import InvalidGeometry, NotInDomain

SNAP_TOL = 1e-9


class BoundaryTag(enum.IntEnum):
    GAMMA_D = 0
    GAMMA_N = 1
    GAMMA_FREE = 2


def _readonly(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Counterclockwise P1 triangulation with tagged boundary edges.

    ``cell_neighbors[t, k]`` is the triangle across the edge opposite local
    vertex ``k`` of ``t`` (``-1`` on the boundary).
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    cell_neighbors: np.ndarray

    @classmethod
    def from_arrays(cls, vertices, triangles):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        p = vertices[triangles]
        area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                 - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.any(area2 <= 0.0):
            raise InvalidGeometry("triangles must be counterclockwise with positive area")
        nbr, bedges = _topology(triangles)
        tags = np.full(len(bedges), BoundaryTag.GAMMA_FREE, dtype=np.int64)
        return cls(_readonly(vertices, float), _readonly(triangles, np.int64),
                   _readonly(bedges, np.int64), _readonly(tags, np.int64), _readonly(nbr, np.int64))

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edges(self):
        """Unique undirected edges, shape (n_edges, 2), sorted vertex pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @cached_property
    def h(self):
        """Cell size: largest over triangles of the shortest edge (the quad size on structured meshes)."""
        p = self.vertices[self.triangles]
        e = np.stack([np.hypot(*(p[:, (k + 1) % 3] - p[:, k]).T) for k in range(3)], axis=1)
        return float(e.min(axis=1).max())

    @cached_property
    def diameter(self):
        """Largest edge length."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.sqrt((d * d).sum(axis=1)).max())

    @cached_property
    def vertex_triangles(self):
        """CSR adjacency vertex -> incident triangles, ascending indices."""
        owner = self.triangles.ravel()
        tids = np.repeat(np.arange(self.n_triangles), 3)
        order = np.lexsort((tids, owner))
        ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.add.at(ptr, owner + 1, 1)
        return np.cumsum(ptr), np.ascontiguousarray(tids[order], dtype=np.int64)

    @cached_property
    def axis_stencil(self):
        """Per-vertex neighbours along (-x, +x, -y, +y) and their distances."""
        n = self.n_vertices
        st = np.full((n, 4), -1, dtype=np.int64)
        sp = np.ones((n, 4))
        a, b = self.edges[:, 0], self.edges[:, 1]
        d = self.vertices[b] - self.vertices[a]
        length = np.hypot(d[:, 0], d[:, 1])
        horiz = np.abs(d[:, 1]) <= 1e-9 * length
        vert = np.abs(d[:, 0]) <= 1e-9 * length
        for mask, lo, hi, comp in ((horiz, 0, 1, 0), (vert, 2, 3, 1)):
            aa, bb, ll = a[mask], b[mask], length[mask]
            fwd = d[mask, comp] > 0
            left, right = np.where(fwd, aa, bb), np.where(fwd, bb, aa)
            st[right, lo], sp[right, lo] = left, ll
            st[left, hi], sp[left, hi] = right, ll
        return st, sp

    def boundary_lengths(self):
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def tag_measure(self, tag):
        return float(self.boundary_lengths()[self.boundary_tags == tag].sum())

    def tagged_vertices(self, tag):
        return np.unique(self.boundary_edges[self.boundary_tags == tag])

    def bounding_box(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return lo, hi


def _topology(triangles):
    """Neighbour table and boundary edges (oriented as in their triangle)."""
    m = triangles.shape[0]
    local = [(1, 2), (2, 0), (0, 1)]
    directed = np.concatenate([triangles[:, list(p)] for p in local])
    owner = np.tile(np.arange(m), 3)
    opp = np.repeat(np.arange(3), m)
    key = np.sort(directed, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    ks = key[order]
    same = np.all(ks[1:] == ks[:-1], axis=1)
    nbr = np.full((m, 3), -1, dtype=np.int64)
    i = np.flatnonzero(same)
    a, b = order[i], order[i + 1]
    nbr[owner[a], opp[a]] = owner[b]
    nbr[owner[b], opp[b]] = owner[a]
    counts = np.zeros(len(order), dtype=np.int64)
    counts[i] += 1
    counts[i + 1] += 1
    if np.any(counts > 1):
        raise InvalidGeometry("non-manifold edge shared by more than two triangles")
    single = order[counts == 0]
    single.sort()
    return nbr, directed[single]


def build_structured(width, height, nx, ny, origin=(0.0, 0.0)):
    """Box [0, width] x [0, height] split into nx*ny quads, two triangles each.

    The split diagonal always runs bottom-left to top-right.
    """
    if width <= 0 or height <= 0:
        raise InvalidGeometry(f"box dimensions must be positive, got {width} x {height}")
    if nx < 1 or ny < 1:
        raise InvalidGeometry(f"nx, ny must be >= 1, got {nx}, {ny}")
    xs = origin[0] + width * np.arange(nx + 1) / nx
    ys = origin[1] + height * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    return TriMesh.from_arrays(verts, tris)


def build_union(boxes, h):
    """Union of axis-aligned boxes ``(x0, y0, x1, y1)`` meshed at spacing ``h``.

    Boxes may share edges but not overlap; coincident vertices are merged
    within ``SNAP_TOL``.
    """
    verts, tris, offset = [], [], 0
    for x0, y0, x1, y1 in boxes:
        nx = int(round((x1 - x0) / h))
        ny = int(round((y1 - y0) / h))
        if nx < 1 or ny < 1 or abs(nx * h - (x1 - x0)) > 1e-9 or abs(ny * h - (y1 - y0)) > 1e-9:
            raise InvalidGeometry(f"box {(x0, y0, x1, y1)} is not a multiple of h={h}")
        m = build_structured(x1 - x0, y1 - y0, nx, ny, origin=(x0, y0))
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += m.n_vertices
    return _merged(np.concatenate(verts), np.concatenate(tris))


def _merged(verts, tris):
    # map each vertex to the lowest index within SNAP_TOL
    rep = np.arange(len(verts))
    for a, b in sorted(cKDTree(verts).query_pairs(SNAP_TOL)):
        ra, rb = rep[a], rep[b]
        rep[rep == max(ra, rb)] = min(ra, rb)
    keep = np.unique(rep)
    new_index = np.full(len(verts), -1, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    return TriMesh.from_arrays(verts[keep], new_index[rep][tris])


def mirrored(mesh, y_axis):
    """Union of ``mesh`` and its reflection across the line ``y = y_axis``.

    The result is exactly symmetric: reflected vertex coordinates are
    ``2 y_axis - y`` and the seam vertices are merged.
    """
    v = mesh.vertices
    w = np.column_stack([v[:, 0], 2.0 * y_axis - v[:, 1]])
    t = mesh.triangles
    flipped = t[:, [0, 2, 1]] + len(v)
    return _merged(np.concatenate([v, w]), np.concatenate([t, flipped]))


def box_predicate(xmin, xmax, ymin, ymax, tol=SNAP_TOL):
    """Predicate selecting edge midpoints inside a closed box (with tolerance)."""
    def pred(x, y):
        return (x >= xmin - tol) & (x <= xmax + tol) & (y >= ymin - tol) & (y <= ymax + tol)
    return pred


def tag_boundary(mesh, rules):
    """Tag boundary edges by ``(predicate, tag)`` rules on edge midpoints.

    Rules apply in order and the first match wins; unmatched edges are
    ``GAMMA_FREE``.
    """
    mid = 0.5 * (mesh.vertices[mesh.boundary_edges[:, 0]] + mesh.vertices[mesh.boundary_edges[:, 1]])
    tags = np.full(len(mid), BoundaryTag.GAMMA_FREE, dtype=np.int64)
    done = np.zeros(len(mid), dtype=bool)
    for pred, tag in rules:
        hit = np.asarray(pred(mid[:, 0], mid[:, 1]), dtype=bool) & ~done
        tags[hit] = BoundaryTag(tag)
        done |= hit
    return dataclasses.replace(mesh, boundary_tags=_readonly(tags, np.int64))


def locate_points(mesh, pts, start=0):
    """Vectorised point location; triangle index ``-1`` marks points outside."""
    return kernels.locate(mesh.vertices, mesh.triangles, mesh.cell_neighbors, pts, start)


def locate_point(mesh, x):
    tids, bary = locate_points(mesh, np.asarray(x, dtype=float).reshape(1, 2))
    if tids[0] < 0:
        raise NotInDomain(f"point {np.ravel(x).tolist()} lies outside the mesh")
    return int(tids[0]), bary[0]
