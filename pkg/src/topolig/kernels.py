"""Hot numerical loops, each in a numba and a pure-numpy flavour.

Public functions dispatch on :data:`topolig._backend.USE_NUMBA`. The explicit
``*_numba`` / ``*_numpy`` variants stay importable so that tests and the
benchmark script can compare the two paths inside one process.
"""
import math

import numpy as np
from scipy.spatial import cKDTree

from ._backend import USE_NUMBA, njit, prange

# Inclusion tolerance (length units) for points lying on triangle edges.
LOCATE_TOL = 1e-9


# ---------------------------------------------------------------------------
# element stiffness
# ---------------------------------------------------------------------------

def element_stiffness_numpy(xy, tri, lam, mu):
    """Local P1 stiffness matrices, shape (n_tri, 6, 6), dofs (x0, y0, x1, ...)."""
    p0, p1, p2 = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    area2 = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    b = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1) / area2[:, None]
    c = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1) / area2[:, None]
    nt = tri.shape[0]
    B = np.zeros((nt, 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    D = np.zeros((nt, 3, 3))
    D[:, 0, 0] = D[:, 1, 1] = lam + 2.0 * mu
    D[:, 0, 1] = D[:, 1, 0] = lam
    D[:, 2, 2] = mu
    return 0.5 * area2[:, None, None] * np.einsum("tki,tkl,tlj->tij", B, D, B)


@njit(cache=True)
def element_stiffness_numba(xy, tri, lam, mu):
    nt = tri.shape[0]
    out = np.zeros((nt, 6, 6))
    B = np.zeros((3, 6))
    for t in range(nt):
        i0, i1, i2 = tri[t, 0], tri[t, 1], tri[t, 2]
        x0, y0 = xy[i0, 0], xy[i0, 1]
        x1, y1 = xy[i1, 0], xy[i1, 1]
        x2, y2 = xy[i2, 0], xy[i2, 1]
        a2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        b = ((y1 - y2) / a2, (y2 - y0) / a2, (y0 - y1) / a2)
        c = ((x2 - x1) / a2, (x0 - x2) / a2, (x1 - x0) / a2)
        B[:, :] = 0.0
        for k in range(3):
            B[0, 2 * k] = b[k]
            B[1, 2 * k + 1] = c[k]
            B[2, 2 * k] = c[k]
            B[2, 2 * k + 1] = b[k]
        d00 = lam[t] + 2.0 * mu[t]
        d01 = lam[t]
        d22 = mu[t]
        for i in range(6):
            for j in range(6):
                s = (B[0, i] * (d00 * B[0, j] + d01 * B[1, j])
                     + B[1, i] * (d01 * B[0, j] + d00 * B[1, j])
                     + B[2, i] * d22 * B[2, j])
                out[t, i, j] = 0.5 * a2 * s
    return out


def element_stiffness(xy, tri, lam, mu):
    if USE_NUMBA:
        return element_stiffness_numba(xy, tri, np.ascontiguousarray(lam, dtype=float),
                                       np.ascontiguousarray(mu, dtype=float))
    return element_stiffness_numpy(xy, tri, lam, mu)


# ---------------------------------------------------------------------------
# Jacobi-preconditioned conjugate gradient on CSR storage
# ---------------------------------------------------------------------------

def pcg_numpy(A, b, x0, rtol, maxiter):
    """Returns (x, iterations, relative residual)."""
    dinv = 1.0 / A.diagonal()
    x = x0.copy()
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > rtol and it < maxiter:
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it, res


@njit(cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s


@njit(cache=True)
def _pcg_csr(indptr, indices, data, b, x0, rtol, maxiter):
    n = b.shape[0]
    dinv = np.empty(n)
    for i in range(n):
        d = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] == i:
                d = data[k]
        dinv[i] = 1.0 / d
    x = x0.copy()
    Ap = np.empty(n)
    _csr_matvec(indptr, indices, data, x, Ap)
    r = b - Ap
    bnorm = math.sqrt(np.dot(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    z = dinv * r
    p = z.copy()
    rz = np.dot(r, z)
    res = math.sqrt(np.dot(r, r)) / bnorm
    it = 0
    while res > rtol and it < maxiter:
        _csr_matvec(indptr, indices, data, p, Ap)
        alpha = rz / np.dot(p, Ap)
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * Ap[i]
        it += 1
        res = math.sqrt(np.dot(r, r)) / bnorm
        for i in range(n):
            z[i] = dinv[i] * r[i]
        rz_new = np.dot(r, z)
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return x, it, res


def pcg_numba(A, b, x0, rtol, maxiter):
    A = A.tocsr()
    return _pcg_csr(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
                    np.ascontiguousarray(b, dtype=float), np.ascontiguousarray(x0, dtype=float),
                    float(rtol), int(maxiter))


def pcg(A, b, x0, rtol, maxiter):
    if USE_NUMBA:
        return pcg_numba(A, b, x0, rtol, maxiter)
    return pcg_numpy(A, b, x0, rtol, maxiter)


# ---------------------------------------------------------------------------
# point location
# ---------------------------------------------------------------------------

@njit(cache=True)
def _edge_distances(xy, tri, t, px, py, out):
    # signed distance of (px, py) to the edge opposite each vertex, positive inside
    i0, i1, i2 = tri[t, 0], tri[t, 1], tri[t, 2]
    x0, y0 = xy[i0, 0], xy[i0, 1]
    x1, y1 = xy[i1, 0], xy[i1, 1]
    x2, y2 = xy[i2, 0], xy[i2, 1]
    a2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    l0 = (x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)
    l1 = (x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)
    l2 = (x0 - px) * (y1 - py) - (x1 - px) * (y0 - py)
    out[0] = l0 / math.hypot(x2 - x1, y2 - y1)
    out[1] = l1 / math.hypot(x0 - x2, y0 - y2)
    out[2] = l2 / math.hypot(x1 - x0, y1 - y0)
    return l0 / a2, l1 / a2, l2 / a2


@njit(cache=True)
def _locate_one(xy, tri, nbr, px, py, start, bary):
    """Walk from ``start``; brute force if the walk leaves the mesh or cycles."""
    nt = tri.shape[0]
    d = np.empty(3)
    t = start
    if t < 0 or t >= nt:
        t = 0
    for _ in range(nt + 1):
        b0, b1, b2 = _edge_distances(xy, tri, t, px, py, d)
        k = 0
        if d[1] < d[k]:
            k = 1
        if d[2] < d[k]:
            k = 2
        if d[k] >= -LOCATE_TOL:
            bary[0], bary[1], bary[2] = b0, b1, b2
            return t
        nxt = nbr[t, k]
        if nxt < 0:
            break
        t = nxt
    best = -1
    best_d = -np.inf
    for s in range(nt):
        b0, b1, b2 = _edge_distances(xy, tri, s, px, py, d)
        m = min(d[0], d[1], d[2])
        if m > best_d:
            best_d = m
            best = s
            bary[0], bary[1], bary[2] = b0, b1, b2
    if best_d >= -LOCATE_TOL:
        return best
    return -1


@njit(cache=True)
def _clean_bary(bary):
    s = 0.0
    for k in range(3):
        if bary[k] < 0.0:
            bary[k] = 0.0
        s += bary[k]
    for k in range(3):
        bary[k] /= s


@njit(cache=True)
def locate_numba(xy, tri, nbr, pts, start):
    n = pts.shape[0]
    tri_out = np.empty(n, dtype=np.int64)
    bary_out = np.zeros((n, 3))
    b = np.empty(3)
    t = start
    for i in range(n):
        t_new = _locate_one(xy, tri, nbr, pts[i, 0], pts[i, 1], t, b)
        tri_out[i] = t_new
        if t_new >= 0:
            _clean_bary(b)
            bary_out[i, :] = b
            t = t_new
    return tri_out, bary_out


def _edge_distances_numpy(xy, tri, tidx, pts):
    p0, p1, p2 = xy[tri[tidx, 0]], xy[tri[tidx, 1]], xy[tri[tidx, 2]]
    px, py = pts[..., 0], pts[..., 1]

    def cross(a, b):
        return (a[..., 0] - px) * (b[..., 1] - py) - (b[..., 0] - px) * (a[..., 1] - py)

    lam = np.stack([cross(p1, p2), cross(p2, p0), cross(p0, p1)], axis=-1)
    def norm(d):
        return np.hypot(d[..., 0], d[..., 1])

    lengths = np.stack([norm(p2 - p1), norm(p0 - p2), norm(p1 - p0)], axis=-1)
    a2 = ((p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1])
          - (p2[..., 0] - p0[..., 0]) * (p1[..., 1] - p0[..., 1]))
    return lam / lengths, lam / a2[..., None]


def locate_numpy(xy, tri, nbr, pts, start=0, k=8):
    """Nearest-centroid candidates from a KD-tree, brute force for the leftovers."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    tri_out = np.full(n, -1, dtype=np.int64)
    bary_out = np.zeros((n, 3))
    if n == 0:
        return tri_out, bary_out
    cent = xy[tri].mean(axis=1)
    k = min(k, tri.shape[0])
    _, cand = cKDTree(cent).query(pts, k=k)
    cand = cand.reshape(n, k)
    dist, bary = _edge_distances_numpy(xy, tri, cand, pts[:, None, :])
    mind = dist.min(axis=2)
    j = np.argmax(mind, axis=1)
    ok = mind[np.arange(n), j] >= -LOCATE_TOL
    tri_out[ok] = cand[ok, j[ok]]
    bary_out[ok] = bary[ok, j[ok]]
    rest = np.flatnonzero(~ok)
    all_t = np.arange(tri.shape[0])
    for lo in range(0, rest.size, 256):
        idx = rest[lo:lo + 256]
        dist, bary = _edge_distances_numpy(xy, tri, all_t[None, :], pts[idx, None, :])
        mind = dist.min(axis=2)
        j = np.argmax(mind, axis=1)
        hit = mind[np.arange(idx.size), j] >= -LOCATE_TOL
        tri_out[idx[hit]] = j[hit]
        bary_out[idx[hit]] = bary[np.flatnonzero(hit), j[hit]]
    good = tri_out >= 0
    b = np.clip(bary_out[good], 0.0, None)
    bary_out[good] = b / b.sum(axis=1, keepdims=True)
    return tri_out, bary_out


def locate(xy, tri, nbr, pts, start=0):
    pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 2))
    if USE_NUMBA:
        return locate_numba(xy, tri, nbr, pts, int(start))
    return locate_numpy(xy, tri, nbr, pts, start)


# ---------------------------------------------------------------------------
# sensitivity density along segments
# ---------------------------------------------------------------------------
# The density at a point is the quartic P_t(tau) of the containing triangle t.
# Points on an edge average the two adjacent triangles, points on a vertex
# average all incident triangles, always summed in ascending triangle order.

@njit(cache=True)
def _quartic_eval(q, t, t1, t2):
    a = t1 * t1
    b = t2 * t2
    return (q[t, 0] * a * a + q[t, 1] * a * t1 * t2 + q[t, 2] * a * b
            + q[t, 3] * t1 * t2 * b + q[t, 4] * b * b)


@njit(cache=True)
def _point_density(xy, tri, nbr, vtri_ptr, vtri_idx, quart, t, px, py, t1, t2):
    d = np.empty(3)
    _edge_distances(xy, tri, t, px, py, d)
    nz = 0
    kz = -1
    for k in range(3):
        if d[k] <= LOCATE_TOL:
            nz += 1
            kz = k
    if nz == 0:
        return _quartic_eval(quart, t, t1, t2)
    if nz == 1:
        o = nbr[t, kz]
        if o < 0:
            return _quartic_eval(quart, t, t1, t2)
        lo = min(t, o)
        hi = max(t, o)
        return 0.5 * (_quartic_eval(quart, lo, t1, t2) + _quartic_eval(quart, hi, t1, t2))
    # vertex: the vertex not opposite a zero distance
    v = -1
    for k in range(3):
        if d[k] > LOCATE_TOL:
            v = tri[t, k]
    if v < 0:
        v = tri[t, 0]
    s = 0.0
    cnt = vtri_ptr[v + 1] - vtri_ptr[v]
    for j in range(vtri_ptr[v], vtri_ptr[v + 1]):
        s += _quartic_eval(quart, vtri_idx[j], t1, t2)
    return s / cnt


@njit(cache=True)
def segment_density_numba(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau):
    n = pts.shape[0]
    dens = np.zeros(n)
    tids = np.empty(n, dtype=np.int64)
    b = np.empty(3)
    t = 0
    for i in range(n):
        t_new = _locate_one(xy, tri, nbr, pts[i, 0], pts[i, 1], t, b)
        tids[i] = t_new
        if t_new < 0:
            dens[i] = np.nan
            continue
        t = t_new
        dens[i] = _point_density(xy, tri, nbr, vtri_ptr, vtri_idx, quart, t, pts[i, 0], pts[i, 1],
                                 tau[i, 0], tau[i, 1])
    return dens, tids


def segment_density_numpy(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau):
    tids, _ = locate_numpy(xy, tri, nbr, pts)
    n = pts.shape[0]
    dens = np.full(n, np.nan)
    ok = tids >= 0
    if not ok.any():
        return dens, tids
    idx = np.flatnonzero(ok)
    t = tids[idx]
    dist, _ = _edge_distances_numpy(xy, tri, t, pts[idx])
    zero = dist <= LOCATE_TOL
    nz = zero.sum(axis=1)

    def qeval(tt, tv):
        t1, t2 = tv[:, 0], tv[:, 1]
        a, b = t1 * t1, t2 * t2
        q = quart[tt]
        return q[:, 0] * a * a + q[:, 1] * a * t1 * t2 + q[:, 2] * a * b + q[:, 3] * t1 * t2 * b + q[:, 4] * b * b

    tv = tau[idx]
    val = qeval(t, tv)
    edge = np.flatnonzero(nz == 1)
    if edge.size:
        kz = np.argmax(zero[edge], axis=1)
        other = nbr[t[edge], kz]
        has = other >= 0
        e = edge[has]
        lo = np.minimum(t[e], other[has])
        hi = np.maximum(t[e], other[has])
        val[e] = 0.5 * (qeval(lo, tv[e]) + qeval(hi, tv[e]))
    for j in np.flatnonzero(nz >= 2):
        keep = np.flatnonzero(~zero[j])
        v = tri[t[j], keep[-1]] if keep.size else tri[t[j], 0]
        inc = vtri_idx[vtri_ptr[v]:vtri_ptr[v + 1]]
        s = 0.0
        for tt in inc:
            s += qeval(np.array([tt]), tv[j:j + 1])[0]
        val[j] = s / inc.size
    dens[idx] = val
    return dens, tids


def segment_density(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau):
    pts = np.ascontiguousarray(pts, dtype=float)
    tau = np.ascontiguousarray(tau, dtype=float)
    if USE_NUMBA:
        return segment_density_numba(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau)
    return segment_density_numpy(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau)


def quadrature_count(length, step):
    """Number of composite midpoint cells on a straight piece."""
    return max(1, int(math.ceil(length / step - 1e-9)))


@njit(cache=True)
def _ceil_count(length, step):
    n = int(math.ceil(length / step - 1e-9))
    return max(1, n)


@njit(cache=True, parallel=True)
def scan_pairs_numba(xy, tri, nbr, vtri_ptr, vtri_idx, quart, cand, pairs, step):
    npair = pairs.shape[0]
    vals = np.zeros(npair)
    ok = np.ones(npair, dtype=np.bool_)
    for p in prange(npair):
        i, j = pairs[p, 0], pairs[p, 1]
        ax, ay = cand[i, 0], cand[i, 1]
        dx, dy = cand[j, 0] - ax, cand[j, 1] - ay
        L = math.hypot(dx, dy)
        t1, t2 = dx / L, dy / L
        nq = _ceil_count(L, step)
        w = L / nq
        b = np.empty(3)
        t = 0
        acc = 0.0
        for q in range(nq):
            s = (q + 0.5) / nq
            px, py = ax + s * dx, ay + s * dy
            t_new = _locate_one(xy, tri, nbr, px, py, t, b)
            if t_new < 0:
                ok[p] = False
                break
            t = t_new
            acc += w * _point_density(xy, tri, nbr, vtri_ptr, vtri_idx, quart, t, px, py, t1, t2)
        vals[p] = acc if ok[p] else np.nan
    return vals, ok


def scan_pairs_numpy(xy, tri, nbr, vtri_ptr, vtri_idx, quart, cand, pairs, step):
    a = cand[pairs[:, 0]]
    d = cand[pairs[:, 1]] - a
    L = np.hypot(d[:, 0], d[:, 1])
    tau = d / L[:, None]
    nq = np.maximum(1, np.ceil(L / step - 1e-9).astype(np.int64))
    owner = np.repeat(np.arange(len(pairs)), nq)
    start = np.concatenate([[0], np.cumsum(nq)[:-1]])
    local = np.arange(owner.size) - start[owner]
    s = (local + 0.5) / nq[owner]
    pts = a[owner] + s[:, None] * d[owner]
    dens, _ = segment_density_numpy(xy, tri, nbr, vtri_ptr, vtri_idx, quart, pts, tau[owner])
    contrib = dens * (L / nq)[owner]
    vals = np.zeros(len(pairs))
    ok = np.ones(len(pairs), dtype=bool)
    bad = ~np.isfinite(contrib)
    ok[np.unique(owner[bad])] = False
    for p in range(len(pairs)):
        if ok[p]:
            acc = 0.0
            for c in contrib[start[p]:start[p] + nq[p]]:
                acc += c
            vals[p] = acc
    vals[~ok] = np.nan
    return vals, ok


def scan_pairs(xy, tri, nbr, vtri_ptr, vtri_idx, quart, cand, pairs, step):
    cand = np.ascontiguousarray(cand, dtype=float)
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    if USE_NUMBA:
        return scan_pairs_numba(xy, tri, nbr, vtri_ptr, vtri_idx, quart, cand, pairs, float(step))
    return scan_pairs_numpy(xy, tri, nbr, vtri_ptr, vtri_idx, quart, cand, pairs, float(step))


# ---------------------------------------------------------------------------
# distances to a set of segments (tube assignment, redistancing)
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def segment_distance_numba(pts, sa, sb):
    n = pts.shape[0]
    m = sa.shape[0]
    out = np.full(n, np.inf)
    for i in prange(n):
        px, py = pts[i, 0], pts[i, 1]
        best = np.inf
        for k in range(m):
            dx, dy = sb[k, 0] - sa[k, 0], sb[k, 1] - sa[k, 1]
            ll = dx * dx + dy * dy
            s = 0.0
            if ll > 0.0:
                s = ((px - sa[k, 0]) * dx + (py - sa[k, 1]) * dy) / ll
                s = min(1.0, max(0.0, s))
            qx = sa[k, 0] + s * dx - px
            qy = sa[k, 1] + s * dy - py
            dd = qx * qx + qy * qy
            if dd < best:
                best = dd
        out[i] = math.sqrt(best)
    return out


def segment_distance_numpy(pts, sa, sb, chunk=2048):
    out = np.full(pts.shape[0], np.inf)
    if sa.shape[0] == 0:
        return out
    d = sb - sa
    ll = (d * d).sum(axis=1)
    safe = np.where(ll > 0.0, ll, 1.0)
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk, None, :]
        s = ((p - sa[None]) * d[None]).sum(axis=2) / safe[None]
        s = np.where(ll[None] > 0.0, np.clip(s, 0.0, 1.0), 0.0)
        q = sa[None] + s[..., None] * d[None] - p
        out[lo:lo + chunk] = np.sqrt((q * q).sum(axis=2).min(axis=1))
    return out


def segment_distance(pts, sa, sb):
    """Euclidean distance from each point to the union of segments [sa_k, sb_k]."""
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 2)
    sa = np.ascontiguousarray(sa, dtype=float).reshape(-1, 2)
    sb = np.ascontiguousarray(sb, dtype=float).reshape(-1, 2)
    if sa.shape[0] == 0:
        return np.full(pts.shape[0], np.inf)
    if USE_NUMBA:
        return segment_distance_numba(pts, sa, sb)
    return segment_distance_numpy(pts, sa, sb)


# ---------------------------------------------------------------------------
# Godunov upwind gradient norm on axis-aligned vertex stencils
# ---------------------------------------------------------------------------

def upwind_norm_numpy(phi, stencil, spacing, speed):
    """|grad phi| for phi_t + speed |grad phi| = 0.

    ``stencil[i] = (-x, +x, -y, +y)`` neighbour indices (``-1`` if missing),
    ``spacing`` the matching distances.
    """
    has = stencil >= 0
    nb = np.where(has, stencil, 0)
    diff = np.where(has, (phi[nb] - phi[:, None]) / np.where(has, spacing, 1.0), 0.0)
    dmx, dpx, dmy, dpy = -diff[:, 0], diff[:, 1], -diff[:, 2], diff[:, 3]
    pos = np.sqrt(np.maximum(dmx, 0.0) ** 2 + np.minimum(dpx, 0.0) ** 2
                  + np.maximum(dmy, 0.0) ** 2 + np.minimum(dpy, 0.0) ** 2)
    neg = np.sqrt(np.minimum(dmx, 0.0) ** 2 + np.maximum(dpx, 0.0) ** 2
                  + np.minimum(dmy, 0.0) ** 2 + np.maximum(dpy, 0.0) ** 2)
    return np.where(speed > 0.0, pos, neg)


@njit(cache=True)
def upwind_norm_numba(phi, stencil, spacing, speed):
    n = phi.shape[0]
    out = np.empty(n)
    for i in range(n):
        d = np.zeros(4)
        for k in range(4):
            j = stencil[i, k]
            if j >= 0:
                d[k] = (phi[j] - phi[i]) / spacing[i, k]
        dmx, dpx, dmy, dpy = -d[0], d[1], -d[2], d[3]
        if speed[i] > 0.0:
            s = max(dmx, 0.0) ** 2 + min(dpx, 0.0) ** 2 + max(dmy, 0.0) ** 2 + min(dpy, 0.0) ** 2
        else:
            s = min(dmx, 0.0) ** 2 + max(dpx, 0.0) ** 2 + min(dmy, 0.0) ** 2 + max(dpy, 0.0) ** 2
        out[i] = math.sqrt(s)
    return out


def upwind_norm(phi, stencil, spacing, speed):
    phi = np.ascontiguousarray(phi, dtype=float)
    speed = np.ascontiguousarray(speed, dtype=float)
    if USE_NUMBA:
        return upwind_norm_numba(phi, stencil, spacing, speed)
    return upwind_norm_numpy(phi, stencil, spacing, speed)
