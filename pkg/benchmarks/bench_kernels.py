"""Numba kernels against their numpy fallbacks on a cantilever-sized problem.

Usage: python3 benchmarks/bench_kernels.py [--nx 128] [--repeat 3] [--json out.json]

Each kernel is called once to trigger compilation, then timed with the
best of ``--repeat`` runs. The max abs difference between the two
backends is printed next to the timings.
"""
import argparse
import itertools
import json
import time

import numpy as np
import scipy.sparse as sp

from topolig import kernels
from topolig.elasticity import LoadSpec, solve_adjoint, solve_state, stiffness_matrix
from topolig.functionals import FunctionalSpec
from topolig.levelset import perforated
from topolig.ligament import contour_points, element_quartics, quadrature_step, thin_points
from topolig.material import LameField, MaterialPair, ersatz_field
from topolig.mesh import BoundaryTag, box_predicate, build_structured, tag_boundary


def best_of(fn, repeat):
    out = fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def setup(nx):
    m = build_structured(2.0, 1.0, nx, nx // 2)
    m = tag_boundary(m, [(box_predicate(0, 0, 0, 1), BoundaryTag.GAMMA_D),
                         (box_predicate(2, 2, 0.45, 0.55), BoundaryTag.GAMMA_N)])
    centers = [(x, y) for x in (0.2, 0.6, 1.0, 1.4, 1.8) for y in (0.2, 0.5, 0.8)]
    phi = perforated(m, centers, 0.08)
    bg = ersatz_field(phi, (1.0, 1.0), 1e-3)
    loads = LoadSpec(traction=(0.0, -1.0))
    u0 = solve_state(m, bg, loads, method="direct")
    p0 = solve_adjoint(m, bg, FunctionalSpec.compliance(), u0, loads, method="direct")
    quart = element_quartics(u0, p0, MaterialPair(bg, LameField.uniform(m, 1.0, 1.0)))
    return m, phi, bg, quart


def _located(m, tri, bary):
    # reconstructed positions; triangle ids may differ for points on edges
    return (m.vertices[m.triangles[tri]] * bary[..., None]).sum(axis=1)


def cases(m, phi, bg, quart):
    rng = np.random.default_rng(0)
    em = bg.on_elements(m)
    K = stiffness_matrix(m, LameField.uniform(m, 1.0, 1.0))
    A = (K + 1e-2 * sp.identity(K.shape[0])).tocsr()
    b = rng.normal(size=A.shape[0])
    x0 = np.zeros_like(b)
    pts = rng.uniform([0, 0], [2, 1], size=(20000, 2))
    vptr, vidx = m.vertex_triangles
    cand = thin_points(contour_points(phi), 4 * m.h)[:120]
    pairs = np.array(list(itertools.combinations(range(len(cand)), 2)), dtype=np.int64)
    step = quadrature_step(m, None)
    sa, sb = pts[:400], pts[400:800]
    st, spc = m.axis_stencil
    vel = rng.normal(size=m.n_vertices)
    return {
        "element_stiffness": lambda be: getattr(kernels, f"element_stiffness_{be}")(
            m.vertices, m.triangles, em.lam, em.mu),
        "pcg": lambda be: getattr(kernels, f"pcg_{be}")(A, b, x0, 1e-8, 20000)[0],
        "locate": lambda be: _located(m, *getattr(kernels, f"locate_{be}")(m.vertices, m.triangles,
                                                                              m.cell_neighbors, pts, 0)),
        "scan_pairs": lambda be: getattr(kernels, f"scan_pairs_{be}")(
            m.vertices, m.triangles, m.cell_neighbors, vptr, vidx, quart, cand, pairs, step)[0],
        "segment_distance": lambda be: getattr(kernels, f"segment_distance_{be}")(m.vertices, sa, sb),
        "upwind_norm": lambda be: getattr(kernels, f"upwind_norm_{be}")(phi.phi, st, spc, vel),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write the timings here")
    args = ap.parse_args(argv)

    m, phi, bg, quart = setup(args.nx)
    print(f"mesh {args.nx}x{args.nx // 2}: {m.n_vertices} vertices, {m.n_triangles} triangles")
    print(f"{'kernel':<18} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max diff':>10}")
    rows = []
    for name, fn in cases(m, phi, bg, quart).items():
        t_np, r_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb, r_nb = best_of(lambda: fn("numba"), args.repeat)
        diff = float(np.nanmax(np.abs(np.asarray(r_np) - np.asarray(r_nb))))
        rows.append({"kernel": name, "numpy": t_np, "numba": t_nb, "speedup": t_np / t_nb, "max_diff": diff})
        print(f"{name:<18} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"nx": args.nx, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
