"""Command-line front end: ``topolig {solve,scan,optimize,mast-init,validate}``."""
import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, io, problem
from ._backend import BACKEND, configure_logging, set_threads
from .elasticity import solve_adjoint, solve_state
from .errors import TopoligError
from .functionals import FunctionalSpec, Kind, compliance, evaluate, volume
from .ligament import contour_points, scan_segments, thin_points
from .material import LameField, MaterialPair
from .mesh import locate_points
from .optimizer import run_descent, run_greedy_init
from .validation import INCONCLUSIVE, fd_check, findings_markdown, resolve_rho

logger = logging.getLogger("topolig")

HISTORY_HEADER = ["iteration", "objective", "constraint", "volume", "compliance", "event"]
BAR_HEADER = ["iteration", "z1x", "z1y", "z2x", "z2y", "jprime", "eps", "compliance_before", "compliance_after"]
SCAN_HEADER = ["z1x", "z1y", "z2x", "z2y", "length", "Jprime", "flag"]


def _outdir(cfg):
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report(out, cfg, command, payload, t0):
    data = {"command": command, "version": __version__, "backend": BACKEND, "config": cfg,
            "elapsed_seconds": time.perf_counter() - t0}
    data.update(payload)
    io.write_json(out / "report.json", data)


def _state(cfg):
    mesh = problem.build_mesh(cfg)
    loads = problem.build_loads(cfg)
    phi = problem.initial_level_set(cfg, mesh)
    bg = problem.background(cfg, mesh, phi)
    method, rtol = cfg["solver"]["method"], cfg["solver"]["rtol"]
    u0 = solve_state(mesh, bg, loads, method, rtol)
    obj, _ = problem.functionals(cfg, mesh)
    # a volume objective has no state dependence; report the compliance adjoint instead
    adj = obj if obj.kind is not Kind.VOLUME else FunctionalSpec.compliance()
    p0 = solve_adjoint(mesh, bg, adj, u0, loads, method, rtol)
    return mesh, loads, phi, bg, u0, p0, adj


def cmd_solve(cfg):
    t0 = time.perf_counter()
    out = _outdir(cfg)
    mesh, loads, phi, bg, u0, p0, adj = _state(cfg)
    comp = compliance(u0, loads)
    vol = volume(phi, problem._auto(cfg["material"]["transition_width"]))
    obj = evaluate(adj, u0, phi, loads)
    io.write_vtk_mesh(out / "u0.vtk", mesh, {"u0": u0.values, "phi": phi.phi})
    io.write_vtk_mesh(out / "p0.vtk", mesh, {"p0": p0.values})
    io.write_csv(out / "solve.csv", ["compliance", "volume", "objective"], [[comp, vol, obj]])
    _report(out, cfg, "solve", {"compliance": comp, "volume": vol, "objective": obj,
                                "adjoint_functional": adj.kind.value,
                                "state_solver": u0.info, "adjoint_solver": p0.info,
                                "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles, "h": mesh.h}, t0)
    print(f"compliance {comp:.17g}")
    return 0


def _scan_candidates(cfg, phi):
    lig = cfg["ligament"]
    if lig["candidates"] == "points":
        return np.asarray(lig["points"], dtype=float).reshape(-1, 2)
    spacing = lig["candidate_spacing"] or 4.0 * phi.mesh.h
    pts = thin_points(contour_points(phi), spacing)
    while len(pts) > lig["max_candidates"]:
        spacing *= 1.25
        pts = thin_points(contour_points(phi), spacing)
    return pts


def cmd_scan(cfg):
    t0 = time.perf_counter()
    out = _outdir(cfg)
    mesh, loads, phi, bg, u0, p0, adj = _state(cfg)
    pair = MaterialPair(bg, LameField.uniform(mesh, *problem.solid(cfg)))
    lig = cfg["ligament"]
    cand = _scan_candidates(cfg, phi)
    eps_display = lig["eps_display"] or lig["eps_insert"] or 3.0 * mesh.h
    reports = scan_segments(cand, u0, p0, pair, eps_display, problem._auto(lig["quad_step"]), lig["rho_choice"])
    rows = [[r.extra["z1"][0], r.extra["z1"][1], r.extra["z2"][0], r.extra["z2"][1], r.extra["length"],
             r.value, r.flag] for r in reports]
    io.write_csv(out / "scan.csv", SCAN_HEADER, rows)
    top = [r for r in reports if r.flag in ("ok", "non_improving")][:lig["top_k"]]
    io.write_vtk_polylines(out / "top_bars.vtk", [r.segment.points for r in top], [r.value for r in top])
    best = top[0] if top else None
    _report(out, cfg, "scan", {
        "n_candidates": int(len(cand)), "n_pairs": len(reports),
        "best": None if best is None else {"z1": best.extra["z1"], "z2": best.extra["z2"], "Jprime": best.value},
        "flags": {f: sum(r.flag == f for r in reports) for f in ("ok", "non_improving", "outside", "degenerate")},
    }, t0)
    return 0


def _history_rows(history):
    return [[r.iteration, r.objective, r.constraint, r.volume, r.compliance, r.event] for r in history]


def _bar_rows(bars):
    return [[b.iteration, b.z1[0], b.z1[1], b.z2[0], b.z2[1], b.jprime, b.eps, b.compliance_before,
             b.compliance_after] for b in bars]


def bar_survival(phi, bars, samples=21):
    """Fraction of sample points on each inserted bar that are still solid."""
    mesh = phi.mesh
    out = []
    for b in bars:
        s = np.linspace(0.0, 1.0, samples)[:, None]
        pts = b.z1 + s * (b.z2 - b.z1)
        tids, bary = locate_points(mesh, pts)
        inside = tids >= 0
        vals = np.full(len(pts), np.inf)
        vals[inside] = (phi.phi[mesh.triangles[tids[inside]]] * bary[inside]).sum(axis=1)
        out.append(float(np.mean(vals < 0.0)))
    return out


def _snapshot_cb(out, every):
    if every <= 0:
        return None

    def cb(it, phi, rec):
        if (it + 1) % every == 0:
            io.write_vtk_mesh(out / f"phi_{it + 1:04d}.vtk", phi.mesh, {"phi": phi.phi})
    return cb


def _run_payload(res, final_phi):
    surv = bar_survival(final_phi, res.bars)
    last = res.history[-1] if res.history else None
    return {
        "termination": res.reason, "timings": res.timings, "iterations": len(res.history),
        "final": None if last is None else {"compliance": last.compliance, "volume": last.volume,
                                            "objective": last.objective, "constraint": last.constraint},
        "bars_inserted": len(res.bars),
        "bar_survival": {"per_bar": surv, "surviving": int(sum(s >= 0.5 for s in surv))},
    }


def cmd_optimize(cfg):
    t0 = time.perf_counter()
    out = _outdir(cfg)
    ocfg = problem.optim_config(cfg)
    phi0 = problem.initial_level_set(cfg, ocfg.mesh)
    res = run_descent(ocfg, phi0, callback=_snapshot_cb(out, cfg["optimizer"]["snapshot_every"]))
    io.write_csv(out / "history.csv", HISTORY_HEADER, _history_rows(res.history))
    io.write_csv(out / "bars.csv", BAR_HEADER, _bar_rows(res.bars))
    io.write_vtk_mesh(out / "phi_final.vtk", ocfg.mesh, {"phi": res.phi.phi})
    _report(out, cfg, "optimize", _run_payload(res, res.phi), t0)
    return 0


def cmd_mast_init(cfg):
    t0 = time.perf_counter()
    out = _outdir(cfg)
    gr = cfg["greedy"]
    ocfg = problem.optim_config(cfg)
    anchors = np.asarray(gr["anchors"], dtype=float).reshape(-1, 2)
    stage1 = run_greedy_init(ocfg, anchors, [tuple(b) for b in gr["strips"]])
    io.write_csv(out / "greedy_history.csv", HISTORY_HEADER, _history_rows(stage1.history))
    io.write_csv(out / "bars.csv", BAR_HEADER, _bar_rows(stage1.bars))
    io.write_vtk_mesh(out / "phi_stage1.vtk", ocfg.mesh, {"phi": stage1.phi.phi})
    # loaded and clamped strips stay solid during the descent stage
    frozen = problem.boxes_level_set(ocfg.mesh, gr["strips"]) if gr["strips"] else None
    if ocfg.frozen is not None:
        frozen = ocfg.frozen if frozen is None else np.minimum(frozen, ocfg.frozen)
    ocfg2 = replace(ocfg, max_iterations=gr["stage2_iterations"], frozen=frozen)
    stage2 = run_descent(ocfg2, stage1.phi, callback=_snapshot_cb(out, cfg["optimizer"]["snapshot_every"]))
    io.write_csv(out / "history.csv", HISTORY_HEADER, _history_rows(stage2.history))
    io.write_vtk_mesh(out / "phi_final.vtk", ocfg.mesh, {"phi": stage2.phi.phi})
    c1 = stage1.history[-1].compliance
    c2 = stage2.history[-1].compliance if stage2.history else c1
    target = ocfg.constraint.target if ocfg.constraint.kind is Kind.COMPLIANCE else None
    _report(out, cfg, "mast-init", {
        "stage1": _run_payload(stage1, stage2.phi), "stage2": _run_payload(stage2, stage2.phi),
        "compliance_stage1": c1, "compliance_stage2": c2, "compliance_target": target,
    }, t0)
    return 0


def cmd_validate(cfg):
    t0 = time.perf_counter()
    out = _outdir(cfg)
    v = cfg["validation"]
    mesh = problem.build_mesh(cfg)
    loads = problem.build_loads(cfg)
    pair = problem.validation_pair(cfg, mesh)
    sigma = problem.validation_segment(cfg)
    obj, _ = problem.functionals(cfg, mesh)
    quad = problem._auto(cfg["ligament"]["quad_step"])
    if v["mode"] == "fd":
        rep = fd_check(sigma, pair, loads, obj, v["eps_list"], mesh, cfg["ligament"]["rho_choice"],
                       v["method"], cfg["solver"]["rtol"] if v["method"] == "pcg" else 1e-10, quad)
        reports = {cfg["ligament"]["rho_choice"]: rep}
        ok = rep.passed(v["tolerance"])
        payload = {"mode": "fd", "passed": ok, "fd": rep.to_dict(v["tolerance"])}
    else:
        res = resolve_rho(sigma, pair, loads, obj, v["eps_list"], mesh, v["method"], margin=v["margin"],
                          quad_step=quad)
        reports = res.reports
        ok = True
        payload = {"mode": "rho", "choice": res.choice, "inconclusive": res.choice == INCONCLUSIVE,
                   **res.to_dict()}
        (out / "findings.md").write_text(findings_markdown(res))
    io.write_json(out / "fd_report.json", payload)
    rows = []
    for choice, rep in reports.items():
        for e in rep.entries:
            rows.append([choice, e.eps, e.value, e.effective, rep.predicted, e.rel_error, e.remainder])
    io.write_csv(out / "fd_errors.csv",
                 ["rho_choice", "eps", "J_eps", "effective", "predicted", "rel_error", "remainder"], rows)
    _report(out, cfg, "validate", payload, t0)
    for choice, rep in reports.items():
        print(f"[{choice}] predicted {rep.predicted:.6g}; errors "
              + " ".join(f"{e.rel_error:.4f}" for e in rep.entries)
              + f"; slope {rep.slope:.3f}; monotone {rep.monotone}; signs {rep.sign_agreement}")
    if v["mode"] == "rho":
        print(f"rho choice: {payload['choice']}")
    return 0 if ok else 1


COMMANDS = {
    "solve": cmd_solve,
    "scan": cmd_scan,
    "optimize": cmd_optimize,
    "mast-init": cmd_mast_init,
    "validate": cmd_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="topolig", description="Topological ligament toolkit for 2D elasticity.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", "-c", type=Path, help="TOML run configuration (defaults if omitted)")
        s.add_argument("--out", "-o", type=Path, help="output directory (overrides config 'output')")
        s.add_argument("--threads", type=int, help="worker threads for parallel kernels")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        cfg = config_mod.load(args.config) if args.config else config_mod.resolve()
        if args.out is not None:
            cfg["output"] = str(args.out)
        if args.threads is not None:
            cfg["threads"] = args.threads
        set_threads(cfg["threads"])
        return COMMANDS[args.command](cfg)
    except TopoligError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
