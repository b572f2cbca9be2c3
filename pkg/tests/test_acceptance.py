"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the terminal summary.
The workflow criteria (2, 7, 8, 9) run the shipped configs through the CLI.
"""
import contextlib
import itertools
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import cantilever_mesh, hole_level_set
from topolig import config
from topolig.cli import main
from topolig.elasticity import LoadSpec, assemble, solve_adjoint, solve_state, solve_system, stiffness_matrix
from topolig.functionals import FunctionalSpec
from topolig.io import read_csv
from topolig.kernels import element_stiffness
from topolig.ligament import (DEFAULT_RHO_CHOICE, Segment, polarization_apply, polarization_coeffs, quartic_coeffs,
                              scan_segments, segment_derivative)
from topolig.material import LameField, MaterialPair, ersatz_field
from topolig.mesh import BoundaryTag, TriMesh, box_predicate, build_structured, mirrored, tag_boundary
from topolig.validation import INCONCLUSIVE, fd_check

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@contextlib.contextmanager
def criterion(number, title):
    """Record PASS/FAIL for one criterion; a failing assertion still propagates."""
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"criterion {number:2d} FAIL  {title}"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"criterion {number:2d} PASS  {title}" + (f"  ({extra})" if extra else "")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def _cli(command, cfg_path, out, *extra):
    code = main([command, "--config", str(cfg_path), "--out", str(out), *extra])
    return code


def _rows(path):
    return read_csv(path)[1]


# 1 ---------------------------------------------------------------------------

def test_criterion_01_polarization_coefficients():
    with criterion(1, "polarization coefficients"):
        c = polarization_coeffs(1.0, 1.0, 1.0, 1.0)
        assert (c.alpha, c.beta, c.gamma, c.rho) == (0.0, 0.0, 0.0, 0.0)
        c = polarization_coeffs(1.0, 1.0, 3.0, 1.0)
        assert abs(c.alpha - 12.0 / 5.0) <= 1e-12 and (c.beta, c.gamma, c.rho) == (0.0, 0.0, 0.0)
        c = polarization_coeffs(1.0, 1.0, 2.0, 2.0)
        for got, want in zip((c.alpha, c.beta, c.gamma, c.rho), (1.0, 2.0, 8.0 / 3.0, 0.0)):
            assert abs(got - want) <= 1e-12


# 2 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_02_expansion_validation(tmp_path):
    with criterion(2, "finite-difference validation of the ligament derivative") as d:
        cfg = config.load(CONFIGS / "validation.toml")
        assert cfg["ligament"]["rho_choice"] == DEFAULT_RHO_CHOICE
        t0 = time.perf_counter()
        code = _cli("validate", CONFIGS / "validation.toml", tmp_path)
        elapsed = time.perf_counter() - t0
        rep = json.loads((tmp_path / "fd_report.json").read_text())["fd"]
        h = 2.0 / cfg["geometry"]["nx"]
        assert h <= min(cfg["validation"]["eps_list"]) / 2 + 1e-15
        assert rep["monotone"] and rep["sign_agreement"]
        assert rep["terminal_error"] <= 0.15
        assert rep["slope"] > 1.0
        assert code == 0
        assert elapsed <= 600
        d.update(terminal_error=f"{rep['terminal_error']:.4f}", slope=f"{rep['slope']:.3f}",
                 seconds=f"{elapsed:.0f}")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_zero_contrast(tip_load):
    with criterion(3, "zero contrast gives exactly zero sensitivity"):
        m = cantilever_mesh(64, 32)
        bg = ersatz_field(hole_level_set(m), (1.0, 1.0), 1e-3)
        pair = MaterialPair(bg, bg)
        spec = FunctionalSpec.compliance()
        seg = Segment.line((0.7, 0.5), (1.3, 0.5))
        u0 = solve_state(m, bg, tip_load, method="direct")
        p0 = solve_adjoint(m, bg, spec, u0, tip_load, method="direct")
        assert segment_derivative(seg, u0, p0, pair).value == 0.0
        rep = fd_check(seg, pair, tip_load, spec, [0.2, 0.1], m)
        assert rep.predicted == 0.0
        assert all(e.effective == 0.0 for e in rep.entries)


# 4 ---------------------------------------------------------------------------

def test_criterion_04_self_adjointness(tip_load):
    with criterion(4, "compliance adjoint equals minus the state") as d:
        m = cantilever_mesh(64, 32)
        bg = ersatz_field(hole_level_set(m), (1.0, 1.0), 1e-3)
        u0 = solve_state(m, bg, tip_load)
        p0 = solve_adjoint(m, bg, FunctionalSpec.compliance(), u0, tip_load)
        # same solver, negated load: cg is odd in the right-hand side, so this is exact
        r = np.linalg.norm(p0.values + u0.values) / np.linalg.norm(u0.values)
        assert r <= 1e-8
        # across solvers the identity holds to solver accuracy
        pd = solve_adjoint(m, bg, FunctionalSpec.compliance(), u0, tip_load, method="direct")
        u1 = solve_state(m, bg, tip_load, rtol=1e-12)
        r2 = np.linalg.norm(pd.values + u1.values) / np.linalg.norm(u1.values)
        assert r2 <= 1e-8
        d.update(same_solver=f"{r:.1e}", cross_solver=f"{r2:.1e}")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_fem_correctness(tip_load):
    with criterion(5, "patch test, work identity and rigid modes"):
        # patch test on an irregular mesh
        m = build_structured(1.0, 1.0, 6, 6)
        v = m.vertices.copy()
        inner = (v[:, 0] > 0) & (v[:, 0] < 1) & (v[:, 1] > 0) & (v[:, 1] < 1)
        v[inner] += np.random.default_rng(7).uniform(-0.04, 0.04, size=(inner.sum(), 2))
        m = TriMesh.from_arrays(v, m.triangles)
        B = np.array([[0.3, -0.7], [1.1, 0.2]])
        exact = (m.vertices @ B.T + np.array([0.05, -0.1])).ravel()
        K = stiffness_matrix(m, LameField.uniform(m, 2.0, 0.7))
        bv = np.unique(m.boundary_edges)
        cons = np.sort(np.concatenate([2 * bv, 2 * bv + 1]))
        x, _ = solve_system(K, np.zeros(2 * m.n_vertices), cons, exact[cons], method="direct")
        assert np.abs(x - exact).max() <= 1e-10
        # work identity
        c = cantilever_mesh(32, 16)
        mat = ersatz_field(hole_level_set(c), (1.0, 1.0), 1e-3)
        u = solve_state(c, mat, tip_load, method="direct")
        sys_ = assemble(c, mat, tip_load)
        work, energy = sys_.F @ u.flat, u.flat @ (sys_.K @ u.flat)
        assert abs(work - energy) <= 1e-10 * abs(work)
        # three rigid modes of an element stiffness
        xy = np.array([[0.1, 0.2], [1.3, 0.1], [0.4, 0.9]])
        ke = element_stiffness(xy, np.array([[0, 1, 2]]), np.array([0.7]), np.array([1.9]))[0]
        ev = np.linalg.eigvalsh(ke)
        assert np.sum(np.abs(ev) < 1e-10 * ev.max()) == 3
        for mode in (np.tile([1.0, 0.0], 3), np.tile([0.0, 1.0], 3), np.column_stack([-xy[:, 1], xy[:, 0]]).ravel()):
            assert np.linalg.norm(ke @ mode) <= 1e-12


# 6 ---------------------------------------------------------------------------

def _symmetric_state():
    """Cantilever on a mesh that is exactly symmetric about y = 1/2."""
    half = build_structured(2.0, 0.5, 48, 12)
    m = tag_boundary(mirrored(half, 0.5), [(box_predicate(0, 0, 0, 1), BoundaryTag.GAMMA_D),
                                           (box_predicate(2, 2, 0.4375, 0.5625), BoundaryTag.GAMMA_N)])
    bg = ersatz_field(hole_level_set(m, radius=0.2), (1.0, 1.0), 1e-3)
    loads = LoadSpec(traction=(0.0, -1.0))
    u0 = solve_state(m, bg, loads, method="direct")
    p0 = solve_adjoint(m, bg, FunctionalSpec.compliance(), u0, loads, method="direct")
    return m, u0, p0, MaterialPair(bg, LameField.uniform(m, 1.0, 1.0))


def _key(a, b):
    return tuple(sorted([tuple(np.round(a, 12)), tuple(np.round(b, 12))]))


def test_criterion_06_scan_properties():
    with criterion(6, "scan: brute force, reflection closure, quartic form") as d:
        m, u0, p0, pair = _symmetric_state()
        half = np.array([[0.3, 0.1], [0.3, 0.35], [0.75, 0.2], [1.0, 0.28], [1.25, 0.2], [1.7, 0.15], [1.7, 0.4]])
        mid = np.array([[0.5, 0.5], [1.5, 0.5]])
        cand = np.vstack([half, mid, half * [1, -1] + [0, 1]])
        reps = scan_segments(cand, u0, p0, pair)
        # brute force over every pair
        brute = [(segment_derivative(Segment.line(cand[i], cand[j]), u0, p0, pair).value, i, j)
                 for i, j in itertools.combinations(range(len(cand)), 2)]
        best = min(brute)
        top = reps[0]
        assert abs(top.value - best[0]) <= 1e-12 * abs(best[0])
        assert _key(top.extra["z1"], top.extra["z2"]) == _key(cand[best[1]], cand[best[2]])
        # minimizers (ties within 1e-8) are closed under y -> 1 - y
        vals = np.array([r.value for r in reps])
        tol = 1e-8 * abs(vals[0])
        minimizers = {_key(r.extra["z1"], r.extra["z2"]) for r in reps if r.value <= vals[0] + tol}
        refl = {_key(np.array(a) * [1, -1] + [0, 1], np.array(b) * [1, -1] + [0, 1]) for a, b in minimizers}
        assert refl == minimizers
        # the whole ranking is reflection-invariant
        by_key = {_key(r.extra["z1"], r.extra["z2"]): r.value for r in reps}
        worst = max(abs(v - by_key[_key(np.array(a) * [1, -1] + [0, 1], np.array(b) * [1, -1] + [0, 1])])
                    for (a, b), v in by_key.items())
        assert worst <= 1e-8 * np.abs(vals).max()
        # quartic form: unit-circle consistency and homogeneity
        rng = np.random.default_rng(2024)
        for _ in range(100):
            l0, m0, l1, m1 = rng.uniform(0.1, 5.0, 4)
            c = polarization_coeffs(l0, m0, l1, m1)
            eu, ep = (0.5 * (a + a.T) for a in rng.normal(size=(2, 2, 2)))
            q = quartic_coeffs(c, eu, ep)
            th = rng.uniform(0, 2 * np.pi)
            tau = np.array([np.cos(th), np.sin(th)])
            direct = (polarization_apply(c, tau, eu) * ep).sum()
            assert abs(q(tau) - direct) <= 1e-12 * max(1.0, abs(direct))
            assert abs(q(2 * tau) - 16 * q(tau)) <= 1e-12 * max(1.0, abs(q(tau)))
        d.update(minimizers=len(minimizers), pairs=len(reps))


# 7 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_cantilever_workflow(tmp_path):
    with criterion(7, "cantilever: ligaments do not worsen the final compliance") as d:
        t0 = time.perf_counter()
        plain, lig = tmp_path / "plain", tmp_path / "lig"
        assert _cli("optimize", CONFIGS / "cantilever.toml", plain) == 0
        assert _cli("optimize", CONFIGS / "cantilever_ligaments.toml", lig) == 0
        elapsed = time.perf_counter() - t0
        cfg = config.load(CONFIGS / "cantilever_ligaments.toml")
        assert (cfg["geometry"]["nx"], cfg["geometry"]["ny"]) == (128, 64)
        assert cfg["optimizer"]["max_iterations"] == 200
        assert config.schedule(cfg) == tuple(range(40, 101, 10))
        area = 2.0
        finals = {}
        for name, out in (("plain", plain), ("lig", lig)):
            rows = _rows(out / "history.csv")
            assert len(rows) == 200
            vol, comp = float(rows[-1][3]), float(rows[-1][4])
            assert abs(vol - 0.8 * area) <= 0.05 * area
            finals[name] = comp
        bars = _rows(lig / "bars.csv")
        assert bars and all(float(b[5]) < 0 for b in bars)
        assert finals["lig"] <= finals["plain"]
        assert elapsed <= 1800
        d.update(C_plain=f"{finals['plain']:.5f}", C_lig=f"{finals['lig']:.5f}", bars=len(bars),
                 seconds=f"{elapsed:.0f}")


# 8 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_mast_workflow(tmp_path):
    with criterion(8, "mast: greedy bars, then descent toward the compliance target") as d:
        t0 = time.perf_counter()
        assert _cli("mast-init", CONFIGS / "mast.toml", tmp_path) == 0
        elapsed = time.perf_counter() - t0
        cfg = config.load(CONFIGS / "mast.toml")
        rep = json.loads((tmp_path / "report.json").read_text())
        greedy = [float(r[4]) for r in _rows(tmp_path / "greedy_history.csv")]
        assert len(greedy) >= 2
        assert all(b < a for a, b in zip(greedy, greedy[1:]))
        reason = rep["stage1"]["termination"]
        assert reason in ("threshold", "exhausted")
        if reason == "threshold":
            assert greedy[-1] <= cfg["greedy"]["threshold"] < greedy[-2]
        target = cfg["functional"]["compliance_target"]
        stage2 = float(_rows(tmp_path / "history.csv")[-1][4])
        assert abs(stage2 - target) < abs(greedy[-1] - target)
        assert elapsed <= 1800
        d.update(bars=len(greedy) - 1, C_stage1=f"{greedy[-1]:.4f}", C_stage2=f"{stage2:.4f}", C_T=target,
                 seconds=f"{elapsed:.0f}")


# 9 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_09_rho_resolution(tmp_path):
    with criterion(9, "rho denominator resolved by finite differences") as d:
        cfg = config.load(CONFIGS / "rho.toml")
        assert cfg["validation"]["mode"] == "rho"
        # discriminating: mu1 lam0 != mu0 lam1, segment normal to the tension
        assert cfg["validation"]["inclusion_mu"] * cfg["material"]["lam"] \
            != cfg["material"]["mu"] * cfg["validation"]["inclusion_lam"]
        assert _cli("validate", CONFIGS / "rho.toml", tmp_path) == 0
        rep = json.loads((tmp_path / "fd_report.json").read_text())
        text = (tmp_path / "findings.md").read_text()
        assert set(rep["reports"]) == {"mu0", "mu1"}
        for r in rep["reports"].values():
            assert len(r["entries"]) == len(cfg["validation"]["eps_list"])
        assert rep["choice"] in ("mu0", "mu1", INCONCLUSIVE)
        assert rep["choice"] in text
        if rep["choice"] != INCONCLUSIVE:
            assert rep["choice"] == DEFAULT_RHO_CHOICE
        d.update(choice=rep["choice"],
                 err_mu0=f"{rep['reports']['mu0']['terminal_error']:.4f}",
                 err_mu1=f"{rep['reports']['mu1']['terminal_error']:.4f}")


# 10 --------------------------------------------------------------------------

DETERMINISM = """
seed = 7
[geometry]
nx = 64
ny = 32
[shape]
kind = "holes"
hole_centers = [[0.5, 0.3], [0.5, 0.7], [1.0, 0.5], [1.5, 0.3], [1.5, 0.7]]
hole_radius = 0.1
[optimizer]
max_iterations = 12
[ligament]
schedule = [4, 8]
"""


def _run_sub(command, cfg, out, threads):
    env = dict(os.environ, NUMBA_NUM_THREADS="2")
    r = subprocess.run([sys.executable, "-m", "topolig.cli", command, "--config", str(cfg), "--out", str(out),
                        "--threads", str(threads)], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    with criterion(10, "byte-identical scan.csv and history.csv across runs and thread counts"):
        cfg = tmp_path / "det.toml"
        cfg.write_text(DETERMINISM)
        runs = [("a", 1), ("b", 1), ("c", 2)]
        for name, threads in runs:
            _run_sub("scan", cfg, tmp_path / name, threads)
            _run_sub("optimize", cfg, tmp_path / name, threads)
        for f in ("scan.csv", "history.csv", "bars.csv"):
            ref = (tmp_path / "a" / f).read_bytes()
            assert len(ref.splitlines()) > 1
            for name, _ in runs[1:]:
                assert (tmp_path / name / f).read_bytes() == ref, f
