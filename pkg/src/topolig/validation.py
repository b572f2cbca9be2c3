"""Finite-difference oracle for the ligament expansion and the rho-denominator experiment."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .elasticity import solve_adjoint, solve_perturbed, solve_state
from .functionals import evaluate
from .ligament import RHO_CHOICES, segment_derivative

logger = logging.getLogger("topolig")

INCONCLUSIVE = "inconclusive"


@dataclass
class FDEntry:
    eps: float
    value: float
    effective: float
    rel_error: float
    remainder: float
    under_resolved: bool = False


@dataclass
class FDReport:
    """Measured ``(J(eps) - J(0)) / eps`` against the predicted derivative."""
    segment: object
    j0: float
    predicted: float
    entries: list
    rho_choice: str = ""
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        eps = [e.eps for e in self.entries]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")

    @property
    def eps(self):
        return np.array([e.eps for e in self.entries])

    @property
    def errors(self):
        return np.array([e.rel_error for e in self.entries])

    @property
    def terminal_error(self):
        return float(self.entries[-1].rel_error) if self.entries else math.nan

    @property
    def monotone(self):
        err = self.errors
        return bool(np.all(np.diff(err) < 0.0))

    @property
    def sign_agreement(self):
        return bool(all(np.sign(e.effective) == np.sign(self.predicted) for e in self.entries))

    @property
    def slope(self):
        """Least-squares slope of log|remainder| against log eps."""
        r = np.array([abs(e.remainder) for e in self.entries])
        if len(r) < 2 or np.any(r <= 0):
            return math.nan
        return float(np.polyfit(np.log(self.eps), np.log(r), 1)[0])

    @property
    def pairwise_slopes(self):
        r = np.log(np.abs([e.remainder for e in self.entries]))
        le = np.log(self.eps)
        return (np.diff(r) / np.diff(le)).tolist()

    def passed(self, tolerance=0.15):
        return (self.monotone and self.sign_agreement and self.terminal_error <= tolerance
                and self.slope > 1.0)

    def to_dict(self, tolerance=0.15):
        seg = None if self.segment is None else self.segment.points.tolist()
        return {
            "segment": seg,
            "rho_choice": self.rho_choice,
            "j0": self.j0,
            "predicted": self.predicted,
            "entries": [vars(e) for e in self.entries],
            "monotone": self.monotone,
            "sign_agreement": self.sign_agreement,
            "terminal_error": self.terminal_error,
            "slope": self.slope,
            "pairwise_slopes": self.pairwise_slopes,
            "tolerance": tolerance,
            "passed": self.passed(tolerance),
            "warnings": list(self.warnings),
        }


def _single_mesh_rule(mesh, pair):
    return lambda eps: (mesh, pair)


def _fd_values(sigma, loads, spec, eps_list, mesh_rule, method, rtol):
    """Solve the unperturbed and tube problems; yields per-eps measurements."""
    base = {}
    out = []
    for eps in eps_list:
        mesh, pair = mesh_rule(eps)
        key = id(mesh)
        if key not in base:
            u0 = solve_state(mesh, pair.background, loads, method, rtol)
            p0 = solve_adjoint(mesh, pair.background, spec, u0, loads, method, rtol)
            base[key] = (u0, p0, evaluate(spec, u0, loads=loads))
        u0, p0, j0 = base[key]
        ue = solve_perturbed(mesh, pair, sigma, eps, loads, method, rtol, x0=u0.values)
        je = evaluate(spec, ue, loads=loads)
        out.append((eps, mesh, pair, u0, p0, j0, je, bool(ue.info.get("under_resolved"))))
        logger.info("fd: eps=%g J=%.12g (J0=%.12g)", eps, je, j0)
    return out


def _report(sigma, samples, rho_choice, quad_step):
    entries, warn = [], []
    preds = {}
    for eps, mesh, pair, u0, p0, j0, je, under in samples:
        key = id(mesh)
        if key not in preds:
            preds[key] = segment_derivative(sigma, u0, p0, pair, quad_step, rho_choice).value
        pred = preds[key]
        eff = (je - j0) / eps
        rel = abs(eff - pred) / abs(pred) if pred != 0.0 else abs(eff - pred)
        entries.append(FDEntry(float(eps), float(je), float(eff), float(rel), float(je - j0 - eps * pred), under))
        if under:
            warn.append(f"mesh under-resolved at eps={eps}: h={mesh.h:.4g} > eps/2")
    last = samples[-1]
    return FDReport(sigma, float(last[5]), float(preds[id(last[1])]), entries, rho_choice, warn)


def fd_check(sigma, pair, loads, spec, eps_list, mesh_rule=None, rho_choice=None, method="direct",
             rtol=1e-10, quad_step=None):
    """Compare the predicted ligament derivative with finite differences.

    ``mesh_rule`` is either a mesh (used for every eps, ``pair`` lives on
    it) or a callable ``eps -> (mesh, pair)`` giving per-eps meshes.
    """
    from .ligament import DEFAULT_RHO_CHOICE
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])) or not eps_list:
        raise ValueError("eps_list must be nonempty and strictly decreasing")
    if mesh_rule is None:
        raise ValueError("fd_check needs a mesh or a mesh rule")
    if not callable(mesh_rule):
        mesh_rule = _single_mesh_rule(mesh_rule, pair)
    samples = _fd_values(sigma, loads, spec, eps_list, mesh_rule, method, rtol)
    return _report(sigma, samples, rho_choice or DEFAULT_RHO_CHOICE, quad_step)


@dataclass
class RhoResolution:
    choice: str
    reports: dict
    margin: float = 0.02

    def to_dict(self):
        return {"choice": self.choice, "margin": self.margin,
                "reports": {k: r.to_dict() for k, r in self.reports.items()}}

    def table(self):
        lines = ["eps," + ",".join(f"err_{k}" for k in self.reports)]
        first = next(iter(self.reports.values()))
        for i, e in enumerate(first.entries):
            lines.append(f"{e.eps:g}," + ",".join(f"{r.entries[i].rel_error:.4f}" for r in self.reports.values()))
        return "\n".join(lines)


def resolve_rho(sigma, pair, loads, spec, eps_list, mesh_rule, method="direct", rtol=1e-10, margin=0.02,
                quad_step=None):
    """Pick the rho denominator whose prediction matches finite differences better.

    The tube solves are shared; only the prediction differs. Terminal
    errors closer than ``margin`` give an inconclusive result.
    """
    if not callable(mesh_rule):
        mesh_rule = _single_mesh_rule(mesh_rule, pair)
    samples = _fd_values(sigma, loads, spec, [float(e) for e in eps_list], mesh_rule, method, rtol)
    reports = {c: _report(sigma, samples, c, quad_step) for c in RHO_CHOICES}
    errs = {c: r.terminal_error for c, r in reports.items()}
    a, b = sorted(errs, key=errs.get)
    choice = INCONCLUSIVE if abs(errs[a] - errs[b]) <= margin else a
    logger.info("rho resolution: %s (terminal errors %s)", choice, errs)
    return RhoResolution(choice, reports, margin)


def findings_markdown(res, description=""):
    """Human-readable record of a rho resolution."""
    out = ["# rho denominator resolution", ""]
    if description:
        out += [description, ""]
    out += [f"Outcome: **{res.choice}** (inconclusive when terminal errors differ by at most {res.margin:.0%}).", ""]
    out += ["| eps | effective | " + " | ".join(f"pred {k} | err {k}" for k in res.reports) + " |",
            "|---|---|" + "---|---|" * len(res.reports)]
    first = next(iter(res.reports.values()))
    for i, e in enumerate(first.entries):
        cells = " | ".join(f"{r.predicted:.6g} | {r.entries[i].rel_error:.4f}" for r in res.reports.values())
        out.append(f"| {e.eps:g} | {e.effective:.6g} | {cells} |")
    return "\n".join(out) + "\n"
