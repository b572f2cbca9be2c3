"""Level-set descent with periodic ligament grafting, and greedy bar initialization."""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import levelset
from .elasticity import solve_adjoint, solve_state, strain
from .functionals import FunctionalSpec, Kind, compliance, volume
from .ligament import DEFAULT_RHO_CHOICE, Segment, contour_points, scan_segments, thin_points
from .material import LameField, LevelSet, MaterialPair, ersatz_field, hooke_apply

logger = logging.getLogger("topolig")

EVENTS = ("descent", "ligament_insert", "reinit")


def ligament_schedule(start, stop, every):
    """Iterations ``start, start+every, ..., <= stop``."""
    return tuple(range(int(start), int(stop) + 1, int(every)))


@dataclass
class OptimConfig:
    """Everything a descent or greedy run needs besides the initial level set.

    ``step`` is the interface displacement per iteration in units of the
    cell size. The constraint is driven to zero by an augmented Lagrangian
    ``J/J0 + l c + b/2 c^2`` with ``c`` the normalized constraint.
    """
    mesh: object
    loads: object
    objective: FunctionalSpec
    constraint: FunctionalSpec
    solid: tuple = (1.0, 1.0)
    eta: float = 1e-3
    transition_width: Optional[float] = None
    step: float = 0.5
    multiplier: float = 0.0
    penalty: float = 1.0
    penalty_growth: float = 1.05
    penalty_max: float = 1e3
    schedule: tuple = ()
    eps_insert: Optional[float] = None
    candidates: object = "contour"
    candidate_spacing: Optional[float] = None
    max_candidates: int = 120
    max_iterations: int = 200
    reinit_period: int = 5
    max_backtracks: int = 10
    quad_step: Optional[float] = None
    rho_choice: str = DEFAULT_RHO_CHOICE
    solver: str = "pcg"
    rtol: float = 1e-8
    frozen: Optional[np.ndarray] = None
    compliance_threshold: Optional[float] = None
    max_bars: int = 50
    anchor_radius: Optional[float] = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if list(self.schedule) != sorted(self.schedule):
            raise ValueError("ligament schedule must be sorted")
        if self.reinit_period < 1:
            raise ValueError("reinit_period must be >= 1")
        self.schedule = tuple(int(k) for k in self.schedule)

    @property
    def h(self):
        return self.mesh.h

    @property
    def insert_width(self):
        return 3.0 * self.h if self.eps_insert is None else self.eps_insert

    @property
    def domain_area(self):
        return float(self.mesh.areas.sum())


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    constraint: float
    volume: float
    compliance: float
    event: str = "descent"
    merit: float = math.nan
    jprime: float = math.nan

    def __post_init__(self):
        if self.event not in EVENTS:
            raise ValueError(f"unknown event {self.event!r}")
        for name in ("objective", "constraint", "volume", "compliance"):
            if not math.isfinite(getattr(self, name)):
                raise FloatingPointError(f"non-finite {name} at iteration {self.iteration}")


@dataclass
class BarEvent:
    iteration: int
    z1: np.ndarray
    z2: np.ndarray
    jprime: float
    eps: float
    compliance_before: float = math.nan
    compliance_after: float = math.nan


@dataclass
class RunResult:
    phi: LevelSet
    history: list
    bars: list = field(default_factory=list)
    reason: str = ""
    timings: dict = field(default_factory=dict)


def _energy_density(u, solid):
    e = strain(u)
    return (hooke_apply(solid[0], solid[1], e) * e).sum(axis=(1, 2))


def _to_vertices(mesh, per_elem):
    acc = np.zeros(mesh.n_vertices)
    w = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], per_elem * mesh.areas)
        np.add.at(w, mesh.triangles[:, k], mesh.areas)
    return acc / w


def shape_gradient(u0, phi, spec, solid=(1.0, 1.0)):
    """Descent velocity (positive = grow) for one functional.

    Compliance decreases where stiff material is added at high strain
    energy, so its velocity is ``+A e(u0):e(u0)``; volume gives ``-1``.
    """
    mesh = phi.mesh
    if spec.kind is Kind.VOLUME:
        return -np.ones(mesh.n_vertices)
    if spec.kind is Kind.COMPLIANCE:
        return _to_vertices(mesh, _energy_density(u0, solid))
    raise NotImplementedError("shape gradient only for compliance and volume")


class _Problem:
    """Evaluates objective/constraint on a level set, caching the last state."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.u = None
        self.nsolves = 0

    def material(self, phi):
        return ersatz_field(phi, self.cfg.solid, self.cfg.eta, self.cfg.transition_width)

    def state(self, phi, x0=None):
        u = solve_state(self.cfg.mesh, self.material(phi), self.cfg.loads, self.cfg.solver, self.cfg.rtol,
                        x0=x0 if x0 is not None else (None if self.u is None else self.u.values))
        self.nsolves += 1
        return u

    def values(self, phi, u):
        vol = volume(phi, self.cfg.transition_width)
        comp = compliance(u, self.cfg.loads)
        return comp, vol

    def functional(self, spec, comp, vol):
        val = comp if spec.kind is Kind.COMPLIANCE else vol
        if spec.target is not None:
            val = val - spec.target
        return val


def _freeze(phi, frozen):
    if frozen is None:
        return phi
    return phi.with_values(np.minimum(phi.phi, frozen))


def _candidates(cfg, phi):
    if isinstance(cfg.candidates, str):
        if cfg.candidates != "contour":
            raise ValueError(f"unknown candidate source {cfg.candidates!r}")
        pts = contour_points(phi)
        spacing = 4.0 * cfg.h if cfg.candidate_spacing is None else cfg.candidate_spacing
        pts = thin_points(pts, spacing)
        while len(pts) > cfg.max_candidates:
            spacing *= 1.25
            pts = thin_points(contour_points(phi), spacing)
        return pts
    return np.asarray(cfg.candidates, dtype=float).reshape(-1, 2)


def _scan(cfg, prob, phi, u, exclude=()):
    pair = MaterialPair(prob.material(phi), LameField.uniform(cfg.mesh, *cfg.solid))
    compl = FunctionalSpec.compliance()
    p = solve_adjoint(cfg.mesh, pair.background, compl, u, cfg.loads, cfg.solver, cfg.rtol)
    cand = _candidates(cfg, phi)
    if len(cand) < 2:
        return []
    reports = scan_segments(cand, u, p, pair, cfg.insert_width, cfg.quad_step, cfg.rho_choice)
    keys = set(exclude)
    return [r for r in reports if r.improving and _bar_key(r) not in keys]


def _bar_key(report):
    return tuple(np.round(np.concatenate([report.extra["z1"], report.extra["z2"]]), 12))


def run_descent(cfg, phi0, callback=None):
    """Augmented-Lagrangian level-set descent with optional ligament grafting.

    Returns a :class:`RunResult`; ``result.phi`` and ``result.history``
    are the final level set and the per-iteration records.
    """
    t0 = time.perf_counter()
    prob = _Problem(cfg)
    mesh = cfg.mesh
    area = cfg.domain_area
    phi = _freeze(phi0, cfg.frozen)
    history, bars = [], []
    if cfg.max_iterations <= 0:
        return RunResult(phi0, history, bars, "max_iterations", {"total": 0.0})

    obj, con = cfg.objective, cfg.constraint
    u = prob.state(phi)
    comp, vol = prob.values(phi, u)
    j0 = abs(prob.functional(obj, comp, vol)) or 1.0
    cscale = area if con.kind is Kind.VOLUME else (abs(con.target) if con.target else comp)
    lam, pen = cfg.multiplier, cfg.penalty

    def merit(c, v):
        jv = prob.functional(obj, c, v) / j0
        cv = prob.functional(con, c, v) / cscale
        return jv + lam * cv + 0.5 * pen * cv * cv, jv, cv

    schedule = set(cfg.schedule)
    since_reinit = 0
    reason = "max_iterations"
    for it in range(cfg.max_iterations):
        event = "descent"
        jprime = math.nan
        if it in schedule:
            ranked = _scan(cfg, prob, phi, u)
            if ranked:
                best = ranked[0]
                phi = _freeze(levelset.reinitialize(levelset.insert_ligament(phi, best.segment, cfg.insert_width)),
                              cfg.frozen)
                u = prob.state(phi)
                before = comp
                comp, vol = prob.values(phi, u)
                bars.append(BarEvent(it, best.extra["z1"], best.extra["z2"], best.value, cfg.insert_width,
                                     before, comp))
                event, jprime = "ligament_insert", best.value
                since_reinit = 0
                logger.info("iter %d: bar %s -> %s, J'=%.4g, C %.5g -> %.5g", it, best.extra["z1"],
                            best.extra["z2"], best.value, before, comp)

        m0, _, cv0 = merit(comp, vol)
        # descent velocity of the merit: g_J / J0 + (l + b c) g_C / scale
        vel = (shape_gradient(u, phi, obj, cfg.solid) / j0
               + (lam + pen * cv0) / cscale * shape_gradient(u, phi, con, cfg.solid))
        band = np.abs(phi.phi) < 3.0 * cfg.h
        vmax = np.abs(vel[band]).max() if band.any() else np.abs(vel).max()
        if vmax == 0.0:
            reason = "stationary"
            break
        vel = np.clip(vel / vmax, -1.0, 1.0)

        dt = cfg.step * cfg.h
        accepted = None
        for _ in range(cfg.max_backtracks + 1):
            trial = _freeze(levelset.advect(phi, vel, dt), cfg.frozen)
            ut = prob.state(trial, x0=u.values)
            ct, vt = prob.values(trial, ut)
            mt = merit(ct, vt)[0]
            accepted = (trial, ut, ct, vt, mt)
            if mt <= m0 + 1e-12 * abs(m0):
                break
            dt *= 0.5
        phi, u, comp, vol, mt = accepted

        since_reinit += 1
        if since_reinit >= cfg.reinit_period:
            phi = _freeze(levelset.reinitialize(phi), cfg.frozen)
            u = prob.state(phi)
            comp, vol = prob.values(phi, u)
            since_reinit = 0
            if event == "descent":
                event = "reinit"

        cv = prob.functional(con, comp, vol) / cscale
        lam = lam + pen * cv
        pen = min(pen * cfg.penalty_growth, cfg.penalty_max)
        rec = IterationRecord(it, prob.functional(obj, comp, vol), prob.functional(con, comp, vol), vol, comp,
                              event, merit(comp, vol)[0], jprime)
        history.append(rec)
        logger.debug("iter %d: C=%.6g V=%.6g merit=%.6g dt=%.3g", it, comp, vol, rec.merit, dt)
        if callback is not None:
            callback(it, phi, rec)
    return RunResult(phi, history, bars, reason,
                     {"total": time.perf_counter() - t0, "solves": prob.nsolves})


def anchor_level_set(mesh, anchors, radius, strips=()):
    """All-void level set except disks around anchors and solid boxes ``strips``."""
    x = mesh.vertices
    a = np.asarray(anchors, dtype=float).reshape(-1, 2)
    d = np.sqrt(((x[:, None, :] - a[None]) ** 2).sum(axis=2)).min(axis=1) - radius
    for box in strips:
        d = np.minimum(d, levelset.box_level_set(mesh, *box).phi)
    return LevelSet(d, mesh)


def run_greedy_init(cfg, anchors, strips=(), callback=None):
    """Grow a truss by inserting, one at a time, the best bar between anchors.

    Starts from void plus solid pads. A bar is kept only when the measured
    compliance drops; otherwise it is discarded and the next one is tried.
    Stops at ``cfg.compliance_threshold`` or when no improving bar is left.
    """
    t0 = time.perf_counter()
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    if len(anchors) == 0:
        raise ValueError("anchors must be nonempty")
    if cfg.compliance_threshold is None:
        raise ValueError("greedy init needs a compliance threshold")
    radius = 2.0 * cfg.h if cfg.anchor_radius is None else cfg.anchor_radius
    phi = anchor_level_set(cfg.mesh, anchors, radius, strips)
    frozen = phi.phi.copy()
    cfg_local = _with_candidates(cfg, anchors)
    prob = _Problem(cfg_local)
    u = prob.state(phi)
    comp, vol = prob.values(phi, u)
    history = [IterationRecord(0, comp, comp - cfg.compliance_threshold, vol, comp, "descent")]
    bars, discarded = [], set()
    reason = "threshold"
    step = 0
    while comp > cfg.compliance_threshold:
        if len(bars) >= cfg.max_bars:
            reason = "max_bars"
            break
        ranked = _scan(cfg_local, prob, phi, u, exclude=discarded)
        taken = False
        for rep in ranked:
            trial = levelset.insert_ligament(phi, rep.segment, cfg.insert_width)
            trial = trial.with_values(np.minimum(trial.phi, frozen))
            ut = prob.state(trial)
            ct, vt = prob.values(trial, ut)
            discarded.add(_bar_key(rep))
            if ct < comp:
                step += 1
                bars.append(BarEvent(step, rep.extra["z1"], rep.extra["z2"], rep.value, cfg.insert_width, comp, ct))
                logger.info("greedy %d: bar %s -> %s, J'=%.4g, C %.6g -> %.6g", step, rep.extra["z1"],
                            rep.extra["z2"], rep.value, comp, ct)
                phi, u, comp, vol = trial, ut, ct, vt
                rec = IterationRecord(step, comp, comp - cfg.compliance_threshold, vol, comp, "ligament_insert",
                                      jprime=rep.value)
                history.append(rec)
                if callback is not None:
                    callback(step, phi, rec)
                taken = True
                break
            logger.info("greedy: bar rejected (J'=%.4g, C %.6g -> %.6g)", rep.value, comp, ct)
        if not taken:
            reason = "exhausted"
            break
    return RunResult(phi, history, bars, reason, {"total": time.perf_counter() - t0, "solves": prob.nsolves})


def _with_candidates(cfg, pts):
    from dataclasses import replace
    return replace(cfg, candidates=np.asarray(pts, dtype=float))
