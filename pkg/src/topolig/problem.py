"""Build meshes, loads, level sets and optimizer settings from a resolved config."""
import numpy as np

from . import config as config_mod
from . import levelset
from .elasticity import LoadSpec
from .functionals import FunctionalSpec
from .ligament import Segment
from .material import LameField, LevelSet, MaterialPair, ersatz_field
from .mesh import BoundaryTag, box_predicate, build_structured, build_union, tag_boundary
from .optimizer import OptimConfig


def _auto(value):
    return None if value == 0 else value


def build_mesh(cfg):
    g = cfg["geometry"]
    if g["kind"] == "box":
        mesh = build_structured(g["width"], g["height"], g["nx"], g["ny"])
    else:
        mesh = build_union([tuple(b) for b in g["boxes"]], g["h"])
    rules = [(box_predicate(x0, x1, y0, y1), BoundaryTag.GAMMA_D) for x0, y0, x1, y1 in cfg["boundary"]["gamma_d"]]
    rules += [(box_predicate(x0, x1, y0, y1), BoundaryTag.GAMMA_N) for x0, y0, x1, y1 in cfg["boundary"]["gamma_n"]]
    return tag_boundary(mesh, rules)


def build_loads(cfg):
    return LoadSpec(body_force=tuple(cfg["loads"]["body_force"]), traction=tuple(cfg["loads"]["traction"]))


def solid(cfg):
    return (cfg["material"]["lam"], cfg["material"]["mu"])


def boxes_level_set(mesh, boxes):
    """Signed distance to a union of boxes (negative inside)."""
    phi = np.full(mesh.n_vertices, np.inf)
    for x0, y0, x1, y1 in boxes:
        phi = np.minimum(phi, levelset.box_level_set(mesh, x0, y0, x1, y1).phi)
    return phi


def initial_level_set(cfg, mesh):
    s = cfg["shape"]
    if s["kind"] == "full":
        # a box one unit larger than D: solid everywhere, no interface
        (xmin, ymin), (xmax, ymax) = mesh.bounding_box()
        phi = LevelSet(boxes_level_set(mesh, [(xmin - 1, ymin - 1, xmax + 1, ymax + 1)]), mesh)
    elif s["kind"] == "holes":
        phi = levelset.perforated(mesh, s["hole_centers"], s["hole_radius"])
    else:
        phi = LevelSet(-boxes_level_set(mesh, s["void_boxes"]), mesh)
    if s["reinit"] and s["kind"] != "full":
        phi = levelset.reinitialize(phi)
    return phi


def frozen_level_set(cfg, mesh):
    boxes = cfg["shape"]["frozen_boxes"]
    return boxes_level_set(mesh, boxes) if boxes else None


def functionals(cfg, mesh):
    f = cfg["functional"]
    area = float(mesh.areas.sum())

    def make(name, role):
        if name == "compliance":
            return FunctionalSpec.compliance(target=f["compliance_target"] if role == "constraint" else None)
        if name == "volume":
            target = None
            if role == "constraint":
                target = f["volume_target"] if f["volume_target"] > 0 else f["volume_fraction"] * area
            return FunctionalSpec.volume(target=target, smoothing_width=_auto(cfg["material"]["transition_width"]))
        if name == "squared_norm":
            return FunctionalSpec.squared_norm()
        return None

    return make(f["objective"], "objective"), make(f["constraint"], "constraint")


def optim_config(cfg, mesh=None, **overrides):
    mesh = build_mesh(cfg) if mesh is None else mesh
    obj, con = functionals(cfg, mesh)
    if con is None:
        con = FunctionalSpec.volume(target=None)
    lig, opt, gr = cfg["ligament"], cfg["optimizer"], cfg["greedy"]
    cands = "contour" if lig["candidates"] == "contour" else np.asarray(lig["points"], dtype=float)
    kw = dict(
        mesh=mesh, loads=build_loads(cfg), objective=obj, constraint=con, solid=solid(cfg),
        eta=cfg["material"]["eta"], transition_width=_auto(cfg["material"]["transition_width"]),
        step=opt["step"], multiplier=opt["multiplier"], penalty=opt["penalty"],
        penalty_growth=opt["penalty_growth"], penalty_max=opt["penalty_max"],
        schedule=config_mod.schedule(cfg), eps_insert=_auto(lig["eps_insert"]), candidates=cands,
        candidate_spacing=_auto(lig["candidate_spacing"]), max_candidates=lig["max_candidates"],
        max_iterations=opt["max_iterations"], reinit_period=opt["reinit_period"],
        max_backtracks=opt["max_backtracks"], quad_step=_auto(lig["quad_step"]), rho_choice=lig["rho_choice"],
        solver=cfg["solver"]["method"], rtol=cfg["solver"]["rtol"], frozen=frozen_level_set(cfg, mesh),
        compliance_threshold=gr["threshold"], max_bars=gr["max_bars"], anchor_radius=_auto(gr["anchor_radius"]),
    )
    kw.update(overrides)
    return OptimConfig(**kw)


def background(cfg, mesh, phi=None):
    phi = initial_level_set(cfg, mesh) if phi is None else phi
    return ersatz_field(phi, solid(cfg), cfg["material"]["eta"], _auto(cfg["material"]["transition_width"]))


def validation_pair(cfg, mesh):
    """Background from the shape block and the tube material from ``validation.inclusion``.

    ``floor``: ``max(A0, contrast * eta * A)`` (ten times the ersatz void by
    default, no contrast inside solid); ``scaled``: ``contrast * A0``;
    ``solid``: ``A``; ``uniform``: the given inclusion Lame pair.
    """
    v = cfg["validation"]
    bg = background(cfg, mesh)
    lam, mu = solid(cfg)
    if v["inclusion"] == "floor":
        floor = v["contrast"] * cfg["material"]["eta"]
        inc = LameField(np.maximum(bg.lam, floor * lam), np.maximum(bg.mu, floor * mu))
    elif v["inclusion"] == "scaled":
        inc = bg.scaled(v["contrast"])
    elif v["inclusion"] == "solid":
        inc = LameField.uniform(mesh, lam, mu)
    else:
        inc = LameField.uniform(mesh, v["inclusion_lam"], v["inclusion_mu"])
    return MaterialPair(bg, inc)


def validation_segment(cfg):
    return Segment(np.asarray(cfg["validation"]["segment"], dtype=float))
