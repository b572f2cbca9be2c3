"""Run configuration: TOML with dotted sections, strict keys, documented defaults.

Boxes are always written ``[x0, y0, x1, y1]``. A value of ``0`` for an
optional length means "automatic" (see docs/config.md).
"""
import copy
import json
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS = {
    "seed": 0,
    "threads": 0,
    "output": "runs/out",
    "geometry": {
        "kind": "box",
        "width": 2.0,
        "height": 1.0,
        "nx": 128,
        "ny": 64,
        "boxes": [],
        "h": 0.0,
    },
    "boundary": {
        "gamma_d": [[0.0, 0.0, 0.0, 1.0]],
        "gamma_n": [[2.0, 0.45, 2.0, 0.55]],
    },
    "material": {
        "lam": 1.0,
        "mu": 1.0,
        "eta": 1e-3,
        "transition_width": 0.0,
    },
    "loads": {
        "traction": [0.0, -1.0],
        "body_force": [0.0, 0.0],
    },
    "shape": {
        "kind": "full",
        "hole_centers": [],
        "hole_radius": 0.08,
        "void_boxes": [],
        "frozen_boxes": [],
        "reinit": True,
    },
    "functional": {
        "objective": "compliance",
        "constraint": "volume",
        "volume_fraction": 0.8,
        "volume_target": 0.0,
        "compliance_target": 0.0,
    },
    "ligament": {
        "candidates": "contour",
        "points": [],
        "candidate_spacing": 0.0,
        "max_candidates": 120,
        "eps_insert": 0.0,
        "eps_display": 0.0,
        "schedule": [],
        "schedule_start": 0,
        "schedule_stop": -1,
        "schedule_every": 10,
        "quad_step": 0.0,
        "rho_choice": "mu1",
        "top_k": 5,
    },
    "optimizer": {
        "max_iterations": 200,
        "step": 0.5,
        "multiplier": 0.0,
        "penalty": 1.0,
        "penalty_growth": 1.05,
        "penalty_max": 1000.0,
        "reinit_period": 5,
        "max_backtracks": 10,
        "snapshot_every": 0,
    },
    "greedy": {
        "anchors": [],
        "threshold": 0.2,
        "anchor_radius": 0.0,
        "strips": [],
        "max_bars": 50,
        "stage2_iterations": 100,
    },
    "solver": {
        "method": "pcg",
        "rtol": 1e-8,
    },
    "validation": {
        "mode": "fd",
        "segment": [[0.3, 0.725], [1.7, 0.725]],
        "eps_list": [0.08, 0.04, 0.02, 0.01],
        "inclusion": "floor",
        "contrast": 10.0,
        "inclusion_lam": 1.0,
        "inclusion_mu": 1.0,
        "method": "direct",
        "tolerance": 0.15,
        "margin": 0.02,
    },
}

CHOICES = {
    ("geometry", "kind"): ("box", "union"),
    ("shape", "kind"): ("full", "holes", "void_boxes"),
    ("functional", "objective"): ("compliance", "volume", "squared_norm"),
    ("functional", "constraint"): ("volume", "compliance", "none"),
    ("ligament", "candidates"): ("contour", "points"),
    ("ligament", "rho_choice"): ("mu0", "mu1"),
    ("solver", "method"): ("pcg", "direct"),
    ("validation", "mode"): ("fd", "rho"),
    ("validation", "inclusion"): ("floor", "scaled", "solid", "uniform"),
    ("validation", "method"): ("pcg", "direct"),
}


def _merge(base, new, path=""):
    for key, val in new.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a section")
            _merge(ref, val, where + ".")
            continue
        if isinstance(ref, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{where!r} must be true or false")
        elif isinstance(ref, int) and not isinstance(ref, bool):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{where!r} must be an integer")
        elif isinstance(ref, float):
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{where!r} must be a number")
            val = float(val)
        elif isinstance(ref, str):
            if not isinstance(val, str):
                raise ConfigError(f"{where!r} must be a string")
        elif isinstance(ref, list):
            if not isinstance(val, list):
                raise ConfigError(f"{where!r} must be a list")
        base[key] = val


def _check(cfg):
    for (sec, key), allowed in CHOICES.items():
        if cfg[sec][key] not in allowed:
            raise ConfigError(f"{sec}.{key} must be one of {allowed}, got {cfg[sec][key]!r}")
    g = cfg["geometry"]
    if g["kind"] == "box" and (g["width"] <= 0 or g["height"] <= 0 or g["nx"] < 1 or g["ny"] < 1):
        raise ConfigError("geometry needs positive width, height, nx and ny")
    if g["kind"] == "union" and (not g["boxes"] or g["h"] <= 0):
        raise ConfigError("union geometry needs geometry.boxes and geometry.h > 0")
    for sec, key in (("boundary", "gamma_d"), ("boundary", "gamma_n"), ("shape", "void_boxes"),
                     ("shape", "frozen_boxes"), ("greedy", "strips"), ("geometry", "boxes")):
        for box in cfg[sec][key]:
            if len(box) != 4:
                raise ConfigError(f"{sec}.{key}: boxes are [x0, y0, x1, y1], got {box}")
    for sec, key in (("ligament", "points"), ("greedy", "anchors"), ("shape", "hole_centers")):
        for p in cfg[sec][key]:
            if len(p) != 2:
                raise ConfigError(f"{sec}.{key}: points are [x, y], got {p}")
    eps = cfg["validation"]["eps_list"]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("validation.eps_list must be strictly decreasing")
    if cfg["optimizer"]["step"] <= 0 or cfg["optimizer"]["penalty"] <= 0:
        raise ConfigError("optimizer.step and optimizer.penalty must be positive")
    if sorted(cfg["ligament"]["schedule"]) != cfg["ligament"]["schedule"]:
        raise ConfigError("ligament.schedule must be sorted")


def resolve(overrides=None):
    """Defaults updated by ``overrides`` (a nested dict), validated."""
    cfg = copy.deepcopy(DEFAULTS)
    _merge(cfg, overrides or {})
    _check(cfg)
    return cfg


def loads_text(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return resolve(data)


def load(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return loads_text(p.read_text())


def schedule(cfg):
    """Ligament iterations: the explicit list, else start/stop/every."""
    lig = cfg["ligament"]
    if lig["schedule"]:
        return tuple(lig["schedule"])
    if lig["schedule_stop"] < 0:
        return ()
    return tuple(range(lig["schedule_start"], lig["schedule_stop"] + 1, lig["schedule_every"]))


def dumps(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True)
