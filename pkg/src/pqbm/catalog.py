"""Body/density catalog: the configuration schema and random generators.

Schema (JSON-compatible dictionaries):

    body     {"family": "ball", "n": 2, "r": 1.0}
             {"family": "box", "a": [1.0, 1.3]}
             {"family": "ellipsoid", "a": [2.0, 1.0]}
             {"family": "lq_ball", "n": 2, "q": 4.0, "scale": 1.0}
             {"family": "cross_polytope", "n": 3, "scale": 1.0}
             {"family": "shifted_ball", "r": 1.0, "center": [5.0, 0.0]}
             {"family": "polytope", "normals": [[...], ...], "heights": [...]}
    density  {"name": "gaussian"} | {"name": "lebesgue"}
             | {"name": "power", "alpha": 4.0}

Bodies serialize back through Body.to_config(); densities likewise.
Random generators draw desk-scale catalog members for property sweeps.
"""

from __future__ import annotations

import numpy as np

from . import bodies as _b
from .bodies import Body
from .densities import Density, gaussian, lebesgue, power
from .errors import InputError


def body_from_config(cfg: dict) -> Body:
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise InputError("body config must be a dict with a 'family' key")
    fam = cfg["family"]
    try:
        if fam == "ball":
            return _b.ball(float(cfg["r"]), int(cfg["n"]))
        if fam == "box":
            return _b.box(np.asarray(cfg["a"], float))
        if fam == "ellipsoid":
            return _b.ellipsoid(np.asarray(cfg["a"], float))
        if fam == "lq_ball":
            return _b.lq_ball(float(cfg["q"]), float(cfg.get("scale", 1.0)),
                              int(cfg["n"]))
        if fam == "cross_polytope":
            return _b.cross_polytope(float(cfg.get("scale", 1.0)), int(cfg["n"]))
        if fam == "shifted_ball":
            return _b.shifted_ball(float(cfg["r"]), np.asarray(cfg["center"], float))
        if fam in ("polytope", "wulff"):
            return _b.polytope(np.asarray(cfg["normals"], float),
                               np.asarray(cfg["heights"], float),
                               bool(cfg.get("symmetric", True)))
    except KeyError as missing:
        raise InputError(f"body config for {fam!r} lacks key {missing}") from None
    raise InputError(f"unknown body family {fam!r}")


def density_from_config(cfg: dict, n: int) -> Density:
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise InputError("density config must be a dict with a 'name' key")
    name = cfg["name"]
    if name == "gaussian":
        return gaussian(n)
    if name == "lebesgue":
        return lebesgue(n)
    if name == "power":
        if "alpha" not in cfg:
            raise InputError("power density config lacks 'alpha'")
        return power(float(cfg["alpha"]), n)
    raise InputError(f"unknown density {name!r}")


# ---------------------------------------------------------------------------
# random catalog draws (property sweeps and acceptance batches)


def pair_from_config(cfg: dict):
    """IsomorphicPair from {"normals": [...], "heights_K": [...],
    "heights_L": [...], "p": ...}."""
    from .polytopes import IsomorphicPair, NormalFan

    for key in ("normals", "heights_K", "heights_L", "p"):
        if key not in cfg:
            raise InputError(f"pair config lacks key {key!r}")
    fan = NormalFan(np.asarray(cfg["normals"], float))
    return IsomorphicPair.from_heights(fan,
                                       np.asarray(cfg["heights_K"], float),
                                       np.asarray(cfg["heights_L"], float),
                                       float(cfg["p"]))


def random_symmetric_polygon(rng: np.random.Generator, max_normal_pairs: int = 6,
                             inradius_floor: float = 0.0) -> Body:
    """Random symmetric 2D polytope from paired normals and heights."""
    m = int(rng.integers(3, max_normal_pairs + 1))
    ang = np.sort(rng.uniform(0.0, np.pi, m))
    # Spread angles away from duplicates for stable vertex enumeration.
    ang += np.linspace(0.0, 1e-3, m)
    U = np.column_stack([np.cos(ang), np.sin(ang)])
    U = np.vstack([U, -U])
    h = rng.uniform(max(0.7, inradius_floor), 1.8 + inradius_floor, m)
    h = np.concatenate([h, h])
    return _b.polytope(U, h)


def random_catalog_body(rng: np.random.Generator, n: int,
                        inradius_floor: float = 0.0) -> Body:
    """Random analytic catalog member with inradius >= inradius_floor."""
    kinds = ["ball", "box", "ellipsoid", "lq_ball"]
    if n == 2:
        kinds.append("polygon")
    kind = kinds[int(rng.integers(0, len(kinds)))]
    lo = max(0.6, inradius_floor)
    if kind == "ball":
        return _b.ball(float(rng.uniform(lo, lo + 1.2)), n)
    if kind == "box":
        return _b.box(rng.uniform(lo, lo + 1.2, n))
    if kind == "ellipsoid":
        return _b.ellipsoid(rng.uniform(lo, lo + 1.2, n))
    if kind == "lq_ball":
        q = float(rng.uniform(1.5, 6.0))
        scale = float(rng.uniform(lo, lo + 1.2))
        body = _b.lq_ball(q, scale, n)
        if body.inradius < inradius_floor:
            return _b.lq_ball(q, scale * inradius_floor / body.inradius, n)
        return body
    return random_symmetric_polygon(rng, inradius_floor=inradius_floor)


def random_body_pair(rng: np.random.Generator, n: int,
                     inradius_floor: float = 0.0) -> tuple[Body, Body]:
    return (random_catalog_body(rng, n, inradius_floor),
            random_catalog_body(rng, n, inradius_floor))
