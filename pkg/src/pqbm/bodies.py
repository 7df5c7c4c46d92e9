"""Symmetric convex bodies: representations, support algebra, L_p sums, Wulff shapes.

A body is either an analytic family (ball, box, ellipsoid, lq ball,
cross-polytope, plus the deliberately non-symmetric shifted ball used by
the failure demonstration) or a halfspace intersection given by outer
normals and heights.  Every body exposes

    support(U)      h_K(u) = sup_{x in K} <x, u>
    membership(X)   x in K  <=>  <x, u> <= h_K(u) for all evaluation u
    radial(U)       rho_K(u) = sup {t >= 0 : t u in K}   (origin interior)

L_p combinations are tabulated on the shared evaluation grid and turned
back into bodies through the Wulff shape (intersection of the grid
halfspaces).  The grid Wulff contains the true body, so measure-based
deficits are biased toward `holds` by an O(M^-2) term; dilate pairs are
detected and combined exactly to remove even that bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi
from typing import Any

import numpy as np

from . import poly2d
from .errors import DomainError, InputError
from .sphere import check_unit, eval_directions

_MEMBERSHIP_CHUNK = 1 << 15

ANALYTIC_FAMILIES = ("ball", "box", "ellipsoid", "lq_ball", "cross_polytope",
                     "shifted_ball")
POLYTOPE_FAMILIES = ("polytope", "wulff")


def _dual_exponent(q: float) -> float:
    if q == 1.0:
        return np.inf
    return q / (q - 1.0)


def _lq_norm(X: np.ndarray, q: float) -> np.ndarray:
    if np.isinf(q):
        return np.max(np.abs(X), axis=-1)
    return np.sum(np.abs(X) ** q, axis=-1) ** (1.0 / q)


def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


@dataclass(frozen=True, eq=False)
class Body:
    """Immutable convex body in R^n with a membership oracle.

    params carries the analytic family parameters; polytope/wulff bodies
    instead store the halfspace data (normals, heights).  r and R cache
    the inradius and circumradius; for grid-backed bodies R is an upper
    bound from the axis bounding box.
    """

    n: int
    family: str
    params: dict[str, Any] = field(default_factory=dict)
    normals: np.ndarray | None = None
    heights: np.ndarray | None = None
    symmetric: bool = True

    def __post_init__(self):
        if not 2 <= self.n <= 6:
            raise InputError(f"dimension {self.n} outside [2, 6]")
        if self.family in POLYTOPE_FAMILIES:
            U = np.asarray(self.normals, dtype=float)
            h = np.asarray(self.heights, dtype=float)
            if U.ndim != 2 or U.shape[1] != self.n or h.shape != (U.shape[0],):
                raise InputError("normals must be (N, n) with matching heights")
            check_unit(U)
            if self.family == "polytope":
                if np.any(h <= 0):
                    raise DomainError("polytope heights must be positive")
                # Positively spanning normals <=> every direction sees some
                # halfspace, otherwise the intersection is unbounded.
                probe = eval_directions(self.n)
                if np.any(np.max(probe @ U.T, axis=1) <= 1e-9):
                    raise DomainError("normals do not positively span: unbounded body")
                if self.symmetric and not _negation_closed(U, h):
                    raise InputError("symmetric polytope requires negation-closed normals")
            object.__setattr__(self, "normals", _freeze(U))
            object.__setattr__(self, "heights", _freeze(h))
        elif self.family not in ANALYTIC_FAMILIES:
            raise InputError(f"unknown body family {self.family!r}")
        if self.family == "shifted_ball":
            object.__setattr__(self, "symmetric", False)

    # -- representation-specific kernels ------------------------------------

    def support(self, U: np.ndarray) -> np.ndarray:
        """h_K on rows of U.  Polytopes use the exact vertex/LP value."""
        U = check_unit(np.atleast_2d(np.asarray(U, dtype=float)))
        f = self.family
        p = self.params
        if f == "ball":
            return np.full(U.shape[0], float(p["r"]))
        if f == "box":
            return np.abs(U) @ np.asarray(p["a"], float)
        if f == "ellipsoid":
            a = np.asarray(p["a"], float)
            return np.sqrt((U ** 2) @ (a ** 2))
        if f == "lq_ball":
            return p["scale"] * _lq_norm(U, _dual_exponent(p["q"]))
        if f == "cross_polytope":
            return p["scale"] * np.max(np.abs(U), axis=-1)
        if f == "shifted_ball":
            return p["r"] + U @ np.asarray(p["center"], float)
        if self.n == 2:
            return self._polygon().support(U)
        return self._support_lp(U)

    def membership(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        f = self.family
        p = self.params
        if f == "ball":
            return np.einsum("ij,ij->i", X, X) <= p["r"] ** 2
        if f == "box":
            return np.all(np.abs(X) <= np.asarray(p["a"], float), axis=1)
        if f == "ellipsoid":
            a = np.asarray(p["a"], float)
            return np.sum((X / a) ** 2, axis=1) <= 1.0
        if f == "lq_ball":
            return _lq_norm(X, p["q"]) <= p["scale"]
        if f == "cross_polytope":
            return np.sum(np.abs(X), axis=1) <= p["scale"]
        if f == "shifted_ball":
            d = X - np.asarray(p["center"], float)
            return np.einsum("ij,ij->i", d, d) <= p["r"] ** 2
        if self.n == 2 and np.all(self.heights > 0):
            # Convex polygon with interior origin: the edge whose angular
            # sector contains x decides membership with one dot product.
            ang, U, h = self._sector_table()
            theta = np.arctan2(X[:, 1], X[:, 0])
            idx = np.searchsorted(ang, theta) % len(ang)
            return np.einsum("ij,ij->i", X, U[idx]) <= h[idx] + 1e-12
        out = np.empty(X.shape[0], dtype=bool)
        for lo in range(0, X.shape[0], _MEMBERSHIP_CHUNK):
            blk = X[lo:lo + _MEMBERSHIP_CHUNK]
            out[lo:lo + blk.shape[0]] = np.all(
                blk @ self.normals.T <= self.heights + 1e-12, axis=1)
        return out

    def _sector_table(self):
        table = getattr(self, "_sector_cache", None)
        if table is None:
            poly = self._polygon()
            v_ang = np.arctan2(poly.vertices[:, 1], poly.vertices[:, 0])
            roll = -int(np.argmin(v_ang))
            v_ang = np.roll(v_ang, roll)
            table = (v_ang, np.roll(poly.normals, roll, axis=0),
                     np.roll(poly.heights, roll))
            object.__setattr__(self, "_sector_cache", table)
        return table

    def radial(self, U: np.ndarray) -> np.ndarray:
        """Radial function; requires the origin strictly interior."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        f = self.family
        p = self.params
        if f == "ball":
            return np.full(U.shape[0], float(p["r"]))
        if f == "box":
            a = np.asarray(p["a"], float)
            with np.errstate(divide="ignore"):
                return np.min(np.where(np.abs(U) > 0, a / np.abs(U), np.inf), axis=1)
        if f == "ellipsoid":
            a = np.asarray(p["a"], float)
            return 1.0 / np.sqrt((U ** 2) @ (1.0 / a ** 2))
        if f == "lq_ball":
            return p["scale"] / _lq_norm(U, p["q"])
        if f == "cross_polytope":
            return p["scale"] / np.sum(np.abs(U), axis=1)
        if f == "shifted_ball":
            raise DomainError("radial function undefined: shifted ball may exclude origin")
        if np.any(self.heights <= 0):
            raise DomainError("radial function needs origin strictly interior")
        dots = U @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(dots > 0, self.heights / dots, np.inf)
        return np.min(ratios, axis=1)

    # -- cached geometry -----------------------------------------------------

    def _polygon(self) -> poly2d.Polygon2D:
        poly = getattr(self, "_poly_cache", None)
        if poly is None:
            poly = poly2d.essential_polygon(self.normals, self.heights)
            object.__setattr__(self, "_poly_cache", poly)
        return poly

    def _support_lp(self, U: np.ndarray) -> np.ndarray:
        from scipy.optimize import linprog

        box = self.axis_box()
        out = np.empty(U.shape[0])
        for k, u in enumerate(U):
            res = linprog(-u, A_ub=self.normals, b_ub=self.heights,
                          bounds=list(zip(-box, box)), method="highs")
            if not res.success:
                raise DomainError(f"support LP failed: {res.message}")
            out[k] = -res.fun
        return out

    def axis_box(self) -> np.ndarray:
        """Half-widths a_i with K inside the box [-a_i, a_i]^n."""
        axes = np.eye(self.n)
        hs = self.support(np.vstack([axes, -axes]))
        return np.maximum(hs[: self.n], hs[self.n:])

    @property
    def inradius(self) -> float:
        f, p = self.family, self.params
        if f == "ball":
            return float(p["r"])
        if f == "box":
            return float(np.min(p["a"]))
        if f == "ellipsoid":
            return float(np.min(p["a"]))
        if f == "lq_ball":
            m = _dual_exponent(p["q"])
            # min of the dual norm over the sphere: at axes when m <= 2,
            # at the diagonal when m >= 2.
            if np.isinf(m):
                val = self.n ** (-0.5)
            else:
                val = min(1.0, self.n ** (1.0 / m - 0.5))
            return float(p["scale"] * val)
        if f == "cross_polytope":
            return float(p["scale"] / np.sqrt(self.n))
        if f == "shifted_ball":
            raise DomainError("inradius (about the origin) undefined for shifted ball")
        if self.n == 2:
            poly = self._polygon()
            return float(np.min(poly.heights))
        # Support minima of a polytope occur at facet normals.
        return float(np.min(self.support(self.normals)))

    @property
    def circumradius(self) -> float:
        f, p = self.family, self.params
        if f == "ball":
            return float(p["r"])
        if f == "box":
            return float(np.linalg.norm(p["a"]))
        if f == "ellipsoid":
            return float(np.max(p["a"]))
        if f == "lq_ball":
            m = _dual_exponent(p["q"])
            if np.isinf(m):
                val = 1.0
            else:
                val = max(1.0, self.n ** (1.0 / m - 0.5))
            return float(p["scale"] * val)
        if f == "cross_polytope":
            return float(p["scale"])
        if f == "shifted_ball":
            return float(p["r"] + np.linalg.norm(p["center"]))
        if self.n == 2:
            return float(np.max(np.linalg.norm(self._polygon().vertices, axis=1)))
        return float(np.linalg.norm(self.axis_box()))

    def scaled(self, s: float) -> "Body":
        if s <= 0:
            raise InputError("scale factor must be positive")
        f, p = self.family, self.params
        if f == "ball":
            return Body(self.n, "ball", {"r": s * p["r"]})
        if f == "box":
            return Body(self.n, "box", {"a": s * np.asarray(p["a"], float)})
        if f == "ellipsoid":
            return Body(self.n, "ellipsoid", {"a": s * np.asarray(p["a"], float)})
        if f == "lq_ball":
            return Body(self.n, "lq_ball", {"q": p["q"], "scale": s * p["scale"]})
        if f == "cross_polytope":
            return Body(self.n, "cross_polytope", {"scale": s * p["scale"]})
        if f == "shifted_ball":
            return Body(self.n, "shifted_ball",
                        {"r": s * p["r"], "center": s * np.asarray(p["center"], float)})
        return Body(self.n, self.family, {}, normals=self.normals,
                    heights=s * self.heights, symmetric=self.symmetric)

    def dilate_factor_of(self, other: "Body") -> float | None:
        """Return t with self = t * other when both are dilates, else None."""
        if self.n != other.n:
            return None
        if self.family == other.family and self.family != "shifted_ball":
            f, p, q = self.family, self.params, other.params
            if f == "ball":
                return p["r"] / q["r"]
            if f in ("box", "ellipsoid"):
                ra = np.asarray(p["a"], float) / np.asarray(q["a"], float)
                if np.ptp(ra) <= 1e-12 * np.max(ra):
                    return float(ra[0])
                return None
            if f == "cross_polytope":
                return p["scale"] / q["scale"]
            if f == "lq_ball":
                if p["q"] == q["q"]:
                    return p["scale"] / q["scale"]
                return None
            if f in POLYTOPE_FAMILIES:
                if self.normals.shape == other.normals.shape and \
                        np.array_equal(self.normals, other.normals):
                    ra = self.heights / other.heights
                    if np.ptp(ra) <= 1e-12 * np.max(ra):
                        return float(ra[0])
                return None
        return None

    # -- serialization -------------------------------------------------------

    def to_config(self) -> dict:
        cfg: dict[str, Any] = {"family": self.family, "n": self.n}
        for key, val in self.params.items():
            cfg[key] = val.tolist() if isinstance(val, np.ndarray) else val
        if self.family in POLYTOPE_FAMILIES:
            cfg["normals"] = self.normals.tolist()
            cfg["heights"] = self.heights.tolist()
            cfg["symmetric"] = self.symmetric
        return cfg


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.flags.writeable = False
    return a


def _negation_closed(U: np.ndarray, h: np.ndarray, tol: float = 1e-9) -> bool:
    for u, hu in zip(U, h):
        d = np.linalg.norm(U + u, axis=1)
        j = int(np.argmin(d))
        if d[j] > tol or abs(h[j] - hu) > tol * max(1.0, abs(hu)):
            return False
    return True


# -- constructors ------------------------------------------------------------

def ball(r: float, n: int = 2) -> Body:
    if r <= 0:
        raise InputError("ball radius must be positive")
    return Body(n, "ball", {"r": float(r)})


def box(a, n: int | None = None) -> Body:
    a = np.asarray(a, dtype=float)
    if n is not None and a.ndim == 0:
        a = np.full(n, float(a))
    if np.any(a <= 0):
        raise InputError("box half-widths must be positive")
    return Body(len(a), "box", {"a": _freeze(a)})


def ellipsoid(a) -> Body:
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise InputError("ellipsoid semi-axes must be positive")
    return Body(len(a), "ellipsoid", {"a": _freeze(a)})


def lq_ball(q: float, scale: float = 1.0, n: int = 2) -> Body:
    if q < 1:
        raise InputError("lq ball requires q >= 1")
    if scale <= 0:
        raise InputError("lq ball scale must be positive")
    return Body(n, "lq_ball", {"q": float(q), "scale": float(scale)})


def cross_polytope(scale: float = 1.0, n: int = 2) -> Body:
    if scale <= 0:
        raise InputError("cross-polytope scale must be positive")
    return Body(n, "cross_polytope", {"scale": float(scale)})


def shifted_ball(r: float, center) -> Body:
    center = np.asarray(center, dtype=float)
    return Body(len(center), "shifted_ball", {"r": float(r), "center": _freeze(center)})


def polytope(normals, heights, symmetric: bool = True) -> Body:
    return Body(np.asarray(normals).shape[1], "polytope", {},
                normals=np.asarray(normals, float),
                heights=np.asarray(heights, float), symmetric=symmetric)


def regular_polygon_body(k: int, circumradius: float = 1.0, phase: float = 0.0) -> Body:
    """Regular 2k-gon (even, hence symmetric) given by its facet normals."""
    ang = phase + pi * np.arange(2 * k) / k
    U = np.column_stack([np.cos(ang), np.sin(ang)])
    h = np.full(2 * k, circumradius * np.cos(pi / (2 * k)))
    return polytope(U, h)


# -- support functions on the shared grid ------------------------------------

@dataclass(frozen=True, eq=False)
class GridSupport:
    """Even positive function tabulated on a symmetric direction grid.

    Evaluation is exact at the nodes; elsewhere the Wulff-consistent rule
    applies (the support function of the intersection of node halfspaces),
    so every evaluated function is a genuine support function.
    exact_body is set when the tabulated values were recognized as an
    analytic body (dilate pairs, constants), making wulff() lossless.
    """

    dirs: np.ndarray
    values: np.ndarray
    exact_body: Body | None = None

    def __post_init__(self):
        object.__setattr__(self, "dirs", _freeze(self.dirs))
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def n(self) -> int:
        return self.dirs.shape[1]

    def evenness_defect(self) -> float:
        """max |f(u) - f(-u)| over the grid (antipodes paired by nearest node)."""
        from scipy.spatial import cKDTree

        U, v = self.dirs, self.values
        dist, idx = cKDTree(U).query(-U)
        if np.max(dist) > 1e-9:
            raise InputError("direction grid is not closed under negation")
        return float(np.max(np.abs(v - v[idx])))


def support_grid(body: Body, dirs: np.ndarray | None = None) -> GridSupport:
    dirs = eval_directions(body.n) if dirs is None else np.asarray(dirs, float)
    return GridSupport(dirs, body.support(dirs), exact_body=body)


def _combined_dirs(K: Body, L: Body, dirs: np.ndarray | None) -> np.ndarray:
    if dirs is not None:
        return np.asarray(dirs, float)
    base = eval_directions(K.n)
    extra = [b.normals for b in (K, L) if b.family in POLYTOPE_FAMILIES]
    if not extra:
        return base
    dirs = np.vstack([base] + extra)
    # Stable dedupe keeps the shared grid order reproducible.
    _, idx = np.unique(np.round(dirs, 12), axis=0, return_index=True)
    return dirs[np.sort(idx)]


def p_combine(K: Body, L: Body, lam: float, p: float,
              dirs: np.ndarray | None = None) -> GridSupport:
    """L_p combination (lam * h_K^p + (1-lam) * h_L^p)^{1/p} on the grid.

    p = 0 uses the geometric mean h_K^lam h_L^(1-lam).  p = 1 additionally
    accepts signed support values (needed only for the shifted-ball failure
    demonstration); p < 1 requires both support functions positive.
    Dilate pairs combine exactly into a scaled copy of K.
    """
    if K.n != L.n:
        raise InputError("bodies must share the ambient dimension")
    if not 0.0 <= p <= 1.0:
        raise InputError(f"p must lie in [0, 1], got {p}")
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam}")

    U = _combined_dirs(K, L, dirs)
    if lam == 1.0:
        return GridSupport(U, K.support(U), exact_body=K)
    if lam == 0.0:
        return GridSupport(U, L.support(U), exact_body=L)

    t = L.dilate_factor_of(K)
    if t is not None:
        s = t ** (1.0 - lam) if p == 0.0 else (lam + (1.0 - lam) * t ** p) ** (1.0 / p)
        exact = K.scaled(s)
        return GridSupport(U, exact.support(U), exact_body=exact)

    hK = K.support(U)
    hL = L.support(U)
    if p < 1.0 and (np.any(hK <= 0) or np.any(hL <= 0)):
        raise DomainError("p < 1 combination requires strictly positive support")
    if p == 0.0:
        vals = hK ** lam * hL ** (1.0 - lam)
    elif p == 1.0:
        vals = lam * hK + (1.0 - lam) * hL
    else:
        vals = (lam * hK ** p + (1.0 - lam) * hL ** p) ** (1.0 / p)
    return GridSupport(U, vals)


def wulff(f: GridSupport) -> Body:
    """Wulff shape W(f) = {x : <x, u> <= f(u) for all grid directions u}."""
    if f.exact_body is not None:
        return f.exact_body
    vals = f.values
    if np.max(vals) - np.min(vals) <= 1e-14 * max(1.0, abs(float(np.mean(vals)))):
        return ball(float(np.mean(vals)), f.n)
    if np.any(vals <= 0):
        raise DomainError("Wulff construction requires positive values")
    if f.evenness_defect() > 1e-9 * float(np.max(np.abs(vals))):
        raise InputError("Wulff input must be an even function")
    return Body(f.n, "wulff", {}, normals=f.dirs, heights=vals)


def interpolate(K: Body, L: Body, lam: float, p: float,
                dirs: np.ndarray | None = None) -> Body:
    """Body of the L_p interpolation: wulff(p_combine(K, L, lam, p))."""
    if p == 1.0 and not (K.symmetric and L.symmetric):
        # The failure demonstration: Minkowski mean with a translated ball,
        # signed grid values allowed, membership given by all grid halfspaces.
        U = _combined_dirs(K, L, dirs)
        vals = lam * K.support(U) + (1.0 - lam) * L.support(U)
        return Body(K.n, "wulff", {}, normals=U, heights=vals, symmetric=False)
    return wulff(p_combine(K, L, lam, p, dirs=dirs))


def contains(K: Body, L: Body, tol: float = 1e-10) -> bool:
    """True iff L subset of K, via support dominance h_L <= h_K + tol.

    Exact when K is a halfspace-intersection body (node inequalities
    characterize inclusion); for analytic K the shared grid decides.
    """
    if K.n != L.n:
        raise InputError("bodies must share the ambient dimension")
    if K.family in POLYTOPE_FAMILIES:
        U, hK = K.normals, K.heights
    else:
        U = eval_directions(K.n)
        hK = K.support(U)
    hL = L.support(U)
    scale = max(1.0, float(np.max(np.abs(hK))))
    return bool(np.all(hL <= hK + tol * scale))


def inradius(K: Body) -> float:
    return K.inradius
