"""Polytope interpolation machinery: facet measures, derivative formula,
combinatorial-type tracking, and the first-variation limit.

A pair of polytopes sharing the normal fan u_1..u_N interpolates through
heights h_i a_i(lambda) with

    a_i = (1 + lambda p s_i)^{1/p},   b_i = (..)^{(1-p)/p},   c_i = (..)^{(1-2p)/p},

where s_i encodes the second body via h_L(u_i) = h_i (1 + p s_i)^{1/p};
p = 0 takes the exact limit a_i = b_i = c_i = e^{lambda s_i} with
s_i = log(h_L/h_K).  The measure derivative along the family is

    d/dlambda mu(K_lambda) = sum_i h_i s_i b_i(lambda) mu_{n-1}(F_i(K_lambda)),

with the weighted facet measures mu_{n-1}(F_i) = int_{F_i} e^{-V} dH_{n-1}.
Facets that vanish are detected geometrically (dual-hull extremality),
never by thresholding a measure value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, roots_legendre

from . import bodies as _bodies
from . import poly2d
from .bodies import Body, GridSupport, wulff
from .densities import Density
from .errors import DomainError, InputError
from .measures import DEFAULT_BUDGET, MeasureEstimate, measure
from .sphere import check_unit, eval_directions

_SQRT2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class NormalFan:
    """Shared symmetric set of outer facet normals."""

    normals: np.ndarray      # (N, n)

    def __post_init__(self):
        U = np.ascontiguousarray(np.asarray(self.normals, float))
        check_unit(U)
        for u in U:
            if np.min(np.linalg.norm(U + u, axis=1)) > 1e-9:
                raise InputError("fan must be closed under negation")
        probe = eval_directions(U.shape[1])
        if np.any(np.max(probe @ U.T, axis=1) <= 1e-9):
            raise DomainError("fan normals do not positively span")
        U.flags.writeable = False
        object.__setattr__(self, "normals", U)

    @property
    def n(self) -> int:
        return self.normals.shape[1]

    @property
    def size(self) -> int:
        return self.normals.shape[0]


@dataclass(frozen=True, eq=False)
class IsomorphicPair:
    """Interpolation data (h_i, s_i, p) on a shared fan.

    Positivity of the interpolated heights on all of [0,1] is checked at
    construction: 1 + lambda p s_i stays positive iff it is at lambda = 1.
    """

    fan: NormalFan
    heights: np.ndarray      # h_i = h_K(u_i) > 0
    s: np.ndarray
    p: float

    def __post_init__(self):
        h = np.asarray(self.heights, float)
        s = np.asarray(self.s, float)
        if h.shape != (self.fan.size,) or s.shape != h.shape:
            raise InputError("heights and s must match the fan size")
        if np.any(h <= 0):
            raise DomainError("base heights must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise InputError("interpolation exponent p must lie in [0, 1]")
        if self.p > 0 and np.any(1.0 + self.p * s <= 0):
            raise DomainError("interpolated heights lose positivity on [0, 1]")
        object.__setattr__(self, "heights", _freeze(h))
        object.__setattr__(self, "s", _freeze(s))

    @classmethod
    def from_heights(cls, fan: NormalFan, heights_K, heights_L, p: float
                     ) -> "IsomorphicPair":
        hK = np.asarray(heights_K, float)
        hL = np.asarray(heights_L, float)
        if np.any(hK <= 0) or np.any(hL <= 0):
            raise DomainError("both height vectors must be positive")
        if p == 0.0:
            s = np.log(hL / hK)
        else:
            s = ((hL / hK) ** p - 1.0) / p
        return cls(fan, hK, s, p)

    @classmethod
    def from_bodies(cls, fan: NormalFan, K: Body, L: Body, p: float
                    ) -> "IsomorphicPair":
        return cls.from_heights(fan, K.support(fan.normals),
                                L.support(fan.normals), p)

    def body_at(self, lam: float) -> Body:
        return _bodies.polytope(self.fan.normals, self.heights_at(lam))

    def heights_at(self, lam: float) -> np.ndarray:
        return self.heights * self.coefficients(lam)[0]

    def coefficients(self, lam: float):
        """(a_i, b_i, c_i) at the given lambda."""
        if not 0.0 <= lam <= 1.0:
            raise InputError("lambda must lie in [0, 1]")
        if self.p == 0.0:
            e = np.exp(lam * self.s)
            return e, e, e
        base = 1.0 + lam * self.p * self.s
        if np.any(base <= 0):
            raise DomainError("nonpositive interpolation base")
        p = self.p
        a = base ** (1.0 / p)
        b = base ** ((1.0 - p) / p)
        c = base ** ((1.0 - 2.0 * p) / p)
        return a, b, c


def interp_heights(pair: IsomorphicPair, lam: float):
    """Heights of K_lambda plus the (a, b, c) coefficient triple."""
    a, b, c = pair.coefficients(lam)
    return pair.heights * a, a, b, c


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, float))
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# facet measures


@dataclass(frozen=True, eq=False)
class FacetMeasureTable:
    """Per-normal weighted facet measures; vanished facets are exactly 0."""

    values: np.ndarray
    stderr: np.ndarray
    method: str              # exact-2d | analytic-box | facet-mc

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def derivative_stderr(self, coeff: np.ndarray) -> float:
        return float(np.sqrt(np.sum((coeff * self.stderr) ** 2)))


def _edge_weighted_length(v1, v2, mu: Density, order: int = 48
                          ) -> tuple[float, float]:
    """int over the segment of e^{-V}, by Gauss-Legendre with a refinement proxy."""
    d = v2 - v1
    length = float(np.linalg.norm(d))
    if length == 0.0:
        return 0.0, 0.0

    def quad(k):
        x, w = roots_legendre(k)
        t = 0.5 * (x + 1.0)
        pts = v1[None, :] + t[:, None] * d[None, :]
        return 0.5 * length * float(np.dot(w, np.exp(-mu.V(pts))))

    fine = quad(order)
    return fine, abs(fine - quad(order // 2)) + 1e-15 * abs(fine)


def _is_axis_box(normals: np.ndarray) -> np.ndarray | None:
    """Map facet -> (axis, sign) when the normals are exactly +-e_i, else None."""
    n = normals.shape[1]
    if normals.shape[0] != 2 * n:
        return None
    out = []
    for u in normals:
        j = int(np.argmax(np.abs(u)))
        if abs(abs(u[j]) - 1.0) > 1e-12 or np.sum(np.abs(u)) > 1.0 + 1e-12:
            return None
        out.append((j, 1.0 if u[j] > 0 else -1.0))
    return np.array(out)


def _box_facet_measures(normals, heights, mu: Density) -> FacetMeasureTable | None:
    axes = _is_axis_box(normals)
    if axes is None:
        return None
    n = normals.shape[1]
    half = np.zeros(n)
    for (j, sign), h in zip(axes, heights):
        j = int(j)
        if half[j] and abs(half[j] - h) > 1e-12 * h:
            return None   # asymmetric box: fall through to generic paths
        half[j] = h
    vals = np.empty(len(normals))
    if mu.is_lebesgue:
        for k, (j, _) in enumerate(axes):
            vals[k] = np.prod(np.delete(2.0 * half, int(j)))
    elif mu.is_gaussian:
        # The product density splits into the normal-coordinate pdf and
        # n - 1 interval masses.
        sides = 2.0 * ndtr(half) - 1.0
        for k, (j, _) in enumerate(axes):
            j = int(j)
            vals[k] = (np.exp(-half[j] ** 2 / 2.0) / _SQRT2PI
                       * np.prod(np.delete(sides, j)))
    else:
        return None
    return FacetMeasureTable(vals, np.zeros_like(vals), "analytic-box")


def facet_measures(P: Body | None, mu: Density, budget: int = DEFAULT_BUDGET,
                   seed: int = 0, normals: np.ndarray | None = None,
                   heights: np.ndarray | None = None) -> FacetMeasureTable:
    """Weighted facet measures of a polytope, per listed outer normal.

    n = 2 integrates exactly along edges; axis boxes use product formulas in
    any dimension; n = 3 enumerates facet polygons (qhull) and uses exact
    areas for Lebesgue or per-facet Monte Carlo for weighted densities.
    """
    if P is not None:
        if P.family not in ("polytope", "wulff"):
            raise DomainError("facet measures require a polytope body")
        normals, heights = P.normals, P.heights
    normals = np.asarray(normals, float)
    heights = np.asarray(heights, float)
    n = normals.shape[1]

    box = _box_facet_measures(normals, heights, mu)
    if box is not None:
        return box

    if n == 2:
        poly = poly2d.essential_polygon(normals, heights)
        vals = np.zeros(len(normals))
        errs = np.zeros(len(normals))
        for local_i, global_i in enumerate(poly.keep):
            v1, v2 = poly.edge_endpoints(local_i)
            vals[global_i], errs[global_i] = _edge_weighted_length(v1, v2, mu)
        return FacetMeasureTable(vals, errs, "exact-2d")

    if n == 3:
        return _facet_measures_3d(normals, heights, mu, budget, seed)
    raise DomainError("facet measures implemented for n = 2, 3 and axis boxes")


def _facet_measures_3d(normals, heights, mu: Density, budget: int, seed: int
                       ) -> FacetMeasureTable:
    from scipy.spatial import HalfspaceIntersection

    N = len(normals)
    if N > 64:
        raise DomainError("3D facet enumeration limited to N <= 64 halfspaces")
    hs = np.hstack([normals, -heights[:, None]])
    interior = np.zeros(3)
    verts = HalfspaceIntersection(hs, interior).intersections
    vals = np.zeros(N)
    errs = np.zeros(N)
    rng = np.random.default_rng(seed)
    per_facet = max(1000, budget // max(N, 1))
    for i in range(N):
        on = verts[np.abs(verts @ normals[i] - heights[i]) <= 1e-9 * max(1.0, heights[i])]
        if len(on) < 3:
            continue
        center = on.mean(axis=0)
        e1 = on[0] - center
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normals[i], e1)
        ang = np.arctan2((on - center) @ e2, (on - center) @ e1)
        on = on[np.argsort(ang)]
        tri_a = on
        tri_b = np.roll(on, -1, axis=0)
        cross = np.cross(tri_a - center, tri_b - center)
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        area = float(areas.sum())
        if mu.is_lebesgue:
            vals[i] = area
            continue
        # Uniform samples on the fan triangulation, weighted by the density.
        counts = rng.multinomial(per_facet, areas / area)
        samples = []
        for t, cnt in enumerate(counts):
            if cnt == 0:
                continue
            r1 = np.sqrt(rng.random(cnt))[:, None]
            r2 = rng.random(cnt)[:, None]
            pts = (1 - r1) * center + r1 * ((1 - r2) * tri_a[t] + r2 * tri_b[t])
            samples.append(pts)
        pts = np.vstack(samples)
        w = np.exp(-mu.V(pts))
        vals[i] = area * float(np.mean(w))
        errs[i] = area * float(np.std(w, ddof=1) / np.sqrt(len(w)))
    return FacetMeasureTable(vals, errs, "facet-mc" if not mu.is_lebesgue else "exact-3d")


# ---------------------------------------------------------------------------
# measure derivative along the interpolation


@dataclass(frozen=True)
class DerivativeReport:
    value: float
    stderr: float
    lam: float
    active: np.ndarray        # boolean facet mask at lambda
    type_changed: bool        # some fan facet has vanished at this lambda


def measure_derivative(pair: IsomorphicPair, lam: float, mu: Density,
                       budget: int = DEFAULT_BUDGET, seed: int = 0
                       ) -> DerivativeReport:
    """d/dlambda mu(K_lambda) = sum h_i s_i b_i(lambda) mu_{n-1}(F_i(K_lambda))."""
    heights, _, b, _ = interp_heights(pair, lam)
    table = facet_measures(None, mu, budget, seed,
                           normals=pair.fan.normals, heights=heights)
    coeff = pair.heights * pair.s * b
    value = float(np.dot(coeff, table.values))
    stderr = table.derivative_stderr(coeff)
    active = table.values > 0
    if pair.fan.n == 2:
        active = poly2d.facet_lengths_full(pair.fan.normals, heights) > 0
    return DerivativeReport(value, stderr, lam, active, bool(np.any(~active)))


# ---------------------------------------------------------------------------
# strong isomorphy intervals


@dataclass(frozen=True)
class IsomorphyDecomposition:
    """Maximal open intervals of [0,1] with a constant positive-facet set."""

    intervals: tuple[tuple[float, float], ...]
    active_sets: tuple[frozenset, ...]
    breakpoints: tuple[float, ...]


def _active_set(pair: IsomorphicPair, lam: float) -> frozenset:
    heights = pair.heights_at(lam)
    if pair.fan.n == 2:
        lengths = poly2d.facet_lengths_full(pair.fan.normals, heights)
        return frozenset(np.nonzero(lengths > 0)[0].tolist())
    if _is_axis_box(pair.fan.normals) is not None:
        return frozenset(range(pair.fan.size))
    raise DomainError("isomorphy probe supports n = 2 fans and axis boxes")


def strong_isomorphy_probe(pair: IsomorphicPair, lambda_grid=None,
                           tol: float = 1e-10) -> IsomorphyDecomposition:
    """Partition [0,1] by the facet support pattern, bisecting breakpoints."""
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 1.0, 101)
    lams = np.sort(np.asarray(lambda_grid, float))
    sets = [_active_set(pair, la) for la in lams]

    breakpoints: list[float] = []
    for k in range(len(lams) - 1):
        if sets[k] == sets[k + 1]:
            continue
        lo, hi = lams[k], lams[k + 1]
        ref = sets[k]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _active_set(pair, mid) == ref:
                lo = mid
            else:
                hi = mid
        breakpoints.append(0.5 * (lo + hi))

    edges = [0.0] + breakpoints + [1.0]
    intervals = []
    actives = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= tol:
            continue
        intervals.append((lo, hi))
        actives.append(_active_set(pair, 0.5 * (lo + hi)))
    return IsomorphyDecomposition(tuple(intervals), tuple(actives),
                                  tuple(breakpoints))


# ---------------------------------------------------------------------------
# first variation of the measure under Wulff perturbations


@dataclass(frozen=True)
class FirstVariationReport:
    eps: np.ndarray
    deltas: np.ndarray
    delta_stderr: np.ndarray
    surface_integral: float
    surface_stderr: float
    extrapolated: float
    extrapolated_stderr: float
    rate: float               # log-log slope of |delta - surface integral|
    shrunk: bool              # some requested eps violated positivity


def surface_integral_of(K: Body, w, mu: Density,
                        budget: int = DEFAULT_BUDGET, seed: int = 0
                        ) -> tuple[float, float]:
    """int w d(sigma_{mu,K}): facet sums for polytopes, boundary quadrature
    for smooth catalog bodies."""
    if K.family in ("polytope", "wulff", "box", "cross_polytope"):
        from .measures import _as_polygon_body

        body = _as_polygon_body(K) if (K.n == 2 and K.family in ("box", "cross_polytope")) else K
        table = facet_measures(body, mu, budget, seed)
        wvals = np.asarray(w(body.normals), float)
        val = float(np.dot(wvals, table.values))
        err = float(np.sqrt(np.sum((wvals * table.stderr) ** 2)))
        return val, err
    from .boundary import smooth_body

    sm = smooth_body(K)
    bg = sm.boundary_grid(mu)
    wvals = np.asarray(w(sm.grid.nodes), float)
    return bg.integrate(wvals), 0.0


def first_variation_check(K: Body, w, mu: Density, eps_grid=None,
                          budget: int = DEFAULT_BUDGET, seed: int = 0,
                          method: str = "auto") -> FirstVariationReport:
    """Compare difference quotients [mu(W(h_K + eps w)) - mu(K)]/eps with the
    surface integral int w d(sigma_{mu,K}); first-order convergence expected."""
    if eps_grid is None:
        eps_grid = np.array([0.16, 0.08, 0.04, 0.02, 0.01])
    eps_grid = np.sort(np.asarray(eps_grid, float))[::-1]
    if np.any(eps_grid <= 0):
        raise InputError("eps grid must be positive")

    U = eval_directions(K.n)
    if K.family in ("polytope", "wulff"):
        U = np.vstack([U, K.normals])
        _, idx = np.unique(np.round(U, 12), axis=0, return_index=True)
        U = U[np.sort(idx)]
    hK = K.support(U)
    wU = np.asarray(w(U), float)

    base = measure(K, mu, method=method, budget=budget, seed=seed)

    shrunk = False
    eps_used, deltas, dstderr = [], [], []
    for k, eps in enumerate(eps_grid):
        while np.any(hK + eps * wU <= 0) and eps > 1e-8:
            eps *= 0.5
            shrunk = True
        if np.any(hK + eps * wU <= 0):
            continue
        W = wulff(GridSupport(U, hK + eps * wU))
        est = measure(W, mu, method=method, budget=budget, seed=seed)
        eps_used.append(eps)
        deltas.append((est.value - base.value) / eps)
        dstderr.append(np.hypot(est.stderr, base.stderr) / eps)

    eps_arr = np.array(eps_used)
    deltas = np.array(deltas)
    dstderr = np.array(dstderr)

    surf, surf_err = surface_integral_of(K, w, mu, budget, seed)

    # delta(eps) = limit + C1 eps + O(eps^2): extrapolate by polynomial fit.
    # The spread between fit orders bounds the model bias of the intercept;
    # measurement noise propagates through the least-squares design.
    A1 = np.column_stack([np.ones_like(eps_arr), eps_arr])
    lin = np.linalg.lstsq(A1, deltas, rcond=None)[0][0]
    if len(eps_arr) >= 3:
        A2 = np.column_stack([np.ones_like(eps_arr), eps_arr, eps_arr ** 2])
        quad = np.linalg.lstsq(A2, deltas, rcond=None)[0][0]
    else:
        quad = lin
    extrap = float(quad)
    cov_scale = np.linalg.inv(A1.T @ A1)[0, 0]
    noise = float(np.sqrt(cov_scale) * max(np.max(dstderr), 1e-15))
    extrap_err = max(noise, abs(quad - lin), 1e-12 * abs(surf))

    resid = np.abs(deltas - surf)
    noise = 5.0 * np.maximum(dstderr, 1e-14)
    mask = resid > noise
    if np.count_nonzero(mask) >= 2:
        slope = np.polyfit(np.log(eps_arr[mask]), np.log(resid[mask]), 1)[0]
    else:
        slope = float("nan")   # differences are at noise level already
    return FirstVariationReport(eps_arr, deltas, dstderr, surf, surf_err,
                                extrap, extrap_err, float(slope), shrunk)
