"""Measure estimation mu(K) and restricted integrals, with error quantification.

Three estimator routes, all seed-deterministic:

  closed-form       exact formulas (Gaussian x ball/box, Lebesgue volumes,
                    radial densities x balls); stderr = 0.
  polar-quadrature  n = 2, 3 only; angular nodes x closed-form radial mass.
                    Planar polytopes integrate per edge sector so kinks of
                    the radial function never cross a quadrature panel;
                    stderr reports a refinement-based error proxy.
  monte-carlo       Gaussian membership sampling, or uniform sampling in
                    the axis bounding box weighted by e^{-V}; stderr is the
                    sample standard deviation / sqrt(samples).

Restricted integrals (1/mu(K)) int_K g dmu are ratio estimates with
delta-method standard errors including the numerator/denominator
covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, gamma as gamma_fn, pi

import numpy as np
from scipy.special import gammainc, ndtr, roots_legendre
from scipy.stats import ncx2

from .bodies import Body, unit_ball_volume
from .densities import Density
from .errors import DomainError, InputError
from .sphere import quadrature_grid, sphere_area

MIN_BUDGET = 1000
DEFAULT_BUDGET = 10 ** 6
_CHUNK = 1 << 16


@dataclass(frozen=True)
class MeasureEstimate:
    """A nonnegative measure value with standard error and provenance."""

    value: float
    stderr: float
    method: str            # closed-form | polar-quadrature | monte-carlo
    budget: int            # samples (MC) or node count (quadrature)
    seed: int | None = None

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise InputError("measure estimates must be nonnegative")

    def to_json_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "method": self.method,
                "budget": self.budget, "seed": self.seed}


@dataclass(frozen=True)
class RatioEstimate:
    """Normalized restricted integral (1/mu(K)) int_K g dmu."""

    value: float
    stderr: float
    method: str
    budget: int
    seed: int | None = None


# -- closed forms --------------------------------------------------------------


def _lebesgue_volume(K: Body) -> float | None:
    f, p, n = K.family, K.params, K.n
    if f == "ball" or f == "shifted_ball":
        return unit_ball_volume(n) * p["r"] ** n
    if f == "box":
        return float(np.prod(2.0 * np.asarray(p["a"], float)))
    if f == "ellipsoid":
        return unit_ball_volume(n) * float(np.prod(p["a"]))
    if f == "cross_polytope":
        return (2.0 * p["scale"]) ** n / factorial(n)
    if f == "lq_ball":
        q = p["q"]
        return (2.0 * p["scale"] * gamma_fn(1.0 + 1.0 / q)) ** n / gamma_fn(1.0 + n / q)
    if n == 2 and f in ("polytope", "wulff") and K.symmetric:
        return K._polygon().area
    return None


def closed_form(K: Body, mu: Density) -> MeasureEstimate | None:
    """Exact measure when a formula exists, else None."""
    n = K.n
    if mu.is_lebesgue:
        vol = _lebesgue_volume(K)
        if vol is not None:
            return MeasureEstimate(vol, 0.0, "closed-form", 0)
        return None
    if mu.is_gaussian:
        if K.family == "ball":
            val = float(gammainc(n / 2.0, K.params["r"] ** 2 / 2.0))
            return MeasureEstimate(val, 0.0, "closed-form", 0)
        if K.family == "box":
            a = np.asarray(K.params["a"], float)
            val = float(np.prod(2.0 * ndtr(a) - 1.0))
            return MeasureEstimate(val, 0.0, "closed-form", 0)
        if K.family == "shifted_ball":
            c = np.asarray(K.params["center"], float)
            val = float(ncx2.cdf(K.params["r"] ** 2, df=n, nc=float(c @ c)))
            return MeasureEstimate(val, 0.0, "closed-form", 0)
        return None
    if K.family == "ball":   # any radial density x ball
        val = sphere_area(n) * float(mu.radial_mass(K.params["r"]))
        return MeasureEstimate(val, 0.0, "closed-form", 0)
    return None


# -- polar quadrature ------------------------------------------------------------


def _polygon_sectors(K: Body):
    """Angular sectors (lo, hi, normal angle, height) per polygon edge."""
    poly = K._polygon()
    v_ang = np.arctan2(poly.vertices[:, 1], poly.vertices[:, 0])
    phis = np.arctan2(poly.normals[:, 1], poly.normals[:, 0])
    out = []
    for i in range(len(poly.normals)):
        lo, hi = v_ang[i - 1], v_ang[i]
        if hi <= lo:
            hi += 2.0 * pi
        out.append((lo, hi, phis[i], poly.heights[i]))
    return out


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = roots_legendre(k)
    return _GL_CACHE[k]


def radial_moment_integral(K: Body, mu: Density, moment: float = 0.0,
                           resolution: int | None = None) -> tuple[float, float]:
    """(value, error proxy) of int_K |x|^moment dmu by polar quadrature, n = 2, 3."""
    n = K.n
    if n == 2 and K.family in ("polytope", "wulff", "box", "cross_polytope"):
        body = _as_polygon_body(K)

        def one(order):
            x, w = _gl(order)
            total = 0.0
            for lo, hi, phi, h in _polygon_sectors(body):
                th = 0.5 * (hi - lo) * (x + 1.0) + lo
                rho = h / np.cos(th - phi)
                total += 0.5 * (hi - lo) * np.dot(w, mu.radial_mass(rho, moment))
            return total

        fine, coarse = one(32), one(16)
        return fine, abs(fine - coarse) + 1e-15 * abs(fine)

    grid_fine = quadrature_grid(n, resolution)
    rho_f = K.radial(grid_fine.nodes)
    fine = grid_fine.integrate(mu.radial_mass(rho_f, moment))
    coarse_res = max(8, (resolution or (720 if n == 2 else 64)) // 2)
    grid_c = quadrature_grid(n, coarse_res)
    coarse = grid_c.integrate(mu.radial_mass(K.radial(grid_c.nodes), moment))
    return fine, abs(fine - coarse) + 1e-15 * abs(fine)


def _as_polygon_body(K: Body) -> Body:
    from . import bodies as _b

    if K.family in ("polytope", "wulff"):
        return K
    if K.family == "box":
        a = np.asarray(K.params["a"], float)
        U = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        return _b.polytope(U, np.array([a[0], a[1], a[0], a[1]]))
    if K.family == "cross_polytope":
        s = K.params["scale"]
        r = 1.0 / np.sqrt(2.0)
        U = np.array([[r, r], [-r, r], [-r, -r], [r, -r]])
        return _b.polytope(U, np.full(4, s * r))
    raise DomainError(f"no polygon form for family {K.family}")


def polar_quadrature(K: Body, mu: Density, resolution: int | None = None) -> MeasureEstimate:
    if K.n > 3:
        raise DomainError("polar quadrature supports n = 2, 3 only")
    val, err = radial_moment_integral(K, mu, 0.0, resolution)
    nodes = resolution or (720 if K.n == 2 else 64)
    return MeasureEstimate(val, err, "polar-quadrature", nodes)


# -- Monte Carlo -----------------------------------------------------------------


def _mc_accumulate(sampler, budget):
    """Stream (values chunk) -> mean, stderr, and mean of extra columns."""
    s1 = 0.0
    s2 = 0.0
    done = 0
    while done < budget:
        m = min(_CHUNK, budget - done)
        v = sampler(m)
        s1 += float(np.sum(v))
        s2 += float(np.sum(v * v))
        done += m
    mean = s1 / budget
    var = max(0.0, (s2 - budget * mean * mean) / (budget - 1))
    return mean, np.sqrt(var / budget)


def monte_carlo(K: Body, mu: Density, budget: int = DEFAULT_BUDGET,
                seed: int = 0) -> MeasureEstimate:
    if budget < MIN_BUDGET:
        raise InputError(f"Monte Carlo budget below {MIN_BUDGET}")
    rng = np.random.default_rng(seed)
    n = K.n
    if mu.is_gaussian:
        def sampler(m):
            X = rng.standard_normal((m, n))
            return K.membership(X).astype(float)

        mean, se = _mc_accumulate(sampler, budget)
        return MeasureEstimate(mean, se, "monte-carlo", budget, seed)

    a = K.axis_box()
    vol_box = float(np.prod(2.0 * a))

    def sampler(m):
        X = rng.uniform(-1.0, 1.0, (m, n)) * a
        return np.where(K.membership(X), np.exp(-mu.V(X)), 0.0)

    mean, se = _mc_accumulate(sampler, budget)
    return MeasureEstimate(mean * vol_box, se * vol_box, "monte-carlo", budget, seed)


# -- front door ------------------------------------------------------------------


def measure(K: Body, mu: Density, method: str = "auto",
            budget: int = DEFAULT_BUDGET, seed: int = 0,
            resolution: int | None = None) -> MeasureEstimate:
    """Estimate mu(K) by the requested route ('auto' prefers exactness)."""
    if K.n != mu.n:
        raise InputError("body and density dimensions differ")
    if method == "closed-form":
        est = closed_form(K, mu)
        if est is None:
            raise DomainError(f"no closed form for {K.family} under {mu.name}")
        return est
    if method == "polar-quadrature":
        return polar_quadrature(K, mu, resolution)
    if method == "monte-carlo":
        return monte_carlo(K, mu, budget, seed)
    if method != "auto":
        raise InputError(f"unknown measure method {method!r}")
    est = closed_form(K, mu)
    if est is not None:
        return est
    if K.n <= 3 and K.family != "shifted_ball":
        return polar_quadrature(K, mu, resolution)
    return monte_carlo(K, mu, budget, seed)


# -- restricted integrals ----------------------------------------------------------


def _ratio_mc(K: Body, mu: Density, g, budget: int, seed: int) -> tuple[float, float]:
    """Delta-method ratio (int g dmu)/(mu(K)) with num/den covariance."""
    if budget < MIN_BUDGET:
        raise InputError(f"Monte Carlo budget below {MIN_BUDGET}")
    rng = np.random.default_rng(seed)
    n = K.n
    gaussian = mu.is_gaussian
    a = None if gaussian else K.axis_box()

    sA = sB = sAA = sBB = sAB = 0.0
    done = 0
    while done < budget:
        m = min(_CHUNK, budget - done)
        if gaussian:
            X = rng.standard_normal((m, n))
            inside = K.membership(X).astype(float)
            den = inside
        else:
            X = rng.uniform(-1.0, 1.0, (m, n)) * a
            den = np.where(K.membership(X), np.exp(-mu.V(X)), 0.0)
        num = np.where(den > 0, g(X), 0.0) * den
        sA += float(np.sum(num)); sB += float(np.sum(den))
        sAA += float(np.sum(num * num)); sBB += float(np.sum(den * den))
        sAB += float(np.sum(num * den))
        done += m

    N = budget
    A, B = sA / N, sB / N
    if B <= 0:
        raise DomainError("no samples landed in the body")
    cAA = (sAA - N * A * A) / (N - 1)
    cBB = (sBB - N * B * B) / (N - 1)
    cAB = (sAB - N * A * B) / (N - 1)
    ratio = A / B
    var = (cAA / B ** 2 - 2.0 * A * cAB / B ** 3 + A * A * cBB / B ** 4) / N
    return ratio, float(np.sqrt(max(var, 0.0)))


def restricted_moment(K: Body, mu: Density, power: int,
                      budget: int = DEFAULT_BUDGET, seed: int = 0,
                      method: str = "auto") -> RatioEstimate:
    """(1/mu(K)) int_K |x|^power dmu with propagated standard error."""
    if power not in (2, 4):
        raise InputError("moment power must be 2 or 4")
    if method in ("auto", "polar-quadrature") and K.n <= 3 and K.family != "shifted_ball":
        if method == "polar-quadrature" or K.family in (
                "ball", "box", "ellipsoid", "cross_polytope", "polytope", "wulff"):
            num, e1 = radial_moment_integral(K, mu, float(power))
            den, e0 = radial_moment_integral(K, mu, 0.0)
            val = num / den
            err = val * (e1 / max(num, 1e-300) + e0 / den)
            return RatioEstimate(val, err, "polar-quadrature", 0, None)
    val, se = _ratio_mc(K, mu, lambda X: np.einsum("ij,ij->i", X, X) ** (power // 2),
                        budget, seed)
    return RatioEstimate(val, se, "monte-carlo", budget, seed)


def k2_estimate(K: Body, mu: Density, budget: int = DEFAULT_BUDGET, seed: int = 0,
                method: str = "auto") -> RatioEstimate:
    """k2 witness (int_K Delta V dmu) / (n mu(K)); exact when Delta V is constant."""
    n = K.n
    if mu.lap_const is not None:
        return RatioEstimate(mu.lap_const / n, 0.0, "closed-form", 0, None)
    if method in ("auto", "polar-quadrature") and K.n <= 3 and K.family != "shifted_ball":
        a = mu.alpha
        num, e1 = radial_moment_integral(K, mu, a - 2.0)
        num *= (n + a - 2.0)
        den, e0 = radial_moment_integral(K, mu, 0.0)
        val = num / (n * den)
        err = abs(val) * (e1 / max(abs(num), 1e-300) + e0 / den)
        return RatioEstimate(val, err, "polar-quadrature", 0, None)
    val, se = _ratio_mc(K, mu, mu.lap_V, budget, seed)
    return RatioEstimate(val / n, se / n, "monte-carlo", budget, seed)


@dataclass(frozen=True)
class BoundReport:
    """Two-sided comparison lhs <= rhs with a 3 sigma allowance."""

    lhs: float
    rhs: float
    stderr: float
    margin: float
    ok: bool


def grad_v_bound_check(K: Body, mu: Density, budget: int = DEFAULT_BUDGET,
                       seed: int = 0, method: str = "auto") -> BoundReport:
    """Check (1/mu(K)) int |grad V|^2 dmu <= (1/mu(K)) int Delta V dmu."""
    n = K.n
    use_quad = (method in ("auto", "polar-quadrature")
                and K.n <= 3 and K.family != "shifted_ball")
    if use_quad:
        den, e0 = radial_moment_integral(K, mu, 0.0)
        if mu.is_gaussian:
            lhs_num, e1 = radial_moment_integral(K, mu, 2.0)
        elif mu.is_lebesgue:
            lhs_num, e1 = 0.0, 0.0
        else:
            lhs_num, e1 = radial_moment_integral(K, mu, 2.0 * (mu.alpha - 1.0))
        lhs = lhs_num / den
        if mu.lap_const is not None:
            rhs = mu.lap_const
            e2 = 0.0
        else:
            a = mu.alpha
            rhs_num, e2 = radial_moment_integral(K, mu, a - 2.0)
            rhs = (n + a - 2.0) * rhs_num / den
        err = (e1 + e2) / den + (abs(lhs) + abs(rhs)) * e0 / den
        margin = rhs - lhs
        return BoundReport(lhs, rhs, err, margin, margin >= -3.0 * err - 1e-12)
    lhs, se1 = _ratio_mc(K, mu, mu.grad_norm_sq, budget, seed)
    rhs, se2 = _ratio_mc(K, mu, mu.lap_V, budget, seed + 1)
    err = float(np.hypot(se1, se2))
    margin = rhs - lhs
    return BoundReport(lhs, rhs, err, margin, margin >= -3.0 * err)
