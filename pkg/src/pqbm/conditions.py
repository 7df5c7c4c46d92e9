"""Sufficient-condition evaluators for the (p, q) inequality thresholds.

Every evaluator reduces to explicit arithmetic in the inputs

    n, p, q, r (inradius), R (optional circumradius), k1, k2, C_poin

and reports a signed slack: satisfied iff slack >= 0.  The Gaussian case
k1 = k2 = 1 collapses the general conditions to the familiar forms
p >= 1 - 2 r^2/(n+1) (q = 0), 4q + (n+1)(1-p)/r^2 <= 2, and, under
inclusion, p >= 1 - r/(sqrt(n) + 1/4).

The Poincare-constant evaluators accept either a user override or the
subspace Rayleigh estimate below, and degrade to the uniform-convexity
floor C_poin^{-2} >= k1 when nothing better is certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.linalg import eigh

from .bodies import Body
from .densities import Density
from .errors import DomainError, InputError
from .measures import DEFAULT_BUDGET

SYSTEMS = ("poincare-quadratic", "poincare-radius", "poincare-inclusion")


@dataclass(frozen=True)
class ConditionInput:
    n: int
    p: float
    q: float
    r: float
    k1: float
    k2: float
    R: float | None = None
    c_poin_inv_sq: float | None = None   # override for C_poin^{-2}

    def __post_init__(self):
        if not 0.0 <= self.q <= self.p <= 1.0:
            raise InputError(f"need 0 <= q <= p <= 1, got p={self.p}, q={self.q}")
        if self.r <= 0:
            raise InputError("inradius must be positive")
        if self.k1 < 0 or self.k2 < 0:
            raise InputError("curvature parameters k1, k2 must be nonnegative")
        if self.n < 1:
            raise InputError("dimension must be positive")

    @classmethod
    def for_gaussian(cls, n: int, p: float, q: float, r: float,
                     R: float | None = None) -> "ConditionInput":
        return cls(n, p, q, r, 1.0, 1.0, R)


@dataclass(frozen=True)
class ConditionVerdict:
    satisfied: bool
    branch: str
    slack: float
    formula: str
    extras: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()


def _snap(slack: float, scale: float = 1.0) -> float:
    """Collapse rounding-level slacks to exactly 0 so threshold inputs are
    classified as satisfied (slack >= 0 <=> satisfied stays an equivalence)."""
    return 0.0 if abs(slack) <= 1e-12 * max(1.0, scale) else slack


def theorem_main_check(inp: ConditionInput) -> ConditionVerdict:
    """Inradius-based sufficient condition, two branches.

    Branch 1 (k1 in [1/n, 1]):
        (1-p)(1+n)/r^2 + q (1+k2)(1+k1) <= 2 k1.
    Branch 2 (any k1 >= 0), theta = (1-p)/r^2:
        q (k1^2 + k1 k2 - (n k1 + k2) theta)
            <= k1^2 + n theta^2 - theta (n+1) k1,   and   theta <= k1/n.
    """
    n, p, q, r, k1, k2 = inp.n, inp.p, inp.q, inp.r, inp.k1, inp.k2
    theta = (1.0 - p) / r ** 2
    flags: list[str] = []

    branch1_ok = 1.0 / n <= k1 <= 1.0
    lhs1 = (1.0 - p) * (1.0 + n) / r ** 2 + q * (1.0 + k2) * (1.0 + k1)
    slack1 = _snap(2.0 * k1 - lhs1, max(abs(lhs1), 2.0 * k1))
    if not branch1_ok:
        flags.append("branch1-out-of-hypothesis(k1 outside [1/n, 1])")

    slack_a = _snap(k1 ** 2 + n * theta ** 2 - theta * (n + 1.0) * k1
                    - q * (k1 ** 2 + k1 * k2 - (n * k1 + k2) * theta),
                    k1 ** 2 + theta)
    slack_b = _snap(k1 / n - theta, k1 + theta)
    slack2 = min(slack_a, slack_b)
    if k1 == 0.0:
        flags.append("k1=0-degenerate: branch 2 forces p = 1 (documented edge case)")

    candidates = {}
    if branch1_ok:
        candidates["inradius-branch1"] = slack1
    candidates["inradius-branch2"] = slack2
    branch, slack = max(candidates.items(), key=lambda kv: kv[1])
    return ConditionVerdict(
        slack >= 0.0, branch, slack, "pq-threshold-inradius",
        {"slack_branch1": slack1 if branch1_ok else None,
         "slack_branch2": slack2, "slack_branch2_main": slack_a,
         "slack_branch2_aux": slack_b},
        tuple(flags))


def prop_main_check(inp: ConditionInput) -> ConditionVerdict:
    """Sharper inradius condition valid when K is inside L and k1 <= 1:

        (1-p)(2 sqrt(n) sqrt(1+k2) sqrt(1+k1) + sqrt(k1))/(2r)
            + q (1+k2)(1+k1) <= 2 k1.
    """
    n, p, q, r, k1, k2 = inp.n, inp.p, inp.q, inp.r, inp.k1, inp.k2
    flags: list[str] = []
    if k1 > 1.0:
        flags.append("out-of-hypothesis(k1 > 1)")
    lhs = ((1.0 - p) * (2.0 * sqrt(n) * sqrt(1.0 + k2) * sqrt(1.0 + k1)
                        + sqrt(k1)) / (2.0 * r)
           + q * (1.0 + k2) * (1.0 + k1))
    slack = _snap(2.0 * k1 - lhs, max(abs(lhs), 2.0 * k1))
    return ConditionVerdict(slack >= 0.0 and not flags, "inclusion-sharp",
                            slack, "pq-threshold-inclusion", {}, tuple(flags))


def lebesgue_threshold(n: int, C_user: float) -> dict:
    """Lebesgue inclusion threshold p* = 1 - C n^{-3/4} (absolute constant
    supplied by the caller), with the older n^{-3/2} rate for comparison."""
    if C_user <= 0:
        raise InputError("threshold constant must be positive")
    p_star = max(1.0 - C_user * n ** -0.75, 0.0)
    prior = max(1.0 - C_user * n ** -1.5, 0.0)
    return {"n": n, "C": C_user, "p_star": p_star, "p_star_prior_rate": prior,
            "label": "asymptotic, constant unspecified"}


def remark_conditions_check(inp: ConditionInput,
                            system: str = "poincare-quadratic"
                            ) -> ConditionVerdict:
    """Poincare-refined conditions; both displayed inequalities are required.

    systems:
      poincare-quadratic   (1-p)(C^{-2}/k1 + n)/r^2 + q(1+k2)(1+C^{-2})
                               <= k1 + C^{-2},
                           with companion (1-p)(1/k1 - n)/r^2 <= 1 - k1;
      poincare-radius      variant using R, valid when R <= C^{-1}/k1;
      poincare-inclusion   (1-p)(2 sqrt(n) sqrt(1+k2) sqrt(1+C^{-2})
                               + C^{-1})/(2r) + q(1+k2)(1+C^{-2})
                               <= k1 + C^{-2},
                           with companion
                           (1-p)(C - C^{-1} - sqrt(n) sqrt(1+k2)
                               sqrt(1+C^{-2}))/(2r) <= 1 - k1.

    Substituting C^{-2} = k1 (the uniform-convexity floor) reproduces the
    plain inradius/inclusion conditions exactly.
    """
    if system not in SYSTEMS:
        raise InputError(f"unknown condition system {system!r}")
    if inp.c_poin_inv_sq is None:
        raise InputError("missing Poincare input: supply c_poin_inv_sq "
                         "(override or estimate)")
    n, p, q, r, k1, k2 = inp.n, inp.p, inp.q, inp.r, inp.k1, inp.k2
    ci2 = inp.c_poin_inv_sq
    if ci2 <= 0:
        raise InputError("C_poin^{-2} must be positive")
    flags: list[str] = []
    if ci2 < k1 - 1e-12:
        flags.append("below-uniform-convexity-floor(C^{-2} < k1)")
    ci = sqrt(ci2)
    cpoin = 1.0 / ci

    if system == "poincare-quadratic":
        if k1 <= 0:
            raise DomainError("poincare-quadratic system needs k1 > 0")
        lhs = ((1.0 - p) * (ci2 / k1 + n) / r ** 2
               + q * (1.0 + k2) * (1.0 + ci2))
        primary = _snap((k1 + ci2) - lhs, max(abs(lhs), k1 + ci2))
        companion = (1.0 - k1) - (1.0 - p) * (1.0 / k1 - n) / r ** 2
    elif system == "poincare-radius":
        if inp.R is None:
            raise InputError("poincare-radius system needs the circumradius R")
        if k1 > 0 and inp.R > cpoin / k1 + 1e-12:
            flags.append("out-of-hypothesis(R > C_poin^{-1}/k1)")
        R = inp.R
        lhs = ((1.0 - p) * (2.0 * R * ci + n - k1 * R ** 2) / r ** 2
               + q * (1.0 + k2) * (1.0 + ci2))
        primary = _snap((k1 + ci2) - lhs, max(abs(lhs), k1 + ci2))
        companion = (1.0 - k1) - (1.0 - p) * (k1 * R ** 2 - n) / r ** 2
    else:
        lhs = ((1.0 - p) * (2.0 * sqrt(n) * sqrt(1.0 + k2)
                            * sqrt(1.0 + ci2) + ci) / (2.0 * r)
               + q * (1.0 + k2) * (1.0 + ci2))
        primary = _snap((k1 + ci2) - lhs, max(abs(lhs), k1 + ci2))
        companion = (1.0 - k1) - ((1.0 - p) * (cpoin - ci - sqrt(n)
                                               * sqrt(1.0 + k2)
                                               * sqrt(1.0 + ci2)) / (2.0 * r))

    ok = primary >= 0.0 and companion >= 0.0 and not any(
        f.startswith("out-of-hypothesis") for f in flags)
    return ConditionVerdict(ok, system, primary, f"pq-threshold-{system}",
                            {"companion_slack": companion}, tuple(flags))


# ---------------------------------------------------------------------------
# numerical Rayleigh estimate of the Poincare constant


def _monomial_basis(n: int, degree: int):
    """Exponent tuples of total degree 1..degree (constants excluded)."""
    exps = []
    if n == 2:
        for d in range(1, degree + 1):
            for i in range(d + 1):
                exps.append((d - i, i))
    elif n == 3:
        for d in range(1, degree + 1):
            for i in range(d + 1):
                for j in range(d - i + 1):
                    exps.append((d - i - j, i, j))
    else:
        raise DomainError("Poincare estimation supports n = 2, 3")
    return exps


def _monomial_values(X: np.ndarray, exps) -> tuple[np.ndarray, np.ndarray]:
    N, n = X.shape
    vals = np.empty((len(exps), N))
    grads = np.empty((len(exps), N, n))
    for k, e in enumerate(exps):
        v = np.ones(N)
        for j, ej in enumerate(e):
            if ej:
                v = v * X[:, j] ** ej
        vals[k] = v
        for j, ej in enumerate(e):
            if ej == 0:
                grads[k, :, j] = 0.0
                continue
            g = ej * np.ones(N)
            for i, ei in enumerate(e):
                pw = ei - 1 if i == j else ei
                if pw:
                    g = g * X[:, i] ** pw
            grads[k, :, j] = g
    return vals, grads


def _interior_nodes_2d(K: Body, mu: Density, n_radial: int = 48,
                       resolution: int = 512):
    """Deterministic interior nodes/weights over a planar body."""
    from scipy.special import roots_legendre

    from .measures import _as_polygon_body, _polygon_sectors
    from .sphere import circle_grid

    cutoff = _radial_cutoff(mu)
    t, wt = roots_legendre(n_radial)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt

    if K.family in ("polytope", "wulff", "box", "cross_polytope"):
        body = _as_polygon_body(K)
        x16, w16 = roots_legendre(32)
        pts_all, w_all = [], []
        for lo, hi, phi, h in _polygon_sectors(body):
            th = 0.5 * (hi - lo) * (x16 + 1.0) + lo
            wth = 0.5 * (hi - lo) * w16
            rho = np.minimum(h / np.cos(th - phi), cutoff)
            u = np.column_stack([np.cos(th), np.sin(th)])
            pts = (t[:, None, None] * (rho[:, None] * u)[None, :, :]).reshape(-1, 2)
            w = (wt[:, None] * t[:, None] * (rho ** 2 * wth)[None, :]).reshape(-1)
            pts_all.append(pts)
            w_all.append(w)
        pts = np.vstack(pts_all)
        w = np.concatenate(w_all)
    else:
        grid = circle_grid(resolution)
        rho = np.minimum(K.radial(grid.nodes), cutoff)
        pts = (t[:, None, None] * (rho[:, None] * grid.nodes)[None, :, :]).reshape(-1, 2)
        w = (wt[:, None] * t[:, None] * (rho ** 2 * grid.weights)[None, :]).reshape(-1)
    return pts, w * np.exp(-mu.V(pts))


def _radial_cutoff(mu: Density) -> float:
    if mu.is_gaussian:
        return 16.0
    if mu.name == "power":
        return (80.0 * mu.alpha) ** (1.0 / mu.alpha) + 4.0
    return np.inf


@dataclass(frozen=True)
class PoincareEstimate:
    """Subspace Rayleigh estimate of the spectral gap C_poin^{-2}.

    lambda_subspace minimizes int |grad f|^2 dmu / Var(f) over the
    polynomial span, hence is biased toward larger C_poin^{-2}; together
    with the uniform-convexity floor k1 it brackets the true gap:
    k1 <= C_poin^{-2} <= lambda_subspace.
    """

    lambda_subspace: float
    floor_k1: float
    degree: int
    method: str
    uncertainty: float

    @property
    def bracket(self) -> tuple[float, float]:
        return (self.floor_k1, self.lambda_subspace)

    @property
    def c_poin_lower(self) -> float:
        return self.lambda_subspace ** -0.5

    def label(self) -> str:
        return "subspace estimate, biased toward larger C_poin^{-2}"


def poincare_estimate(K: Body, mu: Density, basis_degree: int = 6,
                      budget: int = DEFAULT_BUDGET, seed: int = 0
                      ) -> PoincareEstimate:
    """Minimize the Rayleigh quotient over polynomials of the given degree.

    Moment matrices come from deterministic quadrature in n = 2 and Monte
    Carlo in n = 3; the n = 3 uncertainty field carries a first-order
    eigenvalue perturbation bound from the matrix standard errors.
    """
    n = K.n
    exps = _monomial_basis(n, basis_degree)
    if n == 2:
        X, w = _interior_nodes_2d(K, mu)
        uncertainty = 0.0
        method = "quadrature"
    else:
        rng = np.random.default_rng(seed)
        m = max(budget, 10 ** 5)
        if mu.is_gaussian:
            X = rng.standard_normal((m, 3))
            X = X[K.membership(X)]
            w = np.full(len(X), 1.0 / m)
        else:
            a = K.axis_box()
            X = rng.uniform(-1.0, 1.0, (m, 3)) * a
            X = X[K.membership(X)]
            w = np.exp(-mu.V(X)) * float(np.prod(2 * a)) / m
        method = "monte-carlo"
        uncertainty = -1.0   # filled below
    vals, grads = _monomial_values(X, exps)

    mass = float(np.sum(w))
    first = vals @ w
    A = np.einsum("ikd,jkd,k->ij", grads, grads, w)
    B = np.einsum("ik,jk,k->ij", vals, vals, w) - np.outer(first, first) / mass

    bev = np.linalg.eigvalsh(B)
    if bev[0] <= 1e-10 * bev[-1]:
        raise DomainError("degenerate basis: covariance Gram is singular")
    lam = float(eigh(A, B, eigvals_only=True)[0])
    if method == "monte-carlo":
        # Crude first-order perturbation: relative Frobenius noise of the
        # moment matrices scaled onto the eigenvalue.
        rel = 1.0 / np.sqrt(max(len(X), 1))
        uncertainty = lam * 4.0 * rel
    return PoincareEstimate(lam, mu.k1, basis_degree, method, uncertainty)
