"""End-to-end global inequality checks: midpoint deficits, concavity sweeps,
the Gaussian dilates family, and the restricted moment inequalities.

The central quantity is the (p, q) midpoint deficit

    deficit = mu(M)^{q/n} - lam mu(K)^{q/n} - (1-lam) mu(L)^{q/n},
    M = Wulff((lam h_K^p + (1-lam) h_L^p)^{1/p}),

computed in log space when q = 0 (the exact limit of the power mean).
Verdicts use 3 sigma bands with a 10 sigma failure threshold so Monte
Carlo noise is separated from genuine violations; deterministic estimates
carry a tiny floating-point allowance instead of a zero band.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bodies import Body, interpolate
from .densities import Density
from .errors import InputError, NumericError
from .measures import DEFAULT_BUDGET, MeasureEstimate, measure, restricted_moment

ANCHOR_PQ = ("mu(lam*K +_p (1-lam)*L)^(q/n) >= "
             "lam*mu(K)^(q/n) + (1-lam)*mu(L)^(q/n)")
ANCHOR_PQ_LOG = ("log mu(lam*K +_p (1-lam)*L) >= "
                 "lam*log mu(K) + (1-lam)*log mu(L)")
ANCHOR_CFM = "Var(|x|^2) <= 2 E(|x|^2) under gamma restricted to K"
ANCHOR_DIL = ("n + E|x|^2 >= Var(|x|^2) + (p/n)(n - E|x|^2)^2 "
              "+ (1-p)(n - E|x|^2) under restricted gamma")

IMPLICATION_NOTE = ("family-level implication: if the (p,q) inequality holds for "
                    "all symmetric pairs under this density, the (p+t,q+t) "
                    "inequality follows for every t >= 0")


def derive_seed(seed: int, *indices: int) -> int:
    """Deterministic per-cell stream seeds from a master seed."""
    ss = np.random.SeedSequence([int(seed)] + [int(i) for i in indices])
    return int(ss.generate_state(1, np.uint64)[0])


def _verdict(deficit: float, stderr: float, scale: float) -> str:
    sigma = max(stderr, 1e-14 * scale)
    if deficit >= -3.0 * sigma:
        return "holds"
    if abs(deficit) > 10.0 * sigma:
        return "fails"
    return "inconclusive"


def _phi(est: MeasureEstimate, q: float, n: int) -> tuple[float, float]:
    """(value, stderr) of mu^{q/n}, or log mu when q = 0 (delta method)."""
    if est.value <= 0:
        raise NumericError("nonpositive measure estimate in deficit")
    if q == 0.0:
        return float(np.log(est.value)), est.stderr / est.value
    c = q / n
    return est.value ** c, abs(c) * est.value ** (c - 1.0) * est.stderr


@dataclass(frozen=True)
class InequalityReport:
    deficit: float
    stderr: float
    verdict: str
    inputs: dict
    mu_K: MeasureEstimate
    mu_L: MeasureEstimate
    mu_M: MeasureEstimate
    formula: str
    anchor: str
    annotations: tuple[str, ...] = field(default=())

    def to_row(self) -> dict:
        row = {"deficit": self.deficit, "stderr": self.stderr,
               "verdict": self.verdict,
               "mu_K": self.mu_K.value, "mu_L": self.mu_L.value,
               "mu_M": self.mu_M.value, "formula": self.formula,
               "anchor": self.anchor}
        row.update({k: v for k, v in self.inputs.items()
                    if isinstance(v, (int, float, str))})
        return row


def midpoint_check(K: Body, L: Body, lam: float, p: float, q: float,
                   mu: Density, budget: int = DEFAULT_BUDGET, seed: int = 0,
                   method: str = "auto") -> InequalityReport:
    """Deficit of the (p, q) inequality at a single lambda."""
    if not 0.0 <= q <= p <= 1.0:
        raise InputError(f"need 0 <= q <= p <= 1, got p={p}, q={q}")
    if not (K.symmetric and L.symmetric) and p != 1.0:
        raise InputError("non-symmetric bodies are supported only at p = 1 "
                         "(the failure demonstration)")
    M = interpolate(K, L, lam, p)
    mK = measure(K, mu, method, budget, derive_seed(seed, 0))
    mL = measure(L, mu, method, budget, derive_seed(seed, 1))
    if M is K:
        mM = mK
    elif M is L:
        mM = mL
    else:
        mM = measure(M, mu, method, budget, derive_seed(seed, 2))

    n = K.n
    phiM, sM = _phi(mM, q, n)
    phiK, sK = _phi(mK, q, n)
    phiL, sL = _phi(mL, q, n)
    if phiM == phiK == phiL:
        deficit = 0.0
    else:
        deficit = phiM - lam * phiK - (1.0 - lam) * phiL
    stderr = float(np.sqrt(sM ** 2 + (lam * sK) ** 2 + ((1.0 - lam) * sL) ** 2))
    scale = max(abs(phiM), abs(phiK), abs(phiL), 1e-30)
    verdict = _verdict(deficit, stderr, scale)

    annotations = (IMPLICATION_NOTE,) if verdict == "holds" else ()
    return InequalityReport(
        deficit, stderr, verdict,
        {"lambda": lam, "p": p, "q": q, "density": mu.name, "n": n,
         "budget": budget, "seed": seed, "method": method,
         "K": K.family, "L": L.family},
        mK, mL, mM, "pq-midpoint-deficit",
        ANCHOR_PQ_LOG if q == 0.0 else ANCHOR_PQ, annotations)


@dataclass(frozen=True)
class SweepReport:
    lams: np.ndarray
    phis: np.ndarray
    stderrs: np.ndarray
    second_diffs: np.ndarray
    second_stderrs: np.ndarray
    concave: bool
    max_violation: float      # most positive 3-sigma-adjusted second difference
    inputs: dict
    measures: tuple[MeasureEstimate, ...]

    def rows(self):
        for i, la in enumerate(self.lams):
            yield {"lambda": float(la), "phi": float(self.phis[i]),
                   "stderr": float(self.stderrs[i]),
                   "mu": self.measures[i].value, **self.inputs}


def concavity_sweep(K: Body, L: Body, p: float, q: float, mu: Density,
                    lambda_grid=None, budget: int = DEFAULT_BUDGET,
                    seed: int = 0, method: str = "auto") -> SweepReport:
    """phi(lam) = mu(M_lam)^{q/n} along the family, with discrete concavity.

    lam is the weight of K, so phi(0) = mu(L)^{q/n} and phi(1) = mu(K)^{q/n}.
    """
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 1.0, 9)
    lams = np.asarray(lambda_grid, float)
    if len(lams) < 5 or np.ptp(np.diff(lams)) > 1e-12:
        raise InputError("lambda grid must hold >= 5 equally spaced points")
    if not 0.0 <= q <= p <= 1.0:
        raise InputError(f"need 0 <= q <= p <= 1, got p={p}, q={q}")

    ests, phis, stderrs = [], [], []
    for i, la in enumerate(lams):
        M = interpolate(K, L, float(la), p)
        est = measure(M, mu, method, budget, derive_seed(seed, i))
        phi, s = _phi(est, q, K.n)
        ests.append(est)
        phis.append(phi)
        stderrs.append(s)
    phis = np.array(phis)
    stderrs = np.array(stderrs)

    d2 = phis[:-2] - 2.0 * phis[1:-1] + phis[2:]
    d2s = np.sqrt(stderrs[:-2] ** 2 + 4.0 * stderrs[1:-1] ** 2 + stderrs[2:] ** 2)
    scale = float(np.max(np.abs(phis)))
    adj = d2 - 3.0 * np.maximum(d2s, 1e-14 * scale)
    concave = bool(np.all(adj <= 0.0))
    return SweepReport(lams, phis, stderrs, d2, d2s, concave,
                       float(np.max(adj)),
                       {"p": p, "q": q, "density": mu.name,
                        "budget": budget, "seed": seed},
                       tuple(ests))


def dilates_check(K: Body, t: float, p: float, lambda_grid=None,
                  budget: int = DEFAULT_BUDGET, seed: int = 0,
                  method: str = "auto") -> SweepReport:
    """Gaussian dilates family: phi(lam) = gamma((1-lam) K +_p lam tK)^{p/n}.

    Requires the Gaussian density and q = p.  K must be origin-symmetric:
    the dilates statement needs the Gaussian barycenter of K at the origin,
    which symmetry guarantees; explicitly barycentered non-symmetric input
    is out of scope.
    """
    if t <= 0:
        raise InputError("dilation factor must be positive")
    if not K.symmetric:
        raise InputError("dilates check requires an origin-symmetric body "
                         "(barycenter condition)")

    def run(mu: Density) -> SweepReport:
        if not mu.is_gaussian:
            raise InputError("dilates check is a Gaussian-measure statement")
        # Weight lam on tK: phi(0) = gamma(K), phi(1) = gamma(tK).
        return concavity_sweep(K.scaled(t), K, p, p, mu, lambda_grid,
                               budget, seed, method)

    from .densities import gaussian

    return run(gaussian(K.n))


@dataclass(frozen=True)
class MomentReport:
    values: dict
    margin: float
    stderr: float
    ok: bool
    formula: str
    anchor: str


def cfm_moment_check(K: Body, budget: int = DEFAULT_BUDGET, seed: int = 0,
                     method: str = "auto") -> MomentReport:
    """Variance bound Var(|x|^2) <= 2 E|x|^2 under Gaussian restricted to K."""
    if not K.symmetric:
        raise InputError("moment inequality stated for symmetric bodies")
    from .densities import gaussian

    mu = gaussian(K.n)
    m2 = restricted_moment(K, mu, 2, budget, derive_seed(seed, 0), method)
    m4 = restricted_moment(K, mu, 4, budget, derive_seed(seed, 1), method)
    var4 = m4.value - m2.value ** 2
    bound = 2.0 * m2.value
    margin = bound - var4
    stderr = float(np.sqrt(m4.stderr ** 2
                           + ((2.0 * m2.value + 2.0) * m2.stderr) ** 2))
    sigma = max(stderr, 1e-12 * max(abs(bound), abs(var4), 1.0))
    return MomentReport({"E2": m2.value, "E4": m4.value,
                         "var": var4, "bound": bound},
                        margin, stderr, margin >= -3.0 * sigma,
                        "cfm-variance-bound", ANCHOR_CFM)


def dilates_local_check(K: Body, p: float, budget: int = DEFAULT_BUDGET,
                        seed: int = 0, method: str = "auto") -> MomentReport:
    """Scalar moment inequality behind the Gaussian dilates case.

    With m2 = E|x|^2, m4 = E|x|^4 under restricted gamma:
    n + m2 >= (m4 - m2^2) + (p/n)(n - m2)^2 + (1-p)(n - m2).
    """
    if not 0.0 <= p <= 1.0:
        raise InputError("p must lie in [0, 1]")
    if not K.symmetric:
        raise InputError("moment inequality stated for symmetric bodies")
    from .densities import gaussian

    mu = gaussian(K.n)
    n = K.n
    m2 = restricted_moment(K, mu, 2, budget, derive_seed(seed, 0), method)
    m4 = restricted_moment(K, mu, 4, budget, derive_seed(seed, 1), method)
    lhs = n + m2.value
    var4 = m4.value - m2.value ** 2
    rhs = var4 + (p / n) * (n - m2.value) ** 2 + (1.0 - p) * (n - m2.value)
    margin = lhs - rhs
    dm2 = 1.0 + 2.0 * m2.value + (2.0 * p / n) * (n - m2.value) + (1.0 - p)
    stderr = float(np.hypot(dm2 * m2.stderr, m4.stderr))
    sigma = max(stderr, 1e-12 * max(abs(lhs), abs(rhs), 1.0))
    return MomentReport({"E2": m2.value, "E4": m4.value, "lhs": lhs, "rhs": rhs},
                        margin, stderr, margin >= -3.0 * sigma,
                        "dilates-moment-bound", ANCHOR_DIL)
