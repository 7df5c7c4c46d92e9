"""Log-concave density model e^{-V} with V even and convex.

Catalog:
    gaussian   V = |x|^2/2 + (n/2) log(2 pi)   (standard normal, k1 = 1)
    lebesgue   V = 0                           (k1 = 0)
    power      V = |x|^alpha / alpha, alpha >= 2  (k1 = 0 for alpha > 2)

All catalog densities are radial, which the polar-quadrature estimators
exploit through the closed-form radial mass

    radial_mass(rho, m) = integral_0^rho t^{n-1+m} e^{-V(t e)} dt,

an incomplete-gamma expression for every family here.  alpha < 2 is
excluded: V would fail to be C^2 at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma as gamma_fn
from math import log, pi

import numpy as np
from scipy.special import gammainc

from .errors import InputError


@dataclass(frozen=True, eq=False)
class Density:
    """Radial log-concave density with closed-form derivative evaluators.

    hess_quad(x, w) returns <Hess V(x) w, w> rowwise; lap_const is set when
    Delta V is constant (n for the Gaussian, 0 for Lebesgue), letting the
    estimators that only need integrals of Delta V short-circuit exactly.
    """

    name: str
    n: int
    alpha: float | None = None   # power family exponent

    def __post_init__(self):
        if self.name not in ("gaussian", "lebesgue", "power"):
            raise InputError(f"unknown density {self.name!r}")
        if self.name == "power":
            if self.alpha is None or self.alpha < 2:
                raise InputError("power density requires alpha >= 2 (C^2 at the origin)")

    # -- evaluators ----------------------------------------------------------

    def V(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        r2 = np.einsum("ij,ij->i", X, X)
        if self.name == "gaussian":
            return 0.5 * r2 + 0.5 * self.n * log(2.0 * pi)
        if self.name == "lebesgue":
            return np.zeros(X.shape[0])
        a = self.alpha
        return r2 ** (a / 2.0) / a

    def weight(self, X: np.ndarray) -> np.ndarray:
        return np.exp(-self.V(X))

    def grad_V(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.name == "gaussian":
            return X.copy()
        if self.name == "lebesgue":
            return np.zeros_like(X)
        a = self.alpha
        r = np.linalg.norm(X, axis=1, keepdims=True)
        return np.where(r > 0, r ** (a - 2.0), 0.0) * X

    def hess_quad(self, X: np.ndarray, W: np.ndarray) -> np.ndarray:
        """<Hess V(x) w, w> for paired rows of X and W."""
        X = np.atleast_2d(np.asarray(X, float))
        W = np.atleast_2d(np.asarray(W, float))
        w2 = np.einsum("ij,ij->i", W, W)
        if self.name == "gaussian":
            return w2
        if self.name == "lebesgue":
            return np.zeros(X.shape[0])
        a = self.alpha
        r = np.linalg.norm(X, axis=1)
        xw = np.einsum("ij,ij->i", X, W)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0,
                           r ** (a - 2.0) * w2 + (a - 2.0) * r ** (a - 4.0) * xw ** 2,
                           0.0)
        return out

    def lap_V(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.name == "gaussian":
            return np.full(X.shape[0], float(self.n))
        if self.name == "lebesgue":
            return np.zeros(X.shape[0])
        a = self.alpha
        r = np.linalg.norm(X, axis=1)
        return (self.n + a - 2.0) * r ** (a - 2.0)

    def grad_norm_sq(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        r2 = np.einsum("ij,ij->i", X, X)
        if self.name == "gaussian":
            return r2
        if self.name == "lebesgue":
            return np.zeros(X.shape[0])
        return r2 ** (self.alpha - 1.0)

    # -- analytic structure ----------------------------------------------------

    @property
    def k1(self) -> float:
        """Uniform convexity: Hess V >= k1 Id everywhere."""
        if self.name == "gaussian":
            return 1.0
        if self.name == "power" and self.alpha == 2.0:
            return 1.0
        return 0.0

    @property
    def lap_const(self) -> float | None:
        if self.name == "gaussian":
            return float(self.n)
        if self.name == "lebesgue":
            return 0.0
        if self.alpha == 2.0:
            return float(self.n)
        return None

    @property
    def is_gaussian(self) -> bool:
        return self.name == "gaussian"

    @property
    def is_lebesgue(self) -> bool:
        return self.name == "lebesgue"

    def radial_mass(self, rho, moment: float = 0.0):
        """integral_0^rho t^{n-1+m} e^{-V(t)} dt, vectorized over rho.

        Gaussian includes the (2 pi)^{-n/2} normalization inside e^{-V}.
        """
        rho = np.asarray(rho, dtype=float)
        s = (self.n + moment)
        if self.name == "lebesgue":
            return rho ** s / s
        if self.name == "gaussian":
            k = s / 2.0
            return ((2.0 * pi) ** (-self.n / 2.0) * 2.0 ** (k - 1.0)
                    * gamma_fn(k) * gammainc(k, rho ** 2 / 2.0))
        a = self.alpha
        k = s / a
        return a ** (k - 1.0) * gamma_fn(k) * gammainc(k, rho ** a / a)

    def to_config(self) -> dict:
        cfg = {"name": self.name}
        if self.name == "power":
            cfg["alpha"] = self.alpha
        return cfg


def gaussian(n: int) -> Density:
    return Density("gaussian", n)


def lebesgue(n: int) -> Density:
    return Density("lebesgue", n)


def power(alpha: float, n: int) -> Density:
    return Density("power", n, alpha=float(alpha))
