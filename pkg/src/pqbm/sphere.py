"""Direction grids and quadrature on the unit sphere S^{n-1}, 2 <= n <= 6.

Two kinds of node sets are provided:

* evaluation grids -- the shared, deterministic direction sets on which
  support functions are tabulated (equally spaced angles for n = 2, a
  symmetrized low-discrepancy point set plus the +-axis directions for
  n >= 3);
* quadrature grids -- node/weight pairs integrating over the sphere
  (trapezoid on the circle, Gauss-Legendre x uniform-azimuth lat-long
  grids on S^2), used for surface and polar-volume integrals.

All grids are closed under u -> -u so that even functions and symmetric
bodies are represented without bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import ndtri, roots_legendre
from scipy.stats import qmc

from .errors import InputError

DEFAULT_ANGLES_2D = 720
DEFAULT_POINTS_ND = 4096

UNIT_TOL = 1e-12


def sphere_area(n: int) -> float:
    """Surface measure of S^{n-1} (2*pi for the circle, 4*pi for S^2)."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def check_unit(u: np.ndarray, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate a single direction or an array of row directions."""
    u = np.asarray(u, dtype=float)
    norms = np.linalg.norm(u, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        raise InputError(f"direction not unit length within {tol:g}")
    return u


def circle_angles(m: int) -> np.ndarray:
    return 2.0 * pi * np.arange(m) / m


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=32)
def eval_directions(n: int, m: int | None = None) -> np.ndarray:
    """Shared evaluation directions: (M, n) unit rows, closed under negation.

    n = 2: m equally spaced angles (m even, default 720).
    n >= 3: m/2 - n unscrambled Halton points mapped through the inverse
    Gaussian CDF and normalized, plus their negations and the 2n axis
    directions; defaults to 4096 + 2n total.
    """
    if not 2 <= n <= 6:
        raise InputError(f"ambient dimension must be in [2, 6], got {n}")
    if n == 2:
        m = DEFAULT_ANGLES_2D if m is None else m
        if m % 2:
            raise InputError("2D evaluation grid size must be even")
        th = circle_angles(m)
        return _readonly(np.column_stack([np.cos(th), np.sin(th)]))

    m = DEFAULT_POINTS_ND if m is None else m
    half = m // 2
    sampler = qmc.Halton(d=n, scramble=False)
    # Oversample: the first Halton point is the origin and maps to -inf.
    raw = sampler.random(2 * half + 8)
    z = ndtri(raw)
    good = np.all(np.isfinite(z), axis=1)
    z = z[good]
    norms = np.linalg.norm(z, axis=1)
    z = z[norms > 1e-8]
    u = z[:half] / np.linalg.norm(z[:half], axis=1, keepdims=True)
    axes = np.eye(n)
    dirs = np.vstack([u, -u, axes, -axes])
    return _readonly(dirs)


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature nodes with weights and orthonormal tangent frames.

    weights sum to the surface measure of S^{n-1}.  frame[k] holds n-1
    orthonormal tangent vectors at nodes[k]; for n = 2 this is the
    rotated direction u^perp, for n = 3 the (e_theta, e_phi) pair of the
    lat-long parametrization.
    """

    n: int
    nodes: np.ndarray        # (M, n)
    weights: np.ndarray      # (M,)
    frame: np.ndarray        # (M, n-1, n)
    theta: np.ndarray | None = None   # n = 2 only: the angles

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=32)
def circle_grid(m: int = DEFAULT_ANGLES_2D) -> SphereGrid:
    """Uniform trapezoid grid on S^1 (spectrally accurate for smooth data)."""
    th = circle_angles(m)
    u = np.column_stack([np.cos(th), np.sin(th)])
    uperp = np.column_stack([-np.sin(th), np.cos(th)])
    w = np.full(m, 2.0 * pi / m)
    return SphereGrid(2, _readonly(u), _readonly(w), _readonly(uperp[:, None, :]),
                      theta=_readonly(th))


@lru_cache(maxsize=32)
def latlong_grid(n_polar: int = 64, n_azimuth: int = 128) -> SphereGrid:
    """Gauss-Legendre (in cos polar) x uniform azimuth grid on S^2.

    Exact for spherical polynomials of high degree; nodes avoid the poles
    so 1/sin(theta) factors stay bounded.
    """
    t, wt = roots_legendre(n_polar)          # t = cos(polar angle)
    phi = 2.0 * pi * np.arange(n_azimuth) / n_azimuth
    wphi = 2.0 * pi / n_azimuth

    ct = np.repeat(t, n_azimuth)
    st = np.sqrt(1.0 - ct ** 2)
    cp = np.tile(np.cos(phi), n_polar)
    sp = np.tile(np.sin(phi), n_polar)

    nodes = np.column_stack([st * cp, st * sp, ct])
    weights = np.repeat(wt, n_azimuth) * wphi

    # e_theta points toward decreasing z along meridians, e_phi east.
    e_theta = np.column_stack([ct * cp, ct * sp, -st])
    e_phi = np.column_stack([-sp, cp, np.zeros_like(sp)])
    frame = np.stack([e_theta, e_phi], axis=1)
    return SphereGrid(3, _readonly(nodes), _readonly(weights), _readonly(frame))


def quadrature_grid(n: int, resolution: int | None = None) -> SphereGrid:
    """Default surface-quadrature grid for the ambient dimension."""
    if n == 2:
        return circle_grid(resolution or DEFAULT_ANGLES_2D)
    if n == 3:
        res = resolution or 64
        return latlong_grid(res, 2 * res)
    raise InputError(f"sphere quadrature grids exist for n = 2, 3 only, got n={n}")


def negation_permutation(grid: SphereGrid) -> np.ndarray:
    """Index map j with nodes[j[k]] == -nodes[k]; both grids here admit one.

    Circle grids pair k with k + M/2; lat-long grids reverse the polar
    index (Gauss-Legendre roots are symmetric) and shift azimuth by pi.
    """
    m = grid.size
    if grid.n == 2:
        return (np.arange(m) + m // 2) % m
    # Infer the lat-long layout: azimuth is the fast axis.
    z = grid.nodes[:, 2]
    n_az = int(np.argmax(np.abs(np.diff(z)) > 1e-14)) + 1
    n_polar = m // n_az
    i = np.arange(m) // n_az
    j = np.arange(m) % n_az
    return (n_polar - 1 - i) * n_az + (j + n_az // 2) % n_az
