"""Boundary calculus for C^{2,+} symmetric bodies via the Gauss map.

All boundary integrals are transferred to the sphere.  With h the support
function, the boundary point in direction u is x = grad h(u) (the gradient
of the 1-homogeneous extension), the curvature matrix is the tangent-frame
restriction

    D2h(u) = T(u) Hess h(u) T(u)^t            (n-1 x n-1, positive definite),

whose determinant is the surface Jacobian and whose inverse is the second
fundamental form of the boundary in the same frame.  A function g on the
sphere corresponds to f = g(n_x) on the boundary, and

    integral_{dK} F dmu_{dK} = integral_S F(grad h) e^{-V(grad h)} det D2h du,
    <II^{-1} grad_{dK} f, grad_{dK} f> = <D2h^{-1} grad_S g, grad_S g>.

n = 2 bodies use spectral differentiation of the support function on a
uniform angle grid (D2h = h'' + h); n = 3 covers balls and ellipsoids with
analytic Hessians on a Gauss-Legendre lat-long grid.  n >= 4 smooth
boundary analysis is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np
from scipy.linalg import eigh
from scipy.special import assoc_legendre_p_all, roots_legendre

from .bodies import Body
from .densities import Density
from .errors import DomainError, InputError
from .sphere import SphereGrid, circle_grid, latlong_grid, negation_permutation

DEFAULT_ANGLES = 720
DEFAULT_KMAX = 16
DEFAULT_DEGREE = 8
EIG_TOL_FACTOR = 1e-8


# ---------------------------------------------------------------------------
# scalar fields on R^n (test functions for the Bochner identity)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """C^2 scalar field with closed-form gradient and Hessian."""

    name: str
    value: callable          # (N, n) -> (N,)
    grad: callable           # (N, n) -> (N, n)
    hess: callable           # (N, n) -> (N, n, n)


def half_square_field(n: int) -> ScalarField:
    eye = np.eye(n)
    return ScalarField(
        "half_square",
        lambda X: 0.5 * np.einsum("ij,ij->i", X, X),
        lambda X: np.asarray(X, float).copy(),
        lambda X: np.broadcast_to(eye, (len(X), n, n)).copy(),
    )


def saddle_field(n: int) -> ScalarField:
    H = np.zeros((n, n))
    H[0, 0], H[1, 1] = 2.0, -2.0
    return ScalarField(
        "saddle",
        lambda X: X[:, 0] ** 2 - X[:, 1] ** 2,
        lambda X: X @ H.T,
        lambda X: np.broadcast_to(H, (len(X), n, n)).copy(),
    )


def cross_term_field(n: int) -> ScalarField:
    H = np.zeros((n, n))
    H[0, 1] = H[1, 0] = 1.0
    return ScalarField(
        "cross_term",
        lambda X: X[:, 0] * X[:, 1],
        lambda X: X @ H.T,
        lambda X: np.broadcast_to(H, (len(X), n, n)).copy(),
    )


def constant_field(n: int, c: float = 1.0) -> ScalarField:
    return ScalarField(
        "constant",
        lambda X: np.full(len(X), c),
        lambda X: np.zeros((len(X), n)),
        lambda X: np.zeros((len(X), n, n)),
    )


# ---------------------------------------------------------------------------
# smooth bodies and their boundary grids


@dataclass(frozen=True, eq=False)
class SmoothBody:
    """Support-function data of a C^{2,+} symmetric body on a sphere grid."""

    grid: SphereGrid
    h: np.ndarray            # (M,)
    points: np.ndarray       # (M, n) boundary points grad h(u)
    d2h: np.ndarray          # (M, n-1, n-1) curvature matrices, frame coords
    source: Body | None = None

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def det_d2h(self) -> np.ndarray:
        det = getattr(self, "_det_cache", None)
        if det is None:
            det = np.linalg.det(self.d2h)
            object.__setattr__(self, "_det_cache", det)
        return det

    @property
    def inv_d2h(self) -> np.ndarray:
        inv = getattr(self, "_inv_cache", None)
        if inv is None:
            inv = np.linalg.inv(self.d2h)
            object.__setattr__(self, "_inv_cache", inv)
        return inv

    def boundary_grid(self, mu: Density) -> "BoundaryGrid":
        X = self.points
        dens = np.exp(-mu.V(X))
        w = dens * self.det_d2h * self.grid.weights
        Hx = (np.einsum("kii->k", self.inv_d2h)
              - np.einsum("kj,kj->k", mu.grad_V(X), self.grid.nodes))
        return BoundaryGrid(self, mu, w, Hx)

    def measure(self, mu: Density, n_radial: int = 64) -> float:
        """mu(body) by Gauss-map polar quadrature (deterministic)."""
        t, wt = roots_legendre(n_radial)
        t = 0.5 * (t + 1.0)
        wt = 0.5 * wt
        base = self.h * self.det_d2h * self.grid.weights
        total = 0.0
        for ti, wi in zip(t, wt):
            pts = ti * self.points
            total += wi * ti ** (self.n - 1) * float(np.dot(base, np.exp(-mu.V(pts))))
        return total

    def interior_nodes(self, mu: Density, n_radial: int = 48):
        """(points, weights) integrating int_K F dmu as sum w F(points)."""
        t, wt = roots_legendre(n_radial)
        t = 0.5 * (t + 1.0)
        wt = 0.5 * wt
        base = self.h * self.det_d2h * self.grid.weights
        pts = (t[:, None, None] * self.points[None, :, :]).reshape(-1, self.n)
        w = (wt[:, None] * t[:, None] ** (self.n - 1) * base[None, :]).reshape(-1)
        w = w * np.exp(-mu.V(pts))
        return pts, w


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Weighted boundary data of a smooth body under a fixed density.

    weights w already include the density, the surface Jacobian det D2h
    and the sphere quadrature weight, so sum(w * F) integrates F over the
    boundary against the weighted surface measure.
    """

    body: SmoothBody
    mu: Density
    weights: np.ndarray      # (M,)
    Hx: np.ndarray           # (M,) weighted mean curvature tr(II) - <grad V, n>

    @property
    def contact(self) -> np.ndarray:
        """<x, n_x> = h(u) at the nodes."""
        return self.body.h

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _spectral_derivatives(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = len(vals)
    c = np.fft.rfft(vals)
    k = np.arange(len(c), dtype=float)
    c1 = 1j * k * c
    if m % 2 == 0:
        c1[-1] = 0.0   # Nyquist mode has no well-defined first derivative
    d1 = np.fft.irfft(c1, m)
    d2 = np.fft.irfft(-(k ** 2) * c, m)
    return d1, d2


def _smooth_body_2d(values: np.ndarray, grid: SphereGrid,
                    source: Body | None) -> SmoothBody:
    hp, hpp = _spectral_derivatives(values)
    rho = hpp + values
    if np.any(rho <= 0):
        raise DomainError("support data is not C^{2,+}: h'' + h <= 0 at a node")
    if np.any(values <= 0):
        raise DomainError("support function must be positive")
    u = grid.nodes
    uperp = grid.frame[:, 0, :]
    pts = values[:, None] * u + hp[:, None] * uperp
    return SmoothBody(grid, values, pts, rho[:, None, None], source)


def _smooth_body_3d(body: Body, grid: SphereGrid) -> SmoothBody:
    U = grid.nodes
    if body.family == "ball":
        r = body.params["r"]
        h = np.full(grid.size, float(r))
        pts = r * U
        d2h = np.broadcast_to(r * np.eye(2), (grid.size, 2, 2)).copy()
        return SmoothBody(grid, h, pts, d2h, body)
    if body.family == "ellipsoid":
        a2 = np.asarray(body.params["a"], float) ** 2
        h = np.sqrt(U ** 2 @ a2)
        pts = a2 * U / h[:, None]
        # Hess |A u| = A^2/|Au| - (A^2 u)(A^2 u)^t / |Au|^3, restricted to the frame.
        T = grid.frame                                  # (M, 2, 3)
        TA = T * a2[None, None, :]                      # rows T_i A^2
        term1 = np.einsum("kia,kja->kij", TA, T) / h[:, None, None]
        v = pts                                         # A^2 u / h
        Tv = np.einsum("kia,ka->ki", T, v)
        term2 = np.einsum("ki,kj->kij", Tv, Tv) / h[:, None, None]
        return SmoothBody(grid, h, pts, term1 - term2, body)
    raise DomainError(f"n = 3 smooth analysis supports ball and ellipsoid, "
                      f"not {body.family}")


def smooth_body(body: Body, resolution: int | None = None) -> SmoothBody:
    """Boundary data for a catalog body (n = 2 general via spectral h, n = 3
    analytic families)."""
    n = body.n
    if n == 2:
        grid = circle_grid(resolution or DEFAULT_ANGLES)
        return _smooth_body_2d(body.support(grid.nodes), grid, body)
    if n == 3:
        res = resolution or 64
        return _smooth_body_3d(body, latlong_grid(res, 2 * res))
    raise DomainError("smooth boundary analysis covers n = 2, 3 only")


def smoothed_box(a, eps: float = 0.05, resolution: int | None = None) -> SmoothBody:
    """C^{2,+} rounding of a planar box.

    The box support function is mollified by a periodic Gaussian kernel of
    angular width eps (a positive kernel keeps h'' + h >= 0) and an eps-ball
    is added, bounding the curvature radius below by eps.
    """
    a = np.asarray(a, float)
    if a.shape != (2,):
        raise InputError("smoothed_box expects two half-widths")
    grid = circle_grid(resolution or DEFAULT_ANGLES)
    vals = np.abs(np.cos(grid.theta)) * a[0] + np.abs(np.sin(grid.theta)) * a[1]
    c = np.fft.rfft(vals)
    k = np.arange(len(c), dtype=float)
    vals = np.fft.irfft(c * np.exp(-0.5 * (eps * k) ** 2), grid.size) + eps
    return _smooth_body_2d(vals, grid, None)


def smooth_body_from_values(values: np.ndarray, resolution: int | None = None) -> SmoothBody:
    """2D smooth body from support values sampled on the uniform angle grid."""
    values = np.asarray(values, float)
    grid = circle_grid(len(values))
    return _smooth_body_2d(values, grid, None)


# ---------------------------------------------------------------------------
# test function bases


@dataclass(frozen=True, eq=False)
class TestFunctionBasis:
    """Even sphere functions with tangential gradients in frame coordinates."""

    values: np.ndarray       # (m, M)
    grads: np.ndarray        # (m, M, n-1)
    labels: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def function(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[i], self.grads[i]

    def combine(self, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(coeffs, float)
        return c @ self.values, np.einsum("i,ikd->kd", c, self.grads)


def fourier_basis(grid: SphereGrid, k_max: int = DEFAULT_KMAX) -> TestFunctionBasis:
    """{1, cos 2k t, sin 2k t : k <= k_max} -- the even functions on S^1."""
    th = grid.theta
    vals = [np.ones_like(th)]
    grads = [np.zeros_like(th)]
    labels = ["1"]
    for k in range(1, k_max + 1):
        vals += [np.cos(2 * k * th), np.sin(2 * k * th)]
        grads += [-2 * k * np.sin(2 * k * th), 2 * k * np.cos(2 * k * th)]
        labels += [f"cos{2 * k}t", f"sin{2 * k}t"]
    return TestFunctionBasis(np.array(vals), np.array(grads)[:, :, None], tuple(labels))


def _legendre_tables(l_max: int, ct: np.ndarray):
    """P_l^m(cos th) values and d/dth derivatives, indexed [l, m, node]."""
    st = np.sqrt(1.0 - ct ** 2)
    table = assoc_legendre_p_all(l_max, l_max, ct, diff_n=1)
    P = table[0][:, : l_max + 1, :]
    dP = table[1][:, : l_max + 1, :]
    # The library differentiates in z = cos th; chain rule to d/dth.
    return P, dP * (-st)[None, None, :]


def spherical_harmonic_basis(grid: SphereGrid, degree: int = DEFAULT_DEGREE
                             ) -> TestFunctionBasis:
    """Real spherical harmonics of even degree l <= degree (even functions)."""
    U = grid.nodes
    ct = U[:, 2]
    st = np.sqrt(np.maximum(1.0 - ct ** 2, 1e-30))
    phi = np.arctan2(U[:, 1], U[:, 0])
    l_max = degree
    P, dPdth = _legendre_tables(l_max, ct)

    vals, grads, labels = [], [], []
    for ell in range(0, l_max + 1, 2):
        for m in range(0, ell + 1):
            norm = sqrt((2 * ell + 1) / (4.0 * pi)
                        * float(factorial(ell - m)) / float(factorial(ell + m)))
            if m == 0:
                vals.append(norm * P[ell, 0])
                grads.append(np.stack([norm * dPdth[ell, 0],
                                       np.zeros(grid.size)], axis=1))
                labels.append(f"Y{ell},0")
                continue
            c = sqrt(2.0) * norm
            base, dbase = P[ell, m], dPdth[ell, m]
            cosm, sinm = np.cos(m * phi), np.sin(m * phi)
            vals.append(c * base * cosm)
            grads.append(np.stack([c * dbase * cosm,
                                   -c * base * m * sinm / st], axis=1))
            labels.append(f"Y{ell},{m}c")
            vals.append(c * base * sinm)
            grads.append(np.stack([c * dbase * sinm,
                                   c * base * m * cosm / st], axis=1))
            labels.append(f"Y{ell},{m}s")
    return TestFunctionBasis(np.array(vals), np.array(grads), tuple(labels))


def default_basis(smooth: SmoothBody, k_max: int | None = None,
                  degree: int | None = None) -> TestFunctionBasis:
    if smooth.n == 2:
        return fourier_basis(smooth.grid, k_max or DEFAULT_KMAX)
    return spherical_harmonic_basis(smooth.grid, degree or DEFAULT_DEGREE)


def support_mode(smooth: SmoothBody) -> tuple[np.ndarray, np.ndarray]:
    """g = h with its spherical gradient (the f = <x, n_x> direction)."""
    tang = np.einsum("kda,ka->kd", smooth.grid.frame, smooth.points)
    return smooth.h.copy(), tang


def _check_even(grid: SphereGrid, values: np.ndarray, what: str):
    perm = negation_permutation(grid)
    scale = float(np.max(np.abs(values))) or 1.0
    if np.max(np.abs(values - values[perm])) > 1e-8 * scale:
        raise InputError(f"{what} must be an even function on the sphere")


# ---------------------------------------------------------------------------
# the infinitesimal (p, q)-form


def _mu_of(smooth: SmoothBody, mu: Density, mu_K: float | None) -> float:
    if mu_K is not None:
        return float(mu_K)
    if smooth.source is not None:
        from .measures import measure

        est = measure(smooth.source, mu)
        if est.method != "monte-carlo":
            return est.value
    return smooth.measure(mu)


def _validate_pq(p: float, q: float):
    if not (0.0 <= q <= p <= 1.0):
        raise InputError(f"need 0 <= q <= p <= 1, got p={p}, q={q}")


def local_form_value(smooth: SmoothBody, mu: Density, p: float, q: float,
                     g: tuple[np.ndarray, np.ndarray],
                     mu_K: float | None = None) -> float:
    """Deficit Q(g) of the second-variation form; Q(g) <= 0 means satisfied.

    Q(g) = int_S [H_x g^2 - <D2h^{-1} grad g, grad g> + (1-p) g^2/h] w du
           - (n - q)/(n mu(K)) (int_S g w du)^2,    w = e^{-V(grad h)} det D2h.
    """
    _validate_pq(p, q)
    gv, gg = g
    _check_even(smooth.grid, gv, "test function")
    bg = smooth.boundary_grid(mu)
    quad = np.einsum("kd,kde,ke->k", gg, smooth.inv_d2h, gg)
    bulk = bg.integrate(bg.Hx * gv ** 2 - quad + (1.0 - p) * gv ** 2 / smooth.h)
    lin = bg.integrate(gv)
    n = smooth.n
    muK = _mu_of(smooth, mu, mu_K)
    return bulk - (n - q) / (n * muK) * lin ** 2


def improved_form_value(smooth: SmoothBody, p: float,
                        g: tuple[np.ndarray, np.ndarray],
                        mu_K: float | None = None) -> float:
    """Lebesgue-only sharpening: the rank-one coefficient becomes (n-p)/n."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"p must lie in [0, 1], got {p}")
    mu = Density("lebesgue", smooth.n)
    gv, gg = g
    _check_even(smooth.grid, gv, "test function")
    bg = smooth.boundary_grid(mu)
    quad = np.einsum("kd,kde,ke->k", gg, smooth.inv_d2h, gg)
    bulk = bg.integrate(bg.Hx * gv ** 2 - quad + (1.0 - p) * gv ** 2 / smooth.h)
    lin = bg.integrate(gv)
    n = smooth.n
    muK = _mu_of(smooth, mu, mu_K)
    return bulk - (n - p) / (n * muK) * lin ** 2


@dataclass(frozen=True)
class FormSpectrum:
    """Largest generalized eigenvalue of the form over a basis span."""

    max_eigenvalue: float
    coefficients: np.ndarray
    tol: float
    holds: bool
    matrix_scale: float
    basis_labels: tuple[str, ...]


def form_matrices(smooth: SmoothBody, mu: Density, p: float, q: float,
                  basis: TestFunctionBasis, mu_K: float | None = None,
                  rank_one_coeff: float | None = None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(M, G): Q(sum c_i g_i) = c^t M c and the surface-measure Gram matrix."""
    _validate_pq(p, q)
    bg = smooth.boundary_grid(mu)
    w = bg.weights
    V = basis.values
    quadij = np.einsum("ikd,kde,jke->ijk", basis.grads, smooth.inv_d2h, basis.grads)
    dens = bg.Hx + (1.0 - p) / smooth.h
    M = np.einsum("ik,jk,k->ij", V, V, dens * w) - np.einsum("ijk,k->ij", quadij, w)
    lin = V @ w
    n = smooth.n
    coeff = rank_one_coeff if rank_one_coeff is not None else (n - q) / n
    muK = _mu_of(smooth, mu, mu_K)
    M -= (coeff / muK) * np.outer(lin, lin)
    G = np.einsum("ik,jk,k->ij", V, V, w)
    return 0.5 * (M + M.T), 0.5 * (G + G.T)


def form_matrices_json(M: np.ndarray, G: np.ndarray, labels) -> dict:
    """Dense export of the assembled quadratic form for external inspection."""
    return {"labels": list(labels), "form": M.tolist(), "gram": G.tolist()}


def local_form_max(smooth: SmoothBody, mu: Density, p: float, q: float,
                   basis: TestFunctionBasis | None = None,
                   mu_K: float | None = None) -> FormSpectrum:
    """Largest generalized eigenvalue of (M, Gram) over the basis span.

    The inequality holds on the span iff the maximum eigenvalue is below
    the scale-free tolerance 1e-8 * max|M entries|.
    """
    basis = basis if basis is not None else default_basis(smooth)
    M, G = form_matrices(smooth, mu, p, q, basis, mu_K)
    gev = np.linalg.eigvalsh(G)
    if gev[0] <= 1e-12 * gev[-1]:
        raise DomainError("degenerate basis: Gram matrix is singular")
    vals, vecs = eigh(M, G)
    scale = float(np.max(np.abs(M)))
    tol = EIG_TOL_FACTOR * scale
    lam = float(vals[-1])
    return FormSpectrum(lam, vecs[:, -1], tol, lam <= tol, scale, basis.labels)


# ---------------------------------------------------------------------------
# Bochner / Reilly identity residual


def bochner_residual(field: ScalarField, smooth: SmoothBody, mu: Density,
                     n_radial: int = 64) -> dict:
    """LHS - RHS of the weighted Reilly identity for the field u:

    int_K (Lu)^2 dmu = int_K (||Hess u||^2 + <Hess V grad u, grad u>) dmu
      + int_dK (H_x u_n^2 - 2 <grad_dK u, grad_dK u_n> + <II grad_dK u, grad_dK u>).
    """
    pts, w = smooth.interior_nodes(mu, n_radial)
    gu = field.grad(pts)
    hu = field.hess(pts)
    lap = np.einsum("kii->k", hu)
    Lu = lap - np.einsum("ki,ki->k", gu, mu.grad_V(pts))
    lhs = float(np.dot(w, Lu ** 2))
    hess_sq = np.einsum("kij,kij->k", hu, hu)
    ric = mu.hess_quad(pts, gu)
    interior = float(np.dot(w, hess_sq + ric))

    bg = smooth.boundary_grid(mu)
    X = smooth.points
    U = smooth.grid.nodes
    T = smooth.grid.frame
    gub = field.grad(X)
    hub = field.hess(X)
    un = np.einsum("ki,ki->k", gub, U)
    tang_u = np.einsum("kda,ka->kd", T, gub)                     # grad_dK u, frame
    hess_un = np.einsum("kda,kab,kb->kd", T, hub, U)
    grad_un = hess_un + np.einsum("kde,ke->kd", smooth.inv_d2h, tang_u)
    ii_quad = np.einsum("kd,kde,ke->k", tang_u, smooth.inv_d2h, tang_u)
    integrand = bg.Hx * un ** 2 - 2.0 * np.einsum("kd,kd->k", tang_u, grad_un) + ii_quad
    boundary = bg.integrate(integrand)

    scale = max(abs(lhs), abs(interior), abs(boundary), 1e-30)
    return {"lhs": lhs, "interior": interior, "boundary": boundary,
            "residual": lhs - interior - boundary, "scale": scale}


def divergence_defect(field: ScalarField, smooth: SmoothBody, mu: Density,
                      n_radial: int = 64) -> float:
    """int_K Lu dmu - int_dK <grad u, n_x> dmu_dK (should vanish)."""
    pts, w = smooth.interior_nodes(mu, n_radial)
    gu = field.grad(pts)
    Lu = np.einsum("kii->k", field.hess(pts)) - np.einsum(
        "ki,ki->k", gu, mu.grad_V(pts))
    interior = float(np.dot(w, Lu))
    bg = smooth.boundary_grid(mu)
    un = np.einsum("ki,ki->k", field.grad(smooth.points), smooth.grid.nodes)
    return interior - bg.integrate(un)


# ---------------------------------------------------------------------------
# ray-decreasing inequality and the pointwise matrix bound


def ray_decreasing_check(smooth: SmoothBody, mu: Density,
                         f_values: np.ndarray) -> dict:
    """Check mu(K) int_dK f^2/<x,n_x> dmu_dK >= (1/n) (int_dK f dmu_dK)^2."""
    f_values = np.asarray(f_values, float)
    if np.any(f_values < 0):
        raise InputError("ray-decreasing check requires f >= 0")
    bg = smooth.boundary_grid(mu)
    muK = _mu_of(smooth, mu, None)
    lhs = muK * bg.integrate(f_values ** 2 / smooth.h)
    rhs = bg.integrate(f_values) ** 2 / smooth.n
    scale = max(abs(lhs), abs(rhs), 1e-30)
    margin = lhs - rhs
    return {"lhs": lhs, "rhs": rhs, "margin": margin,
            "ok": margin >= -1e-9 * scale}


def pointwise_matrix_inequality_check(A: np.ndarray, v: np.ndarray,
                                      w: np.ndarray, a: float, b: float) -> float:
    """Margin of a ||A||_HS^2 + b |v|^2 >= a b (tr A - <w, v>)^2 / (a |w|^2 + b n).

    Nonnegative margin (up to 1e-12 roundoff) certifies the bound.
    """
    if a <= 0 or b <= 0:
        raise InputError("weights a, b must be positive")
    A = np.asarray(A, float)
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    n = A.shape[0]
    lhs = a * float(np.sum(A * A)) + b * float(v @ v)
    lu = float(np.trace(A)) - float(w @ v)
    return lhs - a * b * lu ** 2 / (a * float(w @ w) + b * n)
