"""Second-variation forms, Bochner identity, boundary transfer calculus."""

from math import pi

import numpy as np
import pytest
from scipy.special import ellipe

from pqbm import bodies, densities, boundary
from pqbm.errors import DomainError, InputError


@pytest.fixture(scope="module")
def disk():
    return boundary.smooth_body(bodies.ball(1.0, 2))


@pytest.fixture(scope="module")
def ellipse21():
    return boundary.smooth_body(bodies.ellipsoid([2.0, 1.0]))


@pytest.fixture(scope="module")
def leb():
    return densities.lebesgue(2)


@pytest.fixture(scope="module")
def gau():
    return densities.gaussian(2)


def basis_fn(smooth, i, k_max=8):
    return boundary.fourier_basis(smooth.grid, k_max).function(i)


class TestLocalFormValue:
    def test_disk_constant_10(self, disk, leb):
        val = boundary.local_form_value(disk, leb, 1.0, 0.0, basis_fn(disk, 0))
        assert val == pytest.approx(-2 * pi, rel=1e-12)

    def test_disk_cos2t_10(self, disk, leb):
        val = boundary.local_form_value(disk, leb, 1.0, 0.0, basis_fn(disk, 1))
        assert val == pytest.approx(-3 * pi, rel=1e-12)

    def test_disk_constant_11_equality(self, disk, leb):
        val = boundary.local_form_value(disk, leb, 1.0, 1.0, basis_fn(disk, 0))
        assert abs(val) < 1e-12

    def test_odd_function_rejected(self, disk, leb):
        th = disk.grid.theta
        with pytest.raises(InputError):
            boundary.local_form_value(disk, leb, 1.0, 0.0,
                                      (np.cos(th), -np.sin(th)[:, None]))

    def test_q_above_p_rejected(self, disk, leb):
        with pytest.raises(InputError):
            boundary.local_form_value(disk, leb, 0.5, 0.7, basis_fn(disk, 0))

    def test_non_convex_support_data_rejected(self):
        grid_vals = 1.0 + 0.8 * np.cos(2 * np.linspace(0, 2 * pi, 720,
                                                       endpoint=False))
        with pytest.raises(DomainError):
            boundary.smooth_body_from_values(grid_vals)


class TestImprovedForm:
    def test_disk_p1_constant_zero(self, disk):
        assert abs(boundary.improved_form_value(disk, 1.0, basis_fn(disk, 0))) < 1e-12

    def test_disk_p1_cos2t_matches_plain(self, disk, leb):
        g = basis_fn(disk, 1)
        improved = boundary.improved_form_value(disk, 1.0, g)
        plain = boundary.local_form_value(disk, leb, 1.0, 1.0, g)
        assert improved == pytest.approx(plain, rel=1e-12)
        assert improved == pytest.approx(-3 * pi, rel=1e-12)

    def test_disk_p0_constant_zero(self, disk):
        assert abs(boundary.improved_form_value(disk, 0.0, basis_fn(disk, 0))) < 1e-12


class TestLocalFormMax:
    def test_disk_10_negative_spectrum(self, disk, leb):
        spec = boundary.local_form_max(disk, leb, 1.0, 0.0)
        assert spec.max_eigenvalue <= spec.tol
        assert spec.max_eigenvalue == pytest.approx(-1.0, abs=1e-9)

    def test_disk_11_zero_mode_is_support_function(self, disk, leb):
        basis = boundary.fourier_basis(disk.grid, 8)
        spec = boundary.local_form_max(disk, leb, 1.0, 1.0, basis)
        assert abs(spec.max_eigenvalue) <= 1e-8 * spec.matrix_scale
        mode = spec.coefficients @ basis.values
        mode /= np.linalg.norm(mode)
        target = disk.h / np.linalg.norm(disk.h)
        err = min(np.linalg.norm(mode - target), np.linalg.norm(mode + target))
        assert err < 1e-6

    def test_ellipse_00_planar_log_case(self, ellipse21, leb):
        spec = boundary.local_form_max(ellipse21, leb, 0.0, 0.0)
        assert spec.holds

    def test_gaussian_ellipse_with_corollary_parameters(self, ellipse21, gau):
        # inradius 1; p chosen so 4q + (n+1)(1-p)/r^2 <= 2 holds with q = 0.1.
        p, q = 0.9, 0.1
        assert 4 * q + 3 * (1 - p) <= 2
        spec = boundary.local_form_max(ellipse21, gau, p, q)
        assert spec.holds

    def test_degenerate_basis_rejected(self, disk, leb):
        vals = np.vstack([np.ones(disk.grid.size), np.ones(disk.grid.size)])
        grads = np.zeros((2, disk.grid.size, 1))
        bad = boundary.TestFunctionBasis(vals, grads, ("1", "1dup"))
        with pytest.raises(DomainError):
            boundary.local_form_max(disk, leb, 1.0, 0.0, bad)

    def test_zero_mode_invariance_under_support_shift(self, leb):
        for smooth in (boundary.smooth_body(bodies.ellipsoid([2.0, 1.0])),
                       boundary.smoothed_box([1.0, 1.0], 0.05)):
            basis = boundary.fourier_basis(smooth.grid, 6)
            g = basis.function(4)
            hmode = boundary.support_mode(smooth)
            q0 = boundary.local_form_value(smooth, leb, 1.0, 1.0, g)
            for t in (-0.5, 0.3, 2.0):
                shifted = (g[0] + t * hmode[0], g[1] + t * hmode[1])
                qt = boundary.local_form_value(smooth, leb, 1.0, 1.0, shifted)
                assert qt == pytest.approx(q0, abs=1e-8 * max(1.0, abs(q0)))


class TestMonotonicity:
    def test_deficit_monotone_in_p_and_q(self, ellipse21, gau):
        # The (1-p) coefficient multiplies a positive term, so the form is
        # nonincreasing in p (larger p is the weaker statement); the rank-one
        # coefficient (n-q) shrinks with q, so the form is nondecreasing in q
        # once the test function has nonzero boundary mean.
        th = ellipse21.grid.theta
        g = (1.0 + 0.3 * np.cos(2 * th),
             (-0.6 * np.sin(2 * th))[:, None])
        vals_p = [boundary.local_form_value(ellipse21, gau, p, 0.0, g)
                  for p in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert all(b <= a + 1e-12 for a, b in zip(vals_p, vals_p[1:]))
        vals_q = [boundary.local_form_value(ellipse21, gau, 1.0, q, g)
                  for q in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert all(b >= a - 1e-12 for a, b in zip(vals_q, vals_q[1:]))


class TestTransfer:
    def test_perimeter_of_catalog_bodies(self, leb):
        # Ellipse perimeter 4 a E(e^2); smoothed boxes against their own
        # spectral arc-length integral.
        disk = boundary.smooth_body(bodies.ball(1.7, 2))
        bg = disk.boundary_grid(leb)
        assert bg.integrate(np.ones(disk.grid.size)) == pytest.approx(
            2 * pi * 1.7, rel=1e-12)
        a, b = 2.0, 1.0
        ell = boundary.smooth_body(bodies.ellipsoid([a, b]))
        per = ell.boundary_grid(leb).integrate(np.ones(ell.grid.size))
        assert per == pytest.approx(4 * a * ellipe(1 - (b / a) ** 2), rel=1e-10)
        sb = boundary.smoothed_box([1.0, 1.0], 0.05)
        per_sb = sb.boundary_grid(leb).integrate(np.ones(sb.grid.size))
        # Rounded unit square: between the square's perimeter and slightly
        # above it once the eps-ball margin is added.
        assert 7.8 < per_sb < 8.8

    def test_ball3_surface_area(self):
        ball3 = boundary.smooth_body(bodies.ball(1.0, 3), resolution=32)
        bg = ball3.boundary_grid(densities.lebesgue(3))
        assert bg.integrate(np.ones(ball3.grid.size)) == pytest.approx(
            4 * pi, rel=1e-10)

    def test_divergence_identity(self, ellipse21, gau, leb):
        for mu in (leb, gau):
            for field in (boundary.half_square_field(2),
                          boundary.saddle_field(2),
                          boundary.cross_term_field(2)):
                defect = boundary.divergence_defect(field, ellipse21, mu)
                assert abs(defect) < 1e-10

    def test_smooth_body_measure_matches_closed_form(self, gau):
        disk = boundary.smooth_body(bodies.ball(1.2, 2))
        assert disk.measure(gau) == pytest.approx(1 - np.exp(-1.2 ** 2 / 2),
                                                  rel=1e-12)

    def test_basis_gradients_consistent_with_values(self, disk):
        # Spectral derivative of tabulated values vs stored gradients.
        basis = boundary.fourier_basis(disk.grid, 6)
        c = np.fft.rfft(basis.values[3])
        k = np.arange(len(c))
        d = np.fft.irfft(1j * k * c, disk.grid.size)
        assert np.max(np.abs(d - basis.grads[3, :, 0])) < 1e-6

    def test_sh_basis_gradients_finite_difference(self):
        # Rotate nodes slightly along phi and compare against grad * step.
        from pqbm.sphere import latlong_grid

        grid = latlong_grid(32, 64)
        basis = boundary.spherical_harmonic_basis(grid, 4)
        h = 1e-6
        ct = grid.nodes[:, 2]
        st = np.sqrt(1 - ct ** 2)
        phi = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        nodes_shift = np.column_stack([st * np.cos(phi + h), st * np.sin(phi + h), ct])
        basis_shift = boundary.spherical_harmonic_basis(
            type(grid)(3, nodes_shift, grid.weights, grid.frame), 4)
        for i in (1, 5, 10):
            fd = (basis_shift.values[i] - basis.values[i]) / h
            analytic = basis.grads[i, :, 1] * st   # d/dphi = grad_phi * sin(theta)
            assert np.max(np.abs(fd - analytic)) < 1e-4


class TestBochner:
    def test_constant_field_vanishes(self, disk, leb):
        res = boundary.bochner_residual(boundary.constant_field(2), disk, leb)
        assert abs(res["residual"]) < 1e-13

    def test_disk_half_square_closed_form(self, disk, leb):
        res = boundary.bochner_residual(boundary.half_square_field(2), disk, leb)
        assert res["lhs"] == pytest.approx(4 * pi, rel=1e-12)
        assert res["interior"] == pytest.approx(2 * pi, rel=1e-12)
        assert res["boundary"] == pytest.approx(2 * pi, rel=1e-10)
        assert abs(res["residual"]) <= 1e-6 * res["scale"]

    @pytest.mark.parametrize("field_name", ["half_square", "saddle", "cross_term"])
    @pytest.mark.parametrize("density_name", ["lebesgue", "gaussian"])
    @pytest.mark.parametrize("body_name", ["disk", "ellipse"])
    def test_identity_grid(self, field_name, density_name, body_name):
        field = {"half_square": boundary.half_square_field,
                 "saddle": boundary.saddle_field,
                 "cross_term": boundary.cross_term_field}[field_name](2)
        mu = (densities.lebesgue(2) if density_name == "lebesgue"
              else densities.gaussian(2))
        body = (bodies.ball(1.0, 2) if body_name == "disk"
                else bodies.ellipsoid([2.0, 1.0]))
        res = boundary.bochner_residual(field, boundary.smooth_body(body), mu)
        assert abs(res["residual"]) <= 1e-6 * res["scale"]

    def test_identity_n3(self):
        ell3 = boundary.smooth_body(bodies.ellipsoid([1.5, 1.0, 0.8]),
                                    resolution=32)
        res = boundary.bochner_residual(boundary.saddle_field(3), ell3,
                                        densities.gaussian(3), n_radial=48)
        assert abs(res["residual"]) <= 1e-8 * res["scale"]


class TestRayDecreasing:
    def test_disk_lebesgue_equality(self, disk, leb):
        rep = boundary.ray_decreasing_check(disk, leb,
                                            np.ones(disk.grid.size))
        assert rep["lhs"] == pytest.approx(2 * pi ** 2, rel=1e-12)
        assert rep["rhs"] == pytest.approx(2 * pi ** 2, rel=1e-12)
        assert rep["ok"]

    def test_disk_gaussian_strict(self, disk, gau):
        rep = boundary.ray_decreasing_check(disk, gau, np.ones(disk.grid.size))
        assert rep["margin"] > 1e-3 * rep["lhs"]
        assert rep["ok"]

    def test_ellipse_cos_squared(self, ellipse21, leb):
        th = ellipse21.grid.theta
        rep = boundary.ray_decreasing_check(ellipse21, leb,
                                            1.0 + np.cos(2 * th) ** 2)
        assert rep["margin"] >= -1e-9 * rep["lhs"]

    def test_negative_f_rejected(self, disk, leb):
        with pytest.raises(InputError):
            boundary.ray_decreasing_check(disk, leb, -np.ones(disk.grid.size))


class TestMatrixInequality:
    def test_identity_equality_case(self):
        m = boundary.pointwise_matrix_inequality_check(
            np.eye(2), np.zeros(2), np.zeros(2), 1.0, 1.0)
        assert m == pytest.approx(0.0, abs=1e-14)

    def test_zero_matrix(self):
        m = boundary.pointwise_matrix_inequality_check(
            np.zeros((3, 3)), np.array([1.0, 2.0, 3.0]), np.zeros(3), 1.0, 2.0)
        assert m == pytest.approx(2.0 * 14.0, rel=1e-14)

    def test_random_fuzz(self):
        rng = np.random.default_rng(31)
        worst = np.inf
        for _ in range(10 ** 4):
            n = int(rng.integers(2, 5))
            A = rng.standard_normal((n, n))
            A = 0.5 * (A + A.T)
            v = rng.standard_normal(n)
            w = rng.standard_normal(n)
            a, b = rng.uniform(0.1, 3.0, 2)
            worst = min(worst, boundary.pointwise_matrix_inequality_check(
                A, v, w, float(a), float(b)))
        assert worst >= -1e-9


class TestScope:
    def test_dimension_guard(self):
        with pytest.raises(DomainError):
            boundary.smooth_body(bodies.ball(1.0, 4))

    def test_n3_families(self):
        with pytest.raises(DomainError):
            boundary.smooth_body(bodies.box([1.0, 1.0, 1.0]))
