"""Measure estimation: closed forms, quadrature, Monte Carlo, moments."""

from math import pi

import numpy as np
import pytest

from pqbm import bodies, densities, measures
from pqbm.errors import InputError

import oracles


class TestClosedForms:
    def test_lebesgue_disk(self):
        est = measures.measure(bodies.ball(1.0, 2), densities.lebesgue(2))
        assert est.value == pytest.approx(pi, abs=1e-14)
        assert est.stderr == 0.0 and est.method == "closed-form"

    def test_lebesgue_volumes(self):
        assert measures.measure(bodies.box([1.0, 2.0, 0.5]),
                                densities.lebesgue(3)).value == pytest.approx(8.0)
        assert measures.measure(bodies.cross_polytope(1.0, 3),
                                densities.lebesgue(3)).value == pytest.approx(8 / 6)
        assert measures.measure(bodies.ellipsoid([2.0, 1.0]),
                                densities.lebesgue(2)).value == pytest.approx(2 * pi)
        # lq volume against Monte Carlo
        K = bodies.lq_ball(4.0, 1.0, 2)
        cf = measures.measure(K, densities.lebesgue(2)).value
        mc = measures.measure(K, densities.lebesgue(2), "monte-carlo",
                              budget=200000, seed=4)
        assert abs(cf - mc.value) < 4 * mc.stderr

    def test_gaussian_box_against_quad_oracle(self):
        est = measures.measure(bodies.box([1.0, 1.0]), densities.gaussian(2))
        expected = oracles.phi_interval_quad(-1.0, 1.0) ** 2
        assert est.value == pytest.approx(expected, abs=1e-12)

    def test_gaussian_ball_radial_forms(self):
        for n in (2, 3):
            for R in (0.5, 1.0, 2.0):
                est = measures.measure(bodies.ball(R, n), densities.gaussian(n))
                assert est.value == pytest.approx(
                    oracles.gaussian_ball_mass_radial(R, n), abs=1e-12)
        est2 = measures.measure(bodies.ball(1.5, 2), densities.gaussian(2))
        assert est2.value == pytest.approx(1 - np.exp(-1.5 ** 2 / 2), abs=1e-13)


class TestEstimatorConsistency:
    @pytest.mark.parametrize("n", [2, 3])
    def test_three_routes_agree(self, n):
        mu = densities.gaussian(n)
        K = bodies.ball(1.0, n)
        cf = measures.measure(K, mu, "closed-form")
        pq = measures.measure(K, mu, "polar-quadrature")
        mc = measures.measure(K, mu, "monte-carlo", budget=10 ** 5, seed=8)
        assert pq.value == pytest.approx(cf.value, abs=1e-9)
        assert abs(mc.value - cf.value) <= 3 * mc.stderr + 1e-9

    def test_polygon_quadrature_matches_box_product(self):
        sq = bodies.polytope(np.array([[1., 0], [0, 1], [-1, 0], [0, -1]]),
                             np.ones(4))
        pq = measures.measure(sq, densities.gaussian(2), "polar-quadrature")
        cf = measures.measure(bodies.box([1.0, 1.0]), densities.gaussian(2))
        assert pq.value == pytest.approx(cf.value, abs=1e-12)

    def test_monotone_in_inclusion(self):
        mu = densities.gaussian(2)
        small = measures.measure(bodies.ball(1.0, 2), mu, "monte-carlo",
                                 budget=10 ** 5, seed=1)
        big = measures.measure(bodies.box([1.0, 1.0]), mu, "monte-carlo",
                               budget=10 ** 5, seed=2)
        sig = np.hypot(small.stderr, big.stderr)
        assert big.value - small.value >= -3 * sig

    def test_seed_determinism_bit_identical(self):
        mu = densities.gaussian(2)
        K = bodies.ball(1.3, 2)
        a = measures.measure(K, mu, "monte-carlo", budget=50000, seed=99)
        b = measures.measure(K, mu, "monte-carlo", budget=50000, seed=99)
        assert a.value == b.value and a.stderr == b.stderr

    def test_budget_floor(self):
        with pytest.raises(InputError):
            measures.measure(bodies.ball(1.0, 2), densities.gaussian(2),
                             "monte-carlo", budget=10)

    def test_log_concavity_midpoint_smoke(self):
        # mu(0.5 K + 0.5 L) >= sqrt(mu(K) mu(L)) on random pairs, p = 1.
        from pqbm.catalog import random_body_pair

        rng = np.random.default_rng(17)
        mu = densities.gaussian(2)
        for _ in range(50):
            K, L = random_body_pair(rng, 2)
            M = bodies.interpolate(K, L, 0.5, 1.0)
            vals = [measures.measure(B, mu).value for B in (K, L, M)]
            margin = np.log(vals[2]) - 0.5 * np.log(vals[0]) - 0.5 * np.log(vals[1])
            assert margin >= -1e-9


class TestRestrictedIntegrals:
    def test_gaussian_full_space_moments(self):
        K = bodies.ball(1000.0, 2)
        mu = densities.gaussian(2)
        assert measures.restricted_moment(K, mu, 2).value == pytest.approx(2.0, abs=1e-10)
        assert measures.restricted_moment(K, mu, 4).value == pytest.approx(8.0, abs=1e-9)

    def test_small_ball_second_moment_bound(self):
        est = measures.restricted_moment(bodies.ball(0.05, 2),
                                         densities.gaussian(2), 2)
        assert 0 <= est.value <= 0.05 ** 2

    def test_square_moment_against_1d_quadrature(self):
        est = measures.restricted_moment(bodies.box([1.0, 1.0]),
                                         densities.gaussian(2), 2)
        expected = 2.0 * oracles.truncated_gaussian_second_moment(1.0)
        assert est.value == pytest.approx(expected, rel=1e-10)

    def test_moment_mc_agrees_with_quadrature(self):
        K = bodies.ellipsoid([1.5, 0.8])
        mu = densities.gaussian(2)
        quad = measures.restricted_moment(K, mu, 2)
        mc = measures.restricted_moment(K, mu, 2, budget=200000, seed=3,
                                        method="monte-carlo")
        assert abs(quad.value - mc.value) <= 3 * mc.stderr

    def test_k2_values(self):
        assert measures.k2_estimate(bodies.ball(1.0, 2),
                                    densities.gaussian(2)).value == 1.0
        assert measures.k2_estimate(bodies.box([1.0, 2.0]),
                                    densities.lebesgue(2)).value == 0.0

    def test_k2_quartic_mc_vs_polar(self):
        K = bodies.ball(1.0, 2)
        mu = densities.power(4.0, 2)
        pq = measures.k2_estimate(K, mu)
        mc = measures.k2_estimate(K, mu, budget=300000, seed=5,
                                  method="monte-carlo")
        assert abs(pq.value - mc.value) <= 3 * mc.stderr

    def test_grad_v_bound(self):
        mu = densities.gaussian(2)
        full = measures.grad_v_bound_check(bodies.ball(1000.0, 2), mu)
        assert full.lhs == pytest.approx(2.0, abs=1e-9)
        assert full.rhs == pytest.approx(2.0, abs=1e-12)
        assert full.ok
        small = measures.grad_v_bound_check(bodies.ball(0.1, 2), mu)
        assert small.lhs < 0.02 and small.rhs == 2.0 and small.ok
        quart = measures.grad_v_bound_check(bodies.ball(1.0, 2),
                                            densities.power(4.0, 2))
        mc = measures.grad_v_bound_check(bodies.ball(1.0, 2),
                                         densities.power(4.0, 2),
                                         budget=300000, seed=6,
                                         method="monte-carlo")
        assert quart.ok and mc.ok
        assert abs(quart.lhs - mc.lhs) <= 3 * mc.stderr + 1e-6


class TestDensityModel:
    def test_gaussian_derivatives(self):
        mu = densities.gaussian(3)
        X = np.array([[1.0, 2.0, -1.0]])
        assert mu.lap_V(X)[0] == 3.0
        assert np.allclose(mu.grad_V(X), X)
        assert mu.hess_quad(X, np.array([[1.0, 1.0, 0.0]]))[0] == 2.0
        assert mu.k1 == 1.0

    def test_power_derivatives_by_finite_differences(self):
        mu = densities.power(4.0, 2)
        rng = np.random.default_rng(21)
        X = rng.uniform(0.5, 1.5, (10, 2))
        h = 1e-5
        for x in X:
            g = mu.grad_V(x[None, :])[0]
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                fd = (mu.V((x + e)[None, :])[0] - mu.V((x - e)[None, :])[0]) / (2 * h)
                assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)
            # Laplacian by 5-point stencil
            lap_fd = sum((mu.V((x + h * np.eye(2)[j])[None, :])[0]
                          - 2 * mu.V(x[None, :])[0]
                          + mu.V((x - h * np.eye(2)[j])[None, :])[0]) / h ** 2
                         for j in range(2))
            assert mu.lap_V(x[None, :])[0] == pytest.approx(lap_fd, rel=1e-4)

    def test_midpoint_convexity_spot_check(self):
        rng = np.random.default_rng(2)
        for mu in (densities.gaussian(2), densities.power(3.0, 2)):
            X = rng.uniform(-2, 2, (50, 2))
            Y = rng.uniform(-2, 2, (50, 2))
            mid = mu.V(0.5 * (X + Y))
            assert np.all(mid <= 0.5 * mu.V(X) + 0.5 * mu.V(Y) + 1e-12)

    def test_alpha_below_two_rejected(self):
        with pytest.raises(InputError):
            densities.power(1.5, 2)

    def test_evenness(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((20, 2))
        for mu in (densities.gaussian(2), densities.lebesgue(2),
                   densities.power(4.0, 2)):
            assert np.allclose(mu.V(X), mu.V(-X), atol=1e-12)
