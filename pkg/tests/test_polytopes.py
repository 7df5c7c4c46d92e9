"""Interpolation coefficients, facet measures, derivative formula, probes."""

from math import pi

import numpy as np
import pytest
from scipy.special import ndtr

from pqbm import bodies, densities, measures, polytopes
from pqbm.errors import DomainError, InputError
from pqbm.global_checks import derive_seed

import oracles

SQUARE_NORMALS = np.array([[1., 0.], [0., 1.], [-1., 0.], [0., -1.]])
GAUSS_EDGE = np.exp(-0.5) * (2 * ndtr(1.0) - 1) / np.sqrt(2 * pi)


def octagon_fan():
    th = np.arange(8) * pi / 4
    return polytopes.NormalFan(np.column_stack([np.cos(th), np.sin(th)]))


def random_pair_2d(rng, p):
    fan = octagon_fan()
    hK = rng.uniform(0.8, 1.6, 4)
    hL = rng.uniform(0.8, 1.6, 4)
    hK = np.concatenate([hK, hK])[[0, 2, 4, 6, 1, 3, 5, 7]]
    hL = np.concatenate([hL, hL])[[0, 2, 4, 6, 1, 3, 5, 7]]
    # Heights paired so opposite normals match (symmetric bodies).
    hK = np.tile(rng.uniform(0.9, 1.7, 4), 2)
    hL = np.tile(rng.uniform(0.9, 1.7, 4), 2)
    return polytopes.IsomorphicPair.from_heights(fan, hK, hL, p)


class TestInterpolation:
    def test_lambda_zero_recovers_heights(self):
        rng = np.random.default_rng(0)
        pair = random_pair_2d(rng, 0.5)
        h, a, b, c = polytopes.interp_heights(pair, 0.0)
        assert np.allclose(h, pair.heights)
        assert np.allclose(a, 1.0) and np.allclose(b, 1.0) and np.allclose(c, 1.0)

    def test_p_one_collapse(self):
        rng = np.random.default_rng(1)
        pair = random_pair_2d(rng, 1.0)
        lam = 0.37
        h, a, b, c = polytopes.interp_heights(pair, lam)
        assert np.allclose(a, 1.0 + lam * pair.s)
        assert np.allclose(b, 1.0)
        assert np.allclose(c, 1.0 / (1.0 + lam * pair.s))

    def test_small_p_approaches_exponential_limit(self):
        fan = octagon_fan()
        hK = np.full(8, 1.0)
        hL = np.full(8, 1.8)
        lam = 0.6
        tiny = polytopes.IsomorphicPair.from_heights(fan, hK, hL, 1e-4)
        zero = polytopes.IsomorphicPair.from_heights(fan, hK, hL, 0.0)
        a_tiny = tiny.coefficients(lam)[0]
        a_zero = zero.coefficients(lam)[0]
        assert np.max(np.abs(a_tiny / a_zero - 1.0)) < 1e-3
        assert np.allclose(a_zero, np.exp(lam * np.log(1.8)))

    def test_positivity_invariant_enforced(self):
        fan = octagon_fan()
        with pytest.raises(DomainError):
            polytopes.IsomorphicPair(fan, np.ones(8), np.full(8, -2.5), 0.5)


class TestFacetMeasures:
    def test_square_edges_lebesgue(self):
        sq = bodies.polytope(SQUARE_NORMALS, np.ones(4))
        table = polytopes.facet_measures(sq, densities.lebesgue(2))
        assert np.allclose(table.values, 2.0)

    def test_square_edges_gaussian_oracle(self):
        sq = bodies.polytope(SQUARE_NORMALS, np.ones(4))
        table = polytopes.facet_measures(sq, densities.gaussian(2))
        # Oracle: pdf(1) times the 1D interval mass from adaptive quadrature.
        expected = (np.exp(-0.5) / np.sqrt(2 * pi)) * oracles.phi_interval_quad(-1, 1)
        assert np.allclose(table.values, expected, atol=1e-10)
        assert np.allclose(table.values, GAUSS_EDGE, atol=1e-10)

    def test_hexagon_from_corner_cuts(self):
        # Square with two opposite corners cut: six edges, perimeter matches
        # the shoelace value of the brute-force vertex scan.
        c = 1 / np.sqrt(2)
        normals = np.vstack([SQUARE_NORMALS, [[c, c], [-c, -c]]])
        heights = np.array([1, 1, 1, 1, 1.3, 1.3])
        hx = bodies.polytope(normals, heights)
        table = polytopes.facet_measures(hx, densities.lebesgue(2))
        pts = oracles.polygon_vertices_bruteforce(normals, heights, m=200000)
        d = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
        assert table.total == pytest.approx(d, rel=1e-4)
        assert np.all(table.values > 0)

    def test_vanished_facet_is_exactly_zero(self):
        c = 1 / np.sqrt(2)
        normals = np.vstack([SQUARE_NORMALS, [[c, c], [-c, -c]]])
        heights = np.array([1, 1, 1, 1, np.sqrt(2), np.sqrt(2)])
        # The diagonal halfspaces touch the square corners: zero-length edges.
        table = polytopes.facet_measures(None, densities.lebesgue(2),
                                         normals=normals, heights=heights)
        assert table.values[4] == 0.0 and table.values[5] == 0.0

    def test_box_3d_gaussian(self):
        axes = np.vstack([np.eye(3), -np.eye(3)])
        table = polytopes.facet_measures(
            None, densities.gaussian(3), normals=axes, heights=np.ones(6))
        side = 2 * ndtr(1.0) - 1
        expected = np.exp(-0.5) / np.sqrt(2 * pi) * side ** 2
        assert np.allclose(table.values, expected, atol=1e-12)

    def test_octahedron_3d_lebesgue_and_gaussian(self):
        s = 1 / np.sqrt(3)
        normals = np.array([[sx, sy, sz] for sx in (-s, s) for sy in (-s, s)
                            for sz in (-s, s)])
        heights = np.full(8, s * 1.0)   # dual description of the cross-polytope? no:
        # {|x1|+|x2|+|x3| <= 1} has facet normals (+-1,+-1,+-1)/sqrt(3), h = 1/sqrt(3).
        table = polytopes.facet_measures(None, densities.lebesgue(3),
                                         normals=normals, heights=heights)
        area_true = np.sqrt(3) / 2 * 8 / 2   # 8 equilateral triangle facets, side sqrt(2)
        assert table.total == pytest.approx(8 * np.sqrt(3) / 2, rel=1e-9)
        g = polytopes.facet_measures(None, densities.gaussian(3),
                                     normals=normals, heights=heights,
                                     budget=160000, seed=2)
        mc_total = g.total
        # Oracle: surface integral should be below the Lebesgue area times max density.
        assert 0 < mc_total < table.total * (2 * pi) ** -1.5 * 1.001


class TestDerivative:
    def test_zero_s_gives_zero(self):
        fan = octagon_fan()
        pair = polytopes.IsomorphicPair.from_heights(
            fan, np.ones(8), np.ones(8), 0.7)
        rep = polytopes.measure_derivative(pair, 0.4, densities.lebesgue(2))
        assert rep.value == 0.0

    def test_square_dilate_lebesgue_exact(self):
        fan = polytopes.NormalFan(SQUARE_NORMALS)
        pair = polytopes.IsomorphicPair.from_heights(
            fan, np.ones(4), 2.0 * np.ones(4), 1.0)
        rep = polytopes.measure_derivative(pair, 0.0, densities.lebesgue(2))
        # area(lam) = 4 (1 + lam)^2, derivative 8 at lam = 0.
        assert rep.value == pytest.approx(8.0, rel=1e-12)
        area = lambda lam: measures.measure(pair.body_at(lam),
                                            densities.lebesgue(2)).value
        step = 1e-4
        fd = (area(step) - area(0.0)) / step
        assert rep.value == pytest.approx(fd, rel=1e-3)
        fd_c = (area(2 * step) - area(0.0)) / (2 * step) * 2 - fd  # Richardson
        assert rep.value == pytest.approx(8.0, abs=1e-10)

    def test_gaussian_rectangle_path_vs_central_differences(self):
        fan = polytopes.NormalFan(SQUARE_NORMALS)
        pair = polytopes.IsomorphicPair.from_heights(
            fan, np.ones(4), np.array([1.5, 1.2, 1.5, 1.2]), 0.5)
        mu = densities.gaussian(2)
        rep = polytopes.measure_derivative(pair, 0.3, mu)
        step = 1e-3
        g = lambda lam: measures.measure(pair.body_at(lam), mu).value
        fd = (g(0.3 + step) - g(0.3 - step)) / (2 * step)
        assert rep.value == pytest.approx(fd, abs=5e-6)

    def test_random_pairs_match_finite_differences(self):
        rng = np.random.default_rng(23)
        mu = densities.lebesgue(2)
        for trial in range(10):
            p = float(rng.choice([1.0, 0.5, 0.0]))
            pair = random_pair_2d(rng, p)
            lam = float(rng.uniform(0.2, 0.8))
            rep = polytopes.measure_derivative(pair, lam, mu)
            step = 1e-5
            area = lambda la: measures.measure(pair.body_at(la), mu).value
            fd = (area(lam + step) - area(lam - step)) / (2 * step)
            assert rep.value == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestIsomorphyProbe:
    def test_identical_pair_single_interval(self):
        rng = np.random.default_rng(3)
        pair = random_pair_2d(rng, 1.0)
        dec = polytopes.strong_isomorphy_probe(
            polytopes.IsomorphicPair(pair.fan, pair.heights,
                                     np.zeros(pair.fan.size), 1.0))
        assert dec.intervals == ((0.0, 1.0),)
        assert dec.breakpoints == ()

    def test_octagon_square_breakpoint(self):
        fan = octagon_fan()
        hK = np.where(np.arange(8) % 2 == 0, 1.0, 1.2)
        hL = np.where(np.arange(8) % 2 == 0, 1.0, 1.5)
        pair = polytopes.IsomorphicPair.from_heights(fan, hK, hL, 1.0)
        dec = polytopes.strong_isomorphy_probe(pair)
        # Diagonal edges vanish when 1.2 + 0.3 lam crosses sqrt(2).
        expected = (np.sqrt(2) - 1.2) / 0.3
        assert len(dec.breakpoints) == 1
        assert dec.breakpoints[0] == pytest.approx(expected, abs=1e-9)
        assert len(dec.active_sets[0]) == 8 and len(dec.active_sets[1]) == 4

    def test_derivative_continuous_across_type_change(self):
        fan = octagon_fan()
        hK = np.where(np.arange(8) % 2 == 0, 1.0, 1.2)
        hL = np.where(np.arange(8) % 2 == 0, 1.1, 1.5)
        pair = polytopes.IsomorphicPair.from_heights(fan, hK, hL, 1.0)
        mu = densities.gaussian(2)
        dec = polytopes.strong_isomorphy_probe(pair)
        assert len(dec.breakpoints) == 1
        star = dec.breakpoints[0]
        # One-sided limits differ only by the vanishing facet's O(delta)
        # contribution: the derivative stays continuous across the change.
        delta = 1e-7
        left = polytopes.measure_derivative(pair, star - delta, mu)
        right = polytopes.measure_derivative(pair, star + delta, mu)
        assert right.type_changed
        assert abs(left.value) > 1e-3
        assert left.value == pytest.approx(right.value, abs=1e-5)

    def test_random_pairs_finite_decomposition(self):
        rng = np.random.default_rng(29)
        for _ in range(5):
            pair = random_pair_2d(rng, float(rng.choice([0.0, 0.5, 1.0])))
            dec = polytopes.strong_isomorphy_probe(pair)
            assert len(dec.intervals) >= 1
            assert all(hi > lo for lo, hi in dec.intervals)

    def test_concavity_ground_truth_brunn_minkowski(self):
        # (p, q) = (1, 0) with Lebesgue: log area concave along the family.
        rng = np.random.default_rng(31)
        for _ in range(10):
            pair = random_pair_2d(rng, 1.0)
            lams = np.linspace(0, 1, 9)
            vals = np.array([np.log(measures.measure(
                pair.body_at(la), densities.lebesgue(2)).value) for la in lams])
            d2 = vals[:-2] - 2 * vals[1:-1] + vals[2:]
            assert np.max(d2) <= 1e-10


class TestFirstVariation:
    def test_ball_constant_closed_form(self):
        rep = polytopes.first_variation_check(
            bodies.ball(1.0, 2), lambda u: np.ones(len(u)),
            densities.lebesgue(2))
        assert rep.surface_integral == pytest.approx(2 * pi, rel=1e-12)
        # Delta(eps) = pi((1+eps)^2 - 1)/eps = 2 pi + pi eps exactly.
        assert np.allclose(rep.deltas, 2 * pi + pi * rep.eps, rtol=1e-12)
        assert rep.rate == pytest.approx(1.0, abs=1e-6)
        assert abs(rep.extrapolated - 2 * pi) <= 3 * rep.extrapolated_stderr

    def test_square_gaussian_limit(self):
        sq = bodies.polytope(SQUARE_NORMALS, np.ones(4))
        rep = polytopes.first_variation_check(
            sq, lambda u: np.ones(len(u)), densities.gaussian(2))
        assert rep.surface_integral == pytest.approx(4 * GAUSS_EDGE, rel=1e-10)
        assert abs(rep.extrapolated - rep.surface_integral) <= \
            3 * rep.extrapolated_stderr
        assert rep.rate >= 0.9

    def test_cross_link_with_measure_derivative(self):
        th8 = np.arange(8) * pi / 4
        U8 = np.column_stack([np.cos(th8), np.sin(th8)])
        hK = np.tile([1.0, 1.3], 4)
        hL = np.tile([1.25, 1.2], 4)
        K = bodies.polytope(U8, hK)
        L = bodies.polytope(U8, hL)
        mu = densities.gaussian(2)
        fan = polytopes.NormalFan(U8)
        pair = polytopes.IsomorphicPair.from_heights(fan, hK, hL, 1.0)
        deriv = polytopes.measure_derivative(pair, 0.0, mu)
        rep = polytopes.first_variation_check(
            K, lambda u: L.support(u) - K.support(u), mu,
            eps_grid=np.array([0.04, 0.02, 0.01, 0.005]))
        assert rep.surface_integral == pytest.approx(deriv.value, rel=1e-10)
        assert abs(rep.extrapolated - deriv.value) <= \
            3 * rep.extrapolated_stderr + 1e-6

    def test_positivity_shrinks_eps(self):
        rep = polytopes.first_variation_check(
            bodies.ball(0.1, 2), lambda u: -np.ones(len(u)),
            densities.lebesgue(2), eps_grid=np.array([0.5, 0.05]))
        assert rep.shrunk

    def test_surface_total_matches_shoelace_perimeter(self):
        rng = np.random.default_rng(37)
        from pqbm.catalog import random_symmetric_polygon

        for _ in range(5):
            P = random_symmetric_polygon(rng)
            table = polytopes.facet_measures(P, densities.lebesgue(2))
            assert table.total == pytest.approx(P._polygon().perimeter,
                                                abs=1e-9)


class TestFanValidation:
    def test_fan_requires_negation_closure(self):
        with pytest.raises(InputError):
            polytopes.NormalFan(np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_pair_from_config_roundtrip(self):
        from pqbm.catalog import pair_from_config

        cfg = {"normals": SQUARE_NORMALS.tolist(),
               "heights_K": [1.0, 1.0, 1.0, 1.0],
               "heights_L": [1.5, 1.2, 1.5, 1.2], "p": 0.5}
        pair = pair_from_config(cfg)
        assert pair.p == 0.5
        assert np.allclose(pair.heights_at(1.0), [1.5, 1.2, 1.5, 1.2])
