"""Tests for AdS2 geometry: distances, lines, the support-line configuration and spacelike arcs."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from messcore.ads2 import (
    AdS2Line,
    AdS2Point,
    DistanceKind,
    SpacelikePolyline,
    angle_thresholds,
    boost,
    build_config,
    dual_line,
    dual_point,
    equidistant_curve,
    equidistant_length_factor,
    is_isometry,
    line_angle,
    lorentz_distance,
    monotonicity_violations,
    nested_arc_compare,
    polyline_length,
    tau_scan,
    random_isometry,
    sample_config,
    sample_nested_pair,
    tau_core_length,
    time_rotation,
)
from messcore.errors import (
    ArcPreconditionError,
    CausalCharacterError,
    PreconditionError,
    RangeError,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def symmetric_tau(alpha0, phi):
    return math.atan2(math.sinh(phi), math.cosh(alpha0) + math.cosh(phi) * math.sinh(alpha0))


class TestPoints:
    def test_off_quadric(self):
        with pytest.raises(PreconditionError):
            AdS2Point(np.array([1.0, 1.0, 0.0]))

    def test_chart_round_trip(self):
        p = AdS2Point.from_affine(0.2, -0.3)
        assert p.affine == pytest.approx((0.2, -0.3), abs=1e-14)

    def test_outside_chart(self):
        with pytest.raises(RangeError):
            AdS2Point.from_affine(2.0, 0.0)

    def test_normalized(self):
        p = AdS2Point.normalized([3.0, 0.0, 0.0])
        assert p.close_to(AdS2Point.basepoint())


class TestDistance:
    @pytest.mark.parametrize("a", [1e-3, 0.3, 2.0, 7.0])
    def test_spacelike(self, a):
        sep = lorentz_distance(AdS2Point.basepoint(), AdS2Point(np.array([math.cosh(a), 0.0, math.sinh(a)])))
        assert sep.kind is DistanceKind.SPACELIKE
        assert sep.value == pytest.approx(a, rel=1e-12)

    @pytest.mark.parametrize("t", [1e-3, 0.5, 2.0, math.pi / 2])
    def test_timelike(self, t):
        sep = lorentz_distance(AdS2Point.basepoint(), AdS2Point(np.array([math.cos(t), math.sin(t), 0.0])))
        assert sep.kind is DistanceKind.TIMELIKE
        assert sep.value == pytest.approx(t, rel=1e-10)

    def test_lightlike(self):
        sep = lorentz_distance(AdS2Point.basepoint(), AdS2Point(np.array([1.0, 0.4, 0.4])))
        assert sep.kind is DistanceKind.LIGHTLIKE

    def test_unreachable(self):
        a = 0.8
        far = AdS2Point(np.array([-math.cosh(a), 0.0, -math.sinh(a)]))
        sep = lorentz_distance(AdS2Point.basepoint(), far)
        assert sep.kind is DistanceKind.UNREACHABLE
        assert sep.value == pytest.approx(a, rel=1e-10)

    def test_same_point(self):
        sep = lorentz_distance(AdS2Point.basepoint(), AdS2Point.basepoint())
        assert sep == (DistanceKind.TIMELIKE, 0.0)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_isometry_invariance(self, seed):
        rng = np.random.default_rng(seed)
        g = random_isometry(rng)
        assert is_isometry(g)
        p = AdS2Point.from_affine(*rng.uniform(-0.5, 0.5, size=2))
        q = AdS2Point.from_affine(*rng.uniform(-0.5, 0.5, size=2))
        before, after = lorentz_distance(p, q), lorentz_distance(p.moved(g), q.moved(g))
        assert after.kind is before.kind
        assert after.value == pytest.approx(before.value, rel=1e-8, abs=1e-10)

    def test_boost_axis_checked(self):
        with pytest.raises(PreconditionError):
            boost(2, 0.1)
        assert is_isometry(time_rotation(0.4) @ boost(0, 1.3))


class TestLines:
    def test_through_is_future_oriented(self):
        a, b = AdS2Point.from_affine(-0.3, 0.0), AdS2Point.from_affine(0.3, 0.1)
        line = AdS2Line.through(a, b)
        assert line.contains(a) and line.contains(b)
        assert line.side(AdS2Point.from_affine(0.0, 0.5)) < 0
        assert line.side(AdS2Point.from_affine(0.0, -0.5)) > 0

    def test_through_timelike_pair(self):
        with pytest.raises(CausalCharacterError):
            AdS2Line.through(AdS2Point.basepoint(), AdS2Point.from_affine(0.0, 0.3))

    def test_dual(self):
        x = AdS2Point.from_affine(0.1, 0.2)
        line = dual_line(x)
        assert dual_point(line).close_to(x)
        y = line.point_at(0.7)
        sep = lorentz_distance(x, y)
        assert sep.kind is DistanceKind.TIMELIKE
        assert sep.value == pytest.approx(math.pi / 2, abs=1e-10)

    def test_point_at_measures_length(self):
        line = AdS2Line(np.array([0.0, 1.0, 0.0]))
        p0, p1 = line.point_at(0.0), line.point_at(1.25)
        assert line.contains(p1)
        assert lorentz_distance(p0, p1).value == pytest.approx(1.25, abs=1e-12)
        assert p1.affine[0] > p0.affine[0]

    @pytest.mark.parametrize("r", [0.1, 1.0, 3.0])
    def test_line_angle(self, r):
        line = AdS2Line(np.array([0.0, 1.0, 0.0]))
        assert line_angle(line, line.moved(boost(1, r))) == pytest.approx(r, abs=1e-10)


class TestConfig:
    def test_support_lines(self):
        cfg = build_config(0.3, 1.2, 0.8)
        assert cfg.pi_x.contains(cfg.x)
        assert cfg.pi_x.contains(cfg.x_l) and cfg.pi_x.contains(cfg.x_r)
        assert cfg.p_l.contains(cfg.x_l) and cfg.p_r.contains(cfg.x_r)
        assert cfg.p_l.side(cfg.x) > 0 and cfg.p_r.side(cfg.x) > 0
        assert lorentz_distance(cfg.x, cfg.x_r).value == pytest.approx(0.3, abs=1e-12)

    def test_tau_meets_lower_line(self):
        cfg = build_config(0.3, 1.2, 0.8)
        t = tau_core_length(cfg)
        assert cfg.pi_prime.contains(cfg.tau_point(t), tol=1e-10)
        assert cfg.pi_prime.side(cfg.x) < 0

    @pytest.mark.parametrize("alpha0,phi", [(0.01, 0.05), (0.1, 1.0), (1.0, 3.0), (2.0, 10.0)])
    def test_symmetric_closed_form(self, alpha0, phi):
        t = tau_core_length(build_config(alpha0, phi, phi))
        assert t == pytest.approx(symmetric_tau(alpha0, phi), abs=1e-10)

    def test_mirror_symmetry(self):
        a = tau_core_length(build_config(0.4, 0.7, 2.5))
        b = tau_core_length(build_config(0.4, 2.5, 0.7))
        assert a == pytest.approx(b, abs=1e-12)

    def test_below_right_angle(self):
        rng = np.random.default_rng(4)
        for _ in range(10_000):
            assert tau_core_length(sample_config(rng)) < math.pi / 2

    def test_tight_corner_approaches_right_angle(self):
        assert tau_core_length(build_config(0.01, 10.0, 10.0)) > math.pi / 2 - 0.05

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (0.5, -1.0, 1.0), (0.5, 1.0, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(PreconditionError):
            build_config(*args)


class TestScan:
    def test_small_grid(self):
        table = tau_scan([1.0, 0.5, 0.1], [0.5, 1.0, 2.0, 4.0], epsilon_primes=[0.1])
        assert table.columns[-1] == "status"
        assert len(table.rows) == 48
        assert table.failed() == 0
        assert table.meta["monotonicity_violations"] == 0
        assert all(g > 0 for g in table.column("gap"))
        assert set(table.meta["thresholds"]) == {0.1}

    def test_row_order(self):
        table = tau_scan([1.0, 0.5], [1.0, 2.0])
        cells = [row[:3] for row in table.rows]
        assert cells[:3] == [(1.0, 1.0, 1.0), (1.0, 1.0, 2.0), (1.0, 2.0, 1.0)]

    def test_threads_keep_rows(self):
        one = tau_scan([1.0, 0.2], [0.5, 2.0, 6.0], threads=1)
        four = tau_scan([1.0, 0.2], [0.5, 2.0, 6.0], threads=4)
        assert one.rows == four.rows

    def test_unsorted_grids(self):
        with pytest.raises(PreconditionError):
            tau_scan([1.0, 0.5], [2.0, 1.0])
        with pytest.raises(PreconditionError):
            tau_scan([1.0, 0.5, 0.8], [1.0, 2.0])

    def test_no_violations_on_fine_grid(self):
        table = tau_scan(np.geomspace(1.0, 0.01, 6), np.linspace(0.5, 8.0, 12))
        assert monotonicity_violations(table) == []

    def test_thresholds(self):
        table = tau_scan([1.0, 0.5, 0.1], [0.5, 1.0, 2.0, 4.0])
        loose = angle_thresholds(table, 1.5)
        assert loose["A"] == {1.0: 0.5, 0.5: 0.5, 0.1: 0.5}
        assert loose["eta0"] == 1.0
        assert angle_thresholds(table, 1e-6)["eta0"] is None

    def test_thresholds_shrink_with_alpha(self):
        table = tau_scan([1.0, 0.3, 0.05], [0.5, 1.0, 2.0, 4.0, 8.0])
        found = angle_thresholds(table, 0.3)["A"]
        admitted = [found[a] for a in (1.0, 0.3, 0.05) if found[a] is not None]
        assert admitted == sorted(admitted, reverse=True)


def v_shape(depth=0.2):
    return SpacelikePolyline.from_affine([(-0.4, 0.0), (0.0, -depth), (0.4, 0.0)])


def chord():
    return SpacelikePolyline.from_affine([(-0.4, 0.0), (0.4, 0.0)])


class TestArcs:
    def test_timelike_segment(self):
        with pytest.raises(CausalCharacterError):
            SpacelikePolyline.from_affine([(0.0, 0.0), (0.1, 0.5)])

    def test_single_vertex(self):
        with pytest.raises(PreconditionError):
            SpacelikePolyline((AdS2Point.basepoint(),))

    def test_convexity(self):
        assert v_shape().convexity() == "future"
        assert v_shape(-0.2).convexity() == "past"
        assert chord().refined(3).convexity() == "flat"
        zigzag = SpacelikePolyline.from_affine([(-0.4, 0.0), (-0.2, -0.1), (0.0, 0.0), (0.2, -0.1), (0.4, 0.0)])
        assert zigzag.convexity() is None

    def test_refining_keeps_length(self):
        arc = v_shape()
        assert polyline_length(arc.refined(5)) == pytest.approx(polyline_length(arc), abs=1e-12)

    def test_chord_is_longest(self):
        result = nested_arc_compare(chord(), v_shape())
        assert result.ok
        assert result.lengths[0] > result.lengths[1]

    def test_equal_arcs(self):
        result = nested_arc_compare(v_shape(), v_shape())
        assert result.ok
        assert result.lengths[0] == result.lengths[1]

    def test_wrong_nesting(self):
        with pytest.raises(ArcPreconditionError) as info:
            nested_arc_compare(v_shape(), chord())
        assert info.value.reason == "nesting"

    def test_endpoints(self):
        other = SpacelikePolyline.from_affine([(-0.4, 0.0), (0.0, -0.2), (0.5, 0.0)])
        with pytest.raises(ArcPreconditionError) as info:
            nested_arc_compare(chord(), other)
        assert info.value.reason == "endpoints"

    def test_convexity_required(self):
        with pytest.raises(ArcPreconditionError) as info:
            nested_arc_compare(v_shape(-0.2), chord())
        assert info.value.reason == "convexity"

    def test_random_nested_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            upper, lower = sample_nested_pair(rng)
            assert nested_arc_compare(upper, lower).ok

    def test_length_is_isometry_invariant(self, rng):
        arc = v_shape()
        g = random_isometry(rng, spread=0.5)
        moved = SpacelikePolyline(tuple(v.moved(g) for v in arc.vertices))
        assert polyline_length(moved) == pytest.approx(polyline_length(arc), rel=1e-10)


class TestEquidistant:
    def test_factor(self):
        assert equidistant_length_factor(math.pi / 3) == pytest.approx(0.5)
        for d in (0.0, math.pi / 2):
            with pytest.raises(RangeError):
                equidistant_length_factor(d)

    @pytest.mark.parametrize("d", [0.2, 0.8, 1.4])
    def test_curve_length(self, d):
        line = AdS2Line(np.array([0.0, 1.0, 0.0]))
        curve = equidistant_curve(line, d, -1.0, 1.0, 400)
        assert polyline_length(curve) == pytest.approx(2.0 * math.cos(d), rel=1e-4)

    def test_points_in_future_at_distance(self):
        line = AdS2Line(np.array([0.0, 1.0, 0.0]))
        curve = equidistant_curve(line, 0.6, -0.5, 0.5, 5)
        for v, s in zip(curve.vertices, np.linspace(-0.5, 0.5, 5)):
            assert line.side(v) < 0
            sep = lorentz_distance(v, line.point_at(s))
            assert sep.kind is DistanceKind.TIMELIKE
            assert sep.value == pytest.approx(0.6, abs=1e-12)

    def test_bad_range(self):
        with pytest.raises(PreconditionError):
            equidistant_curve(AdS2Line(np.array([0.0, 1.0, 0.0])), 0.5, 1.0, -1.0, 10)
