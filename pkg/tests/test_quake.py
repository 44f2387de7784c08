"""Tests for twist flows, earthquakes and the connecting-lamination solver."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from messcore.config import PENALTY, START_WEIGHT_MAX
from messcore.errors import NonConvergenceError, PreconditionError, UnsupportedLaminationError
from messcore.quake import (
    EarthquakeSpec,
    divergence_proxy,
    earthquake,
    guarded_residuals,
    left_earthquake,
    right_earthquake,
    solve_connecting_lamination,
    spectrum_distance,
    start_points,
    support_decomposition,
    twist_flow,
    twist_length_profile,
    weight_continuity,
)
from messcore.surface import (
    Multicurve,
    apply_mapping_class,
    curve_length,
    fn_to_holonomy,
    holonomy_to_fn,
    random_fn,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestTwistFlow:
    def test_full_twist_is_dehn_twist(self, twisted, library):
        length = curve_length(twisted, "a")
        flowed = twist_flow(twisted, "a1", length)
        remarked = twisted.remark(library.mapping_class("T_a1").images)
        for g in "abcd":
            assert flowed.holonomy[g].allclose(remarked.holonomy[g], tol=1e-9)

    @pytest.mark.parametrize("name,word", [
        ("a1", "a"), ("a2", "c"), ("s", "abAB"), ("m", "bABc"),
        ("b1", "b"), ("b2", "d"), ("bm", "babABD"),
    ])
    def test_flow_keeps_own_length(self, twisted, name, word):
        before = curve_length(twisted, word)
        assert curve_length(twist_flow(twisted, name, 0.8), word) == pytest.approx(before, rel=1e-10)

    def test_flow_moves_crossing_curve(self, twisted):
        before = curve_length(twisted, "b")
        assert abs(curve_length(twist_flow(twisted, "a1", 0.8), "b") - before) > 1e-3

    def test_disjoint_flows_commute(self, twisted):
        one = twist_flow(twist_flow(twisted, "a1", 0.3), "s", -0.4)
        two = twist_flow(twist_flow(twisted, "s", -0.4), "a1", 0.3)
        assert spectrum_distance(one, two).value < 1e-10

    def test_unknown_curve(self, twisted):
        with pytest.raises(UnsupportedLaminationError):
            twist_flow(twisted, "a1b1", 0.1)

    def test_profile_is_convex_near_minimum(self, twisted, library):
        ts = np.linspace(-3.0, 3.0, 13)
        profile = twist_length_profile(twisted, "a1", library.curve("b1"), ts)
        assert np.all(np.diff(profile, 2) > 0)


class TestEarthquake:
    def test_left_shifts_chart_twist(self, twisted):
        lam = Multicurve.from_weights({"a1": 0.3, "s": 0.2})
        quaked = left_earthquake(twisted, lam)
        assert quaked.chart.twists == pytest.approx((0.7, -0.6, 0.5))
        recovered = holonomy_to_fn(quaked, "P0", seed=quaked.chart)
        assert recovered.twists == pytest.approx((0.7, -0.6, 0.5), abs=1e-7)

    def test_right_subtracts(self, twisted):
        quaked = right_earthquake(twisted, Multicurve.from_weights({"a2": 0.5}))
        assert quaked.chart.twists == pytest.approx((0.4, -1.1, 0.3))

    def test_empty_lamination_is_identity(self, twisted):
        assert left_earthquake(twisted, Multicurve()) is twisted

    def test_right_inverts_left(self, library):
        rng = np.random.default_rng(11)
        supports = [("a1", "a2", "s"), ("b1", "b2", "s"), ("a1", "a2", "m"), ("b1", "b2", "bm")]
        worst = 0.0
        for i in range(100):
            h = fn_to_holonomy(random_fn(rng))
            support = supports[i % len(supports)]
            lam = Multicurve.from_weights(dict(zip(support, rng.uniform(0.05, 2.0, size=3))))
            back = right_earthquake(left_earthquake(h, lam), lam)
            worst = max(worst, spectrum_distance(back, h).value)
        assert worst < 1e-8

    def test_remarked_earthquake(self, twisted, library):
        phi = library.mapping_class("phi")
        lam = Multicurve.from_weights({"b1": 0.6})
        direct = left_earthquake(twisted, lam)
        via = apply_mapping_class(left_earthquake(apply_mapping_class(twisted, phi.inverse()),
                                                  Multicurve.from_weights({"a1": 0.6})), phi)
        assert spectrum_distance(direct, via).value < 1e-10

    def test_spec_form_matches_helpers(self, twisted):
        lam = Multicurve.from_weights({"b1": 0.4, "b2": 0.2})
        assert spectrum_distance(earthquake(EarthquakeSpec(twisted, lam, "right")),
                                 right_earthquake(twisted, lam)).value == 0.0

    def test_bad_side(self, twisted):
        with pytest.raises(PreconditionError):
            EarthquakeSpec(twisted, Multicurve(), "up")

    def test_support_outside_library(self):
        with pytest.raises(UnsupportedLaminationError):
            support_decomposition(["a1", "b2", "m"])


class TestSpectrumDistance:
    def test_zero_on_itself(self, twisted):
        report = spectrum_distance(twisted, twisted)
        assert report.value == 0.0
        assert report.witness is None

    def test_symmetric(self, twisted, reference):
        assert spectrum_distance(twisted, reference).value == pytest.approx(
            spectrum_distance(reference, twisted).value)
        assert float(spectrum_distance(twisted, reference)) > 0

    def test_empty_family(self, twisted):
        with pytest.raises(PreconditionError):
            spectrum_distance(twisted, twisted, family=[])


class TestSolver:
    def test_recovers_single_weight(self, twisted):
        target = left_earthquake(twisted, Multicurve.from_weights({"a1": 0.7}))
        lam, residual = solve_connecting_lamination(twisted, target, "left", supports=[("a1", "a2", "s")],
                                                    starts=2, seed=5)
        assert residual < 1e-8
        assert lam.support == ("a1",)
        assert lam.weights["a1"] == pytest.approx(0.7, abs=1e-5)

    def test_right_side(self, twisted):
        target = right_earthquake(twisted, Multicurve.from_weights({"a2": 0.4, "s": 0.9}))
        lam, residual = solve_connecting_lamination(twisted, target, "right", supports=[("a1", "a2", "s")],
                                                    starts=3, seed=5)
        assert residual < 1e-8
        assert lam.weights == pytest.approx({"a2": 0.4, "s": 0.9}, abs=1e-5)

    def test_needs_a_support(self, twisted):
        with pytest.raises(PreconditionError):
            solve_connecting_lamination(twisted, twisted, supports=[])

    def test_weight_continuity(self, twisted):
        target = left_earthquake(twisted, Multicurve.from_weights({"a1": 0.7}))
        report = weight_continuity(twisted, target, supports=[("a1", "a2", "s")], directions=("a1",), seed=5)
        assert report.base_residual < 1e-8
        assert report.max_weight_slope == pytest.approx(1.0, abs=1e-2)
        assert report.max_slope < 1e-3

    def test_many_starts_stay_finite(self, twisted):
        target = left_earthquake(twisted, Multicurve.from_weights({"a1": 0.7, "a2": 1.5}))
        lam, residual = solve_connecting_lamination(twisted, target, "left", supports=[("a1", "a2", "s")],
                                                    starts=12, seed=17)
        assert residual < 1e-8
        assert lam.weights == pytest.approx({"a1": 0.7, "a2": 1.5}, abs=1e-5)

    def test_unreachable_target_raises(self, twisted, reference):
        with pytest.raises(NonConvergenceError) as info:
            solve_connecting_lamination(twisted, reference, "left", supports=[("a1",)], starts=2, seed=5)
        assert info.value.residual > 1e-6


class TestSolverGuards:
    def test_penalty_replaces_errors(self):
        def fails(w):
            raise PreconditionError("isometry determinant 0.0 is not 1")

        r = guarded_residuals(fails, 4)(np.array([1.0, 2.0]))
        assert r.shape == (4,)
        assert np.all(r == PENALTY * 4.0)

    def test_penalty_replaces_nan(self):
        r = guarded_residuals(lambda w: np.array([0.1, np.nan]), 2)(np.array([0.5]))
        assert np.all(np.isfinite(r))
        assert np.all(r == PENALTY * 1.5)

    def test_passes_good_residuals(self):
        r = guarded_residuals(lambda w: w - 1.0, 2)(np.array([1.5, 0.5]))
        assert r == pytest.approx([0.5, -0.5])

    def test_penalty_grows_with_weight(self):
        def fails(w):
            raise PreconditionError("cancelled")

        small = guarded_residuals(fails, 1)(np.array([1.0]))
        large = guarded_residuals(fails, 1)(np.array([10.0]))
        assert large[0] > small[0]

    def test_start_points(self, rng):
        initial = Multicurve.from_weights({"a1": 7.5})
        x0 = start_points(("a1", "a2", "s"), 6, rng, initial)
        assert x0.shape == (7, 3)
        assert x0[0] == pytest.approx([7.5, 0.0, 0.0])
        assert np.all(x0[1] == 0.0)
        assert np.all((x0[2:] >= 0.0) & (x0[2:] <= START_WEIGHT_MAX))

    def test_initial_off_support_is_ignored(self, rng):
        x0 = start_points(("a1", "a2", "s"), 3, rng, Multicurve.from_weights({"b1": 1.0}))
        assert x0.shape == (3, 3)
        assert np.all(x0[0] == 0.0)


class TestProperties:
    @given(seeds)
    @settings(max_examples=40, deadline=None)
    def test_spectrum_distance_triangle(self, seed):
        rng = np.random.default_rng(seed)
        h1, h2, h3 = (fn_to_holonomy(random_fn(rng)) for _ in range(3))
        d13 = spectrum_distance(h1, h3).value
        assert d13 <= spectrum_distance(h1, h2).value + spectrum_distance(h2, h3).value + 1e-12

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_left_then_right_solve_returns(self, seed):
        rng = np.random.default_rng(seed)
        h = fn_to_holonomy(random_fn(rng, (1.5, 2.5), (-0.5, 0.5)))
        lam = Multicurve.from_weights(dict(zip(("a1", "a2", "s"), rng.uniform(0.1, 1.5, size=3))))
        target = left_earthquake(h, lam)
        supports = [("a1", "a2", "s")]
        forward, _ = solve_connecting_lamination(h, target, "left", supports=supports, starts=3, seed=seed)
        backward, _ = solve_connecting_lamination(target, h, "right", supports=supports, starts=3, seed=seed)
        assert backward.weights == pytest.approx(forward.weights, abs=1e-5)
        assert spectrum_distance(right_earthquake(target, forward), h).value < 1e-6

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_twist_path_diverges(self, library, seed):
        h = fn_to_holonomy(random_fn(np.random.default_rng(seed)))
        ts = np.linspace(0.0, 40.0, 41)
        profile = twist_length_profile(h, "a1", library.curve("b1"), ts)
        assert profile[-1] > profile[0] + 20.0
        assert np.all(np.diff(profile[20:]) > 0)
        assert divergence_proxy(twist_flow(h, "a1", 40.0)) > divergence_proxy(twist_flow(h, "a1", 20.0))
