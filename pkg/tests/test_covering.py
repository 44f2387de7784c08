"""Tests for lift enumeration: crossing counts, orthogonal arc hits and the bad-set estimate."""

import pytest

from messcore.covering import (
    ArcHitCounter,
    CurveFrame,
    bad_set_measure,
    count_crossings,
    orthogonal_arc_hits,
    track_axis,
)
from messcore.errors import PreconditionError
from messcore.surface import geometric_intersection


class TestFrame:
    def test_axis_is_imaginary(self, reference, library):
        frame = CurveFrame.build(reference, library.curve("a1"))
        m = frame.word_matrix("a")
        assert abs(m[0, 1]) < 1e-9 and abs(m[1, 0]) < 1e-9
        assert frame.length == pytest.approx(2.0, abs=1e-9)

    def test_tracking_stays_close(self, reference, library):
        frame = CurveFrame.build(reference, library.curve("s"))
        tracking = track_axis(frame, frame.length)
        assert tracking.error < frame.max_displacement
        assert tracking.nearest(-1.0) == 0


class TestCrossings:
    @pytest.mark.parametrize("first,second,expected", [
        ("a1", "b1", 1),
        ("a1", "a2", 0),
        ("a1", "s", 0),
        ("s", "m", 2),
    ])
    def test_counts_match_table(self, reference, library, first, second, expected):
        c1, c2 = library.curve(first), library.curve(second)
        assert count_crossings(reference, c1, c2) == expected

    def test_explicit_structure_counts(self, twisted, library):
        c1, c2 = library.curve("a1b1"), library.curve("a1B1")
        assert geometric_intersection(c1, c2, h=twisted) == 2


class TestOrthogonalArcs:
    def test_inside_collar_sees_only_itself(self, reference, library):
        counter = ArcHitCounter(reference, library.curve("a1"), alpha0=0.5)
        for s in (0.0, 0.3, 1.1, 1.9):
            assert counter.counts(s) == (1, 1)

    def test_longer_arcs_see_more(self, reference, library):
        a1 = library.curve("a1")
        short = orthogonal_arc_hits(reference, a1, 0.7, 0.5, "right")
        long = orthogonal_arc_hits(reference, a1, 0.7, 3.0, "right")
        assert long >= short

    def test_position_wraps(self, reference, library):
        counter = ArcHitCounter(reference, library.curve("a1"), alpha0=2.0)
        assert counter.counts(0.4) == counter.counts(0.4 + counter.length)

    def test_bad_side(self, reference, library):
        with pytest.raises(PreconditionError):
            orthogonal_arc_hits(reference, library.curve("a1"), 0.0, 0.5, "up")

    def test_probe_curve_rejected(self, reference, library):
        with pytest.raises(PreconditionError):
            ArcHitCounter(reference, library.curve("a1a2"), alpha0=0.5)


class TestBadSet:
    def test_whole_curve_bad_at_threshold(self, reference, library):
        est = bad_set_measure(reference, library.curve("a1"), alpha0=0.5, beta0=0.5, samples=100)
        assert est.fraction == 1.0
        assert est.measure == pytest.approx(2.0, abs=1e-9)
        assert est.stderr == 0.0

    def test_nothing_bad_below_threshold(self, reference, library):
        est = bad_set_measure(reference, library.curve("a1"), alpha0=0.5, beta0=0.4, samples=100)
        assert est.measure == 0.0
        assert est.max_count == 1
        assert est.within_bound(delta0=0.0, l0=0.0)

    def test_too_few_samples(self, reference, library):
        with pytest.raises(PreconditionError):
            bad_set_measure(reference, library.curve("a1"), 0.5, 0.1, samples=99)

    def test_bound_includes_slack(self, reference, library):
        est = bad_set_measure(reference, library.curve("a1"), alpha0=0.5, beta0=0.5, samples=100)
        assert not est.within_bound(delta0=0.1, l0=0.0)
        assert est.within_bound(delta0=0.1, l0=1.9)
