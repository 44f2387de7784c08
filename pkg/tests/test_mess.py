"""Tests for the forward map, fabrication, boundary prescription and the ratio scans."""

import math

import numpy as np
import pytest

from messcore.config import APPROXIMATION_TOLERANCE, OPTIMIZER_STARTS, derive_seed
from messcore.errors import PreconditionError
from messcore.mess import (
    PROP5_COLUMNS,
    GHMCStructure,
    equidistant_budget,
    fabricate_from_upper,
    fabricate_ghmc,
    phi_forward,
    prescribe_boundary,
    properness_probe,
    prop5_scan,
    rank_agreement,
    ratio_thresholds,
    swap_sides,
)
from messcore.quake import right_earthquake, spectrum_distance
from messcore.scan import ScanTable
from messcore.surface import FNCoords, Multicurve, random_fn

UPPER = [("a1", "a2", "s")]
LOWER = [("b1", "b2", "bm")]


@pytest.fixture(scope="module")
def fabricated():
    """A holonomy pair with filling bending laminations on P0 and Pbm curves."""
    lam_plus = Multicurve.from_weights({"a1": 0.4, "a2": 0.3})
    lam_minus = Multicurve.from_weights({"b1": 0.3, "b2": 0.25, "bm": 0.2})
    return fabricate_ghmc(lam_plus, lam_minus, FNCoords((2.0, 2.0, 2.0), (0.0, 0.0, 0.0)), starts=4)


class TestFuchsian:
    def test_forward(self, twisted):
        data = phi_forward(GHMCStructure(twisted, twisted), UPPER, LOWER, starts=2)
        assert not data.lam_plus and not data.lam_minus
        assert spectrum_distance(data.m_plus, twisted).value < 1e-9
        assert spectrum_distance(data.m_minus, twisted).value < 1e-9
        assert data.max_residual < 1e-9

    def test_prescribe(self, twisted):
        result = prescribe_boundary(twisted, twisted, UPPER, LOWER, starts=2)
        assert result.converged
        assert result.residual < 1e-9
        assert spectrum_distance(result.ghmc.rho_l, twisted).value < 1e-9


class TestFabrication:
    def test_diagram_closes(self, fabricated):
        _, data = fabricated
        assert data.max_residual < 1e-8

    def test_upper_pair(self, twisted):
        lam = Multicurve.from_weights({"a1": 0.5})
        g = fabricate_from_upper(twisted, lam)
        assert spectrum_distance(g.rho_l, twisted).value > 0.0
        assert spectrum_distance(right_earthquake(g.rho_l, lam.scaled(2.0)), g.rho_r).value < 1e-10

    def test_forward_recovers_laminations(self, fabricated):
        g, data = fabricated
        found = phi_forward(g, UPPER, LOWER, starts=4)
        assert found.lam_plus.weights == pytest.approx(data.lam_plus.weights, abs=1e-5)
        assert found.lam_minus.weights == pytest.approx(data.lam_minus.weights, abs=1e-5)
        assert spectrum_distance(found.m_plus, data.m_plus).value < 1e-5
        assert spectrum_distance(found.m_minus, data.m_minus).value < 1e-5
        assert found.max_residual < 1e-5

    @pytest.mark.parametrize("seed", [3, 11, 29])
    def test_forward_over_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        for k in range(2):
            lam_plus = Multicurve.from_weights(dict(zip(("a1", "a2"), rng.uniform(0.1, 0.6, 2))))
            lam_minus = Multicurve.from_weights(dict(zip(("b1", "b2", "bm"), rng.uniform(0.1, 0.5, 3))))
            g, data = fabricate_ghmc(lam_plus, lam_minus, random_fn(rng, (1.5, 2.5), (-0.5, 0.5)), starts=4)
            found = phi_forward(g, UPPER, LOWER, seed=derive_seed(seed, k), starts=OPTIMIZER_STARTS)
            assert found.max_residual < 1e-5
            assert found.lam_plus.weights == pytest.approx(data.lam_plus.weights, abs=1e-5)

    def test_swapping_sides_swaps_data(self, fabricated):
        g, data = fabricated
        swapped = phi_forward(swap_sides(g), LOWER, UPPER, starts=4)
        assert swapped.lam_plus.weights == pytest.approx(data.lam_minus.weights, abs=1e-5)
        assert spectrum_distance(swapped.m_plus, data.m_minus).value < 1e-6
        assert spectrum_distance(swapped.m_minus, data.m_plus).value < 1e-6


class TestPrescription:
    def test_round_trip(self, fabricated):
        g, data = fabricated
        result = prescribe_boundary(data.m_plus, data.m_minus, UPPER, LOWER, starts=4)
        assert result.converged
        assert result.residual < 1e-5
        assert spectrum_distance(result.ghmc.rho_l, g.rho_l).value < 1e-4
        assert spectrum_distance(result.ghmc.rho_r, g.rho_r).value < 1e-4
        assert result.supports == (UPPER[0], LOWER[0])

    def test_empty_supports(self, twisted):
        with pytest.raises(PreconditionError):
            prescribe_boundary(twisted, twisted, [], LOWER)


def synthetic_table(ratios):
    rows = [(float(t), 1.0, 1.0, r, r, 1.0, 0.0, "ok") for t, r in enumerate(ratios)]
    return ScanTable(PROP5_COLUMNS, rows)


class TestRatioThresholds:
    def test_thresholds(self):
        table = synthetic_table([0.9, 0.6, 0.4, 0.3, 0.1, 0.05])
        assert ratio_thresholds(table, [0.5, 0.2, 0.01]) == {0.5: 2.0, 0.2: 4.0, 0.01: None}

    def test_failed_rows_are_skipped(self):
        table = synthetic_table([0.9, 0.4, 0.3])
        table.rows.append((3.0, 3.0, math.nan, math.nan, math.nan, math.nan, math.nan, "NonConvergenceError"))
        assert ratio_thresholds(table, [0.5]) == {0.5: 1.0}

    def test_late_rebound(self):
        table = synthetic_table([0.9, 0.4, 0.6])
        assert ratio_thresholds(table, [0.5]) == {0.5: None}

    def test_equidistant_budget(self):
        budget = equidistant_budget([0.5, 0.2])
        assert budget[0.5]["epsilon_prime"] == pytest.approx(math.asin(0.25))
        assert budget[0.5]["factor"] == pytest.approx(0.25)
        assert budget[0.2]["factor"] == pytest.approx(0.1)

    @pytest.mark.parametrize("eps", [0.0, 2.0, -1.0])
    def test_equidistant_budget_range(self, eps):
        with pytest.raises(PreconditionError):
            equidistant_budget([eps])


class TestRankAgreement:
    def test_agreement(self):
        assert rank_agreement([1, 2, 3], [1, 3, 2]) == 0.5
        assert rank_agreement([1, 2, 3], [4, 5, 6]) == 1.0

    def test_single_term(self):
        assert rank_agreement([1.0], [2.0]) == 1.0


class TestScans:
    def test_ratio_scan(self, reference, library):
        table = prop5_scan(reference, library.curve("a1"), 1.0, [0.0, 2.0, 4.0], alpha0=0.1,
                           supports_minus=[("b1",)])
        assert table.columns == PROP5_COLUMNS
        status = table.column("status")
        assert status == ["fuchsian", "ok", "ok"]
        ratios = table.column("ratio")
        assert math.isnan(ratios[0])
        assert 1.0 > ratios[1] > ratios[2] > 0.0
        assert table.failed() == 0
        assert table.meta["curve"] == "a1"
        assert set(table.meta["equidistant"]) == {0.5, 0.2}

    def test_ratio_scan_marks_poor_fits(self, reference, library):
        table = prop5_scan(reference, library.curve("a1"), 1.0, [0.0, 2.0, 4.0], alpha0=0.1,
                           supports_minus=[("b1",)], fit_tolerance=1e-12, starts=2)
        status = table.column("status")
        assert status[0] == "fuchsian"
        assert all(s.startswith("NonConvergenceError") for s in status[1:])
        assert table.failed() == 2
        assert table.meta["thresholds"] == {0.5: None, 0.2: None}

    def test_ratio_scan_residual_is_diagram_residual(self, reference, library):
        c = library.curve("a1")
        table = prop5_scan(reference, c, 1.0, [0.0, 2.0], alpha0=0.1, supports_minus=[("b1",)])
        g = fabricate_from_upper(reference, Multicurve(((c, 2.0),)))
        data = phi_forward(g, [("a1",)], [("b1",)], seed=derive_seed(0, 1), starts=OPTIMIZER_STARTS,
                           tolerance=APPROXIMATION_TOLERANCE)
        assert table.column("residual")[1] == data.max_residual
        assert table.column("status")[1] == "ok"

    def test_ratio_scan_threads(self, reference, library):
        args = (reference, library.curve("a1"), 1.0, [0.0, 1.0, 3.0])
        one = prop5_scan(*args, alpha0=0.1, supports_minus=[("b1",)], threads=1)
        two = prop5_scan(*args, alpha0=0.1, supports_minus=[("b1",)], threads=2)
        assert one.rows == two.rows

    def test_ratio_scan_grid_checked(self, reference, library):
        with pytest.raises(PreconditionError):
            prop5_scan(reference, library.curve("a1"), 1.0, [2.0, 1.0], alpha0=0.1)

    def test_properness(self, twisted):
        weights = [0.5, 1.0, 2.0, 4.0]
        table = properness_probe([twisted] * 4, [Multicurve.from_weights({"a1": w}) for w in weights],
                                 supports_minus=[("b1",)])
        status = table.column("status")
        assert status[0] == "ok"
        for res, s in zip(table.column("residual"), status):
            assert s == "ok" and res <= table.meta["fit_tolerance"] or s.startswith("NonConvergenceError")
        l_plus = table.column("l_plus")
        assert l_plus == sorted(l_plus)
        assert table.meta["m_plus_spread"] == 0.0
        assert 0.0 <= table.meta["rank_agreement"] <= 1.0

    def test_properness_lengths(self, twisted):
        with pytest.raises(PreconditionError):
            properness_probe([twisted] * 2, [Multicurve()] * 2)
        with pytest.raises(PreconditionError):
            properness_probe([twisted] * 3, [Multicurve()] * 2)
