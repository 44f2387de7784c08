"""Desk-scale acceptance runs over the shipped experiment specs.

These are slow; deselect with ``-m "not slow"``.
"""

import math

import numpy as np
import pytest

from messcore.config import ExperimentSpec
from messcore.experiments import run
from messcore.export import write_rows
from messcore.mess import fabricate_ghmc, phi_forward, prescribe_boundary
from messcore.quake import spectrum_distance
from messcore.surface import Multicurve, random_fn

pytestmark = pytest.mark.slow

UPPER = [("a1", "a2", "s")]
LOWER = [("b1", "b2", "bm")]


def fabricated_pairs(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        lam_plus = Multicurve.from_weights(dict(zip(("a1", "a2"), rng.uniform(0.1, 0.6, 2))))
        lam_minus = Multicurve.from_weights(dict(zip(("b1", "b2", "bm"), rng.uniform(0.1, 0.5, 3))))
        yield fabricate_ghmc(lam_plus, lam_minus, random_fn(rng, (1.5, 2.5), (-0.5, 0.5)), starts=4)


class TestMessDiagram:
    def test_round_trip(self):
        for g, data in fabricated_pairs(50, seed=2024):
            found = phi_forward(g, UPPER, LOWER, starts=4)
            assert spectrum_distance(found.m_plus, data.m_plus).value < 1e-5
            assert found.lam_plus.weights == pytest.approx(data.lam_plus.weights, abs=1e-5)

    def test_prescription(self):
        for g, data in fabricated_pairs(25, seed=7):
            result = prescribe_boundary(data.m_plus, data.m_minus, UPPER, LOWER, starts=4)
            assert result.residual < 1e-5
            assert spectrum_distance(result.ghmc.rho_l, g.rho_l).value < 1e-4
            assert spectrum_distance(result.ghmc.rho_r, g.rho_r).value < 1e-4


class TestShippedSpecs:
    def test_sublemma_sweep(self):
        envelope = run(ExperimentSpec.default("sublemma-sweep"))
        assert envelope.converged
        assert envelope.table.meta["max_residual"] < 1e-10
        assert envelope.table.meta["calibration"]["gamma0"] > 0

    def test_tau_grid(self):
        envelope = run(ExperimentSpec.default("prop4-scan"), threads=4)
        table = envelope.table
        assert table.meta["shape"] == (10, 20, 20)
        assert table.meta["monotonicity_violations"] == 0
        lengths = table.column("tau_length")
        assert max(lengths) < math.pi / 2
        assert lengths[-1] >= math.pi / 2 - 0.05

    def test_ratio_trend(self):
        envelope = run(ExperimentSpec.default("prop5-scan"), threads=4)
        table = envelope.table
        status, ratios = table.column("status"), table.column("ratio")
        assert all(s == "ok" for s in status[-5:])
        tail = ratios[-5:]
        assert all(a > b for a, b in zip(tail, tail[1:]))
        ok = [r for r, s in zip(ratios, status) if s == "ok"]
        assert min(ok) < 0.2
        assert any(r < 0.5 for r in ok)
        fit = table.meta["fit_tolerance"]
        assert all(res <= fit for res, s in zip(table.column("residual"), status) if s == "ok")

    def test_properness(self):
        envelope = run(ExperimentSpec.default("properness-probe"), threads=4)
        table = envelope.table
        assert table.meta["m_plus_spread"] < 0.5
        rows = list(zip(table.column("m_minus_proxy"), table.column("residual"), table.column("status")))
        ok = [(p, res) for p, res, s in rows if s == "ok"]
        tail = [(p, res) for p, res, s in rows[-4:] if s == "ok"]
        assert len(tail) >= 2
        proxies = [p for p, _ in tail]
        assert all(a < b for a, b in zip(proxies, proxies[1:]))
        assert all(res <= table.meta["fit_tolerance"] for _, res in ok)
        assert proxies[-1] > ok[0][0]

    def test_bad_set_bound(self):
        envelope = run(ExperimentSpec.default("prop2-scan"), threads=4)
        table = envelope.table
        assert table.rows
        assert all(5.0 <= length <= 25.0 for length in table.column("length"))
        assert all(table.column("within"))

    def test_determinism(self, tmp_path):
        spec = ExperimentSpec.default("sublemma-sweep")
        one = write_rows(run(spec, threads=1), tmp_path / "one.csv")
        two = write_rows(run(spec, threads=3), tmp_path / "two.csv")
        assert one.read_bytes() == two.read_bytes()
