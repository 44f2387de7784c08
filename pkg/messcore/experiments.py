"""Experiment runners: one function per ExperimentSpec kind, dispatched by `run`.

Each runner returns a ScanTable plus a convergence flag. `run` adds the
per-row sub-seed column and wraps everything into a ResultEnvelope; only
the envelope carries wall-clock data, so rows are reproducible byte for byte.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from typing import Any, Callable, Mapping, Sequence

from messcore import ads2
from messcore.config import (
    APPROXIMATION_TOLERANCE,
    OPTIMIZER_STARTS,
    SCHEMA_VERSION,
    ExperimentSpec,
    StructureSpec,
    derive_seed,
    rng_for,
)
from messcore.covering import bad_set_measure
from messcore.errors import MessCoreError, PreconditionError, SpecValidationError
from messcore.hyperbolic import (
    calibrate_gamma0,
    line_distance,
    sample_disjoint_configuration,
    sublemma_identity_residual,
)
from messcore.mess import (
    GHMCStructure,
    fabricate_ghmc,
    phi_forward,
    prescribe_boundary,
    prop5_scan,
    properness_probe,
)
from messcore.quake import spectrum_distance
from messcore.scan import ScanTable, map_rows
from messcore.surface import (
    FNCoords,
    MarkedStructure,
    Multicurve,
    fn_to_holonomy,
    length_spectrum,
    library_curve,
    load_library,
    bad_set_family,
)

logger = logging.getLogger(__name__)

PROVENANCE_COLUMN = "sub_seed"
DEPENDENCIES = ("numpy", "scipy", "pyyaml", "rustypyxl")


@dataclass
class ResultEnvelope:
    spec: ExperimentSpec
    table: ScanTable
    converged: bool
    started: str
    wall_clock: float
    versions: dict[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def columns(self) -> tuple[str, ...]:
        return self.table.columns

    @property
    def rows(self) -> list[tuple]:
        return self.table.rows

    @property
    def residuals(self) -> list[float]:
        if "residual" not in self.columns:
            return []
        return [r for r in self.table.column("residual") if isinstance(r, float) and math.isfinite(r)]


def library_versions() -> dict[str, str]:
    out = {}
    for name in ("messcore", *DEPENDENCIES):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "not installed"
    return out


# -- option helpers -------------------------------------------------------------------


def _option(spec: ExperimentSpec, name: str, default: Any, cast: Callable[[Any], Any] = float) -> Any:
    value = spec.options.get(name, default)
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise SpecValidationError(f"options.{name}", f"cannot interpret {value!r}") from exc


def _supports(spec: ExperimentSpec, name: str) -> list[tuple[str, ...]] | None:
    raw = spec.options.get(name)
    if raw is None:
        return None
    lib = load_library()
    if not isinstance(raw, Sequence) or isinstance(raw, str):
        raise SpecValidationError(f"options.{name}", "must be a list of curve-name lists")
    out = []
    for i, support in enumerate(raw):
        if isinstance(support, str) or not isinstance(support, Sequence) or not support:
            raise SpecValidationError(f"options.{name}[{i}]", "must be a nonempty list of curve names")
        for curve in support:
            if curve not in lib.curves:
                raise SpecValidationError(f"options.{name}[{i}]", f"unknown curve {curve!r}")
        out.append(tuple(str(c) for c in support))
    return out


def _weights(spec: ExperimentSpec, path: str, raw: Any) -> Multicurve:
    if not isinstance(raw, Mapping):
        raise SpecValidationError(path, "must map curve names to weights")
    lib = load_library()
    for curve, w in raw.items():
        if curve not in lib.curves:
            raise SpecValidationError(path, f"unknown curve {curve!r}")
        if not (isinstance(w, (int, float)) and w >= 0):
            raise SpecValidationError(f"{path}.{curve}", f"weight must be >= 0, got {w!r}")
    return Multicurve.from_weights({str(k): float(v) for k, v in raw.items()}, tol=0.0)


def _structure(path: str, s: StructureSpec) -> MarkedStructure:
    lib = load_library()
    if s.decomposition not in lib.decompositions:
        raise SpecValidationError(f"{path}.decomposition", f"unknown decomposition {s.decomposition!r}")
    if not lib.decomposition(s.decomposition).has_fn_chart:
        raise SpecValidationError(f"{path}.decomposition", f"{s.decomposition} has no length-twist chart")
    return fn_to_holonomy(FNCoords(s.lengths, s.twists, s.decomposition), s.decomposition)


def _structure_option(spec: ExperimentSpec, name: str) -> MarkedStructure:
    raw = spec.options.get(name)
    if raw is None:
        return _structure("structure", spec.structure)
    if not isinstance(raw, Mapping):
        raise SpecValidationError(f"options.{name}", "must be a structure mapping")
    base = spec.structure
    try:
        s = StructureSpec(
            lengths=tuple(float(x) for x in raw.get("lengths", base.lengths)),
            twists=tuple(float(x) for x in raw.get("twists", base.twists)),
            decomposition=str(raw.get("decomposition", base.decomposition)),
        )
    except (TypeError, ValueError) as exc:
        raise SpecValidationError(f"options.{name}", str(exc)) from exc
    if len(s.lengths) != 3 or len(s.twists) != 3 or not all(x > 0 for x in s.lengths):
        raise SpecValidationError(f"options.{name}", "needs three positive lengths and three twists")
    return _structure(f"options.{name}", s)


def _status(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


# -- runners --------------------------------------------------------------------------


SUBLEMMA_COLUMNS = ("index", "distance", "residual", "status")


def run_sublemma_sweep(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    tolerance = _option(spec, "residual_tolerance", 1e-10)

    def row(i: int, _: Any) -> tuple:
        line, d0, x = sample_disjoint_configuration(rng_for(spec.seed, i))
        try:
            return (i, line_distance(line, d0), sublemma_identity_residual(line, d0, x), "ok")
        except MessCoreError as exc:
            return (i, math.nan, math.nan, _status(exc))

    table = ScanTable(SUBLEMMA_COLUMNS, map_rows(row, range(spec.samples), threads))
    residuals = [r for r in table.column("residual") if math.isfinite(r)]
    worst = max(residuals, default=math.nan)
    cal = calibrate_gamma0(spec.constants.alpha0, _option(spec, "calibration_samples", 10_000, int),
                           seed=derive_seed(spec.seed, spec.samples))
    table.meta.update(max_residual=worst, residual_tolerance=tolerance,
                      calibration={"gamma0": cal.gamma0, "delta0": cal.delta0,
                                   "delta0_bound": cal.delta0_bound, "valid": cal.valid,
                                   "failures": cal.failures, "capped": cal.capped})
    return table, table.failed() == 0 and worst < tolerance


PROP2_COLUMNS = ("curve", "length", "fraction", "stderr", "bound", "within", "one_sided_fraction",
                 "max_count", "status")


def run_prop2_scan(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    h = _structure("structure", spec.structure)
    lo = _option(spec, "length_min", 5.0)
    hi = _option(spec, "length_max", 25.0)
    family = bad_set_family(_option(spec, "kmax", 12, int), _option(spec, "kmin", 1, int))
    curves = [c for c in family if lo <= length_spectrum(h, [c])[c.name] <= hi]
    if not curves:
        raise SpecValidationError("options.length_min", f"no family curve has length in [{lo}, {hi}]")
    k = spec.constants
    l0 = spec.l0
    sigmas = _option(spec, "sigmas", 2.0)

    def row(i: int, c) -> tuple:
        try:
            est = bad_set_measure(h, c, k.alpha0, k.beta0, spec.samples, seed=derive_seed(spec.seed, i),
                                  budget=spec.word_budget)
        except MessCoreError as exc:
            logger.warning("bad-set curve %s failed: %s", c.name, exc)
            return (c.name, math.nan, math.nan, math.nan, math.nan, False, math.nan, 0, _status(exc))
        bound = k.delta0 + l0 / est.length
        return (c.name, est.length, est.fraction, est.stderr / est.length, bound,
                est.within_bound(k.delta0, l0, sigmas), est.one_sided_fraction, est.max_count, "ok")

    table = ScanTable(PROP2_COLUMNS, map_rows(row, curves, threads))
    table.meta.update(l0=l0, sigmas=sigmas, word_budget=spec.word_budget)
    return table, table.failed() == 0


def run_prop4_scan(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    eps_primes = [math.asin(e / 2) for e in spec.constants.epsilon if e < 2]
    table = ads2.tau_scan(spec.grid("alpha0"), spec.grid("phi"), eps_primes, threads=threads)
    return table, table.failed() == 0


def run_prop5_scan(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    table = prop5_scan(
        _structure("structure", spec.structure),
        library_curve(_option(spec, "curve", "a1", str)),
        _option(spec, "weight", 1.0),
        spec.grid("t"),
        spec.constants.alpha0,
        supports_minus=_supports(spec, "supports_minus"),
        epsilons=spec.constants.epsilon,
        seed=spec.seed,
        threads=threads,
        fit_tolerance=_option(spec, "fit_tolerance", APPROXIMATION_TOLERANCE),
        starts=_option(spec, "starts", OPTIMIZER_STARTS, int),
    )
    return table, table.failed() == 0


def run_properness_probe(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    """m₊ⁿ converges to the spec structure while λ₊ⁿ = (curve, wₙ) grows along the weight grid."""
    base = spec.structure
    curve = library_curve(_option(spec, "curve", "a1", str))
    drift = _option(spec, "drift", 0.5)
    m_plus_seq, lam_seq = [], []
    for n, w in enumerate(spec.grid("weights")):
        twists = tuple(t + drift / (n + 1) for t in base.twists)
        m_plus_seq.append(_structure("structure", StructureSpec(base.lengths, twists, base.decomposition)))
        lam_seq.append(Multicurve(((curve, float(w)),)))
    table = properness_probe(m_plus_seq, lam_seq, _supports(spec, "supports_minus"), seed=spec.seed,
                             threads=threads,
                             fit_tolerance=_option(spec, "fit_tolerance", APPROXIMATION_TOLERANCE),
                             starts=_option(spec, "starts", OPTIMIZER_STARTS, int))
    return table, table.failed() == 0


LAMINATION_COLUMNS = ("side", "curve", "weight")


def _lamination_rows(plus: Multicurve, minus: Multicurve) -> list[tuple]:
    rows = [("plus", name, w) for name, w in sorted(plus.weights.items())]
    rows += [("minus", name, w) for name, w in sorted(minus.weights.items())]
    return rows


def run_prescribe(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    """Prescribe (m₊, m₋); with `options.fabricate` the targets come from a fabricated pair."""
    target = None
    fabricate = spec.options.get("fabricate")
    if fabricate is not None:
        if not isinstance(fabricate, Mapping):
            raise SpecValidationError("options.fabricate", "must have plus and minus weights")
        lam_plus = _weights(spec, "options.fabricate.plus", fabricate.get("plus"))
        lam_minus = _weights(spec, "options.fabricate.minus", fabricate.get("minus"))
        s = spec.structure
        target, data = fabricate_ghmc(lam_plus, lam_minus, FNCoords(s.lengths, s.twists),
                                      seed=spec.seed)
        m_plus, m_minus = data.m_plus, data.m_minus
    else:
        m_plus = _structure("structure", spec.structure)
        m_minus = _structure_option(spec, "minus")
    result = prescribe_boundary(
        m_plus, m_minus,
        supports_plus=_supports(spec, "supports_plus"),
        supports_minus=_supports(spec, "supports_minus"),
        starts=_option(spec, "starts", OPTIMIZER_STARTS, int),
        seed=spec.seed,
    )
    table = ScanTable(LAMINATION_COLUMNS, _lamination_rows(result.data.lam_plus, result.data.lam_minus))
    table.meta.update(residual=result.residual, supports=[list(s) for s in result.supports],
                      diagram=result.data.residuals)
    if target is not None:
        table.meta["recovery"] = {
            "rho_l": spectrum_distance(result.ghmc.rho_l, target.rho_l).value,
            "rho_r": spectrum_distance(result.ghmc.rho_r, target.rho_r).value,
        }
    return table, result.converged


FORWARD_COLUMNS = ("quantity", "curve", "value")


def run_forward(spec: ExperimentSpec, threads: int) -> tuple[ScanTable, bool]:
    """Boundary data of (ρ_l, ρ_r); ρ_r defaults to ρ_l, the Fuchsian case."""
    rho_l = _structure("structure", spec.structure)
    rho_r = _structure_option(spec, "rho_r")
    data = phi_forward(GHMCStructure(rho_l, rho_r), _supports(spec, "supports_plus"),
                       _supports(spec, "supports_minus"), seed=spec.seed,
                       starts=_option(spec, "starts", OPTIMIZER_STARTS, int))
    rows = []
    for label, m in (("m_plus", data.m_plus), ("m_minus", data.m_minus)):
        rows += [(f"length:{label}", name, value) for name, value in length_spectrum(m).items()]
    rows += [(f"weight:lam_{side}", name, w) for side, name, w in _lamination_rows(data.lam_plus, data.lam_minus)]
    table = ScanTable(FORWARD_COLUMNS, rows)
    table.meta.update(diagram=data.residuals, max_residual=data.max_residual)
    return table, True


RUNNERS: dict[str, Callable[[ExperimentSpec, int], tuple[ScanTable, bool]]] = {
    "sublemma-sweep": run_sublemma_sweep,
    "prop2-scan": run_prop2_scan,
    "prop4-scan": run_prop4_scan,
    "prop5-scan": run_prop5_scan,
    "properness-probe": run_properness_probe,
    "prescribe": run_prescribe,
    "forward": run_forward,
}


def run(spec: ExperimentSpec, threads: int = 1) -> ResultEnvelope:
    """Execute a spec. Solver failures inside scans become row statuses; a
    non-convergent single solve raises NonConvergenceError to the caller.
    """
    if threads < 1:
        raise SpecValidationError("threads", "must be >= 1")
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    clock = time.perf_counter()
    logger.info("running %s (seed %d, %d threads)", spec.kind, spec.seed, threads)
    try:
        table, converged = RUNNERS[spec.kind](spec, threads)
    except PreconditionError as exc:
        raise SpecValidationError(spec.kind, str(exc)) from exc
    table.columns = (*table.columns, PROVENANCE_COLUMN)
    table.rows = [(*row, derive_seed(spec.seed, i)) for i, row in enumerate(table.rows)]
    elapsed = time.perf_counter() - clock
    logger.info("%s finished: %d rows, converged=%s, %.2fs", spec.kind, len(table.rows), converged, elapsed)
    return ResultEnvelope(spec, table, converged, started, elapsed, library_versions())
