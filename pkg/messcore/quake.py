"""Earthquakes along weighted multicurves and the connecting-lamination solver.

Sign convention: a left earthquake shifts the Fenchel-Nielsen twist of each
supported curve by +weight, a right earthquake by -weight. A left twist by
the full length of a curve re-marks the structure by the positive Dehn twist
stored in the library (``T_a1``: b ↦ ba and so on).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from messcore.config import (
    CONVERGENCE_TOLERANCE,
    OPTIMIZER_ITERATIONS,
    OPTIMIZER_STARTS,
    PENALTY,
    START_WEIGHT_MAX,
    TOLERANCE,
    WEIGHT_BOX,
)
from messcore.errors import (
    ConfigurationError,
    MessCoreError,
    NonConvergenceError,
    PreconditionError,
    UnsupportedLaminationError,
)
from messcore.hyperbolic import translation_along
from messcore.surface import (
    CurveWord,
    FNCoords,
    MarkedStructure,
    Multicurve,
    PantsDecomposition,
    apply_mapping_class,
    curve_length,
    library_curve,
    load_library,
)

logger = logging.getLogger(__name__)

SIDES = ("left", "right")
# recovered weights at or below this are reported as absent
WEIGHT_FLOOR = 1e-9


def _sign(side: str) -> float:
    if side not in SIDES:
        raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
    return 1.0 if side == "left" else -1.0


# -- exact twist flows -----------------------------------------------------------


def _flow_core(h: MarkedStructure, tau: float, torus: int) -> MarkedStructure:
    a, b = ("a", "b") if torus == 1 else ("c", "d")
    shift = translation_along(h.holonomy[a], tau)
    return h.replace(**{b: h.holonomy[b] @ shift})


def _flow_separating(h: MarkedStructure, tau: float) -> MarkedStructure:
    shift = translation_along(h.evaluate(library_curve("s").word), tau)
    return h.replace(c=h.holonomy["c"].conjugate(shift), d=h.holonomy["d"].conjugate(shift))


def _flow_crossing(h: MarkedStructure, tau: float) -> MarkedStructure:
    shift = translation_along(h.evaluate(library_curve("m").word), tau)
    back = shift.inverse()
    return h.replace(
        b=back @ h.holonomy["b"],
        c=back @ h.holonomy["c"] @ shift,
        d=h.holonomy["d"] @ shift,
    )


def twist_flow(h: MarkedStructure, c: CurveWord | str, t: float) -> MarkedStructure:
    """Left twist deformation of h by signed length t along a library curve.

    A full twist (t equal to the length of c) gives h∘T_c. Curves carried
    by a re-marking are twisted in the re-marked frame:
    E_{φ(x)}(h) = φ·E_x(φ⁻¹·h).
    """
    lib = load_library()
    name = c.name if isinstance(c, CurveWord) else c
    flow = lib.flows.get(name)
    if flow is None:
        raise UnsupportedLaminationError(f"no twist flow is available along {name!r}")
    if t == 0.0:
        return h
    if "via" in flow:
        phi = lib.mapping_class(flow["via"])
        moved = twist_flow(apply_mapping_class(h, phi.inverse()), flow["base"], t)
        out = apply_mapping_class(moved, phi)
    elif flow["kind"] == "core":
        out = _flow_core(h, t, flow["torus"])
    elif flow["kind"] == "separating":
        out = _flow_separating(h, t)
    elif flow["kind"] == "crossing":
        out = _flow_crossing(h, t)
    else:
        raise ConfigurationError(f"unknown flow kind {flow['kind']!r} for {name}")
    out.decomposition = h.decomposition
    return out


# -- earthquakes -------------------------------------------------------------------


def support_decomposition(names: Iterable[str]) -> PantsDecomposition | None:
    """First library decomposition containing every named curve (None for an empty support)."""
    names = set(names)
    if not names:
        return None
    for P in load_library().decompositions.values():
        if names <= set(P.curve_names):
            return P
    raise UnsupportedLaminationError(f"support {sorted(names)} lies in no library pants decomposition")


@dataclass(frozen=True)
class EarthquakeSpec:
    base: MarkedStructure
    lam: Multicurve
    side: str = "left"

    def __post_init__(self):
        _sign(self.side)
        support_decomposition(self.lam.support)
        for _, w in self.lam.items:
            if not math.isfinite(w):
                raise PreconditionError("earthquake weights must be finite")


def _shifted_chart(chart: FNCoords | None, shifts: dict[str, float]) -> FNCoords | None:
    if chart is None:
        return None
    names = load_library().decomposition(chart.decomposition).curve_names
    if not set(shifts) <= set(names):
        return None
    twists = list(chart.twists)
    for name, dt in shifts.items():
        twists[names.index(name)] += dt
    return FNCoords(chart.lengths, tuple(twists), chart.decomposition)


def apply_weights(h: MarkedStructure, names: Sequence[str], weights: Sequence[float], sign: float) -> MarkedStructure:
    out = h
    for name, w in zip(names, weights):
        if w != 0.0:
            out = twist_flow(out, name, sign * float(w))
    if out is not h:
        out.chart = _shifted_chart(h.chart, {n: sign * float(w) for n, w in zip(names, weights) if w != 0.0})
    return out


def earthquake(spec: EarthquakeSpec) -> MarkedStructure:
    """E^l_λ or E^r_λ of the base structure; the supported flows commute."""
    lam = spec.lam
    return apply_weights(spec.base, lam.support, [w for _, w in lam.items], _sign(spec.side))


def left_earthquake(h: MarkedStructure, lam: Multicurve) -> MarkedStructure:
    return earthquake(EarthquakeSpec(h, lam, "left"))


def right_earthquake(h: MarkedStructure, lam: Multicurve) -> MarkedStructure:
    return earthquake(EarthquakeSpec(h, lam, "right"))


# -- spectrum distance ----------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumDistanceReport:
    value: float
    witness: str | None
    log_ratios: dict[str, float]

    def __float__(self) -> float:
        return self.value


def _family(family: Sequence[CurveWord] | None) -> tuple[CurveWord, ...]:
    curves = tuple(family) if family is not None else load_library().spectrum_curves()
    if not curves:
        raise PreconditionError("spectrum family must be nonempty")
    return curves


def log_spectrum(h: MarkedStructure, family: Sequence[CurveWord] | None = None) -> np.ndarray:
    return np.log([curve_length(h, c) for c in _family(family)])


def spectrum_distance(
    h1: MarkedStructure, h2: MarkedStructure, family: Sequence[CurveWord] | None = None
) -> SpectrumDistanceReport:
    """max over the family of |log(l_h1(γ) / l_h2(γ))|."""
    curves = _family(family)
    ratios = log_spectrum(h1, curves) - log_spectrum(h2, curves)
    worst = int(np.argmax(np.abs(ratios)))
    value = float(abs(ratios[worst]))
    return SpectrumDistanceReport(
        value=value,
        witness=curves[worst].name if value > 0 else None,
        log_ratios={c.name: float(r) for c, r in zip(curves, ratios)},
    )


def divergence_proxy(h: MarkedStructure, family: Sequence[CurveWord] | None = None) -> float:
    """Largest length over the filling family."""
    return float(np.exp(np.max(log_spectrum(h, family))))


# -- connecting-lamination solver --------------------------------------------------------


def default_supports() -> list[tuple[str, ...]]:
    return [P.curve_names for P in load_library().decompositions.values()]


def guarded_residuals(fn: Callable[[np.ndarray], np.ndarray], size: int) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a residual function so points where the structure cannot be evaluated
    (cancelled determinants, non-hyperbolic words) give a finite penalty growing
    with the total weight instead of raising.
    """

    def residuals(w):
        try:
            r = fn(w)
        except MessCoreError as exc:
            logger.debug("residual penalty at %s: %s", np.round(w, 6), exc)
            return np.full(size, PENALTY * (1.0 + float(np.sum(np.abs(w)))))
        if not np.all(np.isfinite(r)):
            return np.full(size, PENALTY * (1.0 + float(np.sum(np.abs(w)))))
        return r

    return residuals


def start_points(
    support: tuple[str, ...],
    starts: int,
    rng: np.random.Generator,
    initial: Multicurve | None = None,
) -> np.ndarray:
    """Zero weights, the initial lamination when it lives on `support`, then random
    points of the conditioned box [0, START_WEIGHT_MAX]."""
    rows = [np.zeros(len(support))]
    if initial is not None and initial and set(initial.support) <= set(support):
        w = initial.weights
        rows.insert(0, np.array([w.get(name, 0.0) for name in support]))
    n_random = max(starts, 1) - 1
    if n_random:
        rows.extend(rng.uniform(0.0, START_WEIGHT_MAX, size=(n_random, len(support))))
    return np.vstack(rows)


@dataclass(frozen=True)
class SupportFit:
    support: tuple[str, ...]
    weights: tuple[float, ...]
    residual: float
    converged: bool

    def lamination(self) -> Multicurve:
        return Multicurve.from_weights(dict(zip(self.support, self.weights)), tol=WEIGHT_FLOOR)


def _fit_support(
    m: MarkedStructure,
    target: np.ndarray,
    support: tuple[str, ...],
    sign: float,
    starts: np.ndarray,
    iterations: int,
    family: tuple[CurveWord, ...],
    workers: int,
    tolerance: float,
) -> SupportFit:
    lo, hi = WEIGHT_BOX
    residuals = guarded_residuals(
        lambda w: log_spectrum(apply_weights(m, support, w, sign), family) - target, len(family))

    def objective(w):
        r = residuals(w)
        return 0.5 * float(r @ r)

    def run(x0):
        return minimize(objective, x0, method="L-BFGS-B", bounds=[(lo, hi)] * len(support),
                        options={"maxiter": iterations})

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    for i, r in enumerate(results):
        logger.debug("support %s start %d: objective %.3e (%s)", support, i, r.fun, r.message)
    best = min(results, key=lambda r: r.fun)
    x = np.clip(best.x, lo, hi)
    if best.fun > 1e-24:
        polish = least_squares(residuals, x0=x, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                               max_nfev=iterations)
        if polish.cost <= best.fun:
            x = polish.x
    x = np.where(x <= WEIGHT_FLOOR, 0.0, x)
    residual = float(np.max(np.abs(residuals(x))))
    return SupportFit(support, tuple(float(v) for v in x), residual, residual < tolerance)


def solve_connecting_lamination(
    m: MarkedStructure,
    m_target: MarkedStructure,
    side: str = "left",
    supports: Sequence[Sequence[str]] | None = None,
    starts: int = OPTIMIZER_STARTS,
    iterations: int = OPTIMIZER_ITERATIONS,
    seed: int = 0,
    family: Sequence[CurveWord] | None = None,
    workers: int = 1,
    initial: Multicurve | None = None,
    tolerance: float = CONVERGENCE_TOLERANCE,
) -> tuple[Multicurve, float]:
    """Best λ over the candidate supports with E^side_λ(m) ≈ m_target.

    The residual is the spectrum distance of the earthquaked structure to
    the target. Each support gets `starts` bounded quasi-Newton runs (from
    `initial` when it lives on the support, from zero weights, then random
    points of the conditioned start box) and a least-squares polish of the
    best. Raises NonConvergenceError unless some support reaches `tolerance`.
    """
    sign = _sign(side)
    supports = [tuple(s) for s in (supports if supports is not None else default_supports())]
    if not supports:
        raise PreconditionError("need at least one candidate support")
    curves = _family(family)
    target = log_spectrum(m_target, curves)
    rng = np.random.default_rng(seed)
    fits = []
    for support in supports:
        support_decomposition(support)
        x0 = start_points(support, starts, rng, initial)
        fits.append(_fit_support(m, target, support, sign, x0, iterations, curves, workers, tolerance))
    fits.sort(key=lambda f: f.residual)
    best = fits[0]
    for other in fits[1:]:
        if other.residual - best.residual > max(TOLERANCE, 1e-6 * best.residual):
            break
        if not _same_weights(other.lamination(), best.lamination()):
            logger.warning("supports %s and %s tie at residual %.3e with different laminations",
                           best.support, other.support, best.residual)
    if not any(f.converged for f in fits):
        raise NonConvergenceError(f"no support converged ({side} side)", best.residual,
                                  (best.lamination(), best.residual))
    lam = best.lamination()
    logger.info("%s lamination %s, residual %.3e", side, lam.weights, best.residual)
    return lam, best.residual


def _same_weights(a: Multicurve, b: Multicurve, atol: float = 1e-6) -> bool:
    wa, wb = a.weights, b.weights
    return wa.keys() == wb.keys() and all(abs(wa[k] - wb[k]) <= atol for k in wa)


@dataclass(frozen=True)
class ContinuityReport:
    base_residual: float
    base_weights: dict[str, float]
    slopes: dict[str, float]
    weight_slopes: dict[str, float]

    @property
    def max_slope(self) -> float:
        return max(self.slopes.values(), default=0.0)

    @property
    def max_weight_slope(self) -> float:
        return max(self.weight_slopes.values(), default=0.0)


def weight_continuity(
    m: MarkedStructure,
    target: MarkedStructure,
    side: str = "left",
    supports: Sequence[Sequence[str]] | None = None,
    eps: float = 1e-3,
    directions: Sequence[str] = ("a1", "a2", "s"),
    seed: int = 0,
) -> ContinuityReport:
    """Finite-difference slopes of the recovered residual and weights as the target is twisted by eps."""
    lam0, res0 = solve_connecting_lamination(m, target, side, supports, seed=seed)
    slopes, weight_slopes = {}, {}
    for name in directions:
        lam, res = solve_connecting_lamination(m, twist_flow(target, name, eps), side, supports, seed=seed)
        slopes[name] = abs(res - res0) / eps
        keys = set(lam.weights) | set(lam0.weights)
        weight_slopes[name] = max(abs(lam.weights.get(k, 0.0) - lam0.weights.get(k, 0.0)) for k in keys) / eps \
            if keys else 0.0
    return ContinuityReport(res0, lam0.weights, slopes, weight_slopes)


def twist_length_profile(h: MarkedStructure, c: CurveWord | str, probe: CurveWord, ts: Sequence[float]) -> np.ndarray:
    """Length of `probe` along the twist path t ↦ E^l_{t·c}(h)."""
    return np.array([curve_length(twist_flow(h, c, float(t)), probe) for t in ts])
