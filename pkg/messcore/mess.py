"""The forward map from holonomy pairs to boundary metrics, its inverse, and scans.

Everything goes through the earthquake diagram

    ρ_l = E^l_{λ₊}(m₊)    ρ_r = E^r_{λ₊}(m₊)
    ρ_r = E^l_{λ₋}(m₋)    ρ_l = E^r_{λ₋}(m₋)

so λ₊ is half the left lamination from ρ_r to ρ_l, and λ₋ half the left
lamination from ρ_l to ρ_r. Structures are compared by spectrum distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from messcore.ads2 import equidistant_length_factor
from messcore.config import (
    APPROXIMATION_TOLERANCE,
    CONVERGENCE_TOLERANCE,
    OPTIMIZER_ITERATIONS,
    OPTIMIZER_STARTS,
    START_WEIGHT_MAX,
    WEIGHT_BOX,
    derive_seed,
)
from messcore.errors import MessCoreError, NonConvergenceError, PreconditionError
from messcore.quake import (
    WEIGHT_FLOOR,
    apply_weights,
    default_supports,
    divergence_proxy,
    guarded_residuals,
    left_earthquake,
    log_spectrum,
    right_earthquake,
    solve_connecting_lamination,
    spectrum_distance,
    support_decomposition,
)
from messcore.scan import ScanTable
from messcore.surface import (
    CurveWord,
    FNCoords,
    MarkedStructure,
    Multicurve,
    fn_to_holonomy,
    load_library,
    multicurve_length,
)

logger = logging.getLogger(__name__)

# fabricated pairs must close the fixed-point equation to this spectrum distance
FIXED_POINT_TOLERANCE = 1e-9
# a prescription is reported converged below this summed residual
PRESCRIPTION_TOLERANCE = 1e-5


@dataclass(frozen=True)
class GHMCStructure:
    rho_l: MarkedStructure
    rho_r: MarkedStructure


@dataclass(frozen=True)
class ConvexCoreData:
    m_plus: MarkedStructure
    m_minus: MarkedStructure
    lam_plus: Multicurve
    lam_minus: Multicurve
    residuals: dict[str, float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def diagram_residuals(g: GHMCStructure, m_plus: MarkedStructure, m_minus: MarkedStructure,
                      lam_plus: Multicurve, lam_minus: Multicurve) -> dict[str, float]:
    """Spectrum distances of the four diagram equations."""
    return {
        "rho_l=El(lam+)m+": spectrum_distance(left_earthquake(m_plus, lam_plus), g.rho_l).value,
        "rho_r=Er(lam+)m+": spectrum_distance(right_earthquake(m_plus, lam_plus), g.rho_r).value,
        "rho_r=El(lam-)m-": spectrum_distance(left_earthquake(m_minus, lam_minus), g.rho_r).value,
        "rho_l=Er(lam-)m-": spectrum_distance(right_earthquake(m_minus, lam_minus), g.rho_l).value,
    }


def phi_forward(
    g: GHMCStructure,
    supports_plus: Sequence[Sequence[str]] | None = None,
    supports_minus: Sequence[Sequence[str]] | None = None,
    seed: int = 0,
    starts: int = OPTIMIZER_STARTS,
    tolerance: float = CONVERGENCE_TOLERANCE,
    previous: ConvexCoreData | None = None,
    workers: int = 1,
) -> ConvexCoreData:
    """Boundary metrics (m₊, m₋) and bending laminations (λ₊, λ₋) of a holonomy pair.

    `previous` seeds both solves with the laminations of a nearby pair, which
    is how scans follow a branch of solutions. Either side missing
    `tolerance` raises NonConvergenceError.
    """
    hint_plus = previous.lam_plus.scaled(2.0) if previous is not None else None
    hint_minus = previous.lam_minus.scaled(2.0) if previous is not None else None
    try:
        twice_plus, _ = solve_connecting_lamination(g.rho_r, g.rho_l, "left", supports_plus, starts=starts,
                                                    seed=seed, workers=workers, initial=hint_plus,
                                                    tolerance=tolerance)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"upper side: {exc}", exc.residual, exc.result) from exc
    try:
        twice_minus, _ = solve_connecting_lamination(g.rho_l, g.rho_r, "left", supports_minus, starts=starts,
                                                     seed=seed + 1, workers=workers, initial=hint_minus,
                                                     tolerance=tolerance)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"lower side: {exc}", exc.residual, exc.result) from exc
    lam_plus, lam_minus = twice_plus.scaled(0.5), twice_minus.scaled(0.5)
    m_plus = left_earthquake(g.rho_r, lam_plus)
    m_minus = left_earthquake(g.rho_l, lam_minus)
    residuals = diagram_residuals(g, m_plus, m_minus, lam_plus, lam_minus)
    logger.info("phi_forward: lam+ %s, lam- %s, diagram residual %.3e",
                lam_plus.weights, lam_minus.weights, max(residuals.values()))
    return ConvexCoreData(m_plus, m_minus, lam_plus, lam_minus, residuals)


def swap_sides(g: GHMCStructure) -> GHMCStructure:
    """Exchange the two holonomies; this exchanges (m₊, λ₊) with (m₋, λ₋)."""
    return GHMCStructure(rho_l=g.rho_r, rho_r=g.rho_l)


def fabricate_from_upper(m_plus: MarkedStructure, lam_plus: Multicurve) -> GHMCStructure:
    return GHMCStructure(rho_l=left_earthquake(m_plus, lam_plus), rho_r=right_earthquake(m_plus, lam_plus))


def _fn_from_vector(x: np.ndarray) -> FNCoords:
    return FNCoords(tuple(np.exp(x[:3])), tuple(x[3:]), "P0")


def _fn_vector(fn: FNCoords) -> np.ndarray:
    return np.concatenate([np.log(fn.lengths), fn.twists])


def fabricate_ghmc(
    lam_plus: Multicurve,
    lam_minus: Multicurve,
    seed_fn: FNCoords | None = None,
    starts: int = OPTIMIZER_STARTS,
    seed: int = 0,
) -> tuple[GHMCStructure, ConvexCoreData]:
    """A holonomy pair whose bending laminations are exactly lam_plus and lam_minus.

    Solves E^l_{2λ₊}∘E^l_{2λ₋}(ρ_l) = ρ_l over the P0 chart of ρ_l; the two
    laminations must fill together for the fixed point to exist.
    """
    twice_plus, twice_minus = lam_plus.scaled(2.0), lam_minus.scaled(2.0)
    plus_names, plus_w = twice_plus.support, [w for _, w in twice_plus.items]
    minus_names, minus_w = twice_minus.support, [w for _, w in twice_minus.items]
    support_decomposition(plus_names)
    support_decomposition(minus_names)

    def closure(x):
        rho_l = fn_to_holonomy(_fn_from_vector(x), "P0")
        rho_r = apply_weights(rho_l, minus_names, minus_w, 1.0)
        back = apply_weights(rho_r, plus_names, plus_w, 1.0)
        return log_spectrum(back) - log_spectrum(rho_l)

    residuals = guarded_residuals(closure, len(load_library().spectrum_curves()))

    rng = np.random.default_rng(seed)
    x0s = [] if seed_fn is None else [_fn_vector(seed_fn)]
    x0s.append(np.array([math.log(2.0)] * 3 + [0.0] * 3))
    while len(x0s) < max(starts, 2):
        x0s.append(np.concatenate([np.log(rng.uniform(0.8, 4.0, 3)), rng.uniform(-3.0, 3.0, 3)]))
    best = None
    for i, x0 in enumerate(x0s):
        fit = least_squares(residuals, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=OPTIMIZER_ITERATIONS)
        worst = float(np.max(np.abs(fit.fun)))
        logger.debug("fixed-point start %d: residual %.3e", i, worst)
        if best is None or worst < best[1]:
            best = (fit.x, worst)
        if worst < FIXED_POINT_TOLERANCE:
            break
    x, worst = best
    if worst >= FIXED_POINT_TOLERANCE:
        raise NonConvergenceError("fixed point of the earthquake composition not found", worst, x)
    rho_l = fn_to_holonomy(_fn_from_vector(x), "P0")
    rho_r = apply_weights(rho_l, minus_names, minus_w, 1.0)
    g = GHMCStructure(rho_l=rho_l, rho_r=rho_r)
    m_plus = left_earthquake(rho_r, lam_plus)
    m_minus = left_earthquake(rho_l, lam_minus)
    data = ConvexCoreData(m_plus, m_minus, lam_plus, lam_minus,
                          diagram_residuals(g, m_plus, m_minus, lam_plus, lam_minus))
    return g, data


# -- boundary prescription -----------------------------------------------------------


@dataclass(frozen=True)
class Prescription:
    ghmc: GHMCStructure
    data: ConvexCoreData
    residual: float
    converged: bool
    supports: tuple[tuple[str, ...], tuple[str, ...]]


def _prescription_residuals(m_plus, m_minus, plus, minus) -> Callable[[np.ndarray], np.ndarray]:
    k = len(plus)

    def residuals(w):
        wp, wm = w[:k], w[k:]
        left_plus = apply_weights(m_plus, plus, wp, 1.0)
        right_plus = apply_weights(m_plus, plus, wp, -1.0)
        left_minus = apply_weights(m_minus, minus, wm, 1.0)
        right_minus = apply_weights(m_minus, minus, wm, -1.0)
        return np.concatenate([
            log_spectrum(left_plus) - log_spectrum(right_minus),
            log_spectrum(right_plus) - log_spectrum(left_minus),
        ])

    return residuals


def _prescribe_pair(m_plus, m_minus, plus, minus, starts, seed) -> tuple[np.ndarray, float, bool]:
    lo, hi = WEIGHT_BOX
    size = 2 * len(load_library().spectrum_curves())
    residuals = guarded_residuals(_prescription_residuals(m_plus, m_minus, plus, minus), size)
    dim = len(plus) + len(minus)

    def objective(w):
        r = residuals(w)
        return 0.5 * float(r @ r)

    rng = np.random.default_rng(seed)
    x0s = [np.zeros(dim)] + [rng.uniform(lo, START_WEIGHT_MAX, dim) for _ in range(max(starts, 1) - 1)]
    best = None
    for i, x0 in enumerate(x0s):
        fit = minimize(objective, x0, method="L-BFGS-B", bounds=[(lo, hi)] * dim,
                       options={"maxiter": OPTIMIZER_ITERATIONS})
        logger.debug("prescribe %s x %s start %d: objective %.3e", plus, minus, i, fit.fun)
        if best is None or fit.fun < best.fun:
            best = fit
    x = np.clip(best.x, lo, hi)
    if best.fun > 1e-24:
        polish = least_squares(residuals, x, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                               max_nfev=OPTIMIZER_ITERATIONS)
        if polish.cost <= best.fun:
            x = polish.x
    x = np.where(x <= WEIGHT_FLOOR, 0.0, x)
    r = residuals(x)
    half = len(r) // 2
    value = float(np.max(np.abs(r[:half])) + np.max(np.abs(r[half:])))
    return x, value, value < PRESCRIPTION_TOLERANCE


def prescribe_boundary(
    m_plus: MarkedStructure,
    m_minus: MarkedStructure,
    supports_plus: Sequence[Sequence[str]] | None = None,
    supports_minus: Sequence[Sequence[str]] | None = None,
    starts: int = OPTIMIZER_STARTS,
    seed: int = 0,
) -> Prescription:
    """Holonomy pair whose boundary metrics approximate (m₊, m₋).

    Minimizes sd(E^l_{λ₊}m₊, E^r_{λ₋}m₋) + sd(E^r_{λ₊}m₊, E^l_{λ₋}m₋) over
    weights on each pair of candidate supports. A result that misses is
    returned with ``converged=False`` rather than raised.
    """
    plus_list = [tuple(s) for s in (supports_plus if supports_plus is not None else default_supports())]
    minus_list = [tuple(s) for s in (supports_minus if supports_minus is not None else default_supports())]
    if not plus_list or not minus_list:
        raise PreconditionError("support lists must be nonempty")
    for s in plus_list + minus_list:
        support_decomposition(s)
    best = None
    for i, plus in enumerate(plus_list):
        for j, minus in enumerate(minus_list):
            x, value, ok = _prescribe_pair(m_plus, m_minus, plus, minus, starts, derive_seed(seed, i, j))
            if best is None or value < best[2]:
                best = (plus, minus, value, ok, x)
            if value < 1e-9:
                break
        if best[2] < 1e-9:
            break
    plus, minus, value, ok, x = best
    lam_plus = Multicurve.from_weights(dict(zip(plus, x[:len(plus)])), tol=WEIGHT_FLOOR)
    lam_minus = Multicurve.from_weights(dict(zip(minus, x[len(plus):])), tol=WEIGHT_FLOOR)
    g = GHMCStructure(rho_l=left_earthquake(m_plus, lam_plus), rho_r=right_earthquake(m_plus, lam_plus))
    data = ConvexCoreData(m_plus, m_minus, lam_plus, lam_minus,
                          diagram_residuals(g, m_plus, m_minus, lam_plus, lam_minus))
    if not ok:
        logger.warning("prescription did not converge: residual %.3e on %s x %s", value, plus, minus)
    return Prescription(g, data, value, ok, (plus, minus))


# -- scans ----------------------------------------------------------------------------

PROP5_COLUMNS = ("t", "weight", "l_plus", "l_minus", "ratio", "divergence", "residual", "status")


def _diagram_status(data: ConvexCoreData, tolerance: float) -> str:
    if data.max_residual <= tolerance:
        return "ok"
    return f"NonConvergenceError: diagram residual {data.max_residual:.3e} above {tolerance:g}"


def _error_status(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def prop5_scan(
    m_plus_base: MarkedStructure,
    c: CurveWord,
    weight: float,
    t_grid: Sequence[float],
    alpha0: float,
    supports_minus: Sequence[Sequence[str]] | None = None,
    epsilons: Sequence[float] = (0.5, 0.2),
    seed: int = 0,
    threads: int = 1,
    fit_tolerance: float = APPROXIMATION_TOLERANCE,
    starts: int = OPTIMIZER_STARTS,
) -> ScanTable:
    """Ratio l_{m₋}(λ₊)/l_{m₊}(λ₊) along the ray λ₊ = (c, weight·t).

    Each row fabricates (ρ_l, ρ_r) from (m₊, λ₊) and runs phi_forward with
    the upper support {c} and the lower side fitted over `supports_minus`.
    Rows are solved in grid order, each seeded with the previous accepted
    row's laminations; `threads` parallelizes the solver starts. A row whose
    diagram residual exceeds `fit_tolerance` is marked non-converged and
    excluded from the thresholds.
    """
    grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError("t grid must be increasing")
    if alpha0 <= 0:
        raise PreconditionError("alpha0 must be positive")
    if weight <= 0:
        raise PreconditionError("weight must be positive")

    rows, previous = [], None
    for i, t in enumerate(grid):
        w = weight * t
        if w == 0:
            rows.append((t, 0.0, 0.0, 0.0, math.nan, divergence_proxy(m_plus_base), 0.0, "fuchsian"))
            continue
        lam_plus = Multicurve(((c, w),))
        g = fabricate_from_upper(m_plus_base, lam_plus)
        l_plus = multicurve_length(m_plus_base, lam_plus)
        try:
            data = phi_forward(g, [(c.name,)], supports_minus, seed=derive_seed(seed, i), starts=starts,
                               tolerance=fit_tolerance, previous=previous, workers=threads)
        except MessCoreError as exc:
            logger.warning("ratio scan row t=%g failed: %s", t, exc)
            rows.append((t, w, l_plus, math.nan, math.nan, math.nan, math.nan, _error_status(exc)))
            continue
        status = _diagram_status(data, fit_tolerance)
        if status == "ok":
            previous = data
        l_minus = multicurve_length(data.m_minus, lam_plus)
        rows.append((t, w, l_plus, l_minus, l_minus / l_plus, divergence_proxy(g.rho_r), data.max_residual,
                     status))

    table = ScanTable(PROP5_COLUMNS, rows)
    table.meta.update(curve=c.name, weight=weight, alpha0=alpha0, fit_tolerance=fit_tolerance,
                      thresholds=ratio_thresholds(table, epsilons),
                      equidistant=equidistant_budget(epsilons))
    return table


def ratio_thresholds(table: ScanTable, epsilons: Sequence[float]) -> dict[float, float | None]:
    """Smallest scanned t beyond which every ok row has ratio below ε."""
    rows = [(t, r) for t, r, s in zip(table.column("t"), table.column("ratio"), table.column("status"))
            if s == "ok"]
    out = {}
    for eps in epsilons:
        threshold = None
        for t, r in reversed(rows):
            if not r < eps:
                break
            threshold = t
        out[eps] = threshold
    return out


def equidistant_budget(epsilons: Sequence[float]) -> dict[float, dict[str, float]]:
    """For each ε, the largest ε′ with cos(π/2 − ε′) ≤ ε/2 and the resulting length factor.

    A curve of the upper boundary pushed a timelike distance π/2 − ε′ into the core
    shrinks by that factor, which is what drives the ratio column below ε.
    """
    out = {}
    for eps in epsilons:
        if not 0 < eps < 2:
            raise PreconditionError(f"epsilon {eps} outside (0, 2)")
        eps_prime = math.asin(eps / 2)
        out[eps] = {"epsilon_prime": eps_prime,
                    "factor": equidistant_length_factor(math.pi / 2 - eps_prime)}
    return out


PROPERNESS_COLUMNS = ("n", "m_plus_proxy", "rho_r_proxy", "l_plus", "m_minus_proxy", "residual", "status")


def properness_probe(
    m_plus_seq: Sequence[MarkedStructure],
    lam_plus_seq: Sequence[Multicurve],
    supports_minus: Sequence[Sequence[str]] | None = None,
    seed: int = 0,
    threads: int = 1,
    fit_tolerance: float = APPROXIMATION_TOLERANCE,
    starts: int = OPTIMIZER_STARTS,
) -> ScanTable:
    """Divergence of m₋ⁿ for holonomy pairs built from a convergent m₊ⁿ and growing λ₊ⁿ.

    Terms are solved in order through phi_forward, each seeded with the
    previous accepted term; the upper support is that of λ₊ⁿ.
    """
    if len(m_plus_seq) != len(lam_plus_seq):
        raise PreconditionError("sequences must have the same length")
    if len(m_plus_seq) < 3:
        raise PreconditionError("need at least three terms")

    rows, previous = [], None
    for i, (m_plus, lam_plus) in enumerate(zip(m_plus_seq, lam_plus_seq)):
        g = fabricate_from_upper(m_plus, lam_plus)
        l_plus = multicurve_length(m_plus, lam_plus)
        supports_plus = [lam_plus.support] if lam_plus else None
        try:
            data = phi_forward(g, supports_plus, supports_minus, seed=derive_seed(seed, i), starts=starts,
                               tolerance=fit_tolerance, previous=previous, workers=threads)
        except MessCoreError as exc:
            logger.warning("properness row %d failed: %s", i, exc)
            rows.append((i, divergence_proxy(m_plus), divergence_proxy(g.rho_r), l_plus, math.nan, math.nan,
                         _error_status(exc)))
            continue
        status = _diagram_status(data, fit_tolerance)
        if status == "ok":
            previous = data
        rows.append((i, divergence_proxy(m_plus), divergence_proxy(g.rho_r), l_plus,
                     divergence_proxy(data.m_minus), data.max_residual, status))

    table = ScanTable(PROPERNESS_COLUMNS, rows)
    table.meta["rank_agreement"] = rank_agreement(table.column("rho_r_proxy"), table.column("l_plus"))
    table.meta["m_plus_spread"] = max(spectrum_distance(m, m_plus_seq[-1]).value for m in m_plus_seq[-3:])
    table.meta["fit_tolerance"] = fit_tolerance
    return table


def rank_agreement(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Fraction of consecutive pairs where xs and ys move in the same direction."""
    pairs = list(zip(zip(xs, xs[1:]), zip(ys, ys[1:])))
    if not pairs:
        return 1.0
    same = sum(np.sign(x1 - x0) == np.sign(y1 - y0) for (x0, x1), (y0, y1) in pairs)
    return same / len(pairs)
