"""Lift enumeration in the universal cover.

Everything happens in the frame of one curve c: the holonomy is conjugated
so that c translates along the imaginary axis toward infinity and the base
point o = i sits on its axis. Points along the axis are tracked by nearby
orbit points γ_k·o; lifts of a second curve near the axis are then
γ_k·(lifts near o), and the lifts near o come from a small word-length
ball. Counts are trusted only when two word budgets agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from messcore.config import TOLERANCE, TRACK_SPACING, WORD_BUDGET
from messcore.errors import BudgetExhaustedError, PreconditionError
from messcore.hyperbolic import axis_frame, circle_crossing
from messcore.surface import CurveWord, MarkedStructure, curve_length
from messcore.words import invert_gen

logger = logging.getLogger(__name__)

ORIGIN = 1j
# crossings are counted on [offset, offset + length) along the axis, in units of length
SEGMENT_OFFSET = 0.3183098861837907


def _sl2_inv(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def mobius(g: np.ndarray, z):
    """Apply a stack of matrices (n, 2, 2) to points z (complex, broadcast)."""
    return (g[..., 0, 0] * z + g[..., 0, 1]) / (g[..., 1, 0] * z + g[..., 1, 1])


def mobius_boundary(g: np.ndarray, u) -> np.ndarray:
    """Apply a stack of matrices to boundary points; ``inf`` is allowed both ways."""
    u = np.broadcast_to(np.asarray(u, dtype=float), g.shape[:-2])
    a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        finite = (a * u + b) / (c * u + d)
        at_inf = a / c
    out = np.where(np.isinf(u), at_inf, finite)
    return np.where(np.isnan(out) | np.isinf(out), np.inf, out)


def distance_to_origin(z) -> np.ndarray:
    z = np.asarray(z)
    return np.arccosh(1.0 + np.abs(z - ORIGIN) ** 2 / (2.0 * z.imag))


def _orbit_keys(points: np.ndarray) -> list[tuple[int, int]]:
    xs = np.round(points.real * 1e8).astype(np.int64)
    ys = np.round(np.log(points.imag) * 1e8).astype(np.int64)
    return list(zip(xs.tolist(), ys.tolist()))


@dataclass
class CurveFrame:
    """Holonomy conjugated into the frame of one curve."""

    curve: CurveWord
    length: float
    letters: dict[str, np.ndarray]
    conjugator: np.ndarray

    @classmethod
    def build(cls, h: MarkedStructure, curve: CurveWord) -> "CurveFrame":
        length = curve_length(h, curve)
        n = axis_frame(h.evaluate(curve.word)).entries
        n_inv = _sl2_inv(n)
        letters = {}
        for g in h.group.generators:
            m = n_inv @ h.holonomy[g].entries @ n
            letters[g] = m
            letters[invert_gen(g)] = _sl2_inv(m)
        return cls(curve=curve, length=length, letters=letters, conjugator=n)

    def word_matrix(self, word: str) -> np.ndarray:
        m = np.eye(2)
        for let in word:
            m = m @ self.letters[let]
        return m

    @property
    def translation(self) -> np.ndarray:
        return np.diag([math.exp(self.length / 2.0), math.exp(-self.length / 2.0)])

    @property
    def max_displacement(self) -> float:
        return float(max(distance_to_origin(mobius(m, ORIGIN)) for m in self.letters.values()))


def word_ball(frame: CurveFrame, radius: float, budget: int, center: complex = ORIGIN) -> np.ndarray:
    """Group elements β (in frame coordinates) with d(β·center, o) ≤ radius.

    Breadth-first over reduced words up to length `budget`; a word is only
    extended while it stays within radius + 2·(largest letter displacement).
    """
    letters = list(frame.letters)
    mats = np.stack([frame.letters[x] for x in letters])
    inverse_index = np.array([letters.index(invert_gen(x)) for x in letters])
    slack = 2.0 * frame.max_displacement
    identity = np.eye(2)[None]
    kept = [identity]
    seen = set(_orbit_keys(mobius(identity, ORIGIN)))
    frontier, last = identity, np.array([-1])
    for _ in range(budget):
        if len(frontier) == 0:
            break
        grown = np.einsum("lij,njk->lnik", mats, frontier).reshape(-1, 2, 2)
        letter_of = np.repeat(np.arange(len(letters)), len(frontier))
        parent_last = np.tile(last, len(letters))
        ok = inverse_index[letter_of] != parent_last
        grown, letter_of = grown[ok], letter_of[ok]
        dist = distance_to_origin(mobius(grown, center))
        alive = dist <= radius + slack
        grown, letter_of, dist = grown[alive], letter_of[alive], dist[alive]
        fresh = []
        for i, key in enumerate(_orbit_keys(mobius(grown, ORIGIN))):
            if key not in seen:
                seen.add(key)
                fresh.append(i)
        fresh = np.array(fresh, dtype=int)
        frontier, last = grown[fresh], letter_of[fresh]
        inside = dist[fresh] <= radius
        if inside.any():
            kept.append(frontier[inside])
    return np.concatenate(kept)


@dataclass
class Tracking:
    """Orbit elements γ_k with γ_k·o near i·e^{kδ}, k = 0..K, and the worst error."""

    elements: np.ndarray
    spacing: float
    error: float

    def nearest(self, s: float) -> int:
        return int(np.clip(round(s / self.spacing), 0, len(self.elements) - 1))


def track_axis(frame: CurveFrame, extent: float, spacing: float = TRACK_SPACING) -> Tracking:
    """Track the axis of the frame curve over heights [0, extent] by orbit points.

    Candidates are translates C^m·P_j·β of the word prefixes P_j, refined by
    a ball β of one letter displacement.
    """
    word = frame.curve.word
    prefixes = np.stack([frame.word_matrix(word[:j]) for j in range(len(word))])
    powers = [np.linalg.matrix_power(frame.translation, m) for m in range(-1, int(extent // frame.length) + 2)]
    shifted = np.einsum("mij,pjk->mpik", np.stack(powers), prefixes).reshape(-1, 2, 2)
    refine = word_ball(frame, frame.max_displacement, budget=4)
    candidates = np.einsum("pij,bjk->pbik", shifted, refine).reshape(-1, 2, 2)
    points = mobius(candidates, ORIGIN)
    count = int(math.ceil(extent / spacing)) + 1
    targets = 1j * np.exp(spacing * np.arange(count))
    dist = np.arccosh(1.0 + np.abs(points[None, :] - targets[:, None]) ** 2
                      / (2.0 * points.imag[None, :] * targets.imag[:, None]))
    best = np.argmin(dist, axis=1)
    error = float(np.max(dist[np.arange(count), best]))
    logger.debug("tracked %s over %d samples, error %.3f", frame.curve.name, count, error)
    return Tracking(elements=candidates[best], spacing=spacing, error=error)


def _line_keys(u1: np.ndarray, u2: np.ndarray) -> list[tuple[int, int]]:
    t1 = np.round(2.0 * np.arctan(u1) * 1e10).astype(np.int64)
    t2 = np.round(2.0 * np.arctan(u2) * 1e10).astype(np.int64)
    return list(zip(t1.tolist(), t2.tolist()))


def _dedupe(u1: np.ndarray, u2: np.ndarray, keys) -> tuple[np.ndarray, np.ndarray]:
    _, first = np.unique(np.array(keys, dtype=np.int64).reshape(len(keys), -1), axis=0, return_index=True)
    first = np.sort(first)
    return u1[first], u2[first]


@dataclass
class LiftCatalog:
    """Lifts (u1, u2) of one curve passing within `radius` of points tracked on another."""

    frame: CurveFrame
    tracking: Tracking
    u1: np.ndarray
    u2: np.ndarray
    radius: float
    budget: int

    def lifts_near(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        g = np.broadcast_to(self.tracking.elements[k], (len(self.u1), 2, 2))
        return mobius_boundary(g, self.u1), mobius_boundary(g, self.u2)


def build_catalog(
    h: MarkedStructure,
    axis_curve: CurveWord,
    other: CurveWord,
    radius: float,
    budget: int,
    frame: CurveFrame | None = None,
    tracking: Tracking | None = None,
    extent: float | None = None,
) -> LiftCatalog:
    frame = frame or CurveFrame.build(h, axis_curve)
    extent = frame.length if extent is None else extent
    tracking = tracking or track_axis(frame, extent)
    if other.same_curve(axis_curve):
        own, to_axis = frame, np.eye(2)
        own_tracking = track_axis(frame, frame.length)
    else:
        own = CurveFrame.build(h, other)
        own_tracking = track_axis(own, own.length)
        to_axis = _sl2_inv(frame.conjugator) @ own.conjugator
    base_point = complex(mobius(to_axis, ORIGIN))
    ends = mobius_boundary(np.stack([to_axis, to_axis]), np.array([0.0, np.inf]))
    eta = to_axis @ own_tracking.elements @ _sl2_inv(to_axis)
    reach = radius + tracking.spacing + tracking.error + own_tracking.error
    ball = word_ball(frame, reach, budget, center=base_point)
    g = np.einsum("bij,ejk->beik", ball, _sl2_inv(eta)).reshape(-1, 2, 2)
    u1, u2 = mobius_boundary(g, ends[0]), mobius_boundary(g, ends[1])
    u1, u2 = _dedupe(u1, u2, _line_keys(u1, u2))
    logger.debug("catalog for %s near %s: %d lifts from a ball of %d (budget %d)",
                 other.name, axis_curve.name, len(u1), len(ball), budget)
    return LiftCatalog(frame=frame, tracking=tracking, u1=u1, u2=u2, radius=radius, budget=budget)


def _count_segment_crossings(catalog: LiftCatalog) -> int:
    length = catalog.frame.length
    lo = SEGMENT_OFFSET * length
    found_u1, found_u2 = [], []
    for k in range(len(catalog.tracking.elements)):
        u1, u2 = catalog.lifts_near(k)
        with np.errstate(invalid="ignore", divide="ignore"):
            crossing = np.isfinite(u1) & np.isfinite(u2) & (u1 * u2 < 0)
            height = 0.5 * np.log(np.where(crossing, -u1 * u2, 1.0))
        hit = crossing & (height >= lo) & (height < lo + length)
        found_u1.append(u1[hit])
        found_u2.append(u2[hit])
    u1, u2 = np.concatenate(found_u1), np.concatenate(found_u2)
    if len(u1) == 0:
        return 0
    # lines through the axis are pinned by crossing height and endpoint ratio
    keys = list(zip(np.round(0.25 * np.log(-u1 * u2) * 1e8).astype(np.int64).tolist(),
                    np.round(np.log(np.abs(u1 / u2)) * 1e8).astype(np.int64).tolist(),
                    np.sign(u1).astype(np.int64).tolist()))
    return len(set(keys))


def count_crossings(h: MarkedStructure, c1: CurveWord, c2: CurveWord, budget: int | None = None) -> int:
    """Lifts of c2 crossing one fundamental segment of the axis of c1."""
    budget = budget or WORD_BUDGET
    frame = CurveFrame.build(h, c1)
    extent = (1.0 + SEGMENT_OFFSET) * frame.length
    tracking = track_axis(frame, extent)
    counts = []
    for b in (budget, budget + 2):
        catalog = build_catalog(h, c1, c2, 0.0, b, frame=frame, tracking=tracking)
        counts.append(_count_segment_crossings(catalog))
    if counts[0] != counts[1]:
        raise BudgetExhaustedError(counts[0], budget, counts[1], budget + 2)
    return counts[0]


class ArcHitCounter:
    """Counts lifts of a simple curve crossing the orthogonal arcs of length α₀.

    Positions s are arc length along the curve from the foot of the base
    point, reduced modulo the curve's length.
    """

    def __init__(self, h: MarkedStructure, curve: CurveWord, alpha0: float, budget: int | None = None):
        if alpha0 <= 0:
            raise PreconditionError("alpha0 must be positive")
        if not curve.simple or curve.probe:
            raise PreconditionError(f"{curve.name} is not a curated simple curve")
        self.curve = curve
        self.alpha0 = alpha0
        self.budget = budget or WORD_BUDGET
        frame = CurveFrame.build(h, curve)
        tracking = track_axis(frame, frame.length)
        self.length = frame.length
        self.catalogs = [
            build_catalog(h, curve, curve, alpha0, b, frame=frame, tracking=tracking)
            for b in (self.budget, self.budget + 2)
        ]

    def _hits(self, catalog: LiftCatalog, s: float) -> tuple[int, int]:
        k = catalog.tracking.nearest(s)
        u1, u2 = catalog.lifts_near(k)
        radius = math.exp(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            itself = ((np.abs(u1) <= TOLERANCE * radius) & ~np.isfinite(u2)) | (
                (np.abs(u2) <= TOLERANCE * radius) & ~np.isfinite(u1))
            x = circle_crossing(radius, u1, u2)
        reach = radius * math.tanh(self.alpha0)
        hit = np.isfinite(x) & (np.abs(x) <= reach) & ~itself
        return 1 + int(np.sum(hit & (x < 0))), 1 + int(np.sum(hit & (x > 0)))

    def counts(self, s: float) -> tuple[int, int]:
        """(n_left, n_right) at arc length s, each counting x itself."""
        s = float(s) % self.length
        small, large = (self._hits(c, s) for c in self.catalogs)
        if small != large:
            raise BudgetExhaustedError(min(small), self.budget, min(large), self.budget + 2)
        return small


def orthogonal_arc_hits(
    h: MarkedStructure, c: CurveWord, s: float, alpha0: float, side: str = "left", budget: int | None = None
) -> int:
    """Crossings of c with the length-α₀ geodesic arc orthogonal to c at c(s), counting c(s)."""
    if side not in ("left", "right"):
        raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
    n_left, n_right = ArcHitCounter(h, c, alpha0, budget).counts(s)
    return n_left if side == "left" else n_right


@dataclass(frozen=True)
class BadSetEstimate:
    curve: str
    length: float
    beta0: float
    samples: int
    # two-sided: min(n_l, n_r) <= beta0 * length
    measure: float
    fraction: float
    stderr: float
    # one-sided: n_l alone
    one_sided_measure: float
    one_sided_fraction: float
    one_sided_stderr: float
    max_count: int

    def within_bound(self, delta0: float, l0: float, sigmas: float = 2.0) -> bool:
        return self.measure <= delta0 * self.length + l0 + sigmas * self.stderr


def _stderr(length: float, fraction: float, n: int) -> float:
    return length * math.sqrt(fraction * (1.0 - fraction) / n)


def bad_set_measure(
    h: MarkedStructure,
    c: CurveWord,
    alpha0: float,
    beta0: float,
    samples: int,
    seed: int = 0,
    budget: int | None = None,
) -> BadSetEstimate:
    """Stratified estimate of the length of {x ∈ c : min(n_l(x), n_r(x)) ≤ β₀·l(c)}.

    One uniform position per stratum of width l(c)/samples.
    """
    if samples < 100:
        raise PreconditionError(f"need at least 100 samples, got {samples}")
    if beta0 < 0:
        raise PreconditionError("beta0 must be non-negative")
    counter = ArcHitCounter(h, c, alpha0, budget)
    length = counter.length
    rng = np.random.default_rng(seed)
    positions = (np.arange(samples) + rng.uniform(size=samples)) * length / samples
    threshold = beta0 * length
    bad = one_sided = 0
    max_count = 1
    for s in positions:
        n_left, n_right = counter.counts(s)
        max_count = max(max_count, n_left, n_right)
        bad += min(n_left, n_right) <= threshold
        one_sided += n_left <= threshold
    p, q = bad / samples, one_sided / samples
    logger.info("bad set of %s (length %.4g): two-sided %.4f, one-sided %.4f over %d samples",
                c.name, length, p, q, samples)
    return BadSetEstimate(
        curve=c.name,
        length=length,
        beta0=beta0,
        samples=samples,
        measure=p * length,
        fraction=p,
        stderr=_stderr(length, p, samples),
        one_sided_measure=q * length,
        one_sided_fraction=q,
        one_sided_stderr=_stderr(length, q, samples),
        max_count=max_count,
    )
