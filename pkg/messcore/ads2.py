"""The anti-de Sitter plane as the quadric ⟨x, x⟩ = −1.

The form is ⟨x, y⟩ = −x₀y₀ − x₁y₁ + x₂y₂. A spacelike line is the trace of a
plane through the origin whose normal is timelike; that normal, scaled to
⟨p, p⟩ = −1, is the line's pole and is itself a point of AdS₂ at timelike
distance π/2 from every point of the line. The sign of the pole orients the
line: a point y lies in the future of the line when ⟨p, y⟩ < 0.

Near the basepoint (1, 0, 0) we draw in the projective chart
(w, u) = (x₂/x₀, x₁/x₀). Geodesics are straight there, u grows toward the
future, and vertical lines are timelike geodesics orthogonal to {x₁ = 0}.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from messcore.config import TOLERANCE
from messcore.errors import (
    ArcPreconditionError,
    CausalCharacterError,
    ConfigurationError,
    InternalConsistencyError,
    PreconditionError,
    RangeError,
)
from messcore.scan import ScanTable, map_rows

logger = logging.getLogger(__name__)

FORM = np.diag([-1.0, -1.0, 1.0])
QUADRIC_TOLERANCE = 1e-12


def form(x: np.ndarray, y: np.ndarray) -> float:
    return float(-x[0] * y[0] - x[1] * y[1] + x[2] * y[2])


def _form_cross(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """A vector form-orthogonal to both x and y."""
    return FORM @ np.cross(x, y)


def _timelike_unit(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    v = v / np.max(np.abs(v))
    n2 = form(v, v)
    if not n2 < 0:
        raise ConfigurationError(f"{what} is not timelike (<v, v> = {n2:.3e})")
    return v / math.sqrt(-n2)


@dataclass(frozen=True, eq=False)
class AdS2Point:
    """A point of AdS₂; the vector satisfies ⟨x, x⟩ = −1."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float).reshape(3)
        scale = max(1.0, float(v @ v))
        if not abs(form(v, v) + 1.0) <= QUADRIC_TOLERANCE * scale:
            raise PreconditionError(f"<x, x> = {form(v, v)!r}, expected -1")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def basepoint(cls) -> "AdS2Point":
        return cls(np.array([1.0, 0.0, 0.0]))

    @classmethod
    def normalized(cls, v) -> "AdS2Point":
        """Rescale a timelike vector onto the quadric."""
        return cls(_timelike_unit(v, "point"))

    @classmethod
    def from_affine(cls, w: float, u: float) -> "AdS2Point":
        q = 1.0 + u * u - w * w
        if not q > 0:
            raise RangeError(f"chart point ({w}, {u}) is outside AdS2")
        return cls(np.array([1.0, u, w]) / math.sqrt(q))

    @property
    def affine(self) -> tuple[float, float]:
        x0, x1, x2 = self.vector
        if not x0 > 0:
            raise RangeError("point is outside the chart around the basepoint")
        return float(x2 / x0), float(x1 / x0)

    def moved(self, g: np.ndarray) -> "AdS2Point":
        return AdS2Point(g @ self.vector)

    def close_to(self, other: "AdS2Point", tol: float = TOLERANCE) -> bool:
        return bool(np.max(np.abs(self.vector - other.vector)) <= tol)


@dataclass(frozen=True, eq=False)
class AdS2Line:
    """A spacelike geodesic {y : ⟨p, y⟩ = 0}, both antipodal branches included."""

    pole: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pole", AdS2Point.normalized(self.pole).vector)

    @classmethod
    def through(cls, a: AdS2Point, b: AdS2Point) -> "AdS2Line":
        """The line through a and b, oriented so the pole is in the future when a is left of b."""
        if lorentz_distance(a, b).kind is not DistanceKind.SPACELIKE:
            raise CausalCharacterError("a line needs two spacelike-separated points")
        return cls(_form_cross(a.vector, b.vector))

    @classmethod
    def through_direction(cls, point: AdS2Point, tangent: np.ndarray) -> "AdS2Line":
        """The line through `point` whose tangent there points rightward along `tangent`."""
        return cls(_form_cross(point.vector, np.asarray(tangent, dtype=float)))

    def side(self, y: AdS2Point) -> float:
        """Negative in the future of the line, positive in its past."""
        return form(self.pole, y.vector)

    def contains(self, y: AdS2Point, tol: float = TOLERANCE) -> bool:
        return abs(self.side(y)) <= tol

    def moved(self, g: np.ndarray) -> "AdS2Line":
        return AdS2Line(g @ self.pole)

    def point_at(self, s: float, branch: int = 1) -> AdS2Point:
        """Point at signed length s, increasing rightward, from the foot q = (p₁, −p₀, 0)."""
        p = self.pole
        q = branch * np.array([p[1], -p[0], 0.0]) / math.hypot(p[0], p[1])
        u = _form_cross(q, p)
        u = u / math.sqrt(form(u, u))
        return AdS2Point(math.cosh(s) * q + math.sinh(s) * u)


def line_angle(l1: AdS2Line, l2: AdS2Line) -> float:
    """Hyperbolic angle between two crossing spacelike lines, read off their poles."""
    c = abs(form(l1.pole, l2.pole))
    return math.acosh(max(1.0, c))


class DistanceKind(str, enum.Enum):
    TIMELIKE = "timelike"
    SPACELIKE = "spacelike"
    LIGHTLIKE = "lightlike"
    # no geodesic joins the points; the value is the spacelike distance to the antipode
    UNREACHABLE = "unreachable"


class Separation(NamedTuple):
    kind: DistanceKind
    value: float


def lorentz_distance(p: AdS2Point, q: AdS2Point, tol: float = TOLERANCE) -> Separation:
    """Causal character and length of the geodesic segment from p to q.

    Uses ⟨p − q, p − q⟩ = −2 − 2⟨p, q⟩, which keeps short segments accurate.
    """
    delta = p.vector - q.vector
    if np.max(np.abs(delta)) <= tol:
        return Separation(DistanceKind.TIMELIKE, 0.0)
    n2 = form(delta, delta)
    if n2 > tol:
        return Separation(DistanceKind.SPACELIKE, 2.0 * math.asinh(math.sqrt(n2) / 2.0))
    if n2 < -tol:
        if n2 >= -4.0 - tol:
            return Separation(DistanceKind.TIMELIKE, 2.0 * math.asin(min(1.0, math.sqrt(-n2) / 2.0)))
        return Separation(DistanceKind.UNREACHABLE, math.acosh(form(p.vector, q.vector)))
    return Separation(DistanceKind.LIGHTLIKE, 0.0)


def dual_line(x: AdS2Point) -> AdS2Line:
    """The line at timelike distance π/2 from x."""
    return AdS2Line(x.vector)


def dual_point(line: AdS2Line) -> AdS2Point:
    return AdS2Point(line.pole)


# -- isometries -----------------------------------------------------------------------


def time_rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def boost(axis: int, r: float) -> np.ndarray:
    """Hyperbolic rotation mixing coordinate `axis` (0 or 1) with x₂."""
    if axis not in (0, 1):
        raise PreconditionError("boost axis must be 0 or 1")
    g = np.eye(3)
    c, s = math.cosh(r), math.sinh(r)
    g[axis, axis] = g[2, 2] = c
    g[axis, 2] = g[2, axis] = s
    return g


def is_isometry(g: np.ndarray, tol: float = 1e-10) -> bool:
    g = np.asarray(g, dtype=float)
    return bool(np.max(np.abs(g.T @ FORM @ g - FORM)) <= tol * max(1.0, float(np.max(np.abs(g))) ** 2))


def random_isometry(rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    """A random element of the identity component of O(2, 1)."""
    return (time_rotation(rng.uniform(0, 2 * math.pi))
            @ boost(0, rng.uniform(-spread, spread))
            @ boost(1, rng.uniform(-spread, spread))
            @ time_rotation(rng.uniform(0, 2 * math.pi)))


# -- the support-line configuration ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvexConfig:
    """Support lines of a convex region at x and at the points α₀ to its left and right.

    The region lies in the past of `pi_x`, `p_l` and `p_r`; `pi_prime` joins
    the past ideal endpoints of `p_l` and `p_r`, and `tau` is the unit past
    normal to `pi_x` at x.
    """

    alpha0: float
    phi_l: float
    phi_r: float
    x: AdS2Point
    x_l: AdS2Point
    x_r: AdS2Point
    pi_x: AdS2Line
    p_l: AdS2Line
    p_r: AdS2Line
    pi_prime: AdS2Line
    tau: np.ndarray

    def tau_point(self, t: float) -> AdS2Point:
        return AdS2Point(math.cos(t) * self.x.vector + math.sin(t) * self.tau)


def _ideal_direction(point: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    e = point + tangent
    return e / np.max(np.abs(e))


def build_config(alpha0: float, phi_l: float, phi_r: float) -> ConvexConfig:
    """Canonical configuration at x = (1, 0, 0) with Π_x = {x₁ = 0}.

    x_l and x_r sit on Π_x at distance α₀ on either side; P_r leaves x_r
    tilted into the past by hyperbolic angle φ_r as it goes right, P_l
    likewise going left.
    """
    if not alpha0 > 0:
        raise PreconditionError(f"alpha0 must be positive, got {alpha0!r}")
    if not (phi_l > 0 and phi_r > 0):
        raise PreconditionError("angle parameters must be positive")
    x = AdS2Point.basepoint()
    past = np.array([0.0, -1.0, 0.0])
    ch, sh = math.cosh(alpha0), math.sinh(alpha0)
    x_r = AdS2Point(np.array([ch, 0.0, sh]))
    x_l = AdS2Point(np.array([ch, 0.0, -sh]))
    right_at_r = np.array([sh, 0.0, ch])
    left_at_l = np.array([sh, 0.0, -ch])

    t_r = math.cosh(phi_r) * right_at_r + math.sinh(phi_r) * past
    t_l = math.cosh(phi_l) * left_at_l + math.sinh(phi_l) * past
    pi_x = AdS2Line.through_direction(x, np.array([0.0, 0.0, 1.0]))
    p_r = AdS2Line.through_direction(x_r, t_r)
    p_l = AdS2Line.through_direction(x_l, -t_l)

    e_r = _ideal_direction(x_r.vector, t_r)
    e_l = _ideal_direction(x_l.vector, t_l)
    try:
        pole = _timelike_unit(_form_cross(e_l, e_r), "pole of the line through the past endpoints")
    except ConfigurationError:
        raise ConfigurationError(
            f"alpha0={alpha0}, phi_l={phi_l}, phi_r={phi_r}: line through the past endpoints is not spacelike"
        ) from None
    if form(pole, x.vector) > 0:
        pole = -pole
    return ConvexConfig(alpha0, phi_l, phi_r, x, x_l, x_r, pi_x, p_l, p_r, AdS2Line(pole), past)


def tau_core_length(cfg: ConvexConfig) -> float:
    """Length of τ from x down to where it leaves I⁺(Π′)."""
    a = form(cfg.pi_prime.pole, cfg.x.vector)
    b = form(cfg.pi_prime.pole, cfg.tau)
    if abs(a) <= TOLERANCE:
        raise InternalConsistencyError("x lies on the lower line")
    t = math.atan2(-a, b)
    if t <= 0:
        t += math.pi
    if not 0 < t < math.pi:
        raise InternalConsistencyError(f"tau misses the lower line (t = {t!r})")
    return t


def sample_config(rng: np.random.Generator, alpha_range=(0.01, 2.0), phi_range=(0.05, 10.0)) -> ConvexConfig:
    return build_config(rng.uniform(*alpha_range), rng.uniform(*phi_range), rng.uniform(*phi_range))


TAU_COLUMNS = ("alpha0", "phi_l", "phi_r", "tau_length", "gap", "status")


def tau_scan(
    alpha_grid: Sequence[float],
    phi_grid: Sequence[float],
    epsilon_primes: Sequence[float] = (),
    threads: int = 1,
) -> ScanTable:
    """τ-core length over α₀ × φ_l × φ_r, φ_r varying fastest.

    `phi_grid` must increase and `alpha_grid` be strictly monotone; the
    usual scan lists α₀ decreasing so the last row is the tightest cell.
    """
    alphas = [float(a) for a in alpha_grid]
    phis = [float(p) for p in phi_grid]
    if not alphas or not phis:
        raise PreconditionError("scan grids must be nonempty")
    if any(b <= a for a, b in zip(phis, phis[1:])):
        raise PreconditionError("phi grid must be increasing")
    steps = np.sign(np.diff(alphas))
    if len(alphas) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise PreconditionError("alpha grid must be strictly monotone")

    cells = [(a, pl, pr) for a in alphas for pl in phis for pr in phis]

    def row(_: int, cell: tuple[float, float, float]) -> tuple:
        a, pl, pr = cell
        try:
            t = tau_core_length(build_config(a, pl, pr))
        except (ConfigurationError, InternalConsistencyError) as exc:
            logger.warning("tau scan cell alpha0=%g phi=(%g, %g) failed: %s", a, pl, pr, exc)
            return (a, pl, pr, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        return (a, pl, pr, t, math.pi / 2 - t, "ok")

    table = ScanTable(TAU_COLUMNS, map_rows(row, cells, threads))
    table.meta["shape"] = (len(alphas), len(phis), len(phis))
    table.meta["monotonicity_violations"] = len(monotonicity_violations(table))
    if epsilon_primes:
        table.meta["thresholds"] = {e: angle_thresholds(table, e) for e in epsilon_primes}
    return table


def _value_cube(table: ScanTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    na, nl, nr = table.meta["shape"]
    values = np.array(table.column("tau_length"), dtype=float).reshape(na, nl, nr)
    alphas = np.array(table.column("alpha0"), dtype=float).reshape(na, nl, nr)[:, 0, 0]
    phis = np.array(table.column("phi_r"), dtype=float)[:nr]
    return values, alphas, phis


def monotonicity_violations(table: ScanTable, tol: float = 1e-9) -> list[tuple[str, int, int, int]]:
    """Grid neighbours where τ-core length fails to grow with φ or with shrinking α₀."""
    values, alphas, _ = _value_cube(table)
    out = []
    for axis, name in ((1, "phi_l"), (2, "phi_r")):
        for idx in zip(*np.nonzero(np.diff(values, axis=axis) < -tol)):
            out.append((name, *map(int, idx)))
    if len(alphas) > 1:
        d = np.diff(values, axis=0) * -np.sign(np.diff(alphas))[:, None, None]
        for idx in zip(*np.nonzero(d < -tol)):
            out.append(("alpha0", *map(int, idx)))
    return out


def angle_thresholds(table: ScanTable, epsilon_prime: float) -> dict[str, object]:
    """Empirical A(α₀): smallest scanned φ with τ-core ≥ π/2 − ε′ whenever both angles reach it.

    η₀ is the largest scanned α₀ that has a threshold at all.
    """
    values, alphas, phis = _value_cube(table)
    target = math.pi / 2 - epsilon_prime
    per_alpha = {}
    for i, a in enumerate(alphas):
        found = None
        for k in range(len(phis) - 1, -1, -1):
            if np.all(values[i, k:, k:] >= target):
                found = float(phis[k])
            else:
                break
        per_alpha[float(a)] = found
    admitted = [a for a, thr in per_alpha.items() if thr is not None]
    return {"A": per_alpha, "eta0": max(admitted) if admitted else None}


# -- spacelike arcs -------------------------------------------------------------------


@dataclass(frozen=True)
class SpacelikePolyline:
    """Piecewise geodesic arc, vertices listed left to right in the chart."""

    vertices: tuple[AdS2Point, ...]

    def __post_init__(self):
        vs = tuple(self.vertices)
        if len(vs) < 2:
            raise PreconditionError("a polyline needs at least two vertices")
        for i, (a, b) in enumerate(zip(vs, vs[1:])):
            kind = lorentz_distance(a, b).kind
            if kind is not DistanceKind.SPACELIKE:
                raise CausalCharacterError(f"segment {i} is {kind.value}, not spacelike")
        object.__setattr__(self, "vertices", vs)

    @classmethod
    def from_affine(cls, points: Sequence[tuple[float, float]]) -> "SpacelikePolyline":
        return cls(tuple(AdS2Point.from_affine(w, u) for w, u in points))

    @property
    def endpoints(self) -> tuple[AdS2Point, AdS2Point]:
        return self.vertices[0], self.vertices[-1]

    def affine(self) -> np.ndarray:
        return np.array([v.affine for v in self.vertices])

    def segment_lengths(self) -> list[float]:
        return [lorentz_distance(a, b).value for a, b in zip(self.vertices, self.vertices[1:])]

    def turns(self) -> list[float]:
        """Side of each interior vertex relative to the chord of its neighbours."""
        vs = self.vertices
        return [AdS2Line.through(vs[i - 1], vs[i + 1]).side(vs[i]) for i in range(1, len(vs) - 1)]

    def convexity(self, tol: float = TOLERANCE) -> str | None:
        """"future" if every vertex is on or below its neighbours' chord, "past" if above."""
        turns = self.turns()
        below = all(t >= -tol for t in turns)
        above = all(t <= tol for t in turns)
        if below and above:
            return "flat"
        if below:
            return "future"
        if above:
            return "past"
        return None

    def height_at(self, w: float) -> float:
        """Chart height u of the arc above chart abscissa w."""
        pts = self.affine()
        return float(np.interp(w, pts[:, 0], pts[:, 1]))

    def refined(self, pieces: int) -> "SpacelikePolyline":
        """Same arc with every segment cut into `pieces` geodesic pieces."""
        pts = self.affine()
        out = [tuple(pts[0])]
        for a, b in zip(pts, pts[1:]):
            for k in range(1, pieces + 1):
                out.append(tuple(a + (b - a) * k / pieces))
        return SpacelikePolyline.from_affine(out)


def polyline_length(s: SpacelikePolyline) -> float:
    return float(sum(s.segment_lengths()))


class ArcComparison(NamedTuple):
    ok: bool
    lengths: tuple[float, float]


def nested_arc_compare(
    sigma0: SpacelikePolyline, sigma1: SpacelikePolyline, tol: float = 1e-10
) -> ArcComparison:
    """Compare lengths of two future-convex arcs with common ends, σ₀ in the future of σ₁.

    Nesting is checked at every vertex abscissa of both arcs, which is
    exact for piecewise straight arcs in the chart.
    """
    for end0, end1 in zip(sigma0.endpoints, sigma1.endpoints):
        if not end0.close_to(end1, 1e-9):
            raise ArcPreconditionError("endpoints", "arcs do not share their endpoints")
    for name, s in (("sigma0", sigma0), ("sigma1", sigma1)):
        if s.convexity() not in ("future", "flat"):
            raise ArcPreconditionError("convexity", f"{name} is not future-convex")
        if np.any(np.diff(s.affine()[:, 0]) <= 0):
            raise ArcPreconditionError("convexity", f"{name} is not a graph over the chart")
    ws = np.union1d(sigma0.affine()[:, 0], sigma1.affine()[:, 0])
    for w in ws:
        if sigma0.height_at(w) < sigma1.height_at(w) - 1e-12:
            raise ArcPreconditionError("nesting", f"sigma0 dips below sigma1 at w={w:.6g}")
    l0, l1 = polyline_length(sigma0), polyline_length(sigma1)
    return ArcComparison(l0 >= l1 - tol, (l0, l1))


def _convex_chain(rng: np.random.Generator, interior: int) -> np.ndarray:
    half = rng.uniform(0.2, 0.5)
    ws = np.concatenate(([-half], np.sort(rng.uniform(-half, half, size=interior)), [half]))
    slopes = np.sort(rng.uniform(-0.3, 0.3, size=interior + 1))
    us = np.concatenate(([rng.uniform(-0.1, 0.1)], np.diff(ws) * slopes)).cumsum()
    return np.column_stack([ws, us])


def _cut_corner(chain: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    a, v, b = chain[k - 1], chain[k], chain[k + 1]
    lo = v + rng.uniform(0.05, 0.95) * (a - v)
    hi = v + rng.uniform(0.05, 0.95) * (b - v)
    return np.vstack([chain[:k], lo, hi, chain[k + 1:]])


def sample_nested_pair(
    rng: np.random.Generator, max_interior: int = 5, cuts: int = 2
) -> tuple[SpacelikePolyline, SpacelikePolyline]:
    """Random (σ₀, σ₁), both future-convex with common ends and σ₀ in the future of σ₁.

    σ₁ is a convex chain in the chart; σ₀ drops some of its vertices and
    then cuts a few corners, which can only move the arc up.
    """
    while True:
        lower = _convex_chain(rng, int(rng.integers(1, max_interior + 1)))
        keep = np.concatenate(([True], rng.random(len(lower) - 2) < 0.5, [True]))
        upper = lower[keep]
        for _ in range(int(rng.integers(0, cuts + 1))):
            if len(upper) < 3:
                break
            upper = _cut_corner(upper, int(rng.integers(1, len(upper) - 1)), rng)
        try:
            return SpacelikePolyline.from_affine(upper), SpacelikePolyline.from_affine(lower)
        except CausalCharacterError:
            continue


# -- equidistant curves ---------------------------------------------------------------


def equidistant_length_factor(d: float) -> float:
    """Length ratio between a curve at timelike distance d from a spacelike geodesic and the geodesic."""
    if not 0 < d < math.pi / 2:
        raise RangeError(f"distance {d!r} outside (0, pi/2)")
    return math.cos(d)


def equidistant_curve(line: AdS2Line, d: float, s_min: float, s_max: float, samples: int) -> SpacelikePolyline:
    """Polyline through points at timelike distance d to the future of `line`."""
    if samples < 2 or not s_max > s_min:
        raise PreconditionError("need an increasing range and at least two samples")
    c, s = math.cos(d), math.sin(d)
    pts = [AdS2Point(c * line.point_at(t).vector + s * line.pole)
           for t in np.linspace(s_min, s_max, samples)]
    return SpacelikePolyline(tuple(pts))
