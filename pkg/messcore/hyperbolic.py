"""Upper half-plane numerics for the hyperbolic plane and PSL(2, R).

Lines are stored by their ideal endpoints on the real axis (``math.inf`` is
the point at infinity), so most incidence questions reduce to sign tests
after moving one line onto the imaginary axis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from messcore.config import DET_TOLERANCE, TOLERANCE
from messcore.errors import ClassificationError, PreconditionError

logger = logging.getLogger(__name__)

INFINITY = math.inf
Boundary = Union[float, int]


def _canonical_sign(m: np.ndarray) -> np.ndarray:
    flat = m.ravel()
    if flat[int(np.argmax(np.abs(flat)))] < 0:
        return -m
    return m


@dataclass(frozen=True, eq=False)
class Isometry:
    """An element of PSL(2, R) as a 2x2 real matrix in canonical sign.

    The determinant is checked against 1 relative to the squared entry
    size, since long products lose absolute precision in proportion to it.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float).reshape(2, 2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        scale = max(1.0, float(np.sum(m * m)))
        if not abs(det - 1.0) <= DET_TOLERANCE * scale:
            raise PreconditionError(f"isometry determinant {det!r} is not 1")
        m = _canonical_sign(m)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_matrix(cls, m, normalize: bool = False) -> "Isometry":
        m = np.asarray(m, dtype=float)
        if normalize:
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if det <= 0:
                raise PreconditionError("matrix with non-positive determinant is not in PSL(2, R)")
            m = m / math.sqrt(det)
        return cls(m)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(np.eye(2))

    @classmethod
    def translation(cls, length: float) -> "Isometry":
        """Translation by `length` along the imaginary axis, toward infinity."""
        return cls(np.diag([math.exp(length / 2.0), math.exp(-length / 2.0)]))

    @classmethod
    def rotation(cls, theta: float) -> "Isometry":
        """Counterclockwise rotation by `theta` about i."""
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        return cls(np.array([[c, s], [-s, c]]))

    @property
    def trace(self) -> float:
        return float(self.entries[0, 0] + self.entries[1, 1])

    def inverse(self) -> "Isometry":
        (a, b), (c, d) = self.entries
        return Isometry(np.array([[d, -b], [-c, a]]))

    def __matmul__(self, other: "Isometry") -> "Isometry":
        # rescale to det 1; long products drift otherwise
        return Isometry.from_matrix(self.entries @ other.entries, normalize=True)

    def conjugate(self, by: "Isometry") -> "Isometry":
        """by · self · by⁻¹"""
        return by @ self @ by.inverse()

    def act(self, z: complex) -> complex:
        (a, b), (c, d) = self.entries
        return (a * z + b) / (c * z + d)

    def act_boundary(self, u: Boundary) -> float:
        (a, b), (c, d) = self.entries
        if math.isinf(u):
            return INFINITY if c == 0 else a / c
        den = c * u + d
        if den == 0:
            return INFINITY
        return (a * u + b) / den

    def fixed_points(self) -> tuple[float, float]:
        """(repelling, attracting) endpoints of the axis of a hyperbolic element."""
        kind = classify(self)
        if kind != "hyperbolic":
            raise ClassificationError(kind, self.trace)
        (a, b), (c, d) = self.entries
        tr = a + d
        # eigenvalue of larger modulus carries the attracting fixed point
        disc = math.sqrt(tr * tr - 4.0)
        lam_big = (tr + math.copysign(disc, tr)) / 2.0
        lam_small = 1.0 / lam_big

        def point(lam: float) -> float:
            # eigenvector (b, lam - a) or (lam - d, c)
            if abs(b) >= abs(c):
                den = lam - a
                return INFINITY if den == 0 else b / den
            return (lam - d) / c if c != 0 else INFINITY

        return point(lam_small), point(lam_big)

    def allclose(self, other: "Isometry", tol: float = TOLERANCE) -> bool:
        return bool(np.allclose(self.entries, other.entries, atol=tol, rtol=0))

    def __repr__(self) -> str:
        (a, b), (c, d) = self.entries
        return f"Isometry([[{a:.6g}, {b:.6g}], [{c:.6g}, {d:.6g}]])"


def classify(g: Isometry, tol: float = TOLERANCE) -> str:
    t = abs(g.trace)
    if t > 2.0 + tol:
        return "hyperbolic"
    if t < 2.0 - tol:
        return "elliptic"
    return "parabolic"


def translation_length(g: Isometry, tol: float = TOLERANCE) -> float:
    """Translation length 2·arccosh(|tr g|/2) of a hyperbolic element."""
    kind = classify(g, tol)
    if kind != "hyperbolic":
        raise ClassificationError(kind, g.trace)
    return 2.0 * math.acosh(abs(g.trace) / 2.0)


def axis_frame(g: Isometry) -> Isometry:
    """Isometry N with N(0), N(∞) the repelling and attracting fixed points of g.

    N⁻¹ g N is then a translation along the imaginary axis toward infinity.
    """
    rep, att = g.fixed_points()
    return HLine(rep, att).frame()


def translation_along(g: Isometry, length: float) -> Isometry:
    """Translation by `length` along the axis of g, toward its attracting end."""
    n = axis_frame(g)
    return Isometry.translation(length).conjugate(n)


@dataclass(frozen=True)
class HPoint:
    """A point x + iy of the upper half-plane."""

    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise PreconditionError(f"imaginary part must be positive, got {self.y!r}")

    @classmethod
    def from_complex(cls, z: complex) -> "HPoint":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    def moved(self, g: Isometry) -> "HPoint":
        return HPoint.from_complex(g.act(self.z))


def hyperbolic_distance(p: HPoint, q: HPoint) -> float:
    dz = abs(p.z - q.z)
    return math.acosh(1.0 + dz * dz / (2.0 * p.y * q.y))


@dataclass(frozen=True)
class HLine:
    """A geodesic given by its ideal endpoints, oriented from `start` to `end`."""

    start: float
    end: float

    def __post_init__(self):
        s, e = float(self.start), float(self.end)
        if s == e or (math.isinf(s) and math.isinf(e)):
            raise PreconditionError("line endpoints must be distinct")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @classmethod
    def imaginary_axis(cls) -> "HLine":
        return cls(0.0, INFINITY)

    @classmethod
    def through(cls, p: HPoint, q: HPoint) -> "HLine":
        """The line through two points, oriented from p toward q."""
        if math.isclose(p.x, q.x, rel_tol=0.0, abs_tol=1e-15):
            return cls(p.x, INFINITY) if q.y > p.y else cls(INFINITY, p.x)
        c = (p.x * p.x + p.y * p.y - q.x * q.x - q.y * q.y) / (2.0 * (p.x - q.x))
        r = math.hypot(p.x - c, p.y)
        return cls(c - r, c + r) if q.x > p.x else cls(c + r, c - r)

    @property
    def endpoints(self) -> tuple[float, float]:
        return self.start, self.end

    def reversed(self) -> "HLine":
        return HLine(self.end, self.start)

    def moved(self, g: Isometry) -> "HLine":
        return HLine(g.act_boundary(self.start), g.act_boundary(self.end))

    def frame(self) -> Isometry:
        """Isometry taking the imaginary axis (0 → ∞) onto this oriented line."""
        a, b = self.start, self.end
        if math.isinf(b):
            return Isometry(np.array([[1.0, a], [0.0, 1.0]]))
        if math.isinf(a):
            return Isometry(np.array([[b, -1.0], [1.0, 0.0]]))
        if b > a:
            return Isometry.from_matrix(np.array([[b, a], [1.0, 1.0]]) / math.sqrt(b - a))
        return Isometry.from_matrix(np.array([[b, -a], [1.0, -1.0]]) / math.sqrt(a - b))

    def normalizer(self) -> Isometry:
        """Isometry taking this line onto the imaginary axis."""
        return self.frame().inverse()

    def point_at(self, t: float) -> HPoint:
        """Point at signed distance t from the foot of i under the frame."""
        return HPoint.from_complex(self.frame().act(1j * math.exp(t)))


def tangent(u1: float, u2: float, z: complex) -> complex:
    """Unnormalized tangent direction at z of the line with endpoints u1, u2."""
    if math.isinf(u1) or math.isinf(u2):
        return 1j
    return 1j * (z - (u1 + u2) / 2.0)


def sin_angle(t1: complex, t2: complex) -> float:
    return abs((t1 * t2.conjugate()).imag) / (abs(t1) * abs(t2))


def angle_between(t1: complex, t2: complex) -> float:
    """Angle in [0, π] between two tangent vectors at the same point."""
    return abs(float(np.angle(t2 / t1)))


def circle_crossing(radius, u1, u2):
    """Real part X of the crossing of |z| = radius with the line (u1, u2).

    The crossing exists iff |X| < radius, at distance artanh(|X|/radius)
    from i·radius on the side of sign(X). Vectorized over numpy arrays; a
    vertical line (one endpoint infinite) crosses at X = its finite endpoint.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    r2 = np.asarray(radius, dtype=float) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (u1 * u2 + r2) / (u1 + u2)
    x = np.where(np.isinf(u1), u2, x)
    x = np.where(np.isinf(u2), u1, x)
    return x


def _crosses_axis(u1: float, u2: float, tol: float) -> bool:
    if math.isinf(u1) or math.isinf(u2):
        return False
    return u1 * u2 < -tol * tol


def line_distance(d0: HLine, d1: HLine, tol: float = TOLERANCE) -> float:
    """Distance between two lines; 0 if they meet, coincide or share an endpoint."""
    m = d0.normalizer()
    u1, u2 = m.act_boundary(d1.start), m.act_boundary(d1.end)
    if math.isinf(u1) or math.isinf(u2) or abs(u1) <= tol or abs(u2) <= tol:
        return 0.0
    if u1 * u2 < 0:
        return 0.0
    ratio = abs((u1 + u2) / (u1 - u2))
    return math.acosh(max(ratio, 1.0))


@dataclass(frozen=True)
class Perpendicular:
    foot: HPoint
    length: float
    angle_at_foot: float
    degenerate: bool = False


def drop_perpendicular(x: HPoint, line: HLine, tol: float = TOLERANCE) -> Perpendicular:
    """Foot, length and foot angle of the perpendicular from x to `line`.

    A point on the line gives a zero-length result with ``degenerate=True``.
    """
    n = line.frame()
    xp = n.inverse().act(x.z)
    r = abs(xp)
    foot = HPoint.from_complex(n.act(1j * r))
    if abs(xp.real) <= tol * r:
        return Perpendicular(foot=foot, length=0.0, angle_at_foot=math.pi / 2.0, degenerate=True)
    length = math.acosh(max(r / xp.imag, 1.0))
    along = HPoint.from_complex(n.act(2j * r))
    angle = angle_between(direction_towards(foot, along), direction_towards(foot, x))
    return Perpendicular(foot=foot, length=length, angle_at_foot=angle)


def lines_cross(d0: HLine, d1: HLine, tol: float = TOLERANCE) -> bool:
    m = d0.normalizer()
    return _crosses_axis(m.act_boundary(d1.start), m.act_boundary(d1.end), tol)


def _same_line(d0: HLine, d1: HLine, tol: float) -> bool:
    m = d0.normalizer()
    ends = {m.act_boundary(d1.start), m.act_boundary(d1.end)}
    return any(math.isinf(u) for u in ends) and any(abs(u) <= tol for u in ends if not math.isinf(u))


def sublemma_identity_residual(line: HLine, d0: HLine, x: HPoint, tol: float = TOLERANCE) -> float:
    """|cosh(l(c₀))·sin(θ₀) − cosh(d(D, D₀))| for x on D, D disjoint from D₀.

    c₀ is the perpendicular from x to D₀ and θ₀ the angle at x between D
    and c₀.
    """
    if drop_perpendicular(x, line, tol).length > math.sqrt(tol):
        raise PreconditionError("x does not lie on D")
    if lines_cross(line, d0, tol) or _same_line(line, d0, tol):
        raise PreconditionError("D and D0 must be disjoint")
    m = d0.normalizer()
    xp = m.act(x.z)
    moved = line.moved(m)
    t_line = tangent(moved.start, moved.end, xp)
    t_perp = 1j * xp
    c0 = math.acosh(max(abs(xp) / xp.imag, 1.0))
    d = line_distance(line, d0, tol)
    return abs(math.cosh(c0) * sin_angle(t_line, t_perp) - math.cosh(d))


def _normalized_pair(d0: HLine, d1: HLine, x: HPoint, tol: float):
    """Move D0 to the imaginary axis; check x lies between D0 and D1."""
    m = d0.normalizer()
    u1, u2 = m.act_boundary(d1.start), m.act_boundary(d1.end)
    xp = m.act(x.z)
    if _crosses_axis(u1, u2, tol) or _same_line(d0, d1, tol):
        raise PreconditionError("D0 and D1 must be disjoint")
    finite = [u for u in (u1, u2) if not math.isinf(u)]
    side = math.copysign(1.0, sum(finite))
    if side * xp.real <= tol * abs(xp):
        raise PreconditionError("x is not between D0 and D1")
    if len(finite) == 1:
        beyond = side * xp.real >= side * finite[0]
    else:
        centre, radius = (u1 + u2) / 2.0, abs(u1 - u2) / 2.0
        beyond = abs(xp - centre) <= radius
    if beyond:
        raise PreconditionError("x is not between D0 and D1")
    return xp, u1, u2, side


def is_between(d0: HLine, d1: HLine, x: HPoint, tol: float = TOLERANCE) -> bool:
    try:
        _normalized_pair(d0, d1, x, tol)
    except PreconditionError:
        return False
    return True


def orthogonal_hit_distance(d0: HLine, d1: HLine, x: HPoint, tol: float = TOLERANCE) -> float:
    """Length along the segment orthogonal to D0 through x until it meets D1.

    Measured from the foot on D0; ``inf`` when the geodesic misses D1.
    """
    xp, u1, u2, side = _normalized_pair(d0, d1, x, tol)
    r = abs(xp)
    cross = float(circle_crossing(r, u1, u2))
    if not math.isfinite(cross) or side * cross <= 0 or abs(cross) >= r:
        return INFINITY
    return math.atanh(abs(cross) / r)


@dataclass(frozen=True)
class PredicateResult:
    """Outcome of the orthogonal-segment test.

    ``band_failure`` is set when the segment misses D1 although x is within
    γ₀ of both lines.
    """

    hit: bool
    hit_distance: float
    band_failure: bool = False

    def __bool__(self) -> bool:
        return self.hit


def sublemma_predicate(
    d0: HLine, d1: HLine, x: HPoint, alpha0: float, gamma0: float | None = None, tol: float = TOLERANCE
) -> PredicateResult:
    """Does the length-α₀ segment orthogonal to D0 through x cross D1?"""
    distance = orthogonal_hit_distance(d0, d1, x, tol)
    hit = distance <= alpha0
    band_failure = False
    if gamma0 is not None and not hit:
        near0 = drop_perpendicular(x, d0, tol).length <= gamma0
        near1 = drop_perpendicular(x, d1, tol).length <= gamma0
        band_failure = near0 and near1
        if band_failure:
            logger.warning("predicate false inside the calibrated gamma0=%g band", gamma0)
    return PredicateResult(hit=hit, hit_distance=distance, band_failure=band_failure)


def line_at_distance(d: float, direction: float) -> HLine:
    """Line at distance d from i whose perpendicular from i leaves in `direction`."""
    base = HLine(-math.exp(d), math.exp(d))
    return base.moved(Isometry.rotation(direction))


def direction_towards(x: HPoint, target: HPoint) -> complex:
    """Unit tangent at x of the geodesic toward `target` (in disc coordinates at x)."""
    if (x.x, x.y) == (target.x, target.y):
        raise PreconditionError("direction to a coincident point is undefined")
    # move x to i, then the Cayley map sends geodesics through i to diameters
    to_i = Isometry(np.array([[1.0, -x.x], [0.0, x.y]]) / math.sqrt(x.y))
    w = to_i.act(target.z)
    w = (w - 1j) / (w + 1j)
    return w / abs(w)


@dataclass(frozen=True)
class SublemmaCalibration:
    alpha0: float
    gamma0: float
    delta0: float
    delta0_bound: float
    samples: int
    valid: int
    failures: int
    capped: bool


def calibrate_gamma0(alpha0: float, samples: int = 10_000, seed: int = 0) -> SublemmaCalibration:
    """Largest γ₀ for which every sampled valid configuration satisfies the predicate.

    Configurations place x at i with D0, D1 at distances d0, d1 ≤ α₀ in
    random directions. γ₀ is the smallest max(d0, d1) over failures; δ₀ is
    half the largest deviation from π between the two perpendiculars at x
    over accepted configurations inside the γ₀ band.
    """
    if alpha0 <= 0:
        raise PreconditionError("alpha0 must be positive")
    rng = np.random.default_rng(seed)
    x = HPoint(0.0, 1.0)
    records = []
    failures = []
    for _ in range(samples):
        d0v, d1v = rng.uniform(0.0, alpha0, size=2)
        psi0, psi1 = rng.uniform(0.0, 2.0 * math.pi, size=2)
        if d0v <= 0 or d1v <= 0:
            continue
        line0, line1 = line_at_distance(d0v, psi0), line_at_distance(d1v, psi1)
        if not is_between(line0, line1, x):
            continue
        ok = sublemma_predicate(line0, line1, x, alpha0).hit
        spread = max(d0v, d1v)
        if ok:
            f0 = drop_perpendicular(x, line0).foot
            f1 = drop_perpendicular(x, line1).foot
            opening = angle_between(direction_towards(x, f0), direction_towards(x, f1))
            records.append((spread, (math.pi - opening) / 2.0))
        else:
            failures.append(spread)
    capped = not failures
    gamma0 = min(failures) if failures else alpha0
    inside = [dev for spread, dev in records if spread <= gamma0]
    delta0 = max(inside) if inside else 0.0
    logger.info("calibrated gamma0=%.6g delta0=%.6g from %d valid configurations",
                gamma0, delta0, len(records) + len(failures))
    return SublemmaCalibration(
        alpha0=alpha0,
        gamma0=gamma0,
        delta0=delta0,
        delta0_bound=math.acos(1.0 / math.cosh(gamma0)),
        samples=samples,
        valid=len(records) + len(failures),
        failures=len(failures),
        capped=capped,
    )


def random_isometry(rng: np.random.Generator, spread: float = 1.0) -> Isometry:
    """Rotation about i composed with a translation, both random."""
    return (Isometry.rotation(rng.uniform(0, 2 * math.pi))
            @ Isometry.translation(rng.uniform(-spread, spread))
            @ Isometry.rotation(rng.uniform(0, 2 * math.pi)))


def sample_disjoint_configuration(
    rng: np.random.Generator, max_distance: float = 2.0
) -> tuple[HLine, HLine, HPoint]:
    """Random (D, D0, x) with x on D and D disjoint from D0, moved by a random isometry."""
    x = HPoint(0.0, 1.0)
    while True:
        line = HLine.imaginary_axis().moved(Isometry.rotation(rng.uniform(0, math.pi)))
        d0 = line_at_distance(rng.uniform(0.05, max_distance), rng.uniform(0, 2 * math.pi))
        if not lines_cross(line, d0) and not _same_line(line, d0, TOLERANCE):
            break
    g = random_isometry(rng)
    return line.moved(g), d0.moved(g), x.moved(g)
