"""Package defaults and the ExperimentSpec input format.

Experiment files are hand-written YAML. Lengths are in hyperbolic length
units and angle parameters are hyperbolic angles (radians-equivalent).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from messcore.errors import SpecValidationError

TOLERANCE = 1e-9
DET_TOLERANCE = 1e-12
WORD_BUDGET = 12
MAX_FN_LENGTH = 50.0

OPTIMIZER_STARTS = 8
OPTIMIZER_ITERATIONS = 500
WEIGHT_BOX = (0.0, 20.0)
# random solver starts are drawn from [0, START_WEIGHT_MAX]; larger weights are reached by continuation
START_WEIGHT_MAX = 4.0
# a solve counts as exact below this spectrum distance
CONVERGENCE_TOLERANCE = 1e-6
# best-approximation fits (lower side on a restricted support) are accepted below this
APPROXIMATION_TOLERANCE = 0.25
# residual entries returned where the earthquaked structure cannot be evaluated
PENALTY = 1e3

# Sample spacing along a fundamental segment when tracking nearest orbit points.
TRACK_SPACING = 0.5

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "sublemma-sweep",
    "prop2-scan",
    "prop4-scan",
    "prop5-scan",
    "properness-probe",
    "prescribe",
    "forward",
)

DEFAULT_SPEC_DIR = Path(__file__).parent / "data" / "specs"


def euler_characteristic(genus: int) -> int:
    return 2 - 2 * genus


def surface_area(genus: int) -> float:
    """Area 2π|χ(S)| of a closed hyperbolic surface."""
    return 2.0 * math.pi * abs(euler_characteristic(genus))


def bad_set_length_constant(genus: int, gamma0: float) -> float:
    """l₀ = 2π|χ(S)|/γ₀."""
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    return surface_area(genus) / gamma0


def derive_seed(master: int, *counters: int) -> int:
    """Counter-mode sub-seed: blake2b over the master seed and row counters."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master).to_bytes(8, "little", signed=False))
    for c in counters:
        h.update(int(c).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def rng_for(master: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *counters))


def _grid(path: str, value: Any) -> tuple[float, ...]:
    if isinstance(value, Mapping):
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecValidationError(path, "grid needs numeric start, stop and num") from exc
        if num < 1:
            raise SpecValidationError(f"{path}.num", "must be >= 1")
        spacing = value.get("spacing", "linear")
        if spacing == "linear":
            return tuple(float(x) for x in np.linspace(start, stop, num))
        if spacing == "geometric":
            if start <= 0 or stop <= 0:
                raise SpecValidationError(path, "geometric grids need positive start and stop")
            return tuple(float(x) for x in np.geomspace(start, stop, num))
        raise SpecValidationError(f"{path}.spacing", f"must be linear or geometric, got {spacing!r}")
    if isinstance(value, (list, tuple)):
        if not value:
            raise SpecValidationError(path, "grid must be nonempty")
        try:
            return tuple(float(x) for x in value)
        except (TypeError, ValueError) as exc:
            raise SpecValidationError(path, "grid entries must be numbers") from exc
    raise SpecValidationError(path, "grid must be a list or a {start, stop, num[, spacing]} mapping")


def _integer(path: str, value: Any) -> int:
    if isinstance(value, bool):
        raise SpecValidationError(path, f"expected an integer, got {value!r}")
    try:
        x = int(value)
    except (TypeError, ValueError) as exc:
        raise SpecValidationError(path, f"expected an integer, got {value!r}") from exc
    if isinstance(value, float) and x != value:
        raise SpecValidationError(path, f"expected an integer, got {value!r}")
    return x


def _number(path: str, value: Any) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecValidationError(path, f"expected a number, got {value!r}") from exc
    if not math.isfinite(x):
        raise SpecValidationError(path, f"must be finite, got {value!r}")
    return x


def _sequence(path: str, value: Any) -> tuple:
    if isinstance(value, (str, Mapping)) or not hasattr(value, "__iter__"):
        raise SpecValidationError(path, f"expected a list, got {value!r}")
    return tuple(value)


def _positive(path: str, value: Any, *, allow_zero: bool = False) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecValidationError(path, f"expected a number, got {value!r}") from exc
    if not math.isfinite(x) or x < 0 or (x == 0 and not allow_zero):
        raise SpecValidationError(path, f"must be {'>=' if allow_zero else '>'} 0, got {value!r}")
    return x


@dataclass(frozen=True)
class Constants:
    """Estimate constants of the properness argument."""

    alpha0: float = 0.1
    beta0: float = 0.05
    gamma0: float = 0.05
    delta0: float = 0.1
    epsilon: tuple[float, ...] = (0.5, 0.2)


@dataclass(frozen=True)
class StructureSpec:
    lengths: tuple[float, float, float] = (2.0, 2.0, 2.0)
    twists: tuple[float, float, float] = (0.0, 0.0, 0.0)
    decomposition: str = "P0"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    seed: int
    genus: int = 2
    constants: Constants = field(default_factory=Constants)
    structure: StructureSpec = field(default_factory=StructureSpec)
    grids: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    samples: int = 1000
    word_budget: int = WORD_BUDGET
    options: Mapping[str, Any] = field(default_factory=dict)
    source: str | None = None

    @property
    def l0(self) -> float:
        """Length constant of the bad-set bound; derived, never read from file."""
        return bad_set_length_constant(self.genus, self.constants.gamma0)

    def grid(self, name: str) -> tuple[float, ...]:
        try:
            return self.grids[name]
        except KeyError:
            raise SpecValidationError(f"grid.{name}", "required grid is missing") from None

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return ExperimentSpec(
            kind=self.kind, seed=seed, genus=self.genus, constants=self.constants,
            structure=self.structure, grids=self.grids, samples=self.samples,
            word_budget=self.word_budget, options=self.options, source=self.source,
        )

    def to_dict(self) -> dict[str, Any]:
        c = self.constants
        return {
            "kind": self.kind,
            "seed": self.seed,
            "genus": self.genus,
            "constants": {
                "alpha0": c.alpha0, "beta0": c.beta0, "gamma0": c.gamma0,
                "delta0": c.delta0, "epsilon": list(c.epsilon), "l0": self.l0,
            },
            "structure": {
                "lengths": list(self.structure.lengths),
                "twists": list(self.structure.twists),
                "decomposition": self.structure.decomposition,
            },
            "grid": {k: list(v) for k, v in self.grids.items()},
            "samples": self.samples,
            "word_budget": self.word_budget,
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], source: str | None = None) -> "ExperimentSpec":
        if not isinstance(data, Mapping):
            raise SpecValidationError("<root>", "spec must be a mapping")
        kind = data.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise SpecValidationError("kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}, got {kind!r}")
        if "seed" not in data:
            raise SpecValidationError("seed", "seed is required")
        seed = _integer("seed", data["seed"])
        if not 0 <= seed < 2**64:
            raise SpecValidationError("seed", "must fit in an unsigned 64-bit integer")

        genus = _integer("genus", data.get("genus", 2))
        if genus != 2:
            raise SpecValidationError("genus", "only genus-2 curve libraries ship")

        raw_c = data.get("constants", {}) or {}
        if not isinstance(raw_c, Mapping):
            raise SpecValidationError("constants", "must be a mapping")
        defaults = Constants()
        eps = raw_c.get("epsilon", defaults.epsilon)
        if not isinstance(eps, (list, tuple)):
            eps = [eps]
        constants = Constants(
            alpha0=_positive("constants.alpha0", raw_c.get("alpha0", defaults.alpha0)),
            beta0=_positive("constants.beta0", raw_c.get("beta0", defaults.beta0), allow_zero=True),
            gamma0=_positive("constants.gamma0", raw_c.get("gamma0", defaults.gamma0)),
            delta0=_positive("constants.delta0", raw_c.get("delta0", defaults.delta0), allow_zero=True),
            epsilon=tuple(_positive(f"constants.epsilon[{i}]", e) for i, e in enumerate(eps)),
        )
        if "l0" in raw_c:
            raise SpecValidationError("constants.l0", "l0 is derived from gamma0 and may not be set")

        raw_s = data.get("structure", {}) or {}
        if not isinstance(raw_s, Mapping):
            raise SpecValidationError("structure", "must be a mapping")
        lengths = _sequence("structure.lengths", raw_s.get("lengths", StructureSpec.lengths))
        twists = _sequence("structure.twists", raw_s.get("twists", StructureSpec.twists))
        if len(lengths) != 3:
            raise SpecValidationError("structure.lengths", "genus 2 needs 3 lengths")
        if len(twists) != 3:
            raise SpecValidationError("structure.twists", "genus 2 needs 3 twists")
        structure = StructureSpec(
            lengths=tuple(_positive(f"structure.lengths[{i}]", x) for i, x in enumerate(lengths)),
            twists=tuple(_number(f"structure.twists[{i}]", t) for i, t in enumerate(twists)),
            decomposition=str(raw_s.get("decomposition", "P0")),
        )

        raw_g = data.get("grid") or {}
        if not isinstance(raw_g, Mapping):
            raise SpecValidationError("grid", "must map axis names to grids")
        grids = {name: _grid(f"grid.{name}", value) for name, value in raw_g.items()}
        samples = _integer("samples", data.get("samples", 1000))
        if samples < 1:
            raise SpecValidationError("samples", "must be >= 1")
        word_budget = _integer("word_budget", data.get("word_budget", WORD_BUDGET))
        if word_budget < 2:
            raise SpecValidationError("word_budget", "must be >= 2")
        options = data.get("options") or {}
        if not isinstance(options, Mapping):
            raise SpecValidationError("options", "must be a mapping")

        return cls(
            kind=kind, seed=seed, genus=genus, constants=constants, structure=structure,
            grids=grids, samples=samples, word_budget=word_budget, options=dict(options),
            source=source,
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentSpec":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise SpecValidationError("<root>", f"not valid YAML: {exc}") from exc
        return cls.from_dict(data, source=str(path))

    @classmethod
    def default(cls, kind: str) -> "ExperimentSpec":
        """The shipped default spec for an experiment kind."""
        if kind not in EXPERIMENT_KINDS:
            raise SpecValidationError("kind", f"unknown experiment kind {kind!r}")
        return cls.from_yaml(DEFAULT_SPEC_DIR / f"{kind}.yaml")
