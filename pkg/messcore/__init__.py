"""Numerics for convex cores of globally hyperbolic AdS₃ spacetimes of genus 2.

Marked hyperbolic structures are built from Fenchel-Nielsen coordinates,
deformed by earthquakes along weighted multicurves, and paired into holonomy
pairs whose convex-core boundary data is recovered by least squares.
"""

from messcore.ads2 import (
    AdS2Line,
    AdS2Point,
    ConvexConfig,
    SpacelikePolyline,
    build_config,
    dual_line,
    equidistant_length_factor,
    lorentz_distance,
    nested_arc_compare,
    polyline_length,
    tau_core_length,
)
from messcore.config import ExperimentSpec
from messcore.covering import bad_set_measure, count_crossings, orthogonal_arc_hits
from messcore.errors import (
    BudgetExhaustedError,
    ClassificationError,
    MessCoreError,
    NonConvergenceError,
    PreconditionError,
    SpecValidationError,
)
from messcore.experiments import ResultEnvelope, run
from messcore.hyperbolic import (
    HLine,
    HPoint,
    Isometry,
    PredicateResult,
    drop_perpendicular,
    line_distance,
    sublemma_identity_residual,
    sublemma_predicate,
    translation_length,
)
from messcore.mess import (
    ConvexCoreData,
    GHMCStructure,
    fabricate_ghmc,
    phi_forward,
    prescribe_boundary,
    prop5_scan,
    properness_probe,
)
from messcore.quake import (
    EarthquakeSpec,
    earthquake,
    left_earthquake,
    right_earthquake,
    solve_connecting_lamination,
    spectrum_distance,
    twist_flow,
)
from messcore.surface import (
    FNCoords,
    MarkedStructure,
    Multicurve,
    apply_mapping_class,
    curve_length,
    fn_to_holonomy,
    geometric_intersection,
    holonomy_to_fn,
    length_spectrum,
    load_library,
)

__version__ = "0.1.0"

__all__ = [
    "AdS2Line",
    "AdS2Point",
    "BudgetExhaustedError",
    "ClassificationError",
    "ConvexConfig",
    "ConvexCoreData",
    "EarthquakeSpec",
    "ExperimentSpec",
    "FNCoords",
    "GHMCStructure",
    "HLine",
    "HPoint",
    "Isometry",
    "MarkedStructure",
    "MessCoreError",
    "Multicurve",
    "NonConvergenceError",
    "PreconditionError",
    "PredicateResult",
    "ResultEnvelope",
    "SpacelikePolyline",
    "SpecValidationError",
    "apply_mapping_class",
    "bad_set_measure",
    "build_config",
    "count_crossings",
    "curve_length",
    "drop_perpendicular",
    "dual_line",
    "earthquake",
    "equidistant_length_factor",
    "fabricate_ghmc",
    "fn_to_holonomy",
    "geometric_intersection",
    "holonomy_to_fn",
    "left_earthquake",
    "length_spectrum",
    "line_distance",
    "load_library",
    "lorentz_distance",
    "nested_arc_compare",
    "orthogonal_arc_hits",
    "phi_forward",
    "polyline_length",
    "prescribe_boundary",
    "prop5_scan",
    "properness_probe",
    "right_earthquake",
    "run",
    "solve_connecting_lamination",
    "spectrum_distance",
    "sublemma_identity_residual",
    "sublemma_predicate",
    "tau_core_length",
    "translation_length",
    "twist_flow",
]
