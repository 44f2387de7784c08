"""Pytest configuration and fixtures for messcore tests."""

import numpy as np
import pytest

from messcore.config import ExperimentSpec
from messcore.surface import FNCoords, fn_to_holonomy, load_library, reference_structure


@pytest.fixture
def rng():
    """Fresh generator with a fixed seed, one per test."""
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def library():
    return load_library()


@pytest.fixture(scope="session")
def reference():
    """Pants lengths 2, twists 0 on P0."""
    return reference_structure()


@pytest.fixture(scope="session")
def twisted():
    """A less symmetric structure on P0."""
    return fn_to_holonomy(FNCoords((1.7, 2.3, 1.9), (0.4, -0.6, 0.3)), "P0")


@pytest.fixture
def spec_dict():
    """Minimal valid prop4-scan spec as a mapping."""
    return {
        "kind": "prop4-scan",
        "seed": 7,
        "grid": {"alpha0": [1.0, 0.5, 0.1], "phi": [0.5, 1.0, 2.0, 4.0]},
    }


@pytest.fixture
def spec_file(tmp_path, spec_dict):
    """The minimal spec written to a YAML file."""
    import yaml

    path = tmp_path / "spec.yaml"
    path.write_text(yaml.safe_dump(spec_dict))
    return path


@pytest.fixture
def small_spec(spec_dict):
    return ExperimentSpec.from_dict(spec_dict)
