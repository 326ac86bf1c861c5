import json

import pytest

from app.curve_geometry import CurvatureProfile, curve_bounds


@pytest.fixture(scope="session")
def line():
    return CurvatureProfile("line")


@pytest.fixture(scope="session")
def bump():
    return CurvatureProfile("gaussian_bump", c=1.0)


@pytest.fixture(scope="session")
def bump_bounds(bump):
    return curve_bounds(bump)


@pytest.fixture
def curve_file(tmp_path):
    """Writes a curve config and returns its path."""

    def _write(config, name="curve.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return str(path)

    return _write
