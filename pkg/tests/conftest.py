import pathlib

import pytest

from fishrope import fixtures

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
CALIBRATION_FILE = REPO_ROOT / "calibrations" / "synthetic_fisheye.yaml"


@pytest.fixture
def linear_camera():
    return fixtures.linear_camera()


@pytest.fixture
def k2_camera():
    return fixtures.k2_camera()


@pytest.fixture
def wide_camera():
    return fixtures.wide_camera()


@pytest.fixture
def calibration_path():
    assert CALIBRATION_FILE.exists(), "run scripts/make_fixture_camera.py"
    return CALIBRATION_FILE
