import math

import pytest

from isoyamabe.discretize import build_grid
from isoyamabe.profile import make_hemisphere, make_product, make_spherical_band, profile_from_json

ACCEPTANCE_LINES: list[str] = []


def clifford(lo: float, hi: float):
    """f = |x|^2 on S^4 in R^2 x R^3, restricted to [lo, hi].

    Focal sets S^2 at t = 0 and S^1 at t = 1; a = 10t - 4, b = 4t(1 - t),
    level areas 2 pi sqrt(t) 4 pi (1 - t), weight 4 pi^2 sqrt(1 - t).
    """
    ends = [
        {"type": "focal", "param": 0.0, "focal_dim": 2} if lo == 0 else {"type": "boundary", "param": lo, "orientation": -1},
        {"type": "focal", "param": 1.0, "focal_dim": 1} if hi == 1 else {"type": "boundary", "param": hi, "orientation": 1},
    ]
    tr = 0.5 * (lo + hi)
    return profile_from_json({
        "name": f"clifford[{lo},{hi}]", "dim": 4, "interval": [lo, hi],
        "a": {"kind": "polynomial", "coeffs": [-4.0, 10.0]},
        "b": {"kind": "polynomial", "coeffs": [0.0, 4.0, -4.0]},
        "s_g": {"kind": "constant", "value": 12.0}, "endpoints": ends,
        "weight_norm": {"t_ref": tr, "area": 2 * math.pi * math.sqrt(tr) * 4 * math.pi * (1 - tr)},
    })


def hemi_product():
    """S^2_+ x S^2 with unit factor scale: n = 4, k = 2, connected minimal boundary."""
    return make_product(make_spherical_band(2, 0.0, 1.0), 2, 2.0, 1.0)


@pytest.fixture(scope="session")
def hemi3():
    return make_hemisphere(3)


@pytest.fixture(scope="session")
def hemi3_grid(hemi3):
    return build_grid(hemi3, 400)


@pytest.fixture(scope="session")
def product():
    return hemi_product()


@pytest.fixture(scope="session")
def product_grid(product):
    return build_grid(product, 400)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
