import math

import numpy as np
import pytest

from wgtorus.geometry import build_curve, circle_profile, triangle_profile
from wgtorus.modes import build_mode2d, cutoff_localize, longitudinal_mode
from wgtorus.semiclassics import LongitudinalCoefficients, ModeIndices, ScaleParams, assemble_spectrum

H0 = 0.015
N0 = 1500


@pytest.fixture(scope="session")
def tri():
    return build_curve(triangle_profile(0.4), 3.0)


@pytest.fixture(scope="session")
def circ():
    return build_curve(circle_profile(), 3.0)


@pytest.fixture(scope="session")
def scale():
    return ScaleParams.from_h(H0, N0)


@pytest.fixture(scope="session")
def indices():
    return ModeIndices(N0, 2, 5)


@pytest.fixture(scope="session")
def spectral(tri, scale, indices):
    return assemble_spectrum(tri, scale, indices)


@pytest.fixture(scope="session")
def psi(tri, scale, spectral):
    return longitudinal_mode(tri, scale, spectral)


@pytest.fixture(scope="session")
def w(tri, scale, spectral, psi):
    return build_mode2d(tri, scale, spectral, psi)


@pytest.fixture(scope="session")
def w_loc(w):
    return cutoff_localize(w, 6.0)


@pytest.fixture(scope="session")
def const_coeffs():
    """Constant coefficients with zero curvature: A does not depend on the energy."""
    return LongitudinalCoefficients.constant(2 * math.pi, 0.3, 0.0, B0=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
