"""Whispering-gallery quasimodes of the Dirichlet Laplacian in a solid torus."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: E402,F401,F403
from .geometry import MeridianCurve, build_curve, circle_profile, tabulated_profile, triangle_profile  # noqa: E402
from .semiclassics import (  # noqa: E402
    ModeIndices,
    Regime,
    ScaleParams,
    SpectralData,
    assemble_spectrum,
    longitudinal_coefficients,
    turning_points,
)
from .modes import (  # noqa: E402
    Mode1D,
    Mode2D,
    Mode3D,
    build_mode2d,
    build_mode3d,
    caustic_curve,
    cutoff_localize,
    longitudinal_mode,
)
from .config import RunConfig, parse_config  # noqa: E402
