"""Longitudinal, two-dimensional and three-dimensional mode construction."""

from .longitudinal import Mode1D, assemble_psi, longitudinal_mode, parabolic_mode, wkb_mode
from .field import (
    Caustic,
    FieldGrid,
    Mode2D,
    Mode3D,
    RadialCutoff,
    build_mode2d,
    build_mode3d,
    caustic_curve,
    cutoff_localize,
    inner_product_3d,
    transverse_normalization,
)
