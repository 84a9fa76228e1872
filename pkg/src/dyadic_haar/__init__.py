"""Haar systems on dyadic families and Lipschitz regularity estimation."""

from .dyadic_core import (
    CubeRef,
    DyadicFamily,
    ExplicitFamily,
    FamilyStructureError,
    InvalidCubeError,
    LeafPoint,
    ResolutionExhaustedError,
    ValidationReport,
    ball,
    cube_distance,
    load_family,
    point_distance,
    random_family,
    smallest_common_ancestor,
    validate_family,
)
from .families_2d import GeometricFamily, make_family, template_wavelet
from .haar_system import build_cube_basis, haar_coefficient, level_coefficients, orthonormality_check
from .regularity import (
    AwcSeries,
    PowerLawFit,
    RegularityReport,
    awc,
    coefficient_bound_constant,
    fit_power_law,
    lawc_series,
    pixelated_seminorm,
    verify,
    verify_converse,
    verify_direct,
)
from .signal_model import AnalyticField, ImageGrid, Signal, cube_mean, image_to_signal, load_pgm, sample_field

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
