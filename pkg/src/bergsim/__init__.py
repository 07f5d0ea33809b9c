"""Numerical diagnostics for similarity of n-hypercontractions to Bergman backward shifts."""

from .bundle_geometry import RankDeficiencyError, curvature_field, curvature_values, projection_from_frame
from .frames import Blaschke, Frame, Poly, PowerOneMinusZ, frame_bounds, load_frame, parse_frame
from .potential import carleson_constant, green_potential, make_grid
from .similarity import ReportConfig, assemble_report, intertwiner_sweep, model_operator
from .space_core import (
    SpaceParams,
    backward_shift,
    forward_shift,
    is_k_hypercontraction,
    kernel_vector,
    toeplitz_analytic,
    toeplitz_coanalytic,
)

__version__ = "0.1.0"

__all__ = [
    "Blaschke",
    "Frame",
    "Poly",
    "PowerOneMinusZ",
    "RankDeficiencyError",
    "ReportConfig",
    "SpaceParams",
    "assemble_report",
    "backward_shift",
    "carleson_constant",
    "curvature_field",
    "curvature_values",
    "forward_shift",
    "frame_bounds",
    "green_potential",
    "intertwiner_sweep",
    "is_k_hypercontraction",
    "kernel_vector",
    "load_frame",
    "make_grid",
    "model_operator",
    "parse_frame",
    "projection_from_frame",
    "toeplitz_analytic",
    "toeplitz_coanalytic",
]
