"""Numerical coincidence index for pairs of maps on R^n and on tori."""

from .engine import (
    IndexReport,
    SolverConfig,
    find_coincidences,
    index_with_auto_perturb,
    linear_index,
    perturb_to_nondegenerate,
    total_index,
)
from .expr import MapExpr, parse_map
from .lefschetz import lefschetz_det_oracle, lefschetz_trace
from .maps import MapPair, Region, check_admissible, straight_line_homotopy
from .numcore import IntMatrix

__version__ = "0.1.0"

__all__ = [
    "IndexReport",
    "IntMatrix",
    "MapExpr",
    "MapPair",
    "Region",
    "SolverConfig",
    "check_admissible",
    "find_coincidences",
    "index_with_auto_perturb",
    "lefschetz_det_oracle",
    "lefschetz_trace",
    "linear_index",
    "parse_map",
    "perturb_to_nondegenerate",
    "straight_line_homotopy",
    "total_index",
]
