"""Joint spectral radius, operator radii and cocycle growth experiments."""

__version__ = "0.1.0"

from .linalg import (
    DimensionError,
    ValidationError,
    distance_to_rank,
    operator_norm,
    singular_values,
    spectral_radius,
)
from .jsr import (
    MatrixSet,
    RadiiReport,
    bw_report,
    gelfand_lower_bound,
    gripenberg_bounds,
    norm_upper_bound,
)
from .opshift import OperatorFamily, ShiftFinRankOperator, family_radii
