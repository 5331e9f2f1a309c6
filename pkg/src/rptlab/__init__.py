"""Random projection trees and experiments probing their guarantees."""
from .core_math import (
    covariance_and_mean,
    diameter,
    meb_radius,
    project,
    projection_energy,
    sample_direction,
    top_eigenvalues,
)
from .rptree import (
    Ball,
    BuildParams,
    SplitRule,
    Tree,
    build_tree,
    cell_contains_ball,
    collect_level_radii,
    levels_to_reduce,
    packing_count,
    smallest_containing_cell,
)

__version__ = "0.1.0"
