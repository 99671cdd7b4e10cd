"""Figure rendering for the experiment CSV outputs.

Parses the '# key=value' metadata contract and renders each figure
family (error ratios, normalizing-constant trajectories, relative
variance curves, particle counts, state trajectories, chain traces,
posterior bars, identity tables, scaling curves) to an image file.
"""

from .families import FAMILIES, FamilySpec, render_family
from .reader import (
    SchemaMismatch,
    TableFile,
    floats,
    meta_indices,
    read_table,
    require_columns,
    strings,
)

__all__ = [
    "FAMILIES",
    "FamilySpec",
    "SchemaMismatch",
    "TableFile",
    "floats",
    "meta_indices",
    "read_table",
    "render_family",
    "require_columns",
    "strings",
]
