"""Split-and-merge table structure recognition.

Separator line regression with a transformer decoder over reference-point
queries, relation-network cell merging, a synthetic table generator with
exact ground truth, and adjacency-F1 / tree-edit-similarity evaluation.
"""

from .config import Config, load_config
from .core import (
    AXIS_COL,
    AXIS_ROW,
    CellBox,
    Polyline,
    Separator,
    TableAnnotation,
    intersect_polylines,
    load_annotation,
    polyline_eval,
    save_annotation,
)
from .merge import TableGrid, build_grid, resolve_spans, spatial_feature_18d
from .metrics import adjacency_prf, adjacency_relations, cells_to_tree, teds_struct
from .model import TableModel
from .synthdata import (
    SplitTargets,
    TableSpec,
    WarpParams,
    apply_warp,
    derive_targets,
    generate_dataset,
    generate_table,
)

__all__ = [
    "AXIS_COL", "AXIS_ROW", "CellBox", "Config", "Polyline", "Separator",
    "SplitTargets", "TableAnnotation", "TableGrid", "TableModel", "TableSpec",
    "WarpParams", "adjacency_prf", "adjacency_relations", "apply_warp",
    "build_grid", "cells_to_tree", "derive_targets", "generate_dataset",
    "generate_table", "intersect_polylines", "load_annotation", "load_config",
    "polyline_eval", "resolve_spans", "save_annotation", "spatial_feature_18d",
    "teds_struct",
]
__version__ = "0.1.0"
