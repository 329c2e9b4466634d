"""Structure evaluation: cell adjacency P/R/F1 and tree-edit similarity."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from shapely.geometry import Polygon as ShapePolygon

from .core import CellBox
from .errors import InvalidInputError
from .treedist import Node, tree_edit_distance

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


class AdjacencyRelation(NamedTuple):
    cell_a: int  # index into the cell list, always < cell_b
    cell_b: int
    direction: str


def _occupancy(cells: Sequence[CellBox]) -> np.ndarray:
    n_rows = max(c.row_end for c in cells) + 1
    n_cols = max(c.col_end for c in cells) + 1
    occ = -np.ones((n_rows, n_cols), dtype=np.int64)
    for i, c in enumerate(cells):
        block = occ[c.row_start:c.row_end + 1, c.col_start:c.col_end + 1]
        if (block >= 0).any():
            raise InvalidInputError("cell grid extents overlap")
        block[:] = i
    return occ


def adjacency_relations(cells: Sequence[CellBox]) -> set[AdjacencyRelation]:
    """Direct neighbor relations: next occupied cell to the right / below.

    Unoccupied grid positions are skipped, so the nearest cell with no cell
    in between is the neighbor.
    """
    if not cells:
        return set()
    occ = _occupancy(cells)
    n_rows, n_cols = occ.shape
    rels = set()
    for i, c in enumerate(cells):
        for r in range(c.row_start, c.row_end + 1):
            j = c.col_end + 1
            while j < n_cols and occ[r, j] < 0:
                j += 1
            if j < n_cols and occ[r, j] != i:
                k = int(occ[r, j])
                rels.add(AdjacencyRelation(min(i, k), max(i, k), HORIZONTAL))
        for cc in range(c.col_start, c.col_end + 1):
            r = c.row_end + 1
            while r < n_rows and occ[r, cc] < 0:
                r += 1
            if r < n_rows and occ[r, cc] != i:
                k = int(occ[r, cc])
                rels.add(AdjacencyRelation(min(i, k), max(i, k), VERTICAL))
    return rels


def _poly_iou(a: CellBox, b: CellBox) -> float:
    bx0, by0, bx1, by1 = a.bbox
    cx0, cy0, cx1, cy1 = b.bbox
    if bx1 <= cx0 or cx1 <= bx0 or by1 <= cy0 or cy1 <= by0:
        return 0.0
    pa = ShapePolygon(a.polygon).buffer(0)
    pb = ShapePolygon(b.polygon).buffer(0)
    if pa.is_empty or pb.is_empty:
        return 0.0
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union if union > 0 else 0.0


def match_cells(pred_cells: Sequence[CellBox], gt_cells: Sequence[CellBox],
                iou: float = 0.6) -> dict[int, int]:
    """Greedy one-to-one matching by descending IoU; pairs below `iou` dropped."""
    scored = []
    for pi, p in enumerate(pred_cells):
        for gi, g in enumerate(gt_cells):
            v = _poly_iou(p, g)
            if v >= iou:
                scored.append((v, pi, gi))
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))
    mapping: dict[int, int] = {}
    used_gt = set()
    for v, pi, gi in scored:
        if pi in mapping or gi in used_gt:
            continue
        mapping[pi] = gi
        used_gt.add(gi)
    return mapping


def adjacency_prf(pred_cells: Sequence[CellBox], gt_cells: Sequence[CellBox],
                  iou: float = 0.6):
    """Cell adjacency precision/recall/F1 with IoU-matched cells.

    A predicted relation counts as a true positive when both endpoints are
    matched to ground-truth cells that hold the same relation with the same
    direction.  Empty-denominator convention: 0/0 -> 1.
    """
    counts = adjacency_counts(pred_cells, gt_cells, iou)
    return _prf_from_counts(*counts)


def adjacency_counts(pred_cells, gt_cells, iou: float = 0.6):
    """(true positives, #pred relations, #gt relations) for micro-averaging."""
    pred_rels = adjacency_relations(pred_cells)
    gt_rels = adjacency_relations(gt_cells)
    mapping = match_cells(pred_cells, gt_cells, iou)
    tp = 0
    for rel in pred_rels:
        ga = mapping.get(rel.cell_a)
        gb = mapping.get(rel.cell_b)
        if ga is None or gb is None:
            continue
        if AdjacencyRelation(min(ga, gb), max(ga, gb), rel.direction) in gt_rels:
            tp += 1
    return tp, len(pred_rels), len(gt_rels)


def _prf_from_counts(tp: int, n_pred: int, n_gt: int):
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gt if n_gt else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def filter_empty_gt(pred_cells, gt_cells, empty_flags, iou: float = 0.6):
    """Drop empty GT cells and the predictions matched to them.

    Used by the --ignore-empty evaluation mode; relations are then rebuilt
    with the occupancy scan skipping the removed cells.
    """
    mapping = match_cells(pred_cells, gt_cells, iou)
    drop_pred = {pi for pi, gi in mapping.items() if empty_flags[gi]}
    kept_gt = [c for gi, c in enumerate(gt_cells) if not empty_flags[gi]]
    kept_pred = [c for pi, c in enumerate(pred_cells) if pi not in drop_pred]
    return kept_pred, kept_gt


# ---------------------------------------------------------------------------
# Structure trees
# ---------------------------------------------------------------------------

def cells_to_tree(cells: Sequence[CellBox]) -> Node:
    """Structure-only tree: table -> rows -> cells labeled (row_span, col_span).

    Each cell hangs off its starting grid row, ordered by starting column.
    """
    root = Node(("table",))
    if not cells:
        return root
    occ = _occupancy(cells)  # raises on inconsistent spans
    if (occ < 0).any():
        raise InvalidInputError("cells do not tile the grid")
    n_rows = occ.shape[0]
    rows = [Node(("row",)) for _ in range(n_rows)]
    for r in range(n_rows):
        root.add(rows[r])
    for c in sorted(cells, key=lambda c: (c.row_start, c.col_start)):
        rows[c.row_start].add(Node(("cell", c.row_span, c.col_span)))
    return root


def teds_struct(tree_a: Node, tree_b: Node) -> float:
    """Tree-edit-distance similarity in [0, 1]; 1 means identical structure."""
    dist = tree_edit_distance(tree_a, tree_b)
    denom = max(tree_a.size(), tree_b.size())
    return 1.0 - dist / denom if denom else 1.0
