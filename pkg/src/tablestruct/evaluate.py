"""Directory-level evaluation: adjacency P/R/F1 (micro) and TEDS-Struct."""

from __future__ import annotations

import json
from pathlib import Path

from . import core, metrics
from .errors import InvalidInputError
from .infer import load_result, result_cells


def _cell_list(path: Path):
    """Cells plus content boxes from either a result or an annotation JSON."""
    with open(path, "r", encoding="utf-8") as f:
        d = json.load(f)
    cells = [core.cell_from_dict(c) for c in d["cells"]]
    return cells, d.get("content_boxes")


def _empty_flags(cells, content_boxes):
    if content_boxes is None:
        return [False] * len(cells)
    centers = [((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0) for b in content_boxes]
    flags = []
    for c in cells:
        x0, y0, x1, y1 = c.bbox
        has = any(x0 <= cx <= x1 and y0 <= cy <= y1 for cx, cy in centers)
        flags.append(not has)
    return flags


def evaluate_dirs(pred_dir, gt_dir, iou: float = 0.6, ignore_empty: bool = False) -> dict:
    """Compare {id}.json result files against {id}.json ground truth files.

    Adjacency counts are micro-averaged over samples; TEDS-Struct is the
    per-sample mean.  With ignore_empty, relations touching empty ground
    truth cells are excluded (TEDS keeps the full structure).
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_ids = {p.stem for p in pred_dir.glob("*.json")}
    gt_ids = {p.stem for p in gt_dir.glob("*.json")}
    if not pred_ids or not gt_ids:
        raise InvalidInputError("empty prediction or ground-truth directory")
    if pred_ids != gt_ids:
        missing = sorted(gt_ids - pred_ids)[:10]
        extra = sorted(pred_ids - gt_ids)[:10]
        raise InvalidInputError(
            f"id mismatch between directories; missing={missing} extra={extra}")

    samples = {}
    tp_sum = pred_sum = gt_sum = 0
    teds_sum = 0.0
    for sid in sorted(pred_ids):
        pred_cells, _ = _cell_list(pred_dir / f"{sid}.json")
        gt_cells, content = _cell_list(gt_dir / f"{sid}.json")
        p_adj, g_adj = pred_cells, gt_cells
        if ignore_empty:
            flags = _empty_flags(gt_cells, content)
            p_adj, g_adj = metrics.filter_empty_gt(pred_cells, gt_cells, flags, iou)
        tp, npred, ngt = metrics.adjacency_counts(p_adj, g_adj, iou)
        teds = metrics.teds_struct(
            metrics.cells_to_tree(pred_cells), metrics.cells_to_tree(gt_cells))
        prf = metrics._prf_from_counts(tp, npred, ngt)
        samples[sid] = {
            "precision": prf[0], "recall": prf[1], "f1": prf[2], "teds_struct": teds,
        }
        tp_sum += tp
        pred_sum += npred
        gt_sum += ngt
        teds_sum += teds

    precision, recall, f1 = metrics._prf_from_counts(tp_sum, pred_sum, gt_sum)
    return {
        "iou": iou,
        "ignore_empty": ignore_empty,
        "aggregate": {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "teds_struct": teds_sum / len(samples),
            "true_positives": tp_sum,
            "pred_relations": pred_sum,
            "gt_relations": gt_sum,
            "n_samples": len(samples),
        },
        "samples": samples,
    }


def format_report(report: dict) -> str:
    agg = report["aggregate"]
    lines = [
        f"samples: {agg['n_samples']}  iou: {report['iou']}"
        + ("  (ignoring empty cells)" if report["ignore_empty"] else ""),
        f"adjacency precision: {agg['precision']:.4f}",
        f"adjacency recall:    {agg['recall']:.4f}",
        f"adjacency f1:        {agg['f1']:.4f}",
        f"teds-struct:         {agg['teds_struct']:.4f}",
    ]
    return "\n".join(lines)
