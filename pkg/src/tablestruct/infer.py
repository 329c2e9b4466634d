"""Inference pipeline: image -> separators -> grid -> merged cells -> result."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from . import core
from .config import Config
from .core import CellBox
from .data import pad_to_multiple, rescale
from .errors import GridInconsistencyError, InvalidInputError
from .merge import build_grid, resolve_spans
from .model import TableModel
from .split import predictions_to_separators


def load_image(path) -> np.ndarray:
    try:
        return np.asarray(Image.open(path).convert("RGB"))
    except Exception as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc


def _decode_axis(branch, outs, b: int, thresh: float):
    refs = branch.detect(outs["scores"][b], outs["tau_feats"][b])
    preds = branch.decode(refs, outs["memory"][b], outs["frame_hw"], outs["tau"])
    hf, wf = outs["frame_hw"]
    # frame-space "row" separators of the column branch are column separators
    axis = branch.axis
    size = (hf, wf) if axis == core.AXIS_ROW else (wf, hf)
    return predictions_to_separators(preds, axis, size, score_thresh=thresh)


def run_inference(model: TableModel, image: np.ndarray, cfg: Config | None = None) -> dict:
    """Full pipeline on one RGB image; returns the result dict (original coords)."""
    cfg = cfg or model.config
    model.eval()
    h0, w0 = image.shape[:2]
    img_s, _, (sx, sy) = rescale(image, None, cfg.infer_size, cfg.resize_mode)
    hs, ws = img_s.shape[:2]
    padded = pad_to_multiple(img_s)

    with torch.no_grad():
        batch = torch.from_numpy(padded[None].copy()).permute(0, 3, 1, 2).contiguous()
        outs = model(TableModel.normalize_images(batch))
        row_seps = _decode_axis(model.row_branch, outs["row"], 0, cfg.infer_thresh)
        col_seps = _decode_axis(model.col_branch, outs["col"], 0, cfg.infer_thresh)

        try:
            grid = build_grid(row_seps, col_seps, (hs, ws))
        except GridInconsistencyError as exc:
            exc.row_separators = row_seps
            exc.col_separators = col_seps
            raise
        decisions = []
        if grid.n_rows * grid.n_cols > 1:
            pairs, probs = model.merge_net(outs["p2"][:1], grid, (hs, ws))
            decisions = [pr for pr, p in zip(pairs, probs.tolist()) if p >= cfg.merge_thresh]
        cells = resolve_spans(grid, decisions)

    out_cells = []
    for c in cells:
        poly = c.polygon / np.array([sx, sy])
        poly[:, 0] = np.clip(poly[:, 0], 0.0, w0 - 1.0)
        poly[:, 1] = np.clip(poly[:, 1], 0.0, h0 - 1.0)
        out_cells.append(CellBox(c.row_start, c.row_end, c.col_start, c.col_end, polygon=poly))
    return {
        "image_size": [h0, w0],
        "cells": [core.cell_to_dict(c, with_spans=True) for c in out_cells],
    }


def result_cells(result: dict) -> list[CellBox]:
    return [core.cell_from_dict(d) for d in result["cells"]]


def save_result(result: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(result, f)


def load_result(path) -> dict:
    with open(Path(path), "r", encoding="utf-8") as f:
        return json.load(f)


def render_overlay(image: np.ndarray, cells: list[CellBox]) -> Image.Image:
    """Draw recognized cell outlines over the image."""
    img = Image.fromarray(image).convert("RGB")
    draw = ImageDraw.Draw(img)
    for c in cells:
        pts = [(float(x), float(y)) for x, y in c.polygon]
        draw.polygon(pts, outline=(220, 30, 30), width=2)
    return img


def error_result(exc: GridInconsistencyError, image_size) -> dict:
    """Result carrying the raw separators when grid construction failed."""
    return {
        "error": "grid-inconsistency",
        "detail": str(exc),
        "image_size": [int(image_size[0]), int(image_size[1])],
        "row_separators": [core.separator_to_dict(s)
                           for s in getattr(exc, "row_separators", [])],
        "col_separators": [core.separator_to_dict(s)
                           for s in getattr(exc, "col_separators", [])],
    }
