"""Geometry primitives and the canonical table data model.

Coordinates are continuous pixels throughout; rasterization only happens in
target/mask generation.  A row separator is described by three polylines
(top boundary, center line, bottom boundary) sampled at shared positions
along x; a column separator mirrors this along y.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError

AXIS_ROW = "row"
AXIS_COL = "col"

# Number of sample points per boundary polyline, both axes.
K_POINTS = 15


def canonical_positions(extent: int, k: int = K_POINTS) -> np.ndarray:
    """Fixed sample positions i*extent/16 (floored), i = 1..k."""
    step = extent // 16
    return np.array([step * i for i in range(1, k + 1)], dtype=np.float64)


def prior_position(extent: int) -> int:
    """Position of the fixed prior column/row used for reference points."""
    return extent // 4


@dataclass
class Polyline:
    """Piecewise-linear curve y=f(x) (row axis) or x=f(y) (column axis).

    sample_positions run along the fixed axis and must be strictly
    increasing; values are the free-axis coordinates at those positions.
    """

    axis: str
    sample_positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.sample_positions = np.asarray(self.sample_positions, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.sample_positions.size == 0:
            raise InvalidInputError("polyline needs at least one sample point")
        if self.sample_positions.shape != self.values.shape:
            raise InvalidInputError("sample_positions and values length mismatch")
        if self.sample_positions.size > 1 and not np.all(np.diff(self.sample_positions) > 0):
            raise InvalidInputError("sample_positions must be strictly increasing")

    def __len__(self) -> int:
        return int(self.sample_positions.size)

    def points(self) -> np.ndarray:
        """(K, 2) array of (x, y) pixel points."""
        if self.axis == AXIS_ROW:
            return np.stack([self.sample_positions, self.values], axis=1)
        return np.stack([self.values, self.sample_positions], axis=1)


def polyline_eval(p: Polyline, t) -> np.ndarray | float:
    """Evaluate a polyline at position(s) t along its fixed axis.

    Linear interpolation between samples; outside [t_1, t_K] the end
    segment's slope is extended (curved separators continue their trend to
    the image border).  Exact at every sample position.
    """
    scalar = np.isscalar(t)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    xs, ys = p.sample_positions, p.values
    out = np.interp(t, xs, ys)
    if xs.size >= 2:
        s0 = (ys[1] - ys[0]) / (xs[1] - xs[0])
        s1 = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        lo = t < xs[0]
        hi = t > xs[-1]
        out[lo] = ys[0] + s0 * (t[lo] - xs[0])
        out[hi] = ys[-1] + s1 * (t[hi] - xs[-1])
    return float(out[0]) if scalar else out


class Intersection(NamedTuple):
    x: float
    y: float
    fallback: bool  # True when the curves never cross inside the image


def _seg_intersect(p0, p1, q0, q1):
    """Intersection point of segments p0p1 and q0q1, or None."""
    r = p1 - p0
    s = q1 - q0
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-12:
        return None
    d = q0 - p0
    t = (d[0] * s[1] - d[1] * s[0]) / denom
    u = (d[0] * r[1] - d[1] * r[0]) / denom
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= u <= 1 + 1e-9:
        return p0 + t * r
    return None


def _extended_chain(p: Polyline, extent: float) -> np.ndarray:
    """Polyline points extended to [0, extent] along the fixed axis."""
    ts = [0.0] + [float(v) for v in p.sample_positions] + [float(extent)]
    ts = sorted(set(ts))
    vals = polyline_eval(p, np.array(ts))
    if p.axis == AXIS_ROW:
        return np.stack([np.array(ts), vals], axis=1)
    return np.stack([vals, np.array(ts)], axis=1)


def _point_seg_dist(pt, a, b):
    ab = b - a
    denom = float(ab @ ab)
    tt = 0.0 if denom < 1e-12 else float(np.clip((pt - a) @ ab / denom, 0.0, 1.0))
    proj = a + tt * ab
    return float(np.hypot(*(pt - proj))), proj


def intersect_polylines(row_line: Polyline, col_line: Polyline, image_size) -> Intersection:
    """Intersect a row-axis curve with a column-axis curve.

    Both curves are extended to the image borders first.  If several
    segment intersections exist, the one with smallest x wins; if none
    exists, the closest approach between the two chains is returned with
    fallback=True.
    """
    if row_line.axis != AXIS_ROW or col_line.axis != AXIS_COL:
        raise InvalidInputError("expected a row-axis and a column-axis polyline")
    h, w = image_size
    rc = _extended_chain(row_line, w)
    cc = _extended_chain(col_line, h)

    hits = []
    for i in range(len(rc) - 1):
        for j in range(len(cc) - 1):
            pt = _seg_intersect(rc[i], rc[i + 1], cc[j], cc[j + 1])
            if pt is not None:
                hits.append(pt)
    if hits:
        hits.sort(key=lambda p: (p[0], p[1]))
        best = hits[0]
        return Intersection(float(best[0]), float(best[1]), False)

    # Closest approach between the two chains (flagged fallback).
    best_d, best_pt = np.inf, None
    for i in range(len(rc) - 1):
        a, b = rc[i], rc[i + 1]
        for q in cc:
            d, proj = _point_seg_dist(q, a, b)
            if d < best_d:
                best_d, best_pt = d, (proj + q) / 2.0
    for j in range(len(cc) - 1):
        a, b = cc[j], cc[j + 1]
        for q in rc:
            d, proj = _point_seg_dist(q, a, b)
            if d < best_d:
                best_d, best_pt = d, (proj + q) / 2.0
    return Intersection(float(best_pt[0]), float(best_pt[1]), True)


@dataclass
class Separator:
    """One row/column separator band: top boundary, center line, bottom boundary."""

    axis: str
    top: Polyline
    center: Polyline
    bottom: Polyline
    score: float = 1.0

    def __post_init__(self):
        for p in (self.top, self.center, self.bottom):
            if p.axis != self.axis:
                raise InvalidInputError("separator polylines must share the axis")
        if not (
            np.array_equal(self.top.sample_positions, self.center.sample_positions)
            and np.array_equal(self.center.sample_positions, self.bottom.sample_positions)
        ):
            raise InvalidInputError("separator polylines must share sample positions")
        if np.any(self.top.values > self.center.values + 1e-9) or np.any(
            self.center.values > self.bottom.values + 1e-9
        ):
            raise InvalidInputError("separator ordering violated (top <= center <= bottom)")

    @property
    def sample_positions(self) -> np.ndarray:
        return self.center.sample_positions

    def center_at(self, t) -> float:
        return polyline_eval(self.center, t)

    def band_at(self, t) -> tuple[float, float]:
        return polyline_eval(self.top, t), polyline_eval(self.bottom, t)

    def thickness_at(self, t) -> float:
        lo, hi = self.band_at(t)
        return hi - lo


def straight_separator(axis: str, value: float, extent: int, half_width: float = 0.0,
                       k: int = K_POINTS) -> Separator:
    """Axis-aligned separator at a constant free-axis coordinate."""
    pos = canonical_positions(extent, k)
    mk = lambda v: Polyline(axis, pos, np.full(k, float(v)))
    return Separator(axis, mk(value - half_width), mk(value), mk(value + half_width))


def sort_separators(seps: Sequence[Separator], ref_position: float) -> list[Separator]:
    """Order separators by their center value at the fixed reference position."""
    return sorted(seps, key=lambda s: s.center_at(ref_position))


@dataclass
class CellBox:
    """A table cell with grid extent (inclusive indices) and pixel geometry."""

    row_start: int
    row_end: int
    col_start: int
    col_end: int
    polygon: np.ndarray  # (P, 2) pixel points, P >= 4
    bbox: tuple[float, float, float, float] = None  # x0, y0, x1, y1

    def __post_init__(self):
        if self.row_end < self.row_start or self.col_end < self.col_start:
            raise InvalidInputError("cell grid extent is inverted")
        self.polygon = np.asarray(self.polygon, dtype=np.float64).reshape(-1, 2)
        if self.bbox is None:
            x0, y0 = self.polygon.min(axis=0)
            x1, y1 = self.polygon.max(axis=0)
            self.bbox = (float(x0), float(y0), float(x1), float(y1))

    @property
    def row_span(self) -> int:
        return self.row_end - self.row_start + 1

    @property
    def col_span(self) -> int:
        return self.col_end - self.col_start + 1

    @property
    def grid_extent(self) -> tuple[int, int, int, int]:
        return (self.row_start, self.row_end, self.col_start, self.col_end)


@dataclass
class TableAnnotation:
    """Ground truth for one table image: cells plus separator bands."""

    image_size: tuple[int, int]  # (H, W)
    cells: list[CellBox]
    row_separators: list[Separator] = field(default_factory=list)
    col_separators: list[Separator] = field(default_factory=list)
    content_boxes: list[tuple[float, float, float, float]] | None = None

    @property
    def n_grid_rows(self) -> int:
        return max((c.row_end for c in self.cells), default=-1) + 1

    @property
    def n_grid_cols(self) -> int:
        return max((c.col_end for c in self.cells), default=-1) + 1


# ---------------------------------------------------------------------------
# JSON schema (the contract between generation, training and evaluation)
# ---------------------------------------------------------------------------

def _polyline_to_points(p: Polyline) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in p.points()]


def _polyline_from_points(axis: str, pts) -> Polyline:
    arr = np.asarray(pts, dtype=np.float64)
    if axis == AXIS_ROW:
        return Polyline(axis, arr[:, 0], arr[:, 1])
    return Polyline(axis, arr[:, 1], arr[:, 0])


def separator_to_dict(sep: Separator) -> dict:
    return {
        "top": _polyline_to_points(sep.top),
        "center": _polyline_to_points(sep.center),
        "bottom": _polyline_to_points(sep.bottom),
    }


def separator_from_dict(axis: str, d: dict) -> Separator:
    return Separator(
        axis,
        _polyline_from_points(axis, d["top"]),
        _polyline_from_points(axis, d["center"]),
        _polyline_from_points(axis, d["bottom"]),
    )


def cell_to_dict(cell: CellBox, with_spans: bool = False) -> dict:
    d = {
        "row_start": cell.row_start,
        "col_start": cell.col_start,
        "row_end": cell.row_end,
        "col_end": cell.col_end,
        "polygon": [[float(x), float(y)] for x, y in cell.polygon],
    }
    if with_spans:
        d["bbox"] = [float(v) for v in cell.bbox]
        d["row_span"] = cell.row_span
        d["col_span"] = cell.col_span
    return d


def cell_from_dict(d: dict) -> CellBox:
    return CellBox(
        row_start=int(d["row_start"]),
        row_end=int(d["row_end"]),
        col_start=int(d["col_start"]),
        col_end=int(d["col_end"]),
        polygon=np.asarray(d["polygon"], dtype=np.float64),
    )


def annotation_to_dict(ann: TableAnnotation) -> dict:
    d = {
        "image_size": [int(ann.image_size[0]), int(ann.image_size[1])],
        "cells": [cell_to_dict(c) for c in ann.cells],
        "row_separators": [separator_to_dict(s) for s in ann.row_separators],
        "col_separators": [separator_to_dict(s) for s in ann.col_separators],
    }
    if ann.content_boxes is not None:
        d["content_boxes"] = [[float(v) for v in b] for b in ann.content_boxes]
    return d


def annotation_from_dict(d: dict) -> TableAnnotation:
    return TableAnnotation(
        image_size=(int(d["image_size"][0]), int(d["image_size"][1])),
        cells=[cell_from_dict(c) for c in d["cells"]],
        row_separators=[separator_from_dict(AXIS_ROW, s) for s in d.get("row_separators", [])],
        col_separators=[separator_from_dict(AXIS_COL, s) for s in d.get("col_separators", [])],
        content_boxes=[tuple(b) for b in d["content_boxes"]] if "content_boxes" in d else None,
    )


def save_annotation(ann: TableAnnotation, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(annotation_to_dict(ann), f)


def load_annotation(path) -> TableAnnotation:
    with open(path, "r", encoding="utf-8") as f:
        return annotation_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Annotation rescaling (training-time augmentation and inference descaling)
# ---------------------------------------------------------------------------

def resample_separator(sep: Separator, extent: int, k: int = K_POINTS) -> Separator:
    """Re-sample all three polylines at the canonical positions for `extent`."""
    pos = canonical_positions(extent, k)
    mk = lambda p: Polyline(sep.axis, pos, np.asarray(polyline_eval(p, pos)))
    top, center, bottom = mk(sep.top), mk(sep.center), mk(sep.bottom)
    vals = np.sort(np.stack([top.values, center.values, bottom.values]), axis=0)
    return Separator(
        sep.axis,
        Polyline(sep.axis, pos, vals[0]),
        Polyline(sep.axis, pos, vals[1]),
        Polyline(sep.axis, pos, vals[2]),
        score=sep.score,
    )


def scale_annotation(ann: TableAnnotation, sx: float, sy: float,
                     new_size: tuple[int, int]) -> TableAnnotation:
    """Scale every coordinate and re-sample separators for the new size."""
    nh, nw = new_size

    def scale_pl(p: Polyline) -> Polyline:
        if p.axis == AXIS_ROW:
            return Polyline(p.axis, p.sample_positions * sx, p.values * sy)
        return Polyline(p.axis, p.sample_positions * sy, p.values * sx)

    def scale_sep(s: Separator) -> Separator:
        scaled = Separator(s.axis, scale_pl(s.top), scale_pl(s.center), scale_pl(s.bottom),
                           score=s.score)
        extent = nw if s.axis == AXIS_ROW else nh
        return resample_separator(scaled, extent)

    cells = [
        CellBox(c.row_start, c.row_end, c.col_start, c.col_end,
                polygon=c.polygon * np.array([sx, sy]))
        for c in ann.cells
    ]
    content = None
    if ann.content_boxes is not None:
        content = [(b[0] * sx, b[1] * sy, b[2] * sx, b[3] * sy) for b in ann.content_boxes]
    return TableAnnotation(
        image_size=(nh, nw),
        cells=cells,
        row_separators=[scale_sep(s) for s in ann.row_separators],
        col_separators=[scale_sep(s) for s in ann.col_separators],
        content_boxes=content,
    )
