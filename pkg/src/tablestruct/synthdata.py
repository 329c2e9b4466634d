"""Synthetic table generator with exact ground truth.

Renders desk-scale table images (bordered/borderless, spanning/empty cells,
sinusoidal warps, small rotations) together with consistent annotations,
and derives every training target from an annotation: reference-point
heatmaps, separator band masks, per-separator regression coordinates and
merge labels for adjacent grid cells.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import core
from .core import (
    AXIS_COL,
    AXIS_ROW,
    CellBox,
    Polyline,
    Separator,
    TableAnnotation,
    canonical_positions,
    polyline_eval,
    prior_position,
)
from .errors import InvalidInputError, WarpRetryError

ROW_RANGE = (2, 10)
COL_RANGE = (2, 8)


@dataclass
class WarpParams:
    """Sinusoidal displacement plus a rotation about the image center.

    Forward map: (x, y) -> (x + amp_x*sin(2*pi*y/wavelength + phase),
                            y + amp_y*sin(2*pi*x/wavelength + phase)),
    then rotation by rotation_deg.
    """

    rotation_deg: float = 0.0
    amp_y: float = 0.0
    amp_x: float = 0.0
    wavelength: float = 160.0
    phase: float = 0.0

    def __post_init__(self):
        if self.amp_x < 0 or self.amp_y < 0:
            raise InvalidInputError("warp amplitudes must be >= 0")
        if self.wavelength <= 0:
            raise InvalidInputError("warp wavelength must be > 0")

    @property
    def is_identity(self) -> bool:
        return self.rotation_deg == 0.0 and self.amp_x == 0.0 and self.amp_y == 0.0


@dataclass
class TableSpec:
    """Parameters for one synthetic table."""

    seed: int
    n_rows: int
    n_cols: int
    span_prob: float = 0.0
    empty_prob: float = 0.0
    bordered: bool = True
    warp: WarpParams = field(default_factory=WarpParams)

    def __post_init__(self):
        if not (ROW_RANGE[0] <= self.n_rows <= ROW_RANGE[1]):
            raise InvalidInputError(f"n_rows must be in {ROW_RANGE}")
        if not (COL_RANGE[0] <= self.n_cols <= COL_RANGE[1]):
            raise InvalidInputError(f"n_cols must be in {COL_RANGE}")
        for name in ("span_prob", "empty_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidInputError(f"{name} must be in [0, 1]")


@dataclass
class SplitTargets:
    """Training targets derived from one annotation at a given image size."""

    row_heatmap: np.ndarray      # (H,) in [0, 1]
    col_heatmap: np.ndarray      # (W,)
    row_mask: np.ndarray         # (H, W) uint8
    col_mask: np.ndarray         # (H, W) uint8
    row_regression: np.ndarray   # (n_row_sep, 3K) normalized by H
    col_regression: np.ndarray   # (n_col_sep, 3K) normalized by W
    merge_labels: np.ndarray     # (n_adjacent_pairs,) uint8


# ---------------------------------------------------------------------------
# Table generation
# ---------------------------------------------------------------------------

def _carve_spans(rng: np.random.Generator, n_rows: int, n_cols: int,
                 span_prob: float) -> np.ndarray:
    """Group id per base cell; spanning groups are contiguous rectangles."""
    group = np.arange(n_rows * n_cols).reshape(n_rows, n_cols)
    merged = np.zeros((n_rows, n_cols), dtype=bool)
    shapes = [(1, 2), (2, 1), (2, 2), (1, 3), (3, 1)]
    attempts = int(round(span_prob * n_rows * n_cols / 2.0))
    done = 0
    for _ in range(attempts):
        sh, sw = shapes[rng.integers(0, len(shapes))]
        if sh > n_rows or sw > n_cols:
            continue
        r = int(rng.integers(0, n_rows - sh + 1))
        c = int(rng.integers(0, n_cols - sw + 1))
        block = merged[r:r + sh, c:c + sw]
        if block.any():
            continue
        group[r:r + sh, c:c + sw] = group[r, c]
        merged[r:r + sh, c:c + sw] = True
        done += 1
    if span_prob >= 1.0 and done == 0:
        group[0, 0:2] = group[0, 0]
        merged[0, 0:2] = True
    return group


def _group_rects(group: np.ndarray) -> list[tuple[int, int, int, int]]:
    rects = []
    for gid in sorted(set(group.flatten().tolist())):
        rr, cc = np.nonzero(group == gid)
        rects.append((int(rr.min()), int(rr.max()), int(cc.min()), int(cc.max())))
    rects.sort(key=lambda r: (r[0], r[2]))
    return rects


def generate_table(spec: TableSpec):
    """Render one table. Deterministic for a fixed seed.

    Returns (image, annotation); image is (H, W, 3) uint8, grayscale
    replicated to 3 channels.
    """
    rng = np.random.default_rng(spec.seed)
    R, C = spec.n_rows, spec.n_cols
    heights = rng.integers(22, 41, size=R)
    widths = rng.integers(28, 57, size=C)
    m_top, m_bottom, m_left, m_right = rng.integers(10, 23, size=4)
    H = int(m_top + heights.sum() + m_bottom)
    W = int(m_left + widths.sum() + m_right)

    y_bounds = m_top + np.concatenate([[0], np.cumsum(heights)]).astype(np.float64)
    x_bounds = m_left + np.concatenate([[0], np.cumsum(widths)]).astype(np.float64)

    # Whitespace gap between content bands across each interior boundary;
    # this gap is the separator band thickness.
    row_gaps = np.array([
        float(np.clip(rng.uniform(4.0, 9.0), 1.0, 0.25 * min(heights[k - 1], heights[k])))
        for k in range(1, R)
    ])
    col_gaps = np.array([
        float(np.clip(rng.uniform(4.0, 9.0), 1.0, 0.25 * min(widths[k - 1], widths[k])))
        for k in range(1, C)
    ])
    edge_pad = float(rng.uniform(3.0, 6.0))

    group = _carve_spans(rng, R, C, spec.span_prob)
    rects = _group_rects(group)
    empty = rng.random(len(rects)) < spec.empty_prob
    if empty.all():
        empty[0] = False

    canvas = np.full((H, W), int(rng.integers(242, 256)), dtype=np.uint8)

    def content_region(r0, r1, c0, c1):
        top_pad = edge_pad if r0 == 0 else row_gaps[r0 - 1] / 2.0
        bot_pad = edge_pad if r1 == R - 1 else row_gaps[r1] / 2.0
        left_pad = edge_pad if c0 == 0 else col_gaps[c0 - 1] / 2.0
        right_pad = edge_pad if c1 == C - 1 else col_gaps[c1] / 2.0
        y0 = y_bounds[r0] + top_pad + 1
        y1 = y_bounds[r1 + 1] - bot_pad - 1
        x0 = x_bounds[c0] + left_pad + 1
        x1 = x_bounds[c1 + 1] - right_pad - 1
        return x0, y0, x1, y1

    content_boxes = []
    cells = []
    for idx, (r0, r1, c0, c1) in enumerate(rects):
        poly = np.array([
            [x_bounds[c0], y_bounds[r0]],
            [x_bounds[c1 + 1], y_bounds[r0]],
            [x_bounds[c1 + 1], y_bounds[r1 + 1]],
            [x_bounds[c0], y_bounds[r1 + 1]],
        ])
        cells.append(CellBox(r0, r1, c0, c1, polygon=poly))
        if empty[idx]:
            continue
        x0, y0, x1, y1 = content_region(r0, r1, c0, c1)
        if x1 - x0 < 4 or y1 - y0 < 4:
            continue
        n_bars = int(rng.integers(1, 4))
        drawn = None
        for _ in range(n_bars):
            bh = float(rng.uniform(3.0, min(7.0, (y1 - y0))))
            by0 = float(rng.uniform(y0, max(y0, y1 - bh)))
            bw = float(rng.uniform(0.5, 1.0)) * (x1 - x0)
            bx0 = float(rng.uniform(x0, max(x0, x1 - bw)))
            shade = int(rng.integers(20, 131))
            iy0, iy1 = int(round(by0)), int(round(by0 + bh))
            ix0, ix1 = int(round(bx0)), int(round(bx0 + bw))
            canvas[iy0:iy1, ix0:ix1] = shade
            box = (ix0, iy0, ix1, iy1)
            drawn = box if drawn is None else (
                min(drawn[0], box[0]), min(drawn[1], box[1]),
                max(drawn[2], box[2]), max(drawn[3], box[3]))
        if drawn is not None:
            content_boxes.append(tuple(float(v) for v in drawn))

    if spec.bordered:
        shade = int(rng.integers(20, 91))
        lt = int(rng.integers(1, 3))
        for r0, r1, c0, c1 in rects:
            yy0, yy1 = int(round(y_bounds[r0])), int(round(y_bounds[r1 + 1]))
            xx0, xx1 = int(round(x_bounds[c0])), int(round(x_bounds[c1 + 1]))
            canvas[yy0:yy0 + lt, xx0:xx1] = shade
            canvas[yy1 - lt + 1:yy1 + 1, xx0:xx1] = shade
            canvas[yy0:yy1 + 1, xx0:xx0 + lt] = shade
            canvas[yy0:yy1 + 1, xx1 - lt + 1:xx1 + 1] = shade

    row_seps = [
        core.straight_separator(AXIS_ROW, y_bounds[k], W, half_width=row_gaps[k - 1] / 2.0)
        for k in range(1, R)
    ]
    col_seps = [
        core.straight_separator(AXIS_COL, x_bounds[k], H, half_width=col_gaps[k - 1] / 2.0)
        for k in range(1, C)
    ]

    ann = TableAnnotation(
        image_size=(H, W),
        cells=cells,
        row_separators=row_seps,
        col_separators=col_seps,
        content_boxes=content_boxes,
    )
    image = np.repeat(canvas[:, :, None], 3, axis=2)
    if not spec.warp.is_identity:
        image, ann = apply_warp(image, ann, spec.warp)
    return image, ann


# ---------------------------------------------------------------------------
# Warping
# ---------------------------------------------------------------------------

def _rotation(deg: float, center):
    th = np.deg2rad(deg)
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    c = np.asarray(center, dtype=np.float64)
    return rot, c


def _warp_points(pts: np.ndarray, w: WarpParams, center) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    two_pi = 2.0 * np.pi / w.wavelength
    x = pts[:, 0] + w.amp_x * np.sin(two_pi * pts[:, 1] + w.phase)
    y = pts[:, 1] + w.amp_y * np.sin(two_pi * pts[:, 0] + w.phase)
    out = np.stack([x, y], axis=1)
    rot, c = _rotation(w.rotation_deg, center)
    return (out - c) @ rot.T + c


def _inverse_map(xy_out: np.ndarray, w: WarpParams, center) -> np.ndarray:
    """Invert the forward map by fixed-point iteration (small amplitudes)."""
    rot, c = _rotation(w.rotation_deg, center)
    p = (xy_out - c) @ rot + c  # undo rotation (rot is orthonormal)
    two_pi = 2.0 * np.pi / w.wavelength
    x, y = p[:, 0].copy(), p[:, 1].copy()
    for _ in range(6):
        x = p[:, 0] - w.amp_x * np.sin(two_pi * y + w.phase)
        y = p[:, 1] - w.amp_y * np.sin(two_pi * x + w.phase)
    return np.stack([x, y], axis=1)


def _warp_separator(sep: Separator, w: WarpParams, center, out_size, quarter: int) -> Separator:
    h, wid = out_size
    axis_out = sep.axis if quarter % 2 == 0 else (
        AXIS_COL if sep.axis == AXIS_ROW else AXIS_ROW)
    fixed_extent_in = wid if sep.axis == AXIS_ROW else h
    fixed_extent_out = wid if axis_out == AXIS_ROW else h
    free_extent_out = h if axis_out == AXIS_ROW else wid
    # Canonical output positions are sampled exactly when the fixed axis is
    # preserved by the map (pure free-axis displacement).
    dense = np.unique(np.concatenate([
        np.linspace(0.0, fixed_extent_in - 1.0, 160),
        canonical_positions(fixed_extent_in),
    ]))

    def one(p: Polyline) -> Polyline:
        vals = polyline_eval(p, dense)
        pts = (np.stack([dense, vals], axis=1) if sep.axis == AXIS_ROW
               else np.stack([vals, dense], axis=1))
        mapped = _warp_points(pts, w, center)
        if axis_out == AXIS_ROW:
            fixed, free = mapped[:, 0], mapped[:, 1]
        else:
            fixed, free = mapped[:, 1], mapped[:, 0]
        order = np.argsort(fixed)
        fixed, free = fixed[order], free[order]
        keep = np.concatenate([[True], np.diff(fixed) > 1e-9])
        fixed, free = fixed[keep], free[keep]
        if fixed.size < 2:
            raise WarpRetryError("separator collapsed under warp")
        tmp = Polyline(axis_out, fixed, free)
        pos = canonical_positions(fixed_extent_out)
        return Polyline(axis_out, pos, np.asarray(polyline_eval(tmp, pos)))

    top, cen, bot = one(sep.top), one(sep.center), one(sep.bottom)
    if np.all(cen.values < 0) or np.all(cen.values > free_extent_out - 1):
        raise WarpRetryError("separator warped fully outside the image")
    stack = np.sort(np.stack([top.values, cen.values, bot.values]), axis=0)
    stack = np.clip(stack, 0.0, free_extent_out - 1.0)
    pos = top.sample_positions
    return Separator(axis_out,
                     Polyline(axis_out, pos, stack[0]),
                     Polyline(axis_out, pos, stack[1]),
                     Polyline(axis_out, pos, stack[2]),
                     score=sep.score)


def _remap_cell_indices(cells: list[CellBox], quarter: int, n_rows: int,
                        n_cols: int) -> list[tuple[int, int, int, int]]:
    out = []
    for c in cells:
        r0, r1, c0, c1 = c.grid_extent
        if quarter == 0:
            out.append((r0, r1, c0, c1))
        elif quarter == 1:
            out.append((c0, c1, n_rows - 1 - r1, n_rows - 1 - r0))
        elif quarter == 2:
            out.append((n_rows - 1 - r1, n_rows - 1 - r0, n_cols - 1 - c1, n_cols - 1 - c0))
        else:
            out.append((n_cols - 1 - c1, n_cols - 1 - c0, r0, r1))
    return out


def apply_warp(image: np.ndarray, annotation: TableAnnotation, w: WarpParams):
    """Warp an image and its annotation with the same forward map.

    Separator polylines are re-sampled at the canonical positions of the
    output image; cell polygons are warped pointwise.  Quarter-turn
    rotations swap the row/column roles of separators and grid indices.
    """
    if w.is_identity:
        return image.copy(), annotation

    h, wid = image.shape[:2]
    center = ((wid - 1) / 2.0, (h - 1) / 2.0)
    quarter = int(round(w.rotation_deg / 90.0)) % 4

    ys, xs = np.mgrid[0:h, 0:wid].astype(np.float64)
    src = _inverse_map(np.stack([xs.ravel(), ys.ravel()], axis=1), w, center)
    coords = np.stack([src[:, 1].reshape(h, wid), src[:, 0].reshape(h, wid)])
    out = np.empty_like(image)
    for ch in range(image.shape[2]):
        out[:, :, ch] = ndimage.map_coordinates(
            image[:, :, ch].astype(np.float64), coords, order=1, mode="nearest"
        ).round().astype(np.uint8)

    new_row, new_col = [], []
    for sep in annotation.row_separators + annotation.col_separators:
        warped = _warp_separator(sep, w, center, (h, wid), quarter)
        (new_row if warped.axis == AXIS_ROW else new_col).append(warped)
    new_row = core.sort_separators(new_row, prior_position(wid))
    new_col = core.sort_separators(new_col, prior_position(h))

    n_rows = annotation.n_grid_rows
    n_cols = annotation.n_grid_cols
    extents = _remap_cell_indices(annotation.cells, quarter, n_rows, n_cols)
    cells = [
        CellBox(*extent, polygon=_warp_points(c.polygon, w, center))
        for c, extent in zip(annotation.cells, extents)
    ]
    content = None
    if annotation.content_boxes is not None:
        content = []
        for x0, y0, x1, y1 in annotation.content_boxes:
            corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
            m = _warp_points(corners, w, center)
            content.append((float(m[:, 0].min()), float(m[:, 1].min()),
                            float(m[:, 0].max()), float(m[:, 1].max())))

    ann = TableAnnotation(
        image_size=(h, wid),
        cells=cells,
        row_separators=new_row,
        col_separators=new_col,
        content_boxes=content,
    )
    return out, ann


# ---------------------------------------------------------------------------
# Target derivation
# ---------------------------------------------------------------------------

def _axis_targets(seps: list[Separator], free_extent: int, fixed_extent: int):
    """Heatmap over the prior position plus the band mask, for one axis."""
    tau = prior_position(fixed_extent)
    heat = np.zeros(free_extent, dtype=np.float64)
    mask = np.zeros((free_extent, fixed_extent), dtype=np.uint8)
    reg = np.zeros((len(seps), 3 * core.K_POINTS), dtype=np.float64)
    flagged = False
    for k, sep in enumerate(seps):
        top_v = np.asarray(polyline_eval(sep.top, np.arange(fixed_extent, dtype=np.float64)))
        bot_v = np.asarray(polyline_eval(sep.bottom, np.arange(fixed_extent, dtype=np.float64)))
        thin = (bot_v - top_v) < 1.0
        if thin.any():
            flagged = True
            mid = (top_v + bot_v) / 2.0
            top_v = np.where(thin, mid - 0.5, top_v)
            bot_v = np.where(thin, mid + 0.5, bot_v)
        rows = np.arange(free_extent, dtype=np.float64)[:, None]
        mask |= ((rows >= top_v[None, :]) & (rows <= bot_v[None, :])).astype(np.uint8)

        center = sep.center_at(tau)
        wk = max(float(bot_v[min(tau, fixed_extent - 1)] - top_v[min(tau, fixed_extent - 1)]), 1.0)
        ic = int(np.clip(round(center), 0, free_extent - 1))
        sigma2 = wk * wk / (2.0 * np.log(10.0))
        lo = max(0, int(np.ceil(ic - wk / 2.0)))
        hi = min(free_extent - 1, int(np.floor(ic + wk / 2.0)))
        idx = np.arange(lo, hi + 1)
        vals = np.exp(-((idx - ic) ** 2) / (2.0 * sigma2))
        heat[idx] = np.maximum(heat[idx], vals)

        norm = float(free_extent)
        reg[k] = np.clip(np.concatenate([
            sep.top.values, sep.center.values, sep.bottom.values
        ]) / norm, 0.0, 1.0)
    if flagged:
        warnings.warn("zero-thickness separator band widened to 1 pixel", stacklevel=3)
    return heat, mask, reg


def prepared_separators(annotation: TableAnnotation, image_size):
    """Separators re-sampled at the canonical positions of `image_size` and
    sorted by center at the prior position; this order matches the rows of
    the regression targets."""
    H, W = int(image_size[0]), int(image_size[1])
    row_seps = core.sort_separators(
        [core.resample_separator(s, W) for s in annotation.row_separators], prior_position(W))
    col_seps = core.sort_separators(
        [core.resample_separator(s, H) for s in annotation.col_separators], prior_position(H))
    return row_seps, col_seps


def derive_targets(annotation: TableAnnotation, image_size) -> SplitTargets:
    """Derive all split/merge training targets at the given (padded) size."""
    from .merge import adjacent_pairs  # local import to keep torch out of generation

    H, W = int(image_size[0]), int(image_size[1])
    row_seps, col_seps = prepared_separators(annotation, image_size)

    row_heat, row_mask, row_reg = _axis_targets(row_seps, H, W)
    col_heat, col_mask_t, col_reg = _axis_targets(col_seps, W, H)
    col_mask = col_mask_t.T  # back to (H, W)

    n_rows = len(row_seps) + 1
    n_cols = len(col_seps) + 1
    owner = -np.ones((n_rows, n_cols), dtype=np.int64)
    for i, c in enumerate(annotation.cells):
        owner[c.row_start:c.row_end + 1, c.col_start:c.col_end + 1] = i
    pairs = adjacent_pairs(n_rows, n_cols)
    labels = np.array(
        [1 if owner[a] == owner[b] and owner[a] >= 0 else 0 for a, b in pairs],
        dtype=np.uint8,
    )
    return SplitTargets(
        row_heatmap=row_heat,
        col_heatmap=col_heat,
        row_mask=row_mask,
        col_mask=col_mask,
        row_regression=row_reg,
        col_regression=col_reg,
        merge_labels=labels,
    )


# ---------------------------------------------------------------------------
# Dataset directory IO
# ---------------------------------------------------------------------------

def random_spec(rng: np.random.Generator, seed: int, curve_prob: float,
                borderless_prob: float) -> TableSpec:
    warp = WarpParams()
    if rng.random() < curve_prob:
        warp = WarpParams(
            rotation_deg=float(rng.uniform(-3.0, 3.0)),
            amp_y=float(rng.uniform(1.5, 5.0)),
            amp_x=float(rng.uniform(0.0, 3.0)),
            wavelength=float(rng.uniform(130.0, 280.0)),
            phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        )
    return TableSpec(
        seed=seed,
        n_rows=int(rng.integers(ROW_RANGE[0], ROW_RANGE[1] + 1)),
        n_cols=int(rng.integers(COL_RANGE[0], COL_RANGE[1] + 1)),
        span_prob=float(rng.choice([0.0, 0.15, 0.3])),
        empty_prob=float(rng.choice([0.0, 0.1, 0.2])),
        bordered=bool(rng.random() >= borderless_prob),
        warp=warp,
    )


def generate_dataset(out_dir, count: int, seed: int = 0, curve_prob: float = 0.3,
                     borderless_prob: float = 0.4, val_count: int = 0,
                     test_count: int = 0) -> dict:
    """Write images/{id}.png + annotations/{id}.json + manifest.json."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    total = count + val_count + test_count
    manifest = {"train": [], "val": [], "test": []}
    for i in range(total):
        sid = f"t{i:05d}"
        for attempt in range(8):
            spec = random_spec(rng, seed=seed * 1_000_003 + i * 97 + attempt, curve_prob=curve_prob,
                               borderless_prob=borderless_prob)
            try:
                image, ann = generate_table(spec)
                break
            except WarpRetryError:
                continue
        else:
            raise RuntimeError(f"could not generate sample {sid} after retries")
        Image.fromarray(image).save(out / "images" / f"{sid}.png")
        core.save_annotation(ann, out / "annotations" / f"{sid}.json")
        split = "train" if i < count else ("val" if i < count + val_count else "test")
        manifest[split].append(sid)
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    return manifest


def overfit_specs(seed: int = 0) -> list[TableSpec]:
    """Eight fixed small tables: mixed borders, three spanned, three curved."""
    curve = lambda ph: WarpParams(rotation_deg=1.5, amp_y=3.0, amp_x=1.5,
                                  wavelength=150.0, phase=ph)
    return [
        TableSpec(seed + 11, 3, 3, bordered=True),
        TableSpec(seed + 12, 4, 4, bordered=False),
        TableSpec(seed + 13, 5, 3, span_prob=0.8, bordered=True),
        TableSpec(seed + 14, 4, 5, span_prob=0.8, bordered=False),
        TableSpec(seed + 15, 3, 4, bordered=True, warp=curve(0.4)),
        TableSpec(seed + 16, 5, 4, bordered=False, warp=curve(2.1)),
        TableSpec(seed + 17, 6, 5, span_prob=0.5, bordered=True, warp=curve(4.0)),
        TableSpec(seed + 18, 2, 2, empty_prob=0.3, bordered=False),
    ]


def write_specs(out_dir, specs: list[TableSpec], split: str = "train") -> dict:
    """Write explicit specs as a dataset directory (single split)."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    manifest = {"train": [], "val": [], "test": []}
    for i, spec in enumerate(specs):
        sid = f"t{i:05d}"
        image, ann = generate_table(spec)
        Image.fromarray(image).save(out / "images" / f"{sid}.png")
        core.save_annotation(ann, out / "annotations" / f"{sid}.json")
        manifest[split].append(sid)
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    return manifest


def load_sample(data_dir, sample_id: str):
    data_dir = Path(data_dir)
    img = np.asarray(Image.open(data_dir / "images" / f"{sample_id}.png").convert("RGB"))
    ann = core.load_annotation(data_dir / "annotations" / f"{sample_id}.json")
    return img, ann


def load_manifest(data_dir) -> dict:
    with open(Path(data_dir) / "manifest.json", "r", encoding="utf-8") as f:
        return json.load(f)
