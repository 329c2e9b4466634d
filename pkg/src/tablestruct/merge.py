"""Grid construction from separators and relation-network cell merging."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
from torchvision.ops import roi_align

from . import core
from .core import AXIS_COL, AXIS_ROW, CellBox, Separator, straight_separator
from .errors import GridInconsistencyError

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


def adjacent_pairs(n_rows: int, n_cols: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """All horizontally then vertically adjacent base-cell index pairs.

    This enumeration order is the contract between target derivation and
    the merge classifier.
    """
    pairs = []
    for i in range(n_rows):
        for j in range(n_cols - 1):
            pairs.append(((i, j), (i, j + 1)))
    for i in range(n_rows - 1):
        for j in range(n_cols):
            pairs.append(((i, j), (i + 1, j)))
    return pairs


@dataclass
class TableGrid:
    """Base cell grid: intersections of ordered separators plus image borders."""

    row_separators: list[Separator]
    col_separators: list[Separator]
    corners: np.ndarray           # (R+2, C+2, 2) of (x, y)
    cells: list[list[CellBox]]    # (R+1) x (C+1)
    fallback_corners: int = 0     # intersections resolved by closest approach

    @property
    def n_rows(self) -> int:
        return len(self.row_separators) + 1

    @property
    def n_cols(self) -> int:
        return len(self.col_separators) + 1

    def cell_list(self) -> list[CellBox]:
        return [c for row in self.cells for c in row]


def build_grid(row_seps: list[Separator], col_seps: list[Separator], image_size) -> TableGrid:
    """Intersect row and column separator center lines into a cell grid.

    Image borders act as two straight pseudo-separators per axis, so R row
    and C column separators yield (R+1) x (C+1) cells.
    """
    h, w = int(image_size[0]), int(image_size[1])
    row_seps = core.sort_separators(list(row_seps), core.prior_position(w))
    col_seps = core.sort_separators(list(col_seps), core.prior_position(h))
    rows_ext = (
        [straight_separator(AXIS_ROW, 0.0, w)]
        + row_seps
        + [straight_separator(AXIS_ROW, float(h - 1), w)]
    )
    cols_ext = (
        [straight_separator(AXIS_COL, 0.0, h)]
        + col_seps
        + [straight_separator(AXIS_COL, float(w - 1), h)]
    )

    nr, nc = len(rows_ext), len(cols_ext)
    corners = np.zeros((nr, nc, 2), dtype=np.float64)
    fallbacks = 0
    for i, rs in enumerate(rows_ext):
        for j, cs in enumerate(cols_ext):
            hit = core.intersect_polylines(rs.center, cs.center, (h, w))
            corners[i, j] = (hit.x, hit.y)
            fallbacks += int(hit.fallback)

    bad = []
    for i in range(nr):
        for j in range(nc):
            if i + 1 < nr and corners[i + 1, j, 1] <= corners[i, j, 1]:
                bad.append((i, j))
            if j + 1 < nc and corners[i, j + 1, 0] <= corners[i, j, 0]:
                bad.append((i, j))
    if bad:
        raise GridInconsistencyError(f"non-monotone corner grid at {bad[:8]}", indices=bad)

    cells = []
    for r in range(nr - 1):
        row_cells = []
        for c in range(nc - 1):
            poly = np.array([
                corners[r, c], corners[r, c + 1], corners[r + 1, c + 1], corners[r + 1, c]
            ])
            row_cells.append(CellBox(r, r, c, c, polygon=poly))
        cells.append(row_cells)
    return TableGrid(row_seps, col_seps, corners, cells, fallback_corners=fallbacks)


# ---------------------------------------------------------------------------
# Learned components
# ---------------------------------------------------------------------------

class CellFeatureExtractor(nn.Module):
    """RoIAlign over each base cell bbox followed by a two-layer MLP."""

    def __init__(self, in_channels: int = 64, feat_dim: int = 512, pool: int = 7,
                 stride: int = 4):
        super().__init__()
        self.pool = pool
        self.stride = stride
        self.mlp = nn.Sequential(
            nn.Linear(in_channels * pool * pool, feat_dim),
            nn.ReLU(inplace=True),
            nn.Linear(feat_dim, feat_dim),
            nn.ReLU(inplace=True),
        )

    def forward(self, p2: torch.Tensor, grid: TableGrid) -> torch.Tensor:
        boxes = []
        flagged = False
        for cell in grid.cell_list():
            x0, y0, x1, y1 = cell.bbox
            if x1 - x0 < 1.0:
                x1 = x0 + 1.0
                flagged = True
            if y1 - y0 < 1.0:
                y1 = y0 + 1.0
                flagged = True
            boxes.append([x0, y0, x1, y1])
        if flagged:
            warnings.warn("degenerate cell bbox expanded to 1 pixel", stacklevel=2)
        boxes_t = torch.as_tensor(boxes, dtype=p2.dtype, device=p2.device)
        pooled = roi_align(
            p2, [boxes_t], output_size=self.pool, spatial_scale=1.0 / self.stride,
            sampling_ratio=2, aligned=True,
        )
        feats = self.mlp(pooled.flatten(1))
        return feats.reshape(grid.n_rows, grid.n_cols, -1)


class GridFeatureEnhancer(nn.Module):
    """Three blocks of {row-max, column-max, 3x3 conv} branches fused by 1x1 conv."""

    def __init__(self, feat_dim: int = 512, n_blocks: int = 3):
        super().__init__()
        self.convs = nn.ModuleList(
            [nn.Conv2d(feat_dim, feat_dim, 3, padding=1) for _ in range(n_blocks)]
        )
        self.fuse = nn.ModuleList(
            [nn.Conv2d(3 * feat_dim, feat_dim, 1) for _ in range(n_blocks)]
        )

    def forward(self, f_cell: torch.Tensor) -> torch.Tensor:
        x = f_cell.permute(2, 0, 1).unsqueeze(0)  # (1, D, N, M)
        for conv, fuse in zip(self.convs, self.fuse):
            row_max = x.max(dim=3, keepdim=True).values.expand_as(x)
            col_max = x.max(dim=2, keepdim=True).values.expand_as(x)
            local = conv(x)
            x = torch.relu(fuse(torch.cat([row_max, col_max, local], dim=1)))
        return x.squeeze(0).permute(1, 2, 0)


def row_level_max(f_cell: torch.Tensor) -> torch.Tensor:
    """Per-row max over the grid, broadcast back to every cell of the row."""
    return f_cell.max(dim=1, keepdim=True).values.expand_as(f_cell)


def col_level_max(f_cell: torch.Tensor) -> torch.Tensor:
    return f_cell.max(dim=0, keepdim=True).values.expand_as(f_cell)


def spatial_feature_18d(cell_a: CellBox, cell_b: CellBox, image_size,
                        direction: str | None = None) -> np.ndarray:
    """Spatial compatibility descriptor for a cell pair.

    Layout: norm bbox a (4), norm bbox b (4), center delta (2), log width /
    height ratios (2), IoU (1), intersection over each area (2), union over
    image area (1), direction one-hot (2).
    """
    h, w = float(image_size[0]), float(image_size[1])

    def norm_box(c: CellBox):
        x0, y0, x1, y1 = c.bbox
        bw = max(x1 - x0, 1.0)
        bh = max(y1 - y0, 1.0)
        return x0, y0, bw, bh

    ax, ay, aw, ah = norm_box(cell_a)
    bx, by, bw, bh = norm_box(cell_b)
    ix0, iy0 = max(ax, bx), max(ay, by)
    ix1, iy1 = min(ax + aw, bx + bw), min(ay + ah, by + bh)
    inter = max(ix1 - ix0, 0.0) * max(iy1 - iy0, 0.0)
    area_a, area_b = aw * ah, bw * bh
    union = area_a + area_b - inter
    if direction is None:
        dx_abs = abs((bx + bw / 2) - (ax + aw / 2))
        dy_abs = abs((by + bh / 2) - (ay + ah / 2))
        direction = HORIZONTAL if dx_abs >= dy_abs else VERTICAL
    return np.array([
        ax / w, ay / h, aw / w, ah / h,
        bx / w, by / h, bw / w, bh / h,
        ((bx + bw / 2) - (ax + aw / 2)) / w,
        ((by + bh / 2) - (ay + ah / 2)) / h,
        np.log(bw / aw), np.log(bh / ah),
        inter / union if union > 0 else 0.0,
        inter / area_a, inter / area_b,
        union / (w * h),
        1.0 if direction == HORIZONTAL else 0.0,
        1.0 if direction == VERTICAL else 0.0,
    ], dtype=np.float64)


class PairClassifier(nn.Module):
    """Relation network head: concat(feat_a, feat_b, spatial) -> merge probability."""

    def __init__(self, feat_dim: int = 512, spatial_dim: int = 18):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(2 * feat_dim + spatial_dim, 512),
            nn.ReLU(inplace=True),
            nn.Linear(512, 512),
            nn.ReLU(inplace=True),
            nn.Linear(512, 1),
        )

    def forward(self, feat_a, feat_b, spatial):
        return self.mlp(torch.cat([feat_a, feat_b, spatial], dim=-1)).squeeze(-1)


class MergeNet(nn.Module):
    """Cell features + grid enhancement + pair classification."""

    def __init__(self, in_channels: int = 64, feat_dim: int = 512, stride: int = 4):
        super().__init__()
        self.extractor = CellFeatureExtractor(in_channels, feat_dim, stride=stride)
        self.enhancer = GridFeatureEnhancer(feat_dim)
        self.classifier = PairClassifier(feat_dim)

    def forward(self, p2: torch.Tensor, grid: TableGrid, image_size):
        """Returns (pairs, probs); pairs index base cells as (row, col)."""
        feats = self.enhancer(self.extractor(p2, grid))
        pairs = adjacent_pairs(grid.n_rows, grid.n_cols)
        if not pairs:
            return pairs, torch.zeros(0, dtype=p2.dtype, device=p2.device)
        fa = torch.stack([feats[a] for a, _ in pairs])
        fb = torch.stack([feats[b] for _, b in pairs])
        spatial = np.stack([
            spatial_feature_18d(
                grid.cells[a[0]][a[1]], grid.cells[b[0]][b[1]], image_size,
                direction=HORIZONTAL if a[0] == b[0] else VERTICAL,
            )
            for a, b in pairs
        ])
        spatial_t = torch.as_tensor(spatial, dtype=p2.dtype, device=p2.device)
        logits = self.classifier(fa, fb, spatial_t)
        return pairs, torch.sigmoid(logits)


def predict_merges(merge_net: MergeNet, p2: torch.Tensor, grid: TableGrid, image_size):
    return merge_net(p2, grid, image_size)


# ---------------------------------------------------------------------------
# Span resolution
# ---------------------------------------------------------------------------

class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _boundary_polygon(corners: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    top = [corners[r0, c] for c in range(c0, c1 + 2)]
    right = [corners[r, c1 + 1] for r in range(r0 + 1, r1 + 2)]
    bottom = [corners[r1 + 1, c] for c in range(c1, c0 - 1, -1)]
    left = [corners[r, c0] for r in range(r1, r0, -1)]
    return np.array(top + right + bottom + left)


def resolve_spans(grid: TableGrid, merge_decisions) -> list[CellBox]:
    """Merge positively-classified adjacent pairs into rectangular spans.

    Connected components over positive pairs are expanded to their minimal
    enclosing rectangle of grid indices; overlapping rectangles are merged
    until a fixpoint, so the result always partitions the base grid.
    """
    n, m = grid.n_rows, grid.n_cols
    dsu = _DSU(n * m)
    for (a, b) in merge_decisions:
        dsu.union(a[0] * m + a[1], b[0] * m + b[1])

    comps: dict[int, list[int]] = {}
    for i in range(n * m):
        comps.setdefault(dsu.find(i), []).append(i)
    rects = []
    for members in comps.values():
        rr = [i // m for i in members]
        cc = [i % m for i in members]
        rects.append([min(rr), max(rr), min(cc), max(cc)])

    changed = True
    while changed:
        changed = False
        out = []
        for rect in rects:
            merged = False
            for kept in out:
                if rect[0] <= kept[1] and kept[0] <= rect[1] and \
                        rect[2] <= kept[3] and kept[2] <= rect[3]:
                    kept[0] = min(kept[0], rect[0])
                    kept[1] = max(kept[1], rect[1])
                    kept[2] = min(kept[2], rect[2])
                    kept[3] = max(kept[3], rect[3])
                    merged = True
                    changed = True
                    break
            if not merged:
                out.append(rect)
        rects = out

    rects.sort(key=lambda r: (r[0], r[2]))
    return [
        CellBox(r0, r1, c0, c1, polygon=_boundary_polygon(grid.corners, r0, r1, c0, c1))
        for r0, r1, c0, c1 in rects
    ]
