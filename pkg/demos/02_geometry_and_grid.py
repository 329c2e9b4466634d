"""Walk through the geometry layer: polylines, intersections, grid, spans."""

import numpy as np

from tablestruct import build_grid, intersect_polylines, resolve_spans
from tablestruct.core import AXIS_COL, AXIS_ROW, Polyline, canonical_positions, straight_separator

# A polyline is sampled at 15 canonical positions and extends its end slopes.
xs = canonical_positions(320)
wavy = Polyline(AXIS_ROW, xs, 80 + 6 * np.sin(xs / 40.0))
vertical = straight_separator(AXIS_COL, 120.0, 320).center
hit = intersect_polylines(wavy, vertical, (320, 320))
print(f"wavy row line meets x=120 at ({hit.x:.2f}, {hit.y:.2f}), fallback={hit.fallback}")

# Two row and two column separators make a 3x3 grid of base cells.
rows = [straight_separator(AXIS_ROW, v, 320, half_width=3) for v in (100, 200)]
cols = [straight_separator(AXIS_COL, v, 320, half_width=3) for v in (110, 210)]
grid = build_grid(rows, cols, (320, 320))
print(f"grid: {grid.n_rows} x {grid.n_cols} base cells")
for row in grid.cells:
    print("   ", [f"({c.bbox[0]:.0f},{c.bbox[1]:.0f})-({c.bbox[2]:.0f},{c.bbox[3]:.0f})"
                  for c in row])

# Positive merge decisions grow rectangular spanning cells.
merged = resolve_spans(grid, [((0, 0), (0, 1)), ((0, 0), (1, 0))])
print("after merging an L of three cells (rectangular hull):")
for cell in merged:
    print(f"    rows {cell.row_start}-{cell.row_end} cols {cell.col_start}-{cell.col_end}")
