"""Adjacency-relation F1 and the structure-tree similarity on hand examples."""

from tablestruct.core import CellBox
from tablestruct.metrics import adjacency_prf, adjacency_relations, cells_to_tree, teds_struct


def cell(r0, r1, c0, c1, s=40.0):
    return CellBox(r0, r1, c0, c1, polygon=[
        [c0 * s, r0 * s], [(c1 + 1) * s, r0 * s],
        [(c1 + 1) * s, (r1 + 1) * s], [c0 * s, (r1 + 1) * s]])


grid = [cell(0, 0, 0, 0), cell(0, 0, 1, 1), cell(1, 1, 0, 0), cell(1, 1, 1, 1)]
merged_top = [cell(0, 0, 0, 1), cell(1, 1, 0, 0), cell(1, 1, 1, 1)]

print("2x2 grid relations:")
for rel in sorted(adjacency_relations(grid)):
    print("   ", rel)
print("top-row-merged relations:")
for rel in sorted(adjacency_relations(merged_top)):
    print("   ", rel)

p, r, f1 = adjacency_prf(merged_top, grid)
print(f"\nmerged-top vs 2x2 grid: precision={p:.3f} recall={r:.3f} f1={f1:.3f}")
print("  (the merged cell matches no 0.6-IoU ground-truth cell, so both of")
print("   its relations drop out)")

ta = cells_to_tree(grid)
tb = cells_to_tree(merged_top)
print(f"\nstructure trees: {ta.size()} vs {tb.size()} nodes, "
      f"similarity = {teds_struct(ta, tb):.4f}")
print(f"identical trees score {teds_struct(ta, cells_to_tree(grid)):.1f}")
