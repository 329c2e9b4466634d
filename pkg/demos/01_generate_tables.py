"""Generate a few synthetic tables and visualize their ground truth.

Writes PNGs with separator bands and cell outlines drawn on top, plus the
derived reference-point heatmap, into demos/out/.
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from tablestruct import TableSpec, WarpParams, derive_targets, generate_table
from tablestruct.core import polyline_eval

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

specs = {
    "plain_bordered": TableSpec(seed=3, n_rows=4, n_cols=4),
    "borderless_spans": TableSpec(seed=9, n_rows=5, n_cols=4, span_prob=0.8,
                                  empty_prob=0.15, bordered=False),
    "curved": TableSpec(seed=12, n_rows=4, n_cols=5,
                        warp=WarpParams(rotation_deg=2.0, amp_y=5.0, amp_x=2.0,
                                        wavelength=160.0, phase=1.0)),
}

for name, spec in specs.items():
    image, ann = generate_table(spec)
    h, w = ann.image_size
    img = Image.fromarray(image).convert("RGB")
    draw = ImageDraw.Draw(img)

    for sep in ann.row_separators:
        xs = np.linspace(0, w - 1, 60)
        for line, color in ((sep.top, (120, 180, 255)), (sep.center, (30, 90, 220)),
                            (sep.bottom, (120, 180, 255))):
            ys = polyline_eval(line, xs)
            draw.line(list(zip(xs, ys)), fill=color, width=1)
    for sep in ann.col_separators:
        ys = np.linspace(0, h - 1, 60)
        for line, color in ((sep.top, (255, 190, 120)), (sep.center, (230, 120, 20)),
                            (sep.bottom, (255, 190, 120))):
            xs_v = polyline_eval(line, ys)
            draw.line(list(zip(xs_v, ys)), fill=color, width=1)
    for cell in ann.cells:
        draw.polygon([tuple(p) for p in cell.polygon], outline=(200, 40, 40))
    img.save(OUT / f"{name}.png")

    targets = derive_targets(ann, ann.image_size)
    strip = np.tile((targets.row_heatmap * 255).astype(np.uint8)[:, None], (1, 24))
    Image.fromarray(strip).save(OUT / f"{name}_row_heatmap.png")
    print(f"{name}: {len(ann.cells)} cells, "
          f"{len(ann.row_separators)}x{len(ann.col_separators)} separators, "
          f"{int(targets.merge_labels.sum())} merge pairs -> {OUT / name}.png")
