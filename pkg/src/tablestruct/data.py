"""Dataset loading, rescaling, padding and batch assembly for training."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import core, synthdata
from .core import TableAnnotation
from .errors import InvalidInputError


def rescale(image: np.ndarray, ann: TableAnnotation | None, target: int,
            mode: str = "shorter"):
    """Resize keeping aspect ratio ('shorter'/'longer') or to a square ('both')."""
    h, w = image.shape[:2]
    if mode == "shorter":
        s = target / min(h, w)
        nh, nw = round(h * s), round(w * s)
    elif mode == "longer":
        s = target / max(h, w)
        nh, nw = round(h * s), round(w * s)
    elif mode == "both":
        nh = nw = target
    else:
        raise InvalidInputError(f"unknown resize mode {mode}")
    sy, sx = nh / h, nw / w
    out = np.asarray(Image.fromarray(image).resize((nw, nh), Image.BILINEAR))
    if ann is not None:
        ann = core.scale_annotation(ann, sx, sy, (nh, nw))
    return out, ann, (sx, sy)


def pad_to_multiple(image: np.ndarray, multiple: int = 32,
                    size: tuple[int, int] | None = None) -> np.ndarray:
    """Replicate-pad bottom/right so H and W are divisible by `multiple`."""
    h, w = image.shape[:2]
    if size is None:
        ph = -h % multiple
        pw = -w % multiple
    else:
        ph, pw = size[0] - h, size[1] - w
    if ph == 0 and pw == 0:
        return image
    return np.pad(image, ((0, ph), (0, pw), (0, 0)), mode="edge")


class TableDataset:
    """Lazy reader over a generated dataset directory."""

    def __init__(self, data_dir, split: str = "train"):
        self.data_dir = Path(data_dir)
        manifest = synthdata.load_manifest(self.data_dir)
        self.ids = list(manifest.get(split, []))
        if not self.ids:
            raise InvalidInputError(f"dataset {data_dir} has no '{split}' samples")

    def __len__(self):
        return len(self.ids)

    def get(self, index: int):
        return synthdata.load_sample(self.data_dir, self.ids[index])


def make_batch(samples, scale: int, mode: str = "shorter"):
    """Rescale each (image, annotation) pair, pad to a shared size, derive targets.

    Returns (images uint8 tensor (B, 3, H, W), list of per-sample target dicts).
    """
    scaled = []
    for image, ann in samples:
        img_s, ann_s, _ = rescale(image, ann, scale, mode)
        scaled.append((img_s, ann_s))
    hmax = max(img.shape[0] for img, _ in scaled)
    wmax = max(img.shape[1] for img, _ in scaled)
    hpad = hmax + (-hmax % 32)
    wpad = wmax + (-wmax % 32)

    images = []
    targets = []
    for img_s, ann_s in scaled:
        images.append(pad_to_multiple(img_s, size=(hpad, wpad)))
        t = synthdata.derive_targets(ann_s, (hpad, wpad))
        row_seps, col_seps = synthdata.prepared_separators(ann_s, (hpad, wpad))
        targets.append({
            "ann": ann_s,
            "row_heat": t.row_heatmap,
            "col_heat": t.col_heatmap,
            "row_mask": t.row_mask,
            "col_mask": t.col_mask,
            "row_reg": t.row_regression,
            "col_reg": t.col_regression,
            "merge_labels": t.merge_labels,
            "row_seps": row_seps,
            "col_seps": col_seps,
        })
    batch = torch.from_numpy(np.stack(images)).permute(0, 3, 1, 2).contiguous()
    return batch, targets, (hpad, wpad)
