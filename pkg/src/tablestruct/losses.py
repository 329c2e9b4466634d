"""Training objectives and reference-point/ground-truth assignment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from .core import Separator
from .errors import TrainingAbortError

INF_COST = 1e9
EPS = 1e-7

FOCAL_ALPHA = 2.0
FOCAL_BETA = 4.0
LAMBDA_REF = 0.2


@dataclass
class Assignment:
    """Bipartite matching result between queries and ground-truth separators."""

    pairs: list[tuple[int, int]]
    unmatched_queries: list[int]
    unmatched_gts: list[int]
    total_cost: float = 0.0


@dataclass
class LossBundle:
    """All loss components of one step; inactive stages contribute exact zeros."""

    l_ref_row: torch.Tensor
    l_ref_col: torch.Tensor
    l_aux_row: torch.Tensor
    l_aux_col: torch.Tensor
    l_line_row: torch.Tensor
    l_line_col: torch.Tensor
    l_merge: torch.Tensor
    total: torch.Tensor

    def detach_floats(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in (
            "l_ref_row", "l_ref_col", "l_aux_row", "l_aux_col",
            "l_line_row", "l_line_col", "l_merge", "total")}


def ref_point_loss(pred: torch.Tensor, target: torch.Tensor, n_sep: int,
                   alpha: float = FOCAL_ALPHA, beta: float = FOCAL_BETA) -> torch.Tensor:
    """Penalty-reduced focal loss over the prior-position score vector.

    Positives are pixels whose target equals 1; elsewhere the penalty is
    scaled down by (1 - target)^beta so pixels near a center are forgiven.
    Normalized by the number of separators.
    """
    if n_sep <= 0:
        warnings.warn("ref_point_loss with no separators returns 0", stacklevel=2)
        return pred.sum() * 0.0
    p = pred.clamp(EPS, 1.0 - EPS)
    t = target.to(p.dtype)
    pos = t == 1.0
    pos_term = torch.where(pos, (1.0 - p) ** alpha * torch.log(p), torch.zeros_like(p))
    neg_term = torch.where(
        ~pos, (1.0 - t) ** beta * p ** alpha * torch.log(1.0 - p), torch.zeros_like(p))
    return -(pos_term.sum() + neg_term.sum()) / float(n_sep)


def _band_cost_matrix(indices: np.ndarray, gts: Sequence[Separator], x_tau: float) -> np.ndarray:
    cost = np.full((len(indices), len(gts)), INF_COST, dtype=np.float64)
    for g, sep in enumerate(gts):
        top, bottom = sep.band_at(x_tau)
        center = sep.center_at(x_tau)
        inside = (indices > top) & (indices < bottom)
        cost[inside, g] = np.abs(indices[inside] - center)
    return cost


def prior_enhanced_match(refs, gts: Sequence[Separator], x_tau: float) -> Assignment:
    """Assign reference points to separators using the band prior.

    A pair has finite cost |index - center| only when the reference point
    lies strictly between the separator's top and bottom boundaries at the
    prior position; the Hungarian solution is then stripped of sentinel
    (out-of-band) pairs.
    """
    if not refs or not gts:
        return Assignment([], list(range(len(refs))), list(range(len(gts))))
    indices = np.array([float(r.index) for r in refs])
    cost = _band_cost_matrix(indices, gts, x_tau)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    pairs = [(int(q), int(g)) for q, g in zip(rows, cols) if cost[q, g] < INF_COST / 2]
    matched_q = {q for q, _ in pairs}
    matched_g = {g for _, g in pairs}
    return Assignment(
        pairs,
        [q for q in range(len(refs)) if q not in matched_q],
        [g for g in range(len(gts)) if g not in matched_g],
        total_cost=total,
    )


def plain_match(refs, gts: Sequence[Separator], x_tau: float) -> Assignment:
    """Unconstrained nearest-distance Hungarian matching (ablation baseline)."""
    if not refs or not gts:
        return Assignment([], list(range(len(refs))), list(range(len(gts))))
    indices = np.array([float(r.index) for r in refs])
    centers = np.array([sep.center_at(x_tau) for sep in gts])
    cost = np.abs(indices[:, None] - centers[None, :])
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(q), int(g)) for q, g in zip(rows, cols)]
    matched_q = {q for q, _ in pairs}
    matched_g = {g for _, g in pairs}
    return Assignment(
        pairs,
        [q for q in range(len(refs)) if q not in matched_q],
        [g for g in range(len(gts)) if g not in matched_g],
        total_cost=float(cost[rows, cols].sum()),
    )


def line_loss(preds, gt_coords, assignment: Assignment,
              alpha: float = FOCAL_ALPHA) -> torch.Tensor:
    """Set-prediction loss: focal classification over every query plus
    mean-L1 over the 3K normalized coordinates of matched queries."""
    if not preds:
        return torch.zeros(())
    device = preds[0].class_logit.device
    dtype = preds[0].class_logit.dtype
    matched = dict(assignment.pairs)
    total = torch.zeros((), device=device, dtype=dtype)
    for q, pred in enumerate(preds):
        p = torch.sigmoid(pred.class_logit).clamp(EPS, 1.0 - EPS)
        if q in matched:
            total = total - (1.0 - p) ** alpha * torch.log(p)
            gt = torch.as_tensor(gt_coords[matched[q]], device=device, dtype=dtype)
            total = total + torch.abs(pred.coords - gt).mean()
        else:
            total = total - p ** alpha * torch.log(1.0 - p)
    return total


def sample_pixel_set(mask_gt: np.ndarray, n_pos: int, n_neg: int, seed: int):
    """Random balanced pixel sample; takes every pixel of a class that is short."""
    rng = np.random.default_rng(seed)
    flat = np.asarray(mask_gt).reshape(-1)
    pos_idx = np.flatnonzero(flat == 1)
    neg_idx = np.flatnonzero(flat == 0)
    if len(pos_idx) > n_pos:
        pos_idx = rng.choice(pos_idx, size=n_pos, replace=False)
    if len(neg_idx) > n_neg:
        neg_idx = rng.choice(neg_idx, size=n_neg, replace=False)
    return np.concatenate([pos_idx, neg_idx])


def aux_seg_loss(mask_pred: torch.Tensor, mask_gt, n_pos: int = 1024,
                 n_neg: int = 1024, seed: int = 0) -> torch.Tensor:
    """Mean binary cross-entropy over a balanced random pixel sample."""
    gt = np.asarray(mask_gt.detach().cpu() if torch.is_tensor(mask_gt) else mask_gt)
    sel = sample_pixel_set(gt, n_pos, n_neg, seed)
    if sel.size == 0:
        return mask_pred.sum() * 0.0
    p = mask_pred.reshape(-1)[sel].clamp(EPS, 1.0 - EPS)
    t = torch.as_tensor(gt.reshape(-1)[sel], device=mask_pred.device, dtype=mask_pred.dtype)
    return -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)).mean()


def merge_loss_ohem(pair_probs: torch.Tensor, pair_labels, n_hard_pos: int = 64,
                    n_hard_neg: int = 64) -> torch.Tensor:
    """Mean BCE over the hardest positive and negative cell pairs."""
    if pair_probs.numel() == 0:
        warnings.warn("merge loss over an empty pair list returns 0", stacklevel=2)
        return pair_probs.sum() * 0.0
    labels = torch.as_tensor(
        np.asarray(pair_labels), device=pair_probs.device, dtype=pair_probs.dtype)
    p = pair_probs.clamp(EPS, 1.0 - EPS)
    bce = -(labels * torch.log(p) + (1.0 - labels) * torch.log(1.0 - p))
    picked = []
    for want, sel in ((n_hard_pos, labels == 1), (n_hard_neg, labels == 0)):
        vals = bce[sel]
        if vals.numel() > want:
            vals = vals.topk(want).values
        picked.append(vals)
    picked = torch.cat(picked)
    if picked.numel() == 0:
        return pair_probs.sum() * 0.0
    return picked.mean()


def total_loss(l_ref_row, l_ref_col, l_aux_row, l_aux_col, l_line_row, l_line_col,
               l_merge, lam: float = LAMBDA_REF) -> LossBundle:
    """Weighted sum of all components; aborts on non-finite values."""
    parts = [l_ref_row, l_ref_col, l_aux_row, l_aux_col, l_line_row, l_line_col, l_merge]
    parts = [p if torch.is_tensor(p) else torch.tensor(float(p)) for p in parts]
    for p in parts:
        if not torch.isfinite(p).all():
            raise TrainingAbortError("non-finite loss component")
    total = lam * (parts[0] + parts[1]) + parts[2] + parts[3] + parts[4] + parts[5] + parts[6]
    return LossBundle(*parts, total=total)
