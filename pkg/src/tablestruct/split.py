"""Separator regression head: reference points on a fixed prior column, a
transformer decoder over sampled high-resolution features, and conversion of
raw predictions into separator objects."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import core
from .backbone import AxisEnhancer, HighResProjector
from .core import AXIS_COL, AXIS_ROW, Polyline, Separator

TOPK = 100
REF_THRESH = 0.05
NMS_WINDOW = 7
INFER_THRESH = 0.5


@dataclass
class ReferencePoint:
    """Candidate separator seed on the prior column/row."""

    index: int
    score: float
    query_feature: torch.Tensor  # (C',)


@dataclass
class SeparatorPrediction:
    """Raw decoder output for one query: class logit + 3K normalized coords."""

    class_logit: torch.Tensor  # scalar
    coords: torch.Tensor       # (3K,) in [0, 1]: top K, center K, bottom K
    origin: ReferencePoint = None


def local_maxima(scores: torch.Tensor, window: int = NMS_WINDOW) -> torch.Tensor:
    """Boolean mask: score equals the max of its centered window."""
    pooled = F.max_pool1d(scores.view(1, 1, -1), window, stride=1, padding=window // 2)
    return pooled.view(-1) == scores


def select_reference_indices(scores, window: int = NMS_WINDOW, topk: int = TOPK,
                             thresh: float = REF_THRESH) -> np.ndarray:
    """Window local-max NMS, then top-k by score, then score threshold.

    Ties inside the top-k cut are broken toward the lower index.  Returned
    indices are sorted ascending.
    """
    s = torch.as_tensor(np.asarray(scores, dtype=np.float32))
    keep = local_maxima(s, window)
    cand = torch.nonzero(keep, as_tuple=False).view(-1)
    if cand.numel() == 0:
        return np.zeros(0, dtype=np.int64)
    order = torch.sort(s[cand], descending=True, stable=True).indices
    cand = cand[order][:topk]
    cand = cand[s[cand] >= thresh]
    return np.sort(cand.numpy())


def sine_embedding(norm_pos: torch.Tensor, num_feats: int = 128,
                   temperature: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding of normalized coordinates scaled by 2*pi."""
    device = norm_pos.device
    dim_t = torch.arange(num_feats, dtype=torch.float32, device=device)
    dim_t = temperature ** (2 * torch.div(dim_t, 2, rounding_mode="floor") / num_feats)
    pos = norm_pos.unsqueeze(-1) * (2.0 * math.pi) / dim_t
    return torch.cat([pos[..., 0::2].sin(), pos[..., 1::2].cos()], dim=-1)


def position_embedding_xy(x_norm: torch.Tensor, y_norm: torch.Tensor,
                          dim: int = 256) -> torch.Tensor:
    """Concatenated x/y sinusoidal embeddings, total `dim` channels."""
    half = dim // 2
    return torch.cat([sine_embedding(x_norm, half), sine_embedding(y_norm, half)], dim=-1)


class Mlp(nn.Module):
    def __init__(self, dims):
        super().__init__()
        layers = []
        for i in range(len(dims) - 1):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            if i + 2 < len(dims):
                layers.append(nn.ReLU(inplace=True))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class DecoderLayer(nn.Module):
    """Post-norm transformer decoder layer with additive position terms."""

    def __init__(self, dim: int, heads: int, ffn_dim: int, dropout: float = 0.0):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(dim, heads, dropout=dropout, batch_first=True)
        self.cross_attn = nn.MultiheadAttention(dim, heads, dropout=dropout, batch_first=True)
        self.ffn = nn.Sequential(
            nn.Linear(dim, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, dim))
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)

    def forward(self, tgt, query_pos, memory, mem_pos):
        q = k = tgt + query_pos
        tgt = self.norm1(tgt + self.self_attn(q, k, tgt, need_weights=False)[0])
        tgt = self.norm2(tgt + self.cross_attn(
            tgt + query_pos, memory + mem_pos, memory, need_weights=False)[0])
        return self.norm3(tgt + self.ffn(tgt))


class SeparatorDecoder(nn.Module):
    """Decodes reference-point queries against the sampled column features."""

    def __init__(self, dim: int = 256, heads: int = 16, ffn_dim: int = 1024,
                 n_layers: int = 3, k_points: int = core.K_POINTS, dropout: float = 0.0):
        super().__init__()
        self.layers = nn.ModuleList(
            [DecoderLayer(dim, heads, ffn_dim, dropout) for _ in range(n_layers)])
        self.class_head = Mlp([dim, dim, 1])
        self.reg_head = Mlp([dim, dim, 3 * k_points])

    def forward(self, queries, query_pos, memory, mem_pos):
        tgt = queries.unsqueeze(0)
        qp = query_pos.unsqueeze(0)
        mem = memory.unsqueeze(0)
        mp = mem_pos.unsqueeze(0)
        for layer in self.layers:
            tgt = layer(tgt, qp, mem, mp)
        tgt = tgt.squeeze(0)
        logits = self.class_head(tgt).squeeze(-1)
        coords = torch.sigmoid(self.reg_head(tgt))
        return logits, coords


class SplitBranch(nn.Module):
    """One axis of the split module, operating in the row frame.

    For the column branch the stride-4 map is transposed on the way in, so
    "height" below means the original width.  Outputs stay in frame space;
    the caller transposes masks back when needed.
    """

    def __init__(self, axis: str, in_channels: int = 64, hr_channels: int = 256,
                 k_points: int = core.K_POINTS, topk: int = TOPK,
                 ref_thresh: float = REF_THRESH, nms_window: int = NMS_WINDOW,
                 decoder_layers: int = 3, heads: int = 16, ffn_dim: int = 1024,
                 dropout: float = 0.0):
        super().__init__()
        self.axis = axis
        self.k_points = k_points
        self.topk = topk
        self.ref_thresh = ref_thresh
        self.nms_window = nms_window
        self.enhancer = AxisEnhancer(in_channels)
        self.projector = HighResProjector(in_channels, hr_channels)
        self.ref_head = nn.Linear(hr_channels, 1)
        self.aux_head = nn.Conv2d(in_channels, 1, 1)
        self.decoder = SeparatorDecoder(hr_channels, heads, ffn_dim, decoder_layers, k_points,
                                        dropout)

    def to_frame(self, p2: torch.Tensor) -> torch.Tensor:
        return p2.transpose(2, 3) if self.axis == AXIS_COL else p2

    def forward(self, p2: torch.Tensor) -> dict:
        """Frame-space outputs for a batch of stride-4 feature maps."""
        p2f = self.to_frame(p2)
        hf, wf = p2f.shape[-2] * 4, p2f.shape[-1] * 4
        e = self.enhancer(p2f)

        aux_small = self.aux_head(e)  # pointwise conv commutes with upsampling
        aux = torch.sigmoid(
            F.interpolate(aux_small, size=(hf, wf), mode="bilinear", align_corners=False)
        ).squeeze(1)

        tau = core.prior_position(wf)
        cols = [int(c) for c in core.canonical_positions(wf, self.k_points)] + [tau]
        sampled = self.projector.sample_columns(e, cols, (hf, wf))
        memory = sampled[:, :, :, :self.k_points]          # (B, C', Hf, K)
        tau_feats = sampled[:, :, :, self.k_points]        # (B, C', Hf)
        scores = torch.sigmoid(self.ref_head(tau_feats.transpose(1, 2))).squeeze(-1)
        return {
            "e": e,
            "aux": aux,
            "scores": scores,
            "memory": memory,
            "tau_feats": tau_feats,
            "frame_hw": (hf, wf),
            "tau": tau,
        }

    def detect(self, scores_1d: torch.Tensor, tau_feats_1d: torch.Tensor) -> list[ReferencePoint]:
        idx = select_reference_indices(
            scores_1d.detach().cpu().numpy(), self.nms_window, self.topk, self.ref_thresh)
        return [
            ReferencePoint(int(i), float(scores_1d[int(i)].detach()), tau_feats_1d[:, int(i)])
            for i in idx
        ]

    def decode(self, refs: list[ReferencePoint], memory_1: torch.Tensor,
               frame_hw, tau: int) -> list[SeparatorPrediction]:
        """Run the decoder for one image's reference points."""
        if not refs:
            return []
        hf, wf = frame_hw
        dtype = memory_1.dtype
        device = memory_1.device
        queries = torch.stack([r.query_feature for r in refs])
        qx = torch.full((len(refs),), tau / wf, dtype=torch.float32, device=device)
        qy = torch.tensor([r.index / hf for r in refs], dtype=torch.float32, device=device)
        query_pos = position_embedding_xy(qx, qy, queries.shape[-1]).to(dtype)

        k = memory_1.shape[-1]
        xs = torch.as_tensor(
            core.canonical_positions(wf, k) / wf, dtype=torch.float32, device=device)
        ys = torch.arange(hf, dtype=torch.float32, device=device) / hf
        mem_x = xs.unsqueeze(0).expand(hf, k).reshape(-1)
        mem_y = ys.unsqueeze(1).expand(hf, k).reshape(-1)
        mem_pos = position_embedding_xy(mem_x, mem_y, memory_1.shape[0]).to(dtype)
        memory = memory_1.permute(1, 2, 0).reshape(hf * k, -1)

        logits, coords = self.decoder(queries, query_pos, memory, mem_pos)
        return [
            SeparatorPrediction(logits[i], coords[i], origin=refs[i])
            for i in range(len(refs))
        ]


# ---------------------------------------------------------------------------
# Contract-level functional ops (full-map paths used by tests and inference)
# ---------------------------------------------------------------------------

def enhance_axis_features(branch: SplitBranch, p2: torch.Tensor) -> torch.Tensor:
    """Context-enhanced map in original orientation for the branch's axis."""
    e = branch.enhancer(branch.to_frame(p2))
    return e.transpose(2, 3) if branch.axis == AXIS_COL else e


def project_high_res(branch: SplitBranch, e_axis: torch.Tensor, image_size) -> torch.Tensor:
    """Full high-resolution map (B, C', H, W) in original orientation."""
    h, w = image_size
    if branch.axis == AXIS_COL:
        out = branch.projector(e_axis.transpose(2, 3), (w, h))
        return out.transpose(2, 3)
    return branch.projector(e_axis, (h, w))


def sample_prior_features(branch: SplitBranch, e_hr: torch.Tensor) -> torch.Tensor:
    """Gather the K canonical columns (rows for the column branch) of E'."""
    if branch.axis == AXIS_COL:
        h = e_hr.shape[-2]
        rows = core.canonical_positions(h, branch.k_points).astype(np.int64)
        return e_hr[:, :, rows, :]
    w = e_hr.shape[-1]
    cols = core.canonical_positions(w, branch.k_points).astype(np.int64)
    return e_hr[:, :, :, cols]


def detect_reference_points(branch: SplitBranch, e_hr: torch.Tensor) -> list[ReferencePoint]:
    """Reference points from a full high-resolution map (single image)."""
    if branch.axis == AXIS_COL:
        h = e_hr.shape[-2]
        tau = core.prior_position(h)
        line = e_hr[0, :, tau, :]  # (C', W)
    else:
        w = e_hr.shape[-1]
        tau = core.prior_position(w)
        line = e_hr[0, :, :, tau]  # (C', H)
    scores = torch.sigmoid(branch.ref_head(line.transpose(0, 1))).squeeze(-1)
    return branch.detect(scores, line)


def predictions_to_separators(preds: list[SeparatorPrediction], axis: str, image_size,
                              score_thresh: float = INFER_THRESH,
                              k_points: int = core.K_POINTS) -> list[Separator]:
    """Threshold, de-normalize and de-duplicate raw predictions.

    Overlapping duplicates (bands intersecting at >= 50% of sample
    positions) are merged keeping the higher-scoring one; the survivors are
    sorted by center position at the prior column/row.
    """
    h, w = int(image_size[0]), int(image_size[1])
    fixed_extent = w if axis == AXIS_ROW else h
    free_extent = h if axis == AXIS_ROW else w
    pos = core.canonical_positions(fixed_extent, k_points)

    candidates = []
    for p in preds:
        score = float(torch.sigmoid(p.class_logit))
        if score < score_thresh:
            continue
        coords = p.coords.detach().cpu().numpy() * free_extent
        trip = np.sort(np.stack([coords[:k_points],
                                 coords[k_points:2 * k_points],
                                 coords[2 * k_points:]]), axis=0)
        trip = np.clip(trip, 0.0, free_extent - 1.0)
        sep = Separator(
            axis,
            Polyline(axis, pos, trip[0]),
            Polyline(axis, pos, trip[1]),
            Polyline(axis, pos, trip[2]),
            score=score,
        )
        candidates.append(sep)

    candidates.sort(key=lambda s: -s.score)
    kept: list[Separator] = []
    for sep in candidates:
        dup = False
        for other in kept:
            overlap = np.sum(
                (sep.top.values <= other.bottom.values)
                & (other.top.values <= sep.bottom.values))
            if overlap >= 0.5 * k_points:
                dup = True
                break
        if not dup:
            kept.append(sep)
    return core.sort_separators(kept, core.prior_position(fixed_extent))
