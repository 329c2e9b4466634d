"""Staged training loop with polynomial LR decay and per-epoch checkpoints.

Stage 1 trains reference-point detection and auxiliary segmentation; stage 2
adds separator line regression; stage 3 adds cell merging.  Nothing is
frozen between stages, the active loss set just grows.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import torch

from . import losses as L
from .config import Config
from .data import TableDataset, make_batch
from .errors import TrainingAbortError
from .merge import build_grid
from .model import TableModel


def stage_of_epoch(epoch: int, stage_epochs: int, n_stages: int = 3) -> int:
    """1-based stage index for a 0-based epoch."""
    return min(epoch // stage_epochs, n_stages - 1) + 1


def poly_lr_factor(step: int, total_steps: int, power: float) -> float:
    if total_steps <= 0:
        return 1.0
    frac = min(step / total_steps, 1.0)
    return (1.0 - frac) ** power


def save_checkpoint(path, model: TableModel, cfg: Config, epoch: int, stage: int,
                    history: list[dict]):
    torch.save({
        "state_dict": model.state_dict(),
        "config": cfg.to_dict(),
        "epoch": epoch,
        "stage": stage,
        "history": history,
    }, path)


def load_checkpoint(path):
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg = Config.from_dict(blob["config"])
    model = TableModel(cfg)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, cfg, blob


def _axis_losses(branch, outs, targets, b, sample_seed, cfg, stage, axis):
    """Loss components of one branch for one sample of the batch."""
    key_heat = "row_heat" if axis == "row" else "col_heat"
    key_mask = "row_mask" if axis == "row" else "col_mask"
    key_reg = "row_reg" if axis == "row" else "col_reg"
    key_seps = "row_seps" if axis == "row" else "col_seps"

    tgt = targets[b]
    gt_seps = tgt[key_seps]
    l_ref = L.ref_point_loss(
        outs["scores"][b], torch.as_tensor(tgt[key_heat]), max(len(gt_seps), 1),
        alpha=cfg.focal_alpha, beta=cfg.focal_beta)

    mask_gt = tgt[key_mask] if axis == "row" else tgt[key_mask].T  # column branch is transposed
    l_aux = L.aux_seg_loss(outs["aux"][b], mask_gt, cfg.pixels_per_class,
                           cfg.pixels_per_class, seed=sample_seed)

    l_line = outs["scores"].sum() * 0.0
    if stage >= 2:
        refs = branch.detect(outs["scores"][b], outs["tau_feats"][b])
        matcher = L.prior_enhanced_match if cfg.matching == "prior" else L.plain_match
        assignment = matcher(refs, gt_seps, outs["tau"])
        preds = branch.decode(refs, outs["memory"][b], outs["frame_hw"], outs["tau"])
        if preds:
            l_line = L.line_loss(preds, tgt[key_reg], assignment, alpha=cfg.focal_alpha)
    return l_ref, l_aux, l_line


def train_staged(cfg: Config, progress=print) -> Path:
    """Run all stages; returns the path of the final checkpoint."""
    cfg.validate()
    torch.manual_seed(cfg.seed)
    np.random.seed(cfg.seed % (2 ** 31))
    rng = np.random.default_rng(cfg.seed)

    dataset = TableDataset(cfg.data_dir, "train")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = TableModel(cfg)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.lr, betas=cfg.betas,
                                  eps=cfg.eps, weight_decay=cfg.weight_decay)
    epoch_iters = cfg.epoch_iters or max(1, math.ceil(len(dataset) / cfg.batch_size))
    n_epochs = cfg.stages * cfg.stage_epochs
    total_steps = n_epochs * epoch_iters
    stage_steps = cfg.stage_epochs * epoch_iters

    history: list[dict] = []
    last_ckpt = None
    grid_cache: dict = {}
    batch_cache: dict = {}
    step = 0
    order = []
    for epoch in range(n_epochs):
        stage = stage_of_epoch(epoch, cfg.stage_epochs, cfg.stages)
        sums: dict[str, float] = {}
        for _ in range(epoch_iters):
            if len(order) < cfg.batch_size:
                fresh = np.arange(len(dataset))
                rng.shuffle(fresh)
                order.extend(fresh.tolist())
            take, order = order[:cfg.batch_size], order[cfg.batch_size:]
            scale = int(rng.choice(cfg.rescale_shorter_side))
            cache_key = (tuple(take), scale)
            if cache_key not in batch_cache:
                if len(batch_cache) >= 64:
                    batch_cache.pop(next(iter(batch_cache)))
                batch_cache[cache_key] = make_batch(
                    [dataset.get(i) for i in take], scale, "shorter")
            batch, targets, (hpad, wpad) = batch_cache[cache_key]

            if cfg.lr_schedule_scope == "stage":
                factor = poly_lr_factor(step % stage_steps, stage_steps, cfg.poly_decay_power)
            else:
                factor = poly_lr_factor(step, total_steps, cfg.poly_decay_power)
            for group in optimizer.param_groups:
                group["lr"] = cfg.lr * factor

            images = TableModel.normalize_images(batch)
            outs = model(images)
            zero = outs["p2"].sum() * 0.0
            comp = {k: zero.clone() for k in (
                "l_ref_row", "l_ref_col", "l_aux_row", "l_aux_col",
                "l_line_row", "l_line_col", "l_merge")}
            n = len(targets)
            for b in range(n):
                sample_seed = int(rng.integers(0, 2 ** 31))
                r_ref, r_aux, r_line = _axis_losses(
                    model.row_branch, outs["row"], targets, b, sample_seed, cfg, stage, "row")
                c_ref, c_aux, c_line = _axis_losses(
                    model.col_branch, outs["col"], targets, b, sample_seed + 1, cfg, stage, "col")
                comp["l_ref_row"] = comp["l_ref_row"] + r_ref / n
                comp["l_ref_col"] = comp["l_ref_col"] + c_ref / n
                comp["l_aux_row"] = comp["l_aux_row"] + r_aux / n
                comp["l_aux_col"] = comp["l_aux_col"] + c_aux / n
                comp["l_line_row"] = comp["l_line_row"] + r_line / n
                comp["l_line_col"] = comp["l_line_col"] + c_line / n
                if stage >= 3:
                    tgt = targets[b]
                    key = (take[b], hpad, wpad, scale)
                    if key not in grid_cache:
                        grid_cache[key] = build_grid(
                            tgt["row_seps"], tgt["col_seps"], (hpad, wpad))
                    _, probs = model.merge_net(
                        outs["p2"][b:b + 1], grid_cache[key], (hpad, wpad))
                    comp["l_merge"] = comp["l_merge"] + L.merge_loss_ohem(
                        probs, tgt["merge_labels"], cfg.ohem_pairs, cfg.ohem_pairs) / n

            try:
                bundle = L.total_loss(lam=cfg.loss_lambda, **comp)
            except TrainingAbortError as exc:
                exc.checkpoint_path = last_ckpt
                raise
            optimizer.zero_grad()
            bundle.total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            optimizer.step()
            step += 1
            for k, v in bundle.detach_floats().items():
                sums[k] = sums.get(k, 0.0) + v

        record = {k: v / epoch_iters for k, v in sums.items()}
        record.update({"epoch": epoch, "stage": stage, "lr": cfg.lr * factor})
        history.append(record)
        progress(f"epoch {epoch + 1}/{n_epochs} stage {stage} "
                 f"total {record['total']:.4f} lr {record['lr']:.2e}")
        last_ckpt = out_dir / f"epoch_{epoch + 1:03d}.pt"
        save_checkpoint(last_ckpt, model, cfg, epoch, stage, history)
        if cfg.keep_checkpoints > 0:
            old = sorted(out_dir.glob("epoch_*.pt"))[:-cfg.keep_checkpoints]
            for path in old:
                path.unlink()

    final = out_dir / "final.pt"
    save_checkpoint(final, model, cfg, n_epochs - 1, cfg.stages, history)
    return final
