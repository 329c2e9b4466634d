"""Flat key-value configuration shared by the model, training and inference.

Config files are TOML with dotted keys (`backbone.p2_channels = 64`); the
documented keys map onto the fields of :class:`Config` below.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import InvalidInputError


@dataclass
class Config:
    # backbone.*
    backbone_depth: int = 1
    p2_channels: int = 64
    # split.*
    high_res_channels: int = 256
    k_points: int = 15
    topk: int = 100
    ref_thresh: float = 0.05
    nms_window: int = 7
    decoder_layers: int = 3
    heads: int = 16
    ffn_dim: int = 1024
    infer_thresh: float = 0.5
    # merge.*
    merge_thresh: float = 0.5
    # loss.*
    loss_lambda: float = 0.2
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    pixels_per_class: int = 1024
    ohem_pairs: int = 64
    # train.*
    stage_epochs: int = 20
    stages: int = 3
    batch_size: int = 16
    lr: float = 1e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 5e-4
    poly_decay_power: float = 0.9
    rescale_shorter_side: tuple = (416, 512, 608, 704, 800)
    epoch_iters: int = 0           # 0 = one pass over the training split
    lr_schedule_scope: str = "all"  # "all" spans every stage, "stage" resets
    matching: str = "prior"         # "prior" or "plain" (ablation)
    keep_checkpoints: int = 3       # per-epoch checkpoints kept besides final.pt
    seed: int = 0
    data_dir: str = ""
    out_dir: str = "runs/default"
    # infer.*
    infer_size: int = 1024
    resize_mode: str = "longer"     # "longer", "both", or "shorter" (desk-scale runs)
    # eval.*
    eval_iou: float = 0.6
    ignore_empty: bool = False

    def validate(self):
        if self.stage_epochs < 1:
            raise InvalidInputError("train.stage_epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("train.batch_size must be >= 1")
        for s in self.rescale_shorter_side:
            if s % 32:
                raise InvalidInputError("every rescale size must be divisible by 32")
        if self.matching not in ("prior", "plain"):
            raise InvalidInputError("train.matching must be 'prior' or 'plain'")
        if self.resize_mode not in ("longer", "both", "shorter"):
            raise InvalidInputError("infer.resize_mode must be 'longer', 'both' or 'shorter'")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        d["rescale_shorter_side"] = list(self.rescale_shorter_side)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "betas" in kwargs:
            kwargs["betas"] = tuple(kwargs["betas"])
        if "rescale_shorter_side" in kwargs:
            kwargs["rescale_shorter_side"] = tuple(kwargs["rescale_shorter_side"])
        return cls(**kwargs).validate()


DOTTED_KEYS = {
    "backbone.depth": "backbone_depth",
    "backbone.p2_channels": "p2_channels",
    "split.high_res_channels": "high_res_channels",
    "split.k_points": "k_points",
    "split.topk": "topk",
    "split.ref_thresh": "ref_thresh",
    "split.nms_window": "nms_window",
    "split.decoder_layers": "decoder_layers",
    "split.heads": "heads",
    "split.ffn_dim": "ffn_dim",
    "split.infer_thresh": "infer_thresh",
    "merge.thresh": "merge_thresh",
    "loss.lambda": "loss_lambda",
    "loss.focal_alpha": "focal_alpha",
    "loss.focal_beta": "focal_beta",
    "loss.pixels_per_class": "pixels_per_class",
    "loss.ohem_pairs": "ohem_pairs",
    "train.stage_epochs": "stage_epochs",
    "train.stages": "stages",
    "train.batch_size": "batch_size",
    "train.lr": "lr",
    "train.betas": "betas",
    "train.eps": "eps",
    "train.weight_decay": "weight_decay",
    "train.poly_decay_power": "poly_decay_power",
    "train.rescale_shorter_side": "rescale_shorter_side",
    "train.epoch_iters": "epoch_iters",
    "train.lr_schedule_scope": "lr_schedule_scope",
    "train.matching": "matching",
    "train.keep_checkpoints": "keep_checkpoints",
    "train.seed": "seed",
    "train.data_dir": "data_dir",
    "train.out_dir": "out_dir",
    "infer.size": "infer_size",
    "infer.resize_mode": "resize_mode",
    "eval.iou": "eval_iou",
    "eval.ignore_empty": "ignore_empty",
}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config(path) -> Config:
    """Read a TOML config file of dotted keys into a Config."""
    with open(Path(path), "rb") as f:
        raw = _flatten(tomllib.load(f))
    kwargs = {}
    for dotted, value in raw.items():
        if dotted not in DOTTED_KEYS:
            raise InvalidInputError(f"unknown config key: {dotted}")
        kwargs[DOTTED_KEYS[dotted]] = value
    return Config.from_dict(kwargs)
