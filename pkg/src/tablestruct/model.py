"""The assembled network: backbone, two split branches, merge head."""

from __future__ import annotations

import torch
import torch.nn as nn

from .backbone import ConvBackbone
from .config import Config
from .core import AXIS_COL, AXIS_ROW
from .merge import MergeNet
from .split import SplitBranch


class TableModel(nn.Module):
    def __init__(self, config: Config | None = None):
        super().__init__()
        self.config = config or Config()
        c = self.config
        self.backbone = ConvBackbone(depth=c.backbone_depth, p2_channels=c.p2_channels)
        branch_kwargs = dict(
            in_channels=c.p2_channels,
            hr_channels=c.high_res_channels,
            k_points=c.k_points,
            topk=c.topk,
            ref_thresh=c.ref_thresh,
            nms_window=c.nms_window,
            decoder_layers=c.decoder_layers,
            heads=c.heads,
            ffn_dim=c.ffn_dim,
        )
        self.row_branch = SplitBranch(AXIS_ROW, **branch_kwargs)
        self.col_branch = SplitBranch(AXIS_COL, **branch_kwargs)
        self.merge_net = MergeNet(in_channels=c.p2_channels)

    def forward(self, images: torch.Tensor) -> dict:
        """Backbone plus both split branches on a padded image batch.

        `images` is (B, 3, H, W) float with H, W divisible by 32.  Returns
        frame-space outputs per branch; the column branch's frame height is
        the image width.
        """
        p2 = self.backbone(images)
        return {
            "p2": p2,
            "row": self.row_branch(p2),
            "col": self.col_branch(p2),
        }

    @staticmethod
    def normalize_images(images_uint8: torch.Tensor) -> torch.Tensor:
        """uint8 (B, 3, H, W) -> standardized float."""
        return (images_uint8.float() / 255.0 - 0.5) / 0.25
