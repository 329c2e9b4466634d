"""Convolutional feature extraction and per-axis context enhancement.

The backbone is a small residual net with a feature-pyramid top-down merge
producing a stride-4 map.  Each axis branch then compresses the map along
its fixed axis and propagates context slice-by-slice in both directions
before projecting to a high-resolution feature map.  Group normalization is
used throughout so results do not depend on batch composition.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError


def _gn(channels: int) -> nn.GroupNorm:
    for g in (8, 4, 2, 1):
        if channels % g == 0:
            return nn.GroupNorm(g, channels)
    return nn.GroupNorm(1, channels)


class ResidualBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.n1 = _gn(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.n2 = _gn(c_out)
        self.skip = None
        if stride != 1 or c_in != c_out:
            self.skip = nn.Sequential(nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                                      _gn(c_out))

    def forward(self, x):
        out = F.relu(self.n1(self.conv1(x)))
        out = self.n2(self.conv2(out))
        sc = x if self.skip is None else self.skip(x)
        return F.relu(out + sc)


class ConvBackbone(nn.Module):
    """Residual stages at strides 2/4/8/16 merged top-down into a stride-4 map."""

    def __init__(self, depth: int = 1, p2_channels: int = 64):
        super().__init__()
        self.p2_channels = p2_channels
        widths = (32, 48, 64, 96)
        self.stem = nn.Sequential(
            nn.Conv2d(3, widths[0], 3, stride=2, padding=1, bias=False),
            _gn(widths[0]), nn.ReLU(inplace=True),
        )

        def stage(c_in, c_out):
            blocks = [ResidualBlock(c_in, c_out, stride=2)]
            blocks += [ResidualBlock(c_out, c_out) for _ in range(depth - 1)]
            return nn.Sequential(*blocks)

        self.stage1 = stage(widths[0], widths[1])
        self.stage2 = stage(widths[1], widths[2])
        self.stage3 = stage(widths[2], widths[3])
        self.lat1 = nn.Conv2d(widths[1], p2_channels, 1)
        self.lat2 = nn.Conv2d(widths[2], p2_channels, 1)
        self.lat3 = nn.Conv2d(widths[3], p2_channels, 1)
        self.out_conv = nn.Conv2d(p2_channels, p2_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h % 32 or w % 32:
            raise ShapeError(f"input size {h}x{w} must be divisible by 32")
        c1 = self.stem(x)
        c2 = self.stage1(c1)
        c3 = self.stage2(c2)
        c4 = self.stage3(c3)
        p4 = self.lat3(c4)
        p3 = self.lat2(c3) + F.interpolate(p4, size=c3.shape[-2:], mode="nearest")
        p2 = self.lat1(c2) + F.interpolate(p3, size=c2.shape[-2:], mode="nearest")
        return self.out_conv(p2)


class ScnnPass(nn.Module):
    """One directional slice-by-slice propagation over the width dimension.

    Each width slice goes through a tall convolution and a ReLU before being
    added into the next slice.
    """

    def __init__(self, channels: int, kernel: int = 9, reverse: bool = False):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, (kernel, 1), padding=(kernel // 2, 0))
        self.reverse = reverse

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        w = x.shape[-1]
        order = range(w - 1, -1, -1) if self.reverse else range(w)
        out = [None] * w
        prev = None
        for i in order:
            cur = x[:, :, :, i:i + 1]
            if prev is not None:
                cur = cur + F.relu(self.conv(prev))
            out[i] = cur
            prev = out[i]
        return torch.cat(out, dim=-1)


class AxisEnhancer(nn.Module):
    """Down-sample along the fixed axis and propagate context both ways.

    Works in the row frame: one 3x3 conv, three (1x2 max-pool, 3x3 conv,
    ReLU) blocks shrinking width by 8, then two cascaded directional passes.
    The column branch feeds a transposed map through the same structure.
    """

    def __init__(self, channels: int = 64, scnn_kernel: int = 9):
        super().__init__()
        self.pre = nn.Conv2d(channels, channels, 3, padding=1)
        self.down = nn.ModuleList()
        for _ in range(3):
            self.down.append(nn.Sequential(
                nn.MaxPool2d((1, 2)),
                nn.Conv2d(channels, channels, 3, padding=1),
                _gn(channels), nn.ReLU(inplace=True),
            ))
        self.scnn_fwd = ScnnPass(channels, scnn_kernel, reverse=False)
        self.scnn_bwd = ScnnPass(channels, scnn_kernel, reverse=True)

    def forward(self, p2_frame: torch.Tensor) -> torch.Tensor:
        if p2_frame.shape[-1] < 8:
            raise ShapeError("feature map too narrow for three 1x2 poolings")
        x = self.pre(p2_frame)
        for block in self.down:
            x = block(x)
        x = self.scnn_fwd(x)
        x = self.scnn_bwd(x)
        return x


class HighResProjector(nn.Module):
    """1x1 channel expansion followed by bilinear up-sampling to image size."""

    def __init__(self, in_channels: int = 64, out_channels: int = 256):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, e: torch.Tensor, out_hw) -> torch.Tensor:
        """Full high-resolution map (B, C', H, W); use sparingly, it is big."""
        return F.interpolate(self.conv(e), size=tuple(out_hw), mode="bilinear",
                             align_corners=False)

    def sample_columns(self, e: torch.Tensor, cols, out_hw) -> torch.Tensor:
        """Columns of the full map, computed without materializing it.

        Equals forward(e, out_hw)[:, :, :, cols] because bilinear
        interpolation is separable and the 1x1 conv is pointwise.
        """
        h_out, w_out = int(out_hw[0]), int(out_hw[1])
        x = self.conv(e)
        w_in = x.shape[-1]
        scale = w_out / w_in
        cols = torch.as_tensor(list(cols), dtype=torch.float64)
        u = (cols + 0.5) / scale - 0.5
        i0 = torch.floor(u).to(torch.long)
        lam = (u - i0.to(u.dtype)).to(x.dtype)
        left = i0.clamp(0, w_in - 1)
        right = (i0 + 1).clamp(0, w_in - 1)
        needed = torch.unique(torch.cat([left, right]))
        pos = {int(c): k for k, c in enumerate(needed)}
        gathered = x[:, :, :, needed]
        lifted = F.interpolate(gathered, size=(h_out, gathered.shape[-1]),
                               mode="bilinear", align_corners=False)
        li = torch.tensor([pos[int(c)] for c in left])
        ri = torch.tensor([pos[int(c)] for c in right])
        lam = lam.view(1, 1, 1, -1)
        return lifted[:, :, :, li] * (1.0 - lam) + lifted[:, :, :, ri] * lam
