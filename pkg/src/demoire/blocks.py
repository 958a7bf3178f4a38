"""Differentiable building blocks of the hypervision network.

Coordinate channels, squeeze-excitation channel attention, CBAM, the
conv/ReLU/attention unit, the residual channel attention block (RCAB) and
a pixel shuffle with pinned channel ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


class ConfigError(ValueError):
    """Invalid model/block configuration or inconsistent weights."""


@dataclass(frozen=True)
class AttentionParams:
    reduction_ratio: int = 8
    spatial_kernel: int = 7

    def __post_init__(self):
        if self.reduction_ratio < 1:
            raise ConfigError(f"reduction_ratio must be >= 1, got {self.reduction_ratio}")
        if self.spatial_kernel < 1 or self.spatial_kernel % 2 == 0:
            raise ConfigError(f"spatial_kernel must be odd and positive, got {self.spatial_kernel}")

    def hidden(self, channels: int) -> int:
        return max(1, channels // self.reduction_ratio)


def coord_channels(height: int, width: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Return a ``1 x 2 x H x W`` map of x (channel 0) and y (channel 1) in [-1, 1].

    Index ``i`` on an axis of length ``n`` maps to ``2 i / (n - 1) - 1``; a
    length-1 axis maps to 0.
    """
    if height < 1 or width < 1:
        raise ValueError(f"coordinate grid needs positive dims, got {height}x{width}")

    def axis(n):
        if n == 1:
            return torch.zeros(1, dtype=dtype, device=device)
        return 2.0 * torch.arange(n, dtype=dtype, device=device) / (n - 1) - 1.0

    ys, xs = torch.meshgrid(axis(height), axis(width), indexing="ij")
    return torch.stack([xs, ys]).unsqueeze(0)


def coord_concat(x: torch.Tensor) -> torch.Tensor:
    """Append the two coordinate channels after the channels of ``x``."""
    if x.dim() != 4:
        raise ValueError(f"expected N x C x H x W input, got shape {tuple(x.shape)}")
    n, _, h, w = x.shape
    coords = coord_channels(h, w, dtype=x.dtype, device=x.device).expand(n, -1, -1, -1)
    return torch.cat([x, coords], dim=1)


def pixel_shuffle(x: torch.Tensor, r: int) -> torch.Tensor:
    """Rearrange ``N x (r^2 C) x H x W`` into ``N x C x rH x rW``.

    ``out[n, c, h*r + i, w*r + j] = x[n, c*r*r + i*r + j, h, w]``.
    """
    if r < 1:
        raise ValueError(f"upscale factor must be >= 1, got {r}")
    n, c, h, w = x.shape
    if c % (r * r):
        raise ValueError(f"channel count {c} not divisible by r^2 = {r * r}")
    out_c = c // (r * r)
    x = x.reshape(n, out_c, r, r, h, w)
    x = x.permute(0, 1, 4, 2, 5, 3)
    return x.reshape(n, out_c, h * r, w * r)


def pixel_unshuffle(x: torch.Tensor, r: int) -> torch.Tensor:
    """Exact inverse of :func:`pixel_shuffle`."""
    if r < 1:
        raise ValueError(f"downscale factor must be >= 1, got {r}")
    n, c, h, w = x.shape
    if h % r or w % r:
        raise ValueError(f"spatial size {h}x{w} not divisible by {r}")
    x = x.reshape(n, c, h // r, r, w // r, r)
    x = x.permute(0, 1, 3, 5, 2, 4)
    return x.reshape(n, c * r * r, h // r, w // r)


def conv3x3(in_ch, out_ch, stride=1):
    return nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=True)


class PixelShuffle(nn.Module):
    def __init__(self, r: int):
        super().__init__()
        self.r = r

    def forward(self, x):
        return pixel_shuffle(x, self.r)


class ChannelAttention(nn.Module):
    """gap -> 1x1 reduce -> ReLU -> 1x1 expand -> sigmoid, used as a per-channel gate."""

    def __init__(self, channels: int, params: AttentionParams = AttentionParams()):
        super().__init__()
        hidden = params.hidden(channels)
        self.reduce = nn.Conv2d(channels, hidden, 1)
        self.expand = nn.Conv2d(hidden, channels, 1)

    def gate(self, x):
        _check_channels(x, self.reduce.in_channels)
        s = x.mean(dim=(2, 3), keepdim=True)
        return torch.sigmoid(self.expand(F.relu(self.reduce(s))))

    def forward(self, x):
        return x * self.gate(x)


class CBAM(nn.Module):
    """Channel gate (shared MLP over avg+max pools), then spatial gate."""

    def __init__(self, channels: int, params: AttentionParams = AttentionParams()):
        super().__init__()
        hidden = params.hidden(channels)
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(),
            nn.Conv2d(hidden, channels, 1),
        )
        k = params.spatial_kernel
        self.spatial = nn.Conv2d(2, 1, k, padding=k // 2)

    def channel_gate(self, x):
        _check_channels(x, self.mlp[0].in_channels)
        avg = x.mean(dim=(2, 3), keepdim=True)
        mx = x.amax(dim=(2, 3), keepdim=True)
        return torch.sigmoid(self.mlp(avg) + self.mlp(mx))

    def spatial_gate(self, x):
        desc = torch.cat([x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1)
        return torch.sigmoid(self.spatial(desc))

    def forward(self, x):
        x = x * self.channel_gate(x)
        return x * self.spatial_gate(x)


class AttentionBlock(nn.Module):
    """conv3x3 -> ReLU -> channel attention. ``attention=False`` drops the gate."""

    def __init__(self, channels: int, params: AttentionParams = AttentionParams(), attention=True):
        super().__init__()
        self.conv = conv3x3(channels, channels)
        self.ca = ChannelAttention(channels, params) if attention else nn.Identity()

    def forward(self, x):
        return self.ca(F.relu(self.conv(x)))


class RCAB(nn.Module):
    """Three chained attention blocks, dense concat, 1x1 fuse, identity residual."""

    def __init__(self, channels: int, params: AttentionParams = AttentionParams(), attention=True):
        super().__init__()
        self.units = nn.ModuleList(AttentionBlock(channels, params, attention) for _ in range(3))
        self.fuse = nn.Conv2d(3 * channels, channels, 1)

    def forward(self, x):
        feats = []
        h = x
        for unit in self.units:
            h = unit(h)
            feats.append(h)
        return x + self.fuse(torch.cat(feats, dim=1))


def _check_channels(x, expected):
    if x.shape[1] != expected:
        raise ConfigError(f"block built for {expected} channels received {x.shape[1]}")
