"""Composite training objective: MSE + (1 - SSIM) + Sobel edge MSE."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn.functional as F

from .network import ShapeError


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"SSIM window must be odd and positive, got {self.window}")
        if self.sigma <= 0:
            raise ValueError("SSIM sigma must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


class LossBreakdown(NamedTuple):
    mse: torch.Tensor
    ssim_loss: torch.Tensor
    sobel_loss: torch.Tensor
    total: torch.Tensor

    def item(self) -> dict:
        return {k: float(v.detach()) for k, v in self._asdict().items()}


def _check_pair(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} and target {tuple(gt.shape)} differ")


def _pad(x, p):
    # reflect needs p < size; tiny maps (deep supervision at 1/4 scale) fall back to replicate
    mode = "reflect" if p < min(x.shape[-2:]) else "replicate"
    return F.pad(x, (p, p, p, p), mode=mode)


def gaussian_window(size: int, sigma: float, dtype=torch.float64) -> torch.Tensor:
    """Normalized 2-D Gaussian window (separable outer product)."""
    ax = torch.arange(size, dtype=torch.float64) - size // 2
    g = torch.exp(-(ax**2) / (2 * sigma**2))
    g = g / g.sum()
    w = torch.outer(g, g)
    return (w / w.sum()).to(dtype)


def _filter(x, window):
    c = x.shape[1]
    k = window.to(dtype=x.dtype, device=x.device).expand(c, 1, *window.shape)
    return F.conv2d(_pad(x, window.shape[-1] // 2), k, groups=c)


def ssim_map(pred: torch.Tensor, gt: torch.Tensor, params: SsimParams = SsimParams()) -> torch.Tensor:
    _check_pair(pred, gt)
    win = gaussian_window(params.window, params.sigma)
    mu_x = _filter(pred, win)
    mu_y = _filter(gt, win)
    sxx = _filter(pred * pred, win) - mu_x * mu_x
    syy = _filter(gt * gt, win) - mu_y * mu_y
    sxy = _filter(pred * gt, win) - mu_x * mu_y
    c1, c2 = params.c1, params.c2
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim_loss(pred, gt, params: SsimParams = SsimParams()) -> torch.Tensor:
    return 1 - ssim_map(pred, gt, params).mean()


def mse_loss(pred, gt) -> torch.Tensor:
    _check_pair(pred, gt)
    return ((gt - pred) ** 2).mean()


_SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]], dtype=torch.float64)


def sobel_edges(x: torch.Tensor) -> torch.Tensor:
    """``N x 2C x H x W``: all Gx responses, then all Gy responses."""
    c = x.shape[1]
    gx = _SOBEL_X.to(dtype=x.dtype, device=x.device)
    padded = _pad(x, 1)
    ex = F.conv2d(padded, gx.expand(c, 1, 3, 3), groups=c)
    ey = F.conv2d(padded, gx.t().expand(c, 1, 3, 3), groups=c)
    return torch.cat([ex, ey], dim=1)


def sobel_loss(pred, gt) -> torch.Tensor:
    _check_pair(pred, gt)
    return ((sobel_edges(gt) - sobel_edges(pred)) ** 2).mean()


def _weighted_sum(pred, gt, params, weights):
    mse = mse_loss(pred, gt)
    ssim = ssim_loss(pred, gt, params)
    sob = sobel_loss(pred, gt)
    a, b, c = weights
    return mse, ssim, sob, a * mse + b * ssim + c * sob


def total_loss(
    pred: torch.Tensor,
    gt: torch.Tensor,
    params: SsimParams = SsimParams(),
    deep=None,
    weights=(1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Sum of the three terms on the final prediction.

    ``deep`` is an optional iterable of ``(aux_pred, aux_gt)`` pairs whose own
    weighted sums are added into ``total``; the reported components stay the
    final-output terms.
    """
    mse, ssim, sob, total = _weighted_sum(pred, gt, params, weights)
    for aux_pred, aux_gt in deep or ():
        total = total + _weighted_sum(aux_pred, aux_gt, params, weights)[3]
    return LossBreakdown(mse, ssim, sob, total)


def downscale_targets(gt: torch.Tensor):
    """Bilinear 1/4, 1/2 and full-size targets matching the hypervision outputs."""
    h, w = gt.shape[-2:]
    out = []
    for f in (4, 2):
        out.append(F.interpolate(gt, size=(h // f, w // f), mode="bilinear", align_corners=False, antialias=True))
    out.append(gt)
    return out
