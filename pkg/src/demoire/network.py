"""Multi-level hypervision net: coordinate head, 3-level RCAB encoder/decoder,
CBAM skip connections, three hypervision heads and the fusion conv."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import CBAM, RCAB, AttentionBlock, AttentionParams, ChannelAttention, ConfigError, PixelShuffle, conv3x3, coord_concat


class ShapeError(ValueError):
    """Input or intermediate tensor shape violates a contract."""


@dataclass(frozen=True)
class ModelConfig:
    level_widths: tuple = (16, 32, 64)
    rcabs_per_level: int = 2
    ca_reduction: int = 8
    cbam_reduction: int = 8
    cbam_spatial_kernel: int = 7
    use_coord: bool = True
    use_cbam_skips: bool = True
    use_channel_attention: bool = True
    deep_supervision: bool = False

    def __post_init__(self):
        object.__setattr__(self, "level_widths", tuple(self.level_widths))
        if len(self.level_widths) != 3:
            raise ConfigError(f"level_widths needs 3 entries, got {self.level_widths}")
        if any(not isinstance(w, int) or w < 4 for w in self.level_widths):
            raise ConfigError(f"every width must be an integer >= 4, got {self.level_widths}")
        for name in ("rcabs_per_level", "ca_reduction", "cbam_reduction"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        # AttentionParams validates the spatial kernel
        AttentionParams(self.cbam_reduction, self.cbam_spatial_kernel)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["level_widths"] = list(self.level_widths)
        return d


class ForwardOutput(NamedTuple):
    final: torch.Tensor
    hypervision: tuple  # predictions at 1/4, 1/2 and full resolution


def fuse_hypervision(preds, image: torch.Tensor, conv: nn.Conv2d) -> torch.Tensor:
    """Upsample the coarse predictions bilinearly, stack with the input and fuse.

    Channel order of the 12-channel stack: up(p0), up(p1), p2, input.
    """
    h, w = image.shape[-2:]
    for k, p in enumerate(preds):
        scale = 2 ** (2 - k)
        if p.shape[-2] * scale != h or p.shape[-1] * scale != w:
            raise ShapeError(
                f"hypervision[{k}] is {tuple(p.shape[-2:])}, expected {(h // scale, w // scale)}"
            )
    ups = [F.interpolate(p, size=(h, w), mode="bilinear", align_corners=False) for p in preds[:2]]
    return conv(torch.cat([*ups, preds[2], image], dim=1))


class HyperVisionNet(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        cfg = config
        w = cfg.level_widths
        ca = AttentionParams(cfg.ca_reduction)
        cb = AttentionParams(cfg.cbam_reduction, cfg.cbam_spatial_kernel)
        n = cfg.rcabs_per_level
        attn = cfg.use_channel_attention

        def rcabs(ch):
            return nn.Sequential(*(RCAB(ch, ca, attn) for _ in range(n)))

        in_ch = 5 if cfg.use_coord else 3
        self.head = nn.Sequential(conv3x3(in_ch, w[0]), conv3x3(w[0], w[0]))

        nxt = (w[1], w[2], w[2])
        self.enc = nn.ModuleList(rcabs(w[i]) for i in range(3))
        self.down = nn.ModuleList(conv3x3(w[i], nxt[i], stride=2) for i in range(3))
        self.bottleneck = rcabs(w[2])
        self.skips = nn.ModuleList(
            (CBAM(w[i], cb) if cfg.use_cbam_skips else nn.Identity()) for i in range(3)
        )

        # decoder modules are indexed by level: dec_*[i] works at the level-i scale
        self.up = nn.ModuleList(
            nn.Sequential(conv3x3(nxt[i], 4 * w[i]), PixelShuffle(2)) for i in range(3)
        )
        self.merge = nn.ModuleList(conv3x3(2 * w[i], w[i]) for i in range(3))
        self.dec = nn.ModuleList(rcabs(w[i]) for i in range(3))
        self.hv_heads = nn.ModuleList(conv3x3(w[i], 3) for i in range(3))
        self.fusion = conv3x3(12, 3)

    def forward(self, x: torch.Tensor) -> ForwardOutput:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected N x 3 x H x W input, got {tuple(x.shape)}")
        for name, size in (("height", x.shape[2]), ("width", x.shape[3])):
            if size % 8:
                raise ShapeError(f"input {name} {size} is not divisible by 8")

        h = coord_concat(x) if self.config.use_coord else x
        h = self.head(h)
        skips = []
        for i in range(3):
            h = self.enc[i](h)
            skips.append(self.skips[i](h))
            h = self.down[i](h)
        h = self.bottleneck(h)

        preds = [None, None, None]
        for i in (2, 1, 0):
            h = self.up[i](h)
            h = self.merge[i](torch.cat([h, skips[i]], dim=1))
            h = self.dec[i](h)
            preds[i] = self.hv_heads[i](h)
        # preds[i] sits at scale 1/2^i; hypervision is ordered coarse to fine
        hv = (preds[2], preds[1], preds[0])
        return ForwardOutput(fuse_hypervision(hv, x, self.fusion), hv)


RESIDUAL_INIT_SCALE = 0.1


def init_weights(model: nn.Module, seed: int) -> None:
    """Seeded fan-in normal init, zero biases.

    Convs feeding a ReLU get He gain sqrt(2), linear convs gain 1, and each
    RCAB's residual fuse conv is further scaled by ``RESIDUAL_INIT_SCALE`` so
    the activation scale stays bounded through the deep residual stack.
    Reduce weights of the attention MLPs are drawn half-normal: they see pooled
    descriptors that are nonnegative (post-ReLU mean) or positive in practice
    (spatial max), and a sign-symmetric draw leaves narrow bottlenecks with
    dead hidden units from step 0.
    """
    gen = torch.Generator().manual_seed(seed)
    relu_fed = set()
    residual = set()
    folded = set()
    for name, m in model.named_modules():
        if isinstance(m, AttentionBlock):
            relu_fed.add(m.conv.weight)
        elif isinstance(m, ChannelAttention):
            relu_fed.add(m.reduce.weight)
            folded.add(m.reduce.weight)
        elif isinstance(m, CBAM):
            relu_fed.add(m.mlp[0].weight)
            folded.add(m.mlp[0].weight)
        elif isinstance(m, RCAB):
            residual.add(m.fuse.weight)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.zero_()
                continue
            gain = math.sqrt(2.0) if p in relu_fed else 1.0
            if p in residual:
                gain *= RESIDUAL_INIT_SCALE
            std = gain / math.sqrt(p[0].numel())
            w = torch.randn(p.shape, generator=gen, dtype=p.dtype) * std
            p.copy_(w.abs() if p in folded else w)


def build_model(config: ModelConfig = ModelConfig(), seed: int = 0) -> HyperVisionNet:
    model = HyperVisionNet(config)
    init_weights(model, seed)
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


@torch.no_grad()
def infer(model: HyperVisionNet, image: torch.Tensor) -> torch.Tensor:
    """Final prediction clamped to [0, 1]. Accepts ``C x H x W`` or a batch."""
    single = image.dim() == 3
    if single:
        image = image.unsqueeze(0)
    out = model(image).final.clamp(0.0, 1.0)
    return out[0] if single else out


def layer_table(model: nn.Module) -> list[tuple[str, tuple, int]]:
    return [(name, tuple(p.shape), p.numel()) for name, p in model.named_parameters()]
