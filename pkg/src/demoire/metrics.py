"""PSNR / SSIM evaluation and dataset-level reports."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F

from .losses import SsimParams, mse_loss, ssim_map
from .network import infer

PSNR_CAP = 100.0


def psnr(pred: torch.Tensor, gt: torch.Tensor, peak: float = 1.0) -> float:
    mse = float(mse_loss(pred.double(), gt.double()))
    if mse < 1e-10:
        return PSNR_CAP
    return 10.0 * math.log10(peak * peak / mse)


def ssim_index(pred, gt, params: SsimParams = SsimParams()):
    """Mean SSIM. Computed as ``1 - (1 - mean)`` so it is the exact complement of ``ssim_loss``."""
    return 1 - (1 - ssim_map(pred, gt, params).mean())


@dataclass
class MetricReport:
    mean_psnr: float
    mean_ssim: float
    per_image: list = field(default_factory=list)  # (id, psnr, ssim)
    count: int = 0
    split_label: str = ""
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records, split_label="", meta=None):
        records = sorted(records, key=lambda r: r[0])
        if not records:
            raise ValueError("cannot build a report from zero images")
        n = len(records)
        return cls(
            mean_psnr=math.fsum(r[1] for r in records) / n,
            mean_ssim=math.fsum(r[2] for r in records) / n,
            per_image=[list(r) for r in records],
            count=n,
            split_label=split_label,
            meta=dict(meta or {}),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text


def _pad_to_multiple(x, m=8):
    h, w = x.shape[-2:]
    ph, pw = (-h) % m, (-w) % m
    if ph == 0 and pw == 0:
        return x
    mode = "reflect" if ph < h and pw < w else "replicate"
    return F.pad(x, (0, pw, 0, ph), mode=mode)


def infer_padded(model, image: torch.Tensor) -> torch.Tensor:
    """Reflect-pad bottom/right to a multiple of 8, infer, crop back."""
    h, w = image.shape[-2:]
    return infer(model, _pad_to_multiple(image))[..., :h, :w]


def evaluate_dataset(model, dataset, params: SsimParams = SsimParams(), split_label="", pad=False) -> MetricReport:
    """Per-image PSNR/SSIM of the clamped prediction, then arithmetic means."""
    if len(dataset) == 0:
        raise ValueError("evaluate_dataset got an empty dataset")
    run = infer_padded if pad else infer
    model.eval()
    records = []
    for pair in dataset:
        pred = run(model, pair.moire)
        gt = pair.clean.to(pred.dtype)
        records.append((pair.id, psnr(pred, gt), float(ssim_index(pred.double(), gt.double(), params))))
    return MetricReport.from_records(records, split_label)


def format_table1(rows) -> str:
    """Render ``(data_size, label, psnr, ssim)`` rows as the Table-1 layout."""
    lines = [f"{'Data size':>9}  {'Data':<16} {'PSNR':>9} {'SSIM':>8}"]
    for size, label, p, s in rows:
        lines.append(f"{size:>9}  {label:<16} {p:>9.4f} {s:>8.4f}")
    return "\n".join(lines)
