"""Adam training loop with a geometric learning-rate schedule."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..data import epoch_batches, load_pairs, split_dataset
from ..losses import SsimParams, downscale_targets, total_loss
from ..metrics import evaluate_dataset
from ..network import build_model
from .checkpoint import load_checkpoint, load_optimizer_state, save_checkpoint
from .config import TrainConfig

log = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class NonFiniteLossError(RuntimeError):
    pass


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """``lr_start * (lr_end / lr_start) ** (e / (E - 1))``; endpoints are hit exactly."""
    E = config.epochs
    if not 0 <= epoch <= E - 1:
        raise ValueError(f"epoch {epoch} outside [0, {E - 1}]")
    if E == 1 or epoch == 0:
        return config.lr_start
    if epoch == E - 1:
        return config.lr_end
    return config.lr_start * (config.lr_end / config.lr_start) ** (epoch / (E - 1))


@dataclass
class TrainResult:
    model: torch.nn.Module
    log: list = field(default_factory=list)
    best_path: Path | None = None
    final_path: Path | None = None
    last_path: Path | None = None
    split_ids: dict = field(default_factory=dict)


def resolve_splits(config: TrainConfig):
    if config.data_root is None:
        raise ValueError("config has no data_root")
    pairs = load_pairs(config.data_root)
    n = len(pairs)
    train_n = config.train_n if config.train_n is not None else math.ceil(0.7 * n)
    val_n = config.val_n if config.val_n is not None else n - train_n
    return split_dataset(pairs, train_n, val_n, config.seed)


def compute_loss(model, moire, clean, config: TrainConfig, params=SsimParams()):
    out = model(moire)
    deep = None
    if model.config.deep_supervision:
        deep = list(zip(out.hypervision, downscale_targets(clean)))
    return total_loss(out.final, clean, params, deep=deep, weights=config.loss_weights)


def train(config: TrainConfig, train_set=None, val_set=None, resume=None, max_epochs=None) -> TrainResult:
    """Train per ``config``; datasets default to the seeded split of ``config.data_root``.

    ``resume`` points at a checkpoint written by a previous call; training picks
    up at the following epoch. ``max_epochs`` caps how many epochs this call runs.
    """
    if train_set is None:
        train_set, val_set = resolve_splits(config)
    val_set = val_set or []
    if not train_set:
        raise ValueError("training split is empty")

    ckpt_dir = Path(config.checkpoint_dir)
    try:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create checkpoint dir {ckpt_dir}: {e}") from e

    torch.manual_seed(config.seed)
    start_epoch = 0
    best_psnr = -math.inf
    if resume is not None:
        model, sidecar = load_checkpoint(resume)
        start_epoch = sidecar["epoch"] + 1
        best_psnr = sidecar.get("best_val_psnr", -math.inf) or -math.inf
    else:
        model = build_model(config.model, config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr_start, betas=ADAM_BETAS, eps=ADAM_EPS)
    if resume is not None:
        load_optimizer_state(resume, optimizer)

    result = TrainResult(
        model,
        split_ids={"train": sorted(p.id for p in train_set), "val": sorted(p.id for p in val_set)},
    )
    log_path = ckpt_dir / "run_log.jsonl"
    end_epoch = config.epochs if max_epochs is None else min(config.epochs, start_epoch + max_epochs)

    for epoch in range(start_epoch, end_epoch):
        t0 = time.perf_counter()
        lr = lr_at_epoch(config, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        sums = {"mse": 0.0, "ssim_loss": 0.0, "sobel_loss": 0.0, "total": 0.0}
        steps = []
        batches = epoch_batches(
            train_set, epoch, config.seed, config.batch_size, config.patch_size, config.augment
        )
        for step, (moire, clean) in enumerate(batches):
            optimizer.zero_grad(set_to_none=True)
            parts = compute_loss(model, moire, clean, config)
            if not torch.isfinite(parts.total):
                raise NonFiniteLossError(f"non-finite loss at epoch {epoch}, step {step}: {parts.item()}")
            parts.total.backward()
            optimizer.step()
            values = parts.item()
            for k in sums:
                sums[k] += values[k]
            steps.append(values["total"])
        train_loss = {k: v / len(steps) for k, v in sums.items()}

        record = {"epoch": epoch, "lr": lr, "train_loss": train_loss, "step_totals": steps, "val_report": None}
        is_last = epoch == config.epochs - 1
        if val_set and ((epoch + 1) % config.eval_every == 0 or is_last):
            report = evaluate_dataset(model, val_set, split_label="val")
            record["val_report"] = {"mean_psnr": report.mean_psnr, "mean_ssim": report.mean_ssim,
                                    "count": report.count}
            if report.mean_psnr > best_psnr:
                best_psnr = report.mean_psnr
                result.best_path = save_checkpoint(
                    ckpt_dir / "best", model, config.seed, epoch, metrics=record["val_report"],
                    extra={"best_val_psnr": best_psnr, "train_config": config.to_dict()},
                )
        record["wall_time"] = time.perf_counter() - t0
        result.log.append(record)
        with open(log_path, "a") as f:
            f.write(json.dumps(record) + "\n")
        vr = record["val_report"]
        log.info(
            "epoch %4d  lr %.2e  loss %.5f (mse %.5f ssim %.5f sobel %.5f)%s",
            epoch, lr, train_loss["total"], train_loss["mse"], train_loss["ssim_loss"],
            train_loss["sobel_loss"],
            f"  val psnr {vr['mean_psnr']:.3f} ssim {vr['mean_ssim']:.4f}" if vr else "",
        )

        extra = {"best_val_psnr": best_psnr if math.isfinite(best_psnr) else None,
                 "train_config": config.to_dict()}
        result.last_path = save_checkpoint(
            ckpt_dir / "last", model, config.seed, epoch, metrics=train_loss, optimizer=optimizer, extra=extra
        )
        if is_last:
            result.final_path = save_checkpoint(
                ckpt_dir / "final", model, config.seed, epoch, metrics=vr or train_loss,
                optimizer=optimizer, extra=extra,
            )
    if result.best_path is None and (ckpt_dir / "best.pt").exists():
        result.best_path = ckpt_dir / "best.pt"
    return result


def evaluate_checkpoint(ckpt, data_dir, pad=False):
    """Rebuild from the sidecar, load weights, evaluate every pair under ``data_dir``."""
    model, sidecar = load_checkpoint(ckpt)
    report = evaluate_dataset(model, load_pairs(data_dir), split_label=str(data_dir), pad=pad)
    report.meta = {"parameter_count": sidecar["parameter_count"], "epoch": sidecar["epoch"],
                   "checkpoint": str(ckpt)}
    return report
