"""Four-variant ablation: no coordinate channels, no skip CBAM, no channel attention, full."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..metrics import evaluate_dataset
from ..network import build_model, count_parameters
from .config import TrainConfig, config_diff
from .training import resolve_splits, train

VARIANTS = (
    ("without CCL", "no_coord", {"use_coord": False}),
    ("without CBAM", "no_cbam", {"use_cbam_skips": False}),
    ("without channel attention", "no_channel_attention", {"use_channel_attention": False}),
    ("Our Proposed Model", "proposed", {}),
)


@dataclass
class AblationRow:
    label: str
    train_psnr: float
    train_ssim: float
    val_psnr: float | None
    val_ssim: float | None
    parameter_count: int = 0


@dataclass
class AblationReport:
    rows: list
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rows": [asdict(r) for r in self.rows], "meta": self.meta}

    def table(self) -> str:
        return format_table2(
            (r.label, r.train_psnr, r.train_ssim, r.val_psnr, r.val_ssim) for r in self.rows
        )


def _fmt(v, spec):
    return format(v, spec) if v is not None else "-"


def format_table2(rows) -> str:
    """Rows of ``(label, train_psnr, train_ssim, val_psnr, val_ssim)``."""
    head = f"{'Ablation effect':<28}{'Train':^20}{'Validation':^20}"
    sub = f"{'':<28}{'PSNR':>10}{'SSIM':>10}{'PSNR':>10}{'SSIM':>10}"
    lines = [head, sub]
    for label, tp, ts, vp, vs in rows:
        lines.append(
            f"{label:<28}{_fmt(tp, '10.4f')}{_fmt(ts, '10.5f')}{_fmt(vp, '10.4f')}{_fmt(vs, '10.5f')}"
        )
    return "\n".join(lines)


def run_ablation(base: TrainConfig, out_dir) -> AblationReport:
    """Train the four variants on one shared split and report train/val metrics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set, val_set = resolve_splits(base)
    proposed = base.with_model(**VARIANTS[-1][2])

    rows, diffs, splits = [], {}, {}
    for label, slug, flags in VARIANTS:
        cfg = replace(base.with_model(**flags), checkpoint_dir=str(out_dir / slug))
        result = train(cfg, train_set, val_set)
        tr = evaluate_dataset(result.model, train_set, split_label="train")
        va = evaluate_dataset(result.model, val_set, split_label="val") if val_set else None
        rows.append(AblationRow(
            label, tr.mean_psnr, tr.mean_ssim,
            va.mean_psnr if va else None, va.mean_ssim if va else None,
            count_parameters(result.model),
        ))
        diffs[label] = {k: list(v) for k, v in config_diff(proposed.to_dict(), cfg.to_dict()).items()
                        if k != "checkpoint_dir"}
        splits[label] = result.split_ids

    report = AblationReport(rows, meta={
        "split_ids": splits[VARIANTS[-1][0]],
        "splits_shared": all(s == splits[VARIANTS[-1][0]] for s in splits.values()),
        "config_diffs": diffs,
        "base_config": proposed.to_dict(),
    })
    (out_dir / "ablation.json").write_text(json.dumps(report.to_dict(), indent=2))
    (out_dir / "ablation.txt").write_text(report.table() + "\n")
    return report


def variant_parameter_counts(base: TrainConfig) -> dict:
    return {label: count_parameters(build_model(base.with_model(**flags).model)) for label, _, flags in VARIANTS}
