"""Train a small model on synthetic pairs, evaluate and dump a triptych.

Takes a couple of minutes on one CPU core. Pass a directory to keep the
outputs, otherwise a temporary directory is used.
"""
import logging
import sys
import tempfile
from pathlib import Path

import torch

from demoire.data import load_pairs, make_synthetic_dataset, save_image
from demoire.harness import TrainConfig, evaluate_checkpoint, train
from demoire.metrics import format_table1, psnr, ssim_index
from demoire.network import ModelConfig, infer

logging.basicConfig(level=logging.INFO, format="%(message)s")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
data = make_synthetic_dataset(out / "data", 12, 64, seed=0)

cfg = TrainConfig(
    model=ModelConfig(level_widths=(8, 16, 32), rcabs_per_level=1),
    epochs=60, lr_end=1e-4, batch_size=4, patch_size=48, seed=0, eval_every=10,
    checkpoint_dir=str(out / "ckpt"), data_root=str(data), train_n=9, val_n=3,
)
result = train(cfg)

pairs = load_pairs(data)
baseline = [(psnr(p.moire, p.clean), float(ssim_index(p.moire.double(), p.clean.double()))) for p in pairs]
report = evaluate_checkpoint(result.final_path, data)
print(format_table1([
    (len(pairs), "Input (no model)", sum(b[0] for b in baseline) / len(pairs), sum(b[1] for b in baseline) / len(pairs)),
    (report.count, "Model output", report.mean_psnr, report.mean_ssim),
]))

sample = pairs[0]
pred = infer(result.model, sample.moire)
save_image(torch.cat([sample.moire, sample.clean, pred], dim=-1), out / "triptych.png")
print("wrote", out / "triptych.png")
