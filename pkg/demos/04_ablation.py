"""Four-variant ablation (coordinate channels, skip CBAM, channel attention) at desk scale.

The numbers at this scale say nothing about the relative merit of the
components; the point is the protocol and the report layout.
"""
import sys
import tempfile
from pathlib import Path

from demoire.data import make_synthetic_dataset
from demoire.harness import TrainConfig, run_ablation
from demoire.network import ModelConfig

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
data = make_synthetic_dataset(out / "data", 20, 64, seed=0)
base = TrainConfig(
    model=ModelConfig(level_widths=(8, 16, 32), rcabs_per_level=1),
    epochs=5, batch_size=8, patch_size=64, data_root=str(data), train_n=14, val_n=6,
)
report = run_ablation(base, out / "ablation")
print(report.table())
print("config diffs:", report.meta["config_diffs"])
