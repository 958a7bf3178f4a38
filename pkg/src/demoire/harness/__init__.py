from .ablation import AblationReport, format_table2, run_ablation
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .training import NonFiniteLossError, evaluate_checkpoint, lr_at_epoch, train

__all__ = [
    "AblationReport", "CheckpointError", "NonFiniteLossError", "TrainConfig", "evaluate_checkpoint",
    "format_table2", "load_checkpoint", "load_config", "lr_at_epoch", "run_ablation",
    "save_checkpoint", "train",
]
