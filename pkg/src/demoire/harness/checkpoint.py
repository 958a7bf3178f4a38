"""Checkpoints: ``<stem>.pt`` weights, ``<stem>.json`` sidecar, ``<stem>.optim.pt`` optimizer state."""
from __future__ import annotations

import json
from pathlib import Path

import torch

from ..network import ModelConfig, build_model, count_parameters


class CheckpointError(RuntimeError):
    pass


def _stem(path) -> Path:
    p = Path(path)
    for suffix in (".json", ".pt"):
        if p.name.endswith(suffix):
            return p.with_name(p.name[: -len(suffix)])
    return p


def sidecar_path(path) -> Path:
    s = _stem(path)
    return s.with_name(s.name + ".json")


def weights_path(path) -> Path:
    s = _stem(path)
    return s.with_name(s.name + ".pt")


def optim_path(path) -> Path:
    s = _stem(path)
    return s.with_name(s.name + ".optim.pt")


def save_checkpoint(path, model, seed: int, epoch: int, metrics=None, optimizer=None, extra=None) -> Path:
    stem = _stem(path)
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        torch.save(model.state_dict(), weights_path(stem))
        if optimizer is not None:
            torch.save(optimizer.state_dict(), optim_path(stem))
        sidecar = {
            "config": model.config.to_dict(),
            "seed": seed,
            "epoch": epoch,
            "parameter_count": count_parameters(model),
            "parameter_names": list(model.state_dict().keys()),
            "metrics": metrics or {},
        }
        if extra:
            sidecar.update(extra)
        sidecar_path(stem).write_text(json.dumps(sidecar, indent=2))
    except OSError as e:
        raise OSError(f"cannot write checkpoint {stem}: {e}") from e
    return weights_path(stem)


def read_sidecar(path) -> dict:
    try:
        return json.loads(sidecar_path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint sidecar {sidecar_path(path)}: {e}") from e


def load_checkpoint(path):
    """Rebuild the model from the sidecar and load its weights. Returns ``(model, sidecar)``."""
    sidecar = read_sidecar(path)
    try:
        config = ModelConfig.from_dict(sidecar["config"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"bad model config in sidecar: {e}") from e
    model = build_model(config, seed=sidecar.get("seed", 0))
    try:
        state = torch.load(weights_path(path), map_location="cpu", weights_only=True)
    except Exception as e:  # torch raises a zoo of types on corrupt archives
        raise CheckpointError(f"unreadable weights file {weights_path(path)}: {e}") from e
    if not isinstance(state, dict):
        raise CheckpointError("weights file does not hold a state dict")
    names = sidecar.get("parameter_names")
    if names is not None and list(state.keys()) != names:
        raise CheckpointError("parameter names in weights file do not match the sidecar")
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise CheckpointError(f"weights do not fit the sidecar config: {e}") from e
    if count_parameters(model) != sidecar.get("parameter_count"):
        raise CheckpointError(
            f"parameter count {count_parameters(model)} != sidecar {sidecar.get('parameter_count')}"
        )
    return model, sidecar


def load_optimizer_state(path, optimizer) -> bool:
    p = optim_path(path)
    if not p.exists():
        return False
    try:
        optimizer.load_state_dict(torch.load(p, map_location="cpu", weights_only=True))
    except Exception as e:
        raise CheckpointError(f"unreadable optimizer state {p}: {e}") from e
    return True
