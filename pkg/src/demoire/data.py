"""Paired moire/clean ingestion, seeded splits, geometric augmentation, patches."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

IMAGE_SUFFIXES = {".png", ".bmp", ".tif", ".tiff", ".ppm"}


class IngestionError(RuntimeError):
    """A dataset directory cannot be turned into aligned pairs."""


@dataclass(frozen=True)
class SamplePair:
    id: str
    moire: torch.Tensor  # 1 x 3 x H x W
    clean: torch.Tensor  # 1 x 3 x H x W


@dataclass(frozen=True)
class AugmentSpec:
    rot_quarters: int = 0
    hflip: bool = False
    vflip: bool = False


def decode_image(path) -> torch.Tensor:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise IngestionError(f"cannot decode {path}: {e}") from e
    return torch.from_numpy(arr.copy()).permute(2, 0, 1).unsqueeze(0)


def encode_image(x: torch.Tensor) -> np.ndarray:
    """``[1x]3xHxW`` float in [0,1] -> ``HxWx3`` uint8 (round to nearest)."""
    if x.dim() == 4:
        x = x[0]
    arr = (x.detach().clamp(0, 1) * 255.0).round().to(torch.uint8)
    return arr.permute(1, 2, 0).cpu().numpy()


def save_image(x: torch.Tensor, path) -> None:
    Image.fromarray(encode_image(x)).save(path)


def _index_dir(d: Path) -> dict:
    if not d.is_dir():
        raise IngestionError(f"missing directory {d}")
    out = {}
    for p in d.iterdir():
        if p.suffix.lower() in IMAGE_SUFFIXES:
            out[p.stem] = p
    return out


def load_pairs(root, input_dir="input", gt_dir="gt") -> list[SamplePair]:
    """Match ``root/input/<stem>.*`` with ``root/gt/<stem>.*``; sorted by stem."""
    root = Path(root)
    inputs = _index_dir(root / input_dir)
    gts = _index_dir(root / gt_dir)
    orphans = sorted(set(inputs) ^ set(gts))
    if orphans:
        raise IngestionError(f"unmatched files (no counterpart): {orphans}")
    pairs = []
    for stem in sorted(inputs):
        moire = decode_image(inputs[stem])
        clean = decode_image(gts[stem])
        if moire.shape != clean.shape:
            raise IngestionError(
                f"pair {stem!r} has mismatched sizes {tuple(moire.shape[-2:])} vs {tuple(clean.shape[-2:])}"
            )
        pairs.append(SamplePair(stem, moire, clean))
    return pairs


def split_dataset(dataset, train_n: int, val_n: int, seed: int):
    if train_n < 0 or val_n < 0 or train_n + val_n > len(dataset):
        raise ValueError(f"cannot take {train_n}+{val_n} samples from a dataset of {len(dataset)}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    train = [dataset[i] for i in order[:train_n]]
    val = [dataset[i] for i in order[train_n : train_n + val_n]]
    return train, val


def _transform(x: torch.Tensor, spec: AugmentSpec) -> torch.Tensor:
    # rotate, then hflip, then vflip
    x = torch.rot90(x, spec.rot_quarters % 4, dims=(-2, -1))
    if spec.hflip:
        x = torch.flip(x, dims=(-1,))
    if spec.vflip:
        x = torch.flip(x, dims=(-2,))
    return x


def apply_augment(pair: SamplePair, spec: AugmentSpec) -> SamplePair:
    return SamplePair(pair.id, _transform(pair.moire, spec), _transform(pair.clean, spec))


def sample_rng(seed: int, epoch: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, epoch, sample, stream) key."""
    return np.random.default_rng([seed, epoch, index, stream])


def sample_augment(rng: np.random.Generator) -> AugmentSpec:
    rot = int(rng.integers(0, 4))
    hflip, vflip = (bool(b) for b in rng.integers(0, 2, size=2))
    return AugmentSpec(rot, hflip, vflip)


def extract_patch(pair: SamplePair, size: int, rng: np.random.Generator) -> SamplePair:
    h, w = pair.moire.shape[-2:]
    if size < 8 or size % 8:
        raise ValueError(f"patch size {size} must be a positive multiple of 8")
    if size > min(h, w):
        raise ValueError(f"patch size {size} exceeds image size {h}x{w}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    sl = (..., slice(top, top + size), slice(left, left + size))
    return SamplePair(pair.id, pair.moire[sl], pair.clean[sl])


def epoch_batches(dataset, epoch: int, seed: int, batch_size: int, patch_size: int, augment=True):
    """Yield ``(moire, clean)`` batches for one epoch.

    Sample order, crops and augmentations are all derived from ``(seed, epoch, index)``
    so the epoch is reproducible regardless of where a run was resumed.
    """
    order = np.random.default_rng([seed, epoch]).permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        xs, ys = [], []
        for idx in order[start : start + batch_size]:
            idx = int(idx)
            pair = extract_patch(dataset[idx], patch_size, sample_rng(seed, epoch, idx, 0))
            if augment:
                pair = apply_augment(pair, sample_augment(sample_rng(seed, epoch, idx, 1)))
            xs.append(pair.moire)
            ys.append(pair.clean)
        yield torch.cat(xs), torch.cat(ys)


def make_synthetic_dataset(root, n: int, size: int = 64, seed: int = 0) -> Path:
    """Write ``n`` smooth clean images plus moire-corrupted twins under ``root``.

    The clean images are low-frequency color blends; the corruption is a sum of
    two slanted colored sinusoidal gratings with a sample-specific frequency.
    """
    root = Path(root)
    os.makedirs(root / "input", exist_ok=True)
    os.makedirs(root / "gt", exist_ok=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    for k in range(n):
        clean = np.empty((size, size, 3))
        for c in range(3):
            a, b, ph = rng.uniform(0.5, 2.5, 3)
            clean[..., c] = 0.5 + 0.3 * np.sin(2 * np.pi * (a * xx + ph)) * np.cos(2 * np.pi * b * yy)
        moire = clean.copy()
        for _ in range(2):
            theta = rng.uniform(0, np.pi)
            freq = rng.uniform(6, 14)
            wave = np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy))
            moire += 0.08 * wave[..., None] * rng.uniform(0.3, 1.0, 3)
        for arr, sub in ((moire, "input"), (clean, "gt")):
            img = (np.clip(arr, 0, 1) * 255).round().astype(np.uint8)
            Image.fromarray(img).save(root / sub / f"img_{k:04d}.png")
    return root
