"""``demoire`` command line: train / eval / infer / ablate / inspect.

Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 runtime error
(non-finite loss, bad checkpoint).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import torch

from ..blocks import ConfigError
from ..data import IMAGE_SUFFIXES, IngestionError, decode_image, save_image
from ..metrics import format_table1, infer_padded
from ..network import ShapeError, build_model, count_parameters, infer, layer_table
from .ablation import run_ablation
from .checkpoint import CheckpointError, load_checkpoint
from .config import load_config
from .training import NonFiniteLossError, evaluate_checkpoint, train

log = logging.getLogger("demoire")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="demoire", description="Multi-level hypervision demoireing network")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--resume", help="checkpoint to continue from")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a paired directory")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="write the JSON report here")
    e.add_argument("--pad", action="store_true", help="reflect-pad to a multiple of 8")

    i = sub.add_parser("infer", help="demoire images")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--input", required=True, help="image file or directory")
    i.add_argument("--output", required=True)
    i.add_argument("--pad", action="store_true", help="reflect-pad to a multiple of 8, crop back")
    i.add_argument("--triptych", action="store_true", help="also write input|output strips")

    a = sub.add_parser("ablate", help="run the four-variant ablation")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)

    s = sub.add_parser("inspect", help="print parameter count and layer shapes")
    s.add_argument("--config", required=True)
    return p


def _cmd_train(args):
    cfg = load_config(args.config)
    result = train(cfg, resume=args.resume)
    print(f"final checkpoint: {result.final_path or result.last_path}")
    if result.best_path:
        print(f"best checkpoint:  {result.best_path}")
    return EXIT_OK


def _cmd_eval(args):
    report = evaluate_checkpoint(args.ckpt, args.data, pad=args.pad)
    print(format_table1([(report.count, Path(args.data).name, report.mean_psnr, report.mean_ssim)]))
    print(f"parameters: {report.meta['parameter_count']}")
    if args.out:
        report.to_json(args.out)
    return EXIT_OK


def _inputs(path: Path):
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [path]


def _cmd_infer(args):
    model, _ = load_checkpoint(args.ckpt)
    model.eval()
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _inputs(Path(args.input))
    written = 0
    for path in paths:
        try:
            x = decode_image(path)
            y = infer_padded(model, x) if args.pad else infer(model, x)
        except (IngestionError, ShapeError) as e:
            log.warning("skipping %s: %s", path, e)
            continue
        save_image(y, out_dir / f"{path.stem}_demoire.png")
        if args.triptych:
            save_image(torch.cat([x, y], dim=-1), out_dir / f"{path.stem}_triptych.png")
        written += 1
    print(f"wrote {written}/{len(paths)} images to {out_dir}")
    return EXIT_OK if written else EXIT_DATA


def _cmd_ablate(args):
    report = run_ablation(load_config(args.config), args.out)
    print(report.table())
    return EXIT_OK


def _cmd_inspect(args):
    cfg = load_config(args.config)
    model = build_model(cfg.model, cfg.seed)
    rows = layer_table(model)
    width = max(len(n) for n, _, _ in rows)
    for name, shape, n in rows:
        print(f"{name:<{width}}  {str(shape):<20} {n:>9}")
    print(f"total parameters: {count_parameters(model)}")
    return EXIT_OK


COMMANDS = {"train": _cmd_train, "eval": _cmd_eval, "infer": _cmd_infer, "ablate": _cmd_ablate,
            "inspect": _cmd_inspect}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, ShapeError, FileNotFoundError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteLossError, CheckpointError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
