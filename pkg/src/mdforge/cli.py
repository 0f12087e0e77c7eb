"""Command-line entry point: ``mdforge {synth,dataset,train,eval,report,all}``."""

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .nn.checkpoint import CheckpointError
from .pipeline import FormatError, PreconditionError, cmd_dataset, cmd_eval, cmd_report, cmd_synth, cmd_train

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_PRECONDITION = 0, 2, 3, 4

log = logging.getLogger("mdforge")


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="mdforge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "simulate radar returns and write IQ files + spectrogram PGMs"),
        ("dataset", "contrast-enhance, augment and split into train/val/test"),
        ("train", "train the CNN; writes model.mdnn and history.csv"),
        ("eval", "evaluate a checkpoint on the test split"),
        ("report", "render accuracy/loss charts from history.csv"),
        ("all", "synth, dataset, train, eval and report in sequence"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="config file (section.key = value lines)")
        p.add_argument("--out", type=Path, help="output directory (overrides paths.out)")
        p.add_argument("--seed", type=_seed, help="master seed (overrides master_seed)")
        if name in ("eval", "all"):
            p.add_argument("--checkpoint", type=Path, help="checkpoint to evaluate (default <out>/model.mdnn)")
    return parser


def run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out if args.out is not None else Path(cfg["paths.out"])
    cmd = args.command
    if cmd in ("synth", "all"):
        cmd_synth(cfg, out)
    if cmd in ("dataset", "all"):
        cmd_dataset(cfg, out)
    if cmd in ("train", "all"):
        cmd_train(cfg, out)
    if cmd in ("eval", "all"):
        metrics = cmd_eval(cfg, out, getattr(args, "checkpoint", None))
        print(f"test accuracy: {metrics.accuracy:.4f}")
    if cmd in ("report", "all"):
        cmd_report(out / "history.csv", out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        run(args)
    except (ConfigError, FormatError, CheckpointError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except PreconditionError as exc:
        log.error("%s", exc)
        return EXIT_PRECONDITION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
