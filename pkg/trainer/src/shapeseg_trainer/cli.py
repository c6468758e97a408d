"""Command-line entry points: ``shapeseg-train train`` and ``... predict``.

``predict`` follows the evaluation predictor protocol: two positional
arguments (input tensor, output mask path), exit code 0 on success, so it
can be handed directly to the toolkit's ``evaluate --predictor``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .data import DatasetError
from .satio import SatFormatError
from .train import TrainConfig, train

log = logging.getLogger("shapeseg_trainer")

EXIT_OK = 0
EXIT_ERROR = 2

_DEVICE_DEFAULT = os.environ.get("SHAPESEG_TRAIN_DEVICE", "cpu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeseg-train",
        description="Train a segmentation network on a toolkit-built dataset, "
        "or run one checkpoint as an evaluation predictor.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p_train = sub.add_parser("train", help="fit the network on a built dataset")
    p_train.add_argument("dataset", help="dataset directory (images/masks/tensors/split.json)")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--iterations", type=int, required=True)
    p_train.add_argument("--lr", type=float, default=1e-4)
    p_train.add_argument("--eps", type=float, default=1e-4, help="Adam epsilon")
    p_train.add_argument("--batch-size", type=int, default=4)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--eval-every", type=int, default=5)
    p_train.add_argument(
        "--stop-iou",
        type=float,
        default=None,
        help="stop early once the train-split IoU reaches this value",
    )
    p_train.add_argument(
        "--encoder-weights", default=None, help="encoder state-dict file to start from"
    )
    p_train.add_argument("--log", default=None, help="training-log CSV (default: <out>.log.csv)")
    p_train.add_argument("--device", default=_DEVICE_DEFAULT)

    p_predict = sub.add_parser("predict", help="predict one mask from one tensor")
    p_predict.add_argument("--checkpoint", required=True)
    p_predict.add_argument("tensor", help="input SAT1 tensor")
    p_predict.add_argument("mask_out", help="output mask PNG")
    p_predict.add_argument("--device", default=_DEVICE_DEFAULT)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s", force=True
    )
    try:
        if args.command == "train":
            config = TrainConfig(
                iterations=args.iterations,
                lr=args.lr,
                eps=args.eps,
                batch_size=args.batch_size,
                seed=args.seed,
                eval_every=args.eval_every,
                stop_iou=args.stop_iou,
                encoder_weights=args.encoder_weights,
                device=args.device,
            )
            result = train(args.dataset, config, args.out, args.log)
            log.info("checkpoint written to %s (%d iterations)", args.out, result.iterations_run)
            return EXIT_OK
        # import inside the handler keeps `train --help` fast and lets
        # predict report checkpoint/tensor problems uniformly below
        from .predict import load_checkpoint, predict

        model = load_checkpoint(args.checkpoint, args.device)
        predict(model, args.tensor, args.mask_out, args.device)
        return EXIT_OK
    except (DatasetError, SatFormatError, OSError, ValueError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
