"""Seeded training loop: Adam + pixel-wise binary cross-entropy.

The loop is iteration-based (not epoch-based): each iteration draws one
batch from a seeded shuffle that reshuffles whenever the split is
exhausted. Progress rows (iteration, loss, train/val IoU) go to a CSV log
next to the checkpoint; with ``stop_iou`` set, training stops as soon as
the full train-split IoU (computed in eval mode, the same way inference
sees the model) reaches the threshold.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from pathlib import Path

import numpy as np
import torch

from .data import SegmentationPairs
from .model import build_model

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    iterations: int
    lr: float = 1e-4
    eps: float = 1e-4
    batch_size: int = 4
    seed: int = 0
    eval_every: int = 5
    stop_iou: float | None = None
    encoder_weights: str | None = None
    device: str = "cpu"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.stop_iou is not None and not 0.0 < self.stop_iou <= 1.0:
            raise ValueError("stop_iou must lie in (0, 1]")


@dataclasses.dataclass(frozen=True)
class TrainResult:
    iterations_run: int
    final_loss: float | None
    train_iou: float | None
    val_iou: float | None
    checkpoint: Path


class _BatchSampler:
    """Seeded without-replacement batches, reshuffling per pass."""

    def __init__(self, count: int, batch_size: int, seed: int):
        self.count = count
        self.batch_size = min(batch_size, count)
        self.rng = np.random.default_rng(seed)
        self.order = np.empty(0, dtype=np.int64)

    def next(self) -> np.ndarray:
        if len(self.order) < self.batch_size:
            self.order = self.rng.permutation(self.count)
        batch, self.order = self.order[: self.batch_size], self.order[self.batch_size :]
        return batch


def dataset_iou(model, data: SegmentationPairs, batch_size: int, device) -> float:
    """Aggregate IoU of thresholded predictions over one split, eval mode."""
    was_training = model.training
    model.eval()
    tp = fp = fn = 0
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            x, y = data.load_batch(range(start, min(start + batch_size, len(data))))
            logits = model(torch.from_numpy(x).to(device))
            pred = logits > 0  # sigmoid(z) > 0.5  <=>  z > 0
            truth = torch.from_numpy(y).to(device) > 0.5
            tp += int((pred & truth).sum())
            fp += int((pred & ~truth).sum())
            fn += int((~pred & truth).sum())
    if was_training:
        model.train()
    return 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)


def train(
    dataset_dir: str | Path,
    config: TrainConfig,
    out_path: str | Path,
    log_path: str | Path | None = None,
) -> TrainResult:
    out_path = Path(out_path)
    log_path = Path(log_path) if log_path is not None else out_path.with_suffix(".log.csv")

    data = SegmentationPairs(dataset_dir, "train")
    if len(data) == 0:
        raise ValueError(f"{dataset_dir}: train split is empty")
    val = SegmentationPairs(dataset_dir, "val")

    torch.manual_seed(config.seed)
    device = torch.device(config.device)
    model = build_model().to(device)
    if config.encoder_weights is not None:
        state = torch.load(config.encoder_weights, map_location=device, weights_only=True)
        model.encoder.load_state_dict(state)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr, eps=config.eps)
    loss_fn = torch.nn.BCEWithLogitsLoss()
    sampler = _BatchSampler(len(data), config.batch_size, config.seed)

    final_loss = train_iou = val_iou = None
    iterations_run = 0
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "train_iou", "val_iou"])
        model.train()
        for iteration in range(1, config.iterations + 1):
            x, y = data.load_batch(sampler.next())
            optimizer.zero_grad()
            loss = loss_fn(model(torch.from_numpy(x).to(device)), torch.from_numpy(y).to(device))
            loss.backward()
            optimizer.step()
            iterations_run = iteration
            final_loss = float(loss.detach())

            if iteration % config.eval_every == 0 or iteration == config.iterations:
                train_iou = (
                    dataset_iou(model, data, config.batch_size, device)
                    if config.stop_iou is not None
                    else None
                )
                val_iou = dataset_iou(model, val, config.batch_size, device) if len(val) else None
                writer.writerow(
                    [
                        iteration,
                        f"{final_loss:.6f}",
                        "" if train_iou is None else f"{train_iou:.4f}",
                        "" if val_iou is None else f"{val_iou:.4f}",
                    ]
                )
                log.info(
                    "iter %d loss %.4f train_iou %s val_iou %s",
                    iteration,
                    final_loss,
                    "-" if train_iou is None else f"{train_iou:.3f}",
                    "-" if val_iou is None else f"{val_iou:.3f}",
                )
                if config.stop_iou is not None and train_iou >= config.stop_iou:
                    log.info("train IoU reached %.3f, stopping early", config.stop_iou)
                    break

    torch.save(
        {
            "model": model.state_dict(),
            "config": dataclasses.asdict(config),
            "iterations_run": iterations_run,
        },
        out_path,
    )
    return TrainResult(
        iterations_run=iterations_run,
        final_loss=final_loss,
        train_iou=train_iou,
        val_iou=val_iou,
        checkpoint=out_path,
    )
