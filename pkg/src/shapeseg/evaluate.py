"""Segmentation scoring: confusion counts, IoU, dataset statistics, ablations.

The ablation runner is deliberately framework-free: predicted masks come
from an external command (the predictor protocol below), so any model —
including the separately-shipped trainer — can be scored without this
package importing a learning framework.

Predictor protocol: the runner invokes the configured command with two
arguments, the input tensor path and the output mask PNG path; exit code 0
signals success. Tensor files are named ``<item_id>.sat`` so predictors can
key auxiliary lookups on the basename.
"""

from __future__ import annotations

import logging
import math
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import BinaryMask, GrayImage, load_mask, save_tensor
from .preprocess import DEFAULT_HIGH, DEFAULT_LOW, ClaheParams, EdgeBackend, assemble_variant, _as_kind

__all__ = [
    "ConfusionCounts",
    "EvalReport",
    "EvalItem",
    "PredictorError",
    "CommandPredictor",
    "confusion",
    "iou",
    "dataset_stats",
    "run_ablation",
    "render_report",
    "composition_tag",
]

log = logging.getLogger(__name__)


class PredictorError(RuntimeError):
    """The external predictor failed for one item."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel-level confusion counts; foreground is the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class EvalReport:
    """Scores for one (tensor composition, test-set group) cell."""

    composition: str
    group: str
    ious: tuple[float, ...]
    failures: int = 0

    def __post_init__(self):
        if any(not 0.0 <= v <= 1.0 for v in self.ious):
            raise ValueError("every IoU must lie in [0, 1]")
        if self.failures < 0:
            raise ValueError("failure count must be non-negative")

    @property
    def n_images(self) -> int:
        return len(self.ious)

    @property
    def mean_iou(self) -> float:
        """Arithmetic mean of per-image values; 0.0 when every item failed."""
        if not self.ious:
            return 0.0
        return math.fsum(self.ious) / len(self.ious)


@dataclass(frozen=True)
class EvalItem:
    """One scoring unit: an image, its ground truth, and a group label."""

    item_id: str
    image: GrayImage
    truth: BinaryMask
    group: str = "all"


def confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    if pred.data.shape != truth.data.shape:
        raise ValueError(
            f"prediction {pred.data.shape} and truth {truth.data.shape} dimensions differ"
        )
    p = pred.data
    t = truth.data
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(np.count_nonzero(~p & ~t))
    return ConfusionCounts(tp, fp, fn, tn)


def iou(counts: ConfusionCounts) -> float:
    """tp / (tp + fp + fn); both-empty pairs score 1.0 by convention."""
    denom = counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return counts.tp / denom


def dataset_stats(images) -> tuple[float, float]:
    """Pooled pixel mean and population standard deviation.

    Two-pass: the mean comes from an exact integer pixel sum, the variance
    from float64 squared deviations against that mean.
    """
    images = list(images)
    if not images:
        raise ValueError("dataset_stats requires at least one image")
    total = 0
    count = 0
    for img in images:
        total += int(img.data.sum(dtype=np.int64))
        count += img.data.size
    mean = total / count
    ssq = 0.0
    for img in images:
        d = img.data.astype(np.float64) - mean
        ssq += float(np.sum(d * d))
    return mean, math.sqrt(ssq / count)


# ---------------------------------------------------------------------------
# Ablation runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommandPredictor:
    """Predictor-protocol adapter around an external command."""

    command: tuple[str, ...]
    timeout: float | None = None

    def __post_init__(self):
        if not self.command:
            raise ValueError("predictor command must be non-empty")
        object.__setattr__(self, "command", tuple(self.command))

    def __call__(self, tensor_path: Path, mask_out: Path) -> None:
        try:
            proc = subprocess.run(
                [*self.command, str(tensor_path), str(mask_out)],
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PredictorError(f"cannot run predictor: {exc}") from exc
        if proc.returncode != 0:
            detail = proc.stderr.decode(errors="replace").strip()
            raise PredictorError(f"predictor exited with {proc.returncode}: {detail}")
        if not mask_out.is_file():
            raise PredictorError(f"predictor produced no output at {mask_out}")


def composition_tag(composition) -> str:
    """Canonical label for a channel triple, e.g. ``RAW/RAW/RAW``."""
    return "/".join(_as_kind(t).name for t in composition)


def run_ablation(
    items,
    compositions,
    predictor,
    backend: EdgeBackend = EdgeBackend(),
    low: ClaheParams = DEFAULT_LOW,
    high: ClaheParams = DEFAULT_HIGH,
    work_dir: str | Path | None = None,
) -> list[EvalReport]:
    """Score every composition on every item; one report per (comp, group).

    Per item and composition, the input tensor is assembled, written to disk,
    and handed to the predictor; the predicted mask is scored against the
    item's truth. Predictor failures (nonzero exit, unreadable or mismatched
    output) exclude the item from that cell's mean and increment its failure
    count. Report order: compositions as given, groups by first appearance.
    """
    items = list(items)
    if not items:
        raise ValueError("empty dataset")
    compositions = [list(c) for c in compositions]
    if not compositions:
        raise ValueError("no compositions to evaluate")

    groups: list[str] = []
    for item in items:
        if item.group not in groups:
            groups.append(item.group)

    with tempfile.TemporaryDirectory(prefix="shapeseg-ablation-") as tmp:
        root = Path(work_dir) if work_dir is not None else Path(tmp)
        reports = []
        for comp in compositions:
            tag = composition_tag(comp)
            comp_dir = root / tag.replace("/", "-")
            tensor_dir = comp_dir / "tensors"
            pred_dir = comp_dir / "preds"
            tensor_dir.mkdir(parents=True, exist_ok=True)
            pred_dir.mkdir(parents=True, exist_ok=True)
            scores: dict[str, list[float]] = {g: [] for g in groups}
            failures: dict[str, int] = {g: 0 for g in groups}
            for item in items:
                tensor_path = tensor_dir / f"{item.item_id}.sat"
                mask_path = pred_dir / f"{item.item_id}.png"
                try:
                    tensor = assemble_variant(item.image, comp, backend, low, high)
                    save_tensor(tensor, tensor_path)
                    predictor(tensor_path, mask_path)
                    pred = load_mask(mask_path)
                    if pred.data.shape != item.truth.data.shape:
                        raise PredictorError(
                            f"predicted mask {pred.data.shape} does not match "
                            f"truth {item.truth.data.shape}"
                        )
                except PredictorError as exc:
                    log.warning("item %s, composition %s: %s", item.item_id, tag, exc)
                    failures[item.group] += 1
                    continue
                scores[item.group].append(iou(confusion(pred, item.truth)))
            for group in groups:
                reports.append(
                    EvalReport(tag, group, tuple(scores[group]), failures[group])
                )
    return reports


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

_CSV_HEADER = "composition,group,n_images,mean_iou,failures"


def render_report(reports, format: str = "csv") -> str:
    """Tabulate reports, one row per (composition, group), means to 3 places."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to render")
    fmt = str(format).lower()
    if fmt == "csv":
        lines = [_CSV_HEADER]
        for r in reports:
            lines.append(f"{r.composition},{r.group},{r.n_images},{r.mean_iou:.3f},{r.failures}")
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| composition | group | n_images | mean_iou | failures |",
            "| --- | --- | ---: | ---: | ---: |",
        ]
        for r in reports:
            lines.append(
                f"| {r.composition} | {r.group} | {r.n_images} | {r.mean_iou:.3f} | {r.failures} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r} (expected csv or markdown)")
