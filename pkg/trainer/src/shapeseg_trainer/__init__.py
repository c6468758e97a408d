"""Training and inference harness for toolkit-built segmentation datasets."""

from .data import DatasetError, SegmentationPairs
from .model import SegmentationModel, build_model
from .satio import SatFormatError, read_header, read_sat1
from .train import TrainConfig, TrainResult, dataset_iou, train

__all__ = [
    "DatasetError",
    "SegmentationPairs",
    "SegmentationModel",
    "build_model",
    "SatFormatError",
    "read_header",
    "read_sat1",
    "TrainConfig",
    "TrainResult",
    "dataset_iou",
    "train",
]

__version__ = "0.1.0"
