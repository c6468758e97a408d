"""Dataset access for toolkit-built directories.

A built dataset holds ``tensors/<id>.sat``, ``masks/<id>.png`` and a
``split.json`` with ``train``/``val`` id lists. Targets are mask PNGs
binarized at 128. All per-item files are validated up front (presence,
3-channel header, matching sizes) so a malformed dataset fails before the
first optimizer step rather than mid-run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .satio import read_header, read_sat1

MASK_THRESHOLD = 128


class DatasetError(ValueError):
    """Raised for missing or inconsistent dataset pieces."""


class SegmentationPairs:
    """Lazy (tensor, target) pairs for one split of a built dataset."""

    def __init__(self, dataset_dir: str | Path, split: str):
        root = Path(dataset_dir)
        split_file = root / "split.json"
        if not split_file.is_file():
            raise DatasetError(f"{root}: split.json not found (run the dataset split first)")
        spec = json.loads(split_file.read_text())
        if split not in spec:
            raise DatasetError(f"{root}: split.json has no {split!r} list")
        self.ids: list[str] = list(spec[split])
        self.root = root

        size = None
        for item_id in self.ids:
            tensor = root / "tensors" / f"{item_id}.sat"
            mask = root / "masks" / f"{item_id}.png"
            if not tensor.is_file():
                raise DatasetError(f"missing tensor {tensor}")
            if not mask.is_file():
                raise DatasetError(f"missing mask {mask}")
            _, height, width = read_header(tensor)
            with Image.open(mask) as im:
                if im.size != (width, height):
                    raise DatasetError(
                        f"{item_id}: mask is {im.size[0]}x{im.size[1]}, "
                        f"tensor is {width}x{height}"
                    )
            if size is None:
                size = (height, width)
            elif (height, width) != size:
                raise DatasetError(
                    f"{item_id}: size {width}x{height} differs from the rest "
                    f"of the split ({size[1]}x{size[0]})"
                )
        self.size = size

    def __len__(self) -> int:
        return len(self.ids)

    def load(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """((3, H, W) float32 input, (1, H, W) float32 {0, 1} target)."""
        item_id = self.ids[index]
        tensor = read_sat1(self.root / "tensors" / f"{item_id}.sat")
        with Image.open(self.root / "masks" / f"{item_id}.png") as im:
            mask = np.asarray(im.convert("L"))
        target = (mask >= MASK_THRESHOLD).astype(np.float32)[None]
        return tensor, target

    def load_batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        pairs = [self.load(i) for i in indices]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
