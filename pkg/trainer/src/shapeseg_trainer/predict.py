"""Inference command conforming to the toolkit's predictor protocol.

Given a checkpoint and a SAT1 tensor, writes the thresholded prediction as
a {0, 255} mask PNG with the tensor's exact dimensions (the network pads
internally and crops back, so any size works).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .model import build_model
from .satio import read_sat1


def load_checkpoint(path: str | Path, device: str = "cpu"):
    ckpt = torch.load(path, map_location=device, weights_only=True)
    model = build_model().to(device)
    model.load_state_dict(ckpt["model"])
    model.eval()
    return model


def predict(model, tensor_path: str | Path, mask_out: str | Path, device: str = "cpu") -> None:
    arr = read_sat1(tensor_path)
    with torch.no_grad():
        logits = model(torch.from_numpy(arr)[None].to(device))
    mask = (logits[0, 0] > 0).cpu().numpy()  # sigmoid(z) > 0.5  <=>  z > 0
    out = (mask.astype(np.uint8)) * 255
    Image.fromarray(out, mode="L").save(mask_out, format="PNG")
