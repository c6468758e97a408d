"""Pure-NumPy kernel implementations.

These mirror the compiled extension operation for operation. Both paths must
produce bit-identical results, so every routine keeps the documented
evaluation order: accumulations run tap by tap in ascending offset order and
the CLAHE interpolation uses the exact expression
``(1-wy)*((1-wx)*a + wx*b) + wy*((1-wx)*c + wx*d)`` in float64.
"""

from __future__ import annotations

import numpy as np


def correlate1d_replicate(img: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """1-D correlation along ``axis`` with replicated borders."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    radius = (taps.shape[0] - 1) // 2
    n = img.shape[axis]
    base = np.arange(n)
    acc = np.zeros_like(img)
    for k in range(-radius, radius + 1):
        idx = np.clip(base + k, 0, n - 1)
        shifted = img[:, idx] if axis == 1 else img[idx, :]
        acc += taps[k + radius] * shifted
    return acc


def correlate2d_replicate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D correlation with replicated borders; zero taps are skipped."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    ry = (kernel.shape[0] - 1) // 2
    rx = (kernel.shape[1] - 1) // 2
    h, w = img.shape
    rows = np.arange(h)
    cols = np.arange(w)
    acc = np.zeros_like(img)
    for dy in range(-ry, ry + 1):
        for dx in range(-rx, rx + 1):
            weight = kernel[dy + ry, dx + rx]
            if weight == 0.0:
                continue
            r = np.clip(rows + dy, 0, h - 1)
            c = np.clip(cols + dx, 0, w - 1)
            acc += weight * img[np.ix_(r, c)]
    return acc


def clahe_apply(
    img: np.ndarray,
    maps: np.ndarray,
    row_lo: np.ndarray,
    row_hi: np.ndarray,
    row_w: np.ndarray,
    col_lo: np.ndarray,
    col_hi: np.ndarray,
    col_w: np.ndarray,
) -> np.ndarray:
    """Bilinear interpolation of per-tile mappings.

    ``maps`` has shape (grid_rows, grid_cols, 256) and holds the tile
    mappings as float64; the ``*_lo``/``*_hi``/``*_w`` arrays give, per image
    row and column, the two neighboring tile indices and the interpolation
    weight toward the ``hi`` tile.
    """
    img = np.ascontiguousarray(img, dtype=np.uint8)
    r0 = row_lo[:, None]
    r1 = row_hi[:, None]
    c0 = col_lo[None, :]
    c1 = col_hi[None, :]
    wy = row_w[:, None]
    wx = col_w[None, :]
    a = maps[r0, c0, img]
    b = maps[r0, c1, img]
    c = maps[r1, c0, img]
    d = maps[r1, c1, img]
    top = (1.0 - wx) * a + wx * b
    bot = (1.0 - wx) * c + wx * d
    val = (1.0 - wy) * top + wy * bot
    return np.floor(val + 0.5).astype(np.uint8)
