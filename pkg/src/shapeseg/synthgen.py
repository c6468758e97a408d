"""Synthetic dataset generation around an external renderer.

This module covers everything on either side of the renderer: randomized
scene-parameter manifests (exported as JSONL), ground-truth mask extraction
from renders on black, background compositing, the augmentation suite, and
the train/validation split.

Every randomized operation is driven by the pinned generator in
:mod:`shapeseg.rng` with a documented draw order, so outputs are reproducible
bit-for-bit across platforms and across serial/parallel runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .image import BinaryMask, GrayImage
from .preprocess import _gaussian_taps
from .rng import Xoshiro256, XoshiroStreams, derive_seed

__all__ = [
    "SceneManifest",
    "AugmentationSpec",
    "sample_manifest",
    "sample_manifest_bulk",
    "write_manifests",
    "read_manifests",
    "extract_mask",
    "composite",
    "fit_background",
    "augment",
    "split_dataset",
    "DEFAULT_MASK_THRESHOLD",
    "SCALE_MODES",
]

# Of 255. Tolerates renderer ambient noise on the black background while
# keeping thin structures; configurable everywhere it is consumed.
DEFAULT_MASK_THRESHOLD = 10

# "symmetric": scale = 1 + Uniform(-0.05, +0.05) per axis (default);
# "enlarge":   scale = 1 + Uniform(0, +0.05) — the one-sided reading.
SCALE_MODES = ("symmetric", "enlarge")

_LIGHT_LO, _LIGHT_HI = 0.2, 2.0
_CAMERA_COUNT = 16


@dataclass(frozen=True)
class SceneManifest:
    """One randomized scene draw for the external renderer."""

    mesh_id: int
    scale: tuple[float, float, float]
    translation: tuple[float, float, float]
    rotation: tuple[float, float, float]
    light_intensities: tuple[float, float, float, float]
    camera_ids: tuple[int, ...]
    background_id: int
    seed: int

    def __post_init__(self):
        if self.mesh_id < 0 or self.background_id < 0:
            raise ValueError("catalog indexes must be non-negative")
        if len(self.scale) != 3 or any(abs(s - 1.0) > 0.05 for s in self.scale):
            raise ValueError(f"scale factors must satisfy |s-1| <= 0.05, got {self.scale}")
        if len(self.translation) != 3 or any(not 0.0 <= t <= 0.01 for t in self.translation):
            raise ValueError(f"translation must lie in [0, 0.01] m, got {self.translation}")
        if len(self.rotation) != 3 or any(not 0.0 <= r <= 25.0 for r in self.rotation):
            raise ValueError(f"rotation must lie in [0, 25] degrees, got {self.rotation}")
        if len(self.light_intensities) != 4 or any(v < 0.0 for v in self.light_intensities):
            raise ValueError("expected 4 non-negative light intensities")
        if not self.camera_ids:
            raise ValueError("camera_ids must be non-empty")
        if any(not 0 <= c < _CAMERA_COUNT for c in self.camera_ids):
            raise ValueError(f"camera ids must lie in 0..{_CAMERA_COUNT - 1}")
        if len(set(self.camera_ids)) != len(self.camera_ids):
            raise ValueError("camera ids must be distinct")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit u64")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mesh_id": self.mesh_id,
                "scale": list(self.scale),
                "translation": list(self.translation),
                "rotation": list(self.rotation),
                "light_intensities": list(self.light_intensities),
                "camera_ids": list(self.camera_ids),
                "background_id": self.background_id,
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "SceneManifest":
        obj = json.loads(line)
        return cls(
            mesh_id=int(obj["mesh_id"]),
            scale=tuple(float(v) for v in obj["scale"]),
            translation=tuple(float(v) for v in obj["translation"]),
            rotation=tuple(float(v) for v in obj["rotation"]),
            light_intensities=tuple(float(v) for v in obj["light_intensities"]),
            camera_ids=tuple(int(v) for v in obj["camera_ids"]),
            background_id=int(obj["background_id"]),
            seed=int(obj["seed"]),
        )


def sample_manifest(
    rng_seed: int, catalog_sizes: tuple[int, int], scale_mode: str = "symmetric"
) -> SceneManifest:
    """Draw one scene manifest, uniform over the declared ranges.

    The draw order is pinned (mesh, scale xyz, translation xyz, rotation xyz,
    4 lights, camera subset, background, renderer seed) so that the bulk
    sampler and golden files stay valid. The camera subset is uniform over
    the non-empty subsets of 0..15, realized by rejection on a 16-bit mask.
    """
    meshes, backgrounds = catalog_sizes
    if meshes < 1 or backgrounds < 1:
        raise ValueError("catalog sizes must be >= 1")
    if scale_mode not in SCALE_MODES:
        raise ValueError(f"scale_mode must be one of {SCALE_MODES}")
    rng = Xoshiro256(rng_seed)
    mesh_id = rng.next_below(meshes)
    if scale_mode == "symmetric":
        scale = tuple(0.95 + rng.next_float() * 0.1 for _ in range(3))
    else:
        scale = tuple(1.0 + rng.next_float() * 0.05 for _ in range(3))
    translation = tuple(rng.next_float() * 0.01 for _ in range(3))
    rotation = tuple(rng.next_float() * 25.0 for _ in range(3))
    lights = tuple(_LIGHT_LO + rng.next_float() * (_LIGHT_HI - _LIGHT_LO) for _ in range(4))
    mask = rng.next_u64() & 0xFFFF
    while mask == 0:
        mask = rng.next_u64() & 0xFFFF
    camera_ids = tuple(c for c in range(_CAMERA_COUNT) if mask >> c & 1)
    background_id = rng.next_below(backgrounds)
    seed = rng.next_u64()
    return SceneManifest(
        mesh_id, scale, translation, rotation, lights, camera_ids, background_id, seed
    )


def sample_manifest_bulk(
    master_seed: int,
    count: int,
    catalog_sizes: tuple[int, int],
    scale_mode: str = "symmetric",
) -> dict[str, np.ndarray]:
    """Vectorized equivalent of ``count`` per-item sample_manifest calls.

    Item ``i`` uses seed ``derive_seed(master_seed, i)``, exactly as the
    batch CLI does, and the arrays reproduce the scalar path bit-for-bit
    (the per-stream camera rejection re-draws only the affected streams).
    Returns arrays keyed by field name; ``camera_masks`` holds the 16-bit
    subset masks.
    """
    meshes, backgrounds = catalog_sizes
    if meshes < 1 or backgrounds < 1:
        raise ValueError("catalog sizes must be >= 1")
    if scale_mode not in SCALE_MODES:
        raise ValueError(f"scale_mode must be one of {SCALE_MODES}")
    seeds = np.array([derive_seed(master_seed, i) for i in range(count)], dtype=np.uint64)
    rng = XoshiroStreams(seeds)
    mesh_id = (rng.next_float() * meshes).astype(np.int64)
    if scale_mode == "symmetric":
        scale = np.stack([0.95 + rng.next_float() * 0.1 for _ in range(3)], axis=1)
    else:
        scale = np.stack([1.0 + rng.next_float() * 0.05 for _ in range(3)], axis=1)
    translation = np.stack([rng.next_float() * 0.01 for _ in range(3)], axis=1)
    rotation = np.stack([rng.next_float() * 25.0 for _ in range(3)], axis=1)
    lights = np.stack(
        [_LIGHT_LO + rng.next_float() * (_LIGHT_HI - _LIGHT_LO) for _ in range(4)], axis=1
    )
    camera_masks = rng.next_u64() & np.uint64(0xFFFF)
    pending = camera_masks == 0
    while pending.any():
        # next_u64(where=...) yields one draw per selected stream, advancing
        # only those streams — the scalar rejection loop, in lockstep
        camera_masks[pending] = rng.next_u64(where=pending) & np.uint64(0xFFFF)
        pending = camera_masks == 0
    background_id = (rng.next_float() * backgrounds).astype(np.int64)
    seed = rng.next_u64()
    return {
        "mesh_id": mesh_id,
        "scale": scale,
        "translation": translation,
        "rotation": rotation,
        "light_intensities": lights,
        "camera_masks": camera_masks,
        "background_id": background_id,
        "seed": seed,
    }


def write_manifests(manifests, path: str | Path) -> None:
    """One JSON object per line, in input order."""
    with open(path, "w", encoding="ascii") as fh:
        for m in manifests:
            fh.write(m.to_json())
            fh.write("\n")


def read_manifests(path: str | Path) -> list[SceneManifest]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SceneManifest.from_json(line))
    return out


# ---------------------------------------------------------------------------
# Masking and compositing
# ---------------------------------------------------------------------------


def extract_mask(render_on_black: GrayImage, threshold: int = DEFAULT_MASK_THRESHOLD) -> BinaryMask:
    """Foreground where intensity is strictly above the threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must lie in 0..255, got {threshold}")
    return BinaryMask(render_on_black.data > threshold)


def _resize_bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-center alignment, round half up."""
    in_h, in_w = data.shape
    if (out_h, out_w) == (in_h, in_w):
        return data.copy()
    ys = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    xs = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    src = data.astype(np.float64)
    top = src[np.ix_(y0, x0)] * (1.0 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1.0 - wx) + src[np.ix_(y1, x1)] * wx
    val = (1.0 - wy) * top + wy * bot
    return np.floor(val + 0.5).astype(np.uint8)


def fit_background(background: GrayImage, width: int, height: int) -> GrayImage:
    """Scale to cover the target box (no aspect distortion), center-crop."""
    bh, bw = background.data.shape
    if (bh, bw) == (height, width):
        return background
    s = max(width / bw, height / bh)
    new_w = math.ceil(bw * s)
    new_h = math.ceil(bh * s)
    resized = _resize_bilinear(background.data, new_h, new_w)
    y0 = (new_h - height) // 2
    x0 = (new_w - width) // 2
    return GrayImage(resized[y0 : y0 + height, x0 : x0 + width].copy())


def composite(render: GrayImage, mask: BinaryMask, background: GrayImage) -> GrayImage:
    """Hard compositing: render where the mask is set, background elsewhere."""
    if render.data.shape != mask.data.shape:
        raise ValueError(
            f"render {render.data.shape} and mask {mask.data.shape} dimensions differ"
        )
    bg = fit_background(background, render.width, render.height)
    return GrayImage(np.where(mask.data, render.data, bg.data))


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class AugmentationSpec:
    """Per-op application probabilities and parameter ranges.

    Ops are considered in a fixed order (both flips, brightness, gamma,
    contrast, Gaussian blur, motion blur, sharpen); each op first draws its
    gate, then its parameters, so disabling one op never shifts another op's
    randomness budget position relative to its own gate.
    """

    seed: int = 0
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    brightness_prob: float = 0.5
    brightness_range: tuple[float, float] = (-40.0, 40.0)
    gamma_prob: float = 0.5
    gamma_range: tuple[float, float] = (0.5, 2.0)
    contrast_prob: float = 0.5
    contrast_range: tuple[float, float] = (0.6, 1.4)
    blur_prob: float = 0.25
    blur_sigma_range: tuple[float, float] = (0.5, 1.5)
    motion_blur_prob: float = 0.25
    motion_length_range: tuple[int, int] = (5, 15)
    sharpen_prob: float = 0.25
    sharpen_amount_range: tuple[float, float] = (0.3, 1.0)

    def __post_init__(self):
        for name in (
            "hflip_prob",
            "vflip_prob",
            "brightness_prob",
            "gamma_prob",
            "contrast_prob",
            "blur_prob",
            "motion_blur_prob",
            "sharpen_prob",
        ):
            _check_prob(name, getattr(self, name))
        for name in (
            "brightness_range",
            "gamma_range",
            "contrast_range",
            "blur_sigma_range",
            "motion_length_range",
            "sharpen_amount_range",
        ):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} must be (lo, hi) with lo <= hi, got {(lo, hi)}")
        if self.gamma_range[0] <= 0.0:
            raise ValueError("gamma must be > 0")
        if self.contrast_range[0] <= 0.0:
            raise ValueError("contrast must be > 0")
        if self.blur_sigma_range[0] < 0.0:
            raise ValueError("blur sigma must be >= 0")
        if self.motion_length_range[0] < 1:
            raise ValueError("motion blur length must be >= 1")

    @classmethod
    def disabled(cls, seed: int = 0) -> "AugmentationSpec":
        """A spec that never applies any op (useful as a config baseline)."""
        return cls(
            seed=seed,
            hflip_prob=0.0,
            vflip_prob=0.0,
            brightness_prob=0.0,
            gamma_prob=0.0,
            contrast_prob=0.0,
            blur_prob=0.0,
            motion_blur_prob=0.0,
            sharpen_prob=0.0,
        )

    def with_seed(self, seed: int) -> "AugmentationSpec":
        return replace(self, seed=seed)


def _quantize(values: np.ndarray) -> np.ndarray:
    """Round half up, clamp to the 8-bit range."""
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def _draw_in(rng: Xoshiro256, lo: float, hi: float) -> float:
    return lo + rng.next_float() * (hi - lo)


def _motion_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Normalized line kernel; angle measured counter-clockwise from +x."""
    size = length if length % 2 == 1 else length + 1
    center = size // 2
    kern = np.zeros((size, size), dtype=np.float64)
    theta = math.radians(angle_deg)
    dx = math.cos(theta)
    dy = -math.sin(theta)  # raster y grows downward
    for i in range(length):
        t = i - (length - 1) / 2.0
        x = int(math.floor(center + t * dx + 0.5))
        y = int(math.floor(center + t * dy + 0.5))
        kern[y, x] += 1.0
    return kern / kern.sum()


def _blur_u8(data: np.ndarray, sigma: float) -> np.ndarray:
    taps = _gaussian_taps(sigma)
    out = kernels.correlate1d_replicate(data.astype(np.float64), taps, axis=1)
    out = kernels.correlate1d_replicate(out, taps, axis=0)
    return _quantize(out)


def augment(
    image: GrayImage, mask: BinaryMask, spec: AugmentationSpec
) -> tuple[GrayImage, BinaryMask]:
    """Randomized augmentation; geometry moves the mask, photometry does not.

    Each photometric op maps u8 to u8 (round half up, clamp), so chained ops
    are reproducible regardless of which subset fires. Identity parameters
    (delta 0, gamma 1, contrast 1) leave the image bit-identical.
    """
    if image.data.shape != mask.data.shape:
        raise ValueError(
            f"image {image.data.shape} and mask {mask.data.shape} dimensions differ"
        )
    rng = Xoshiro256(spec.seed)
    img = image.data
    msk = mask.data

    if rng.next_float() < spec.hflip_prob:
        img = img[:, ::-1]
        msk = msk[:, ::-1]
    if rng.next_float() < spec.vflip_prob:
        img = img[::-1, :]
        msk = msk[::-1, :]
    if rng.next_float() < spec.brightness_prob:
        delta = _draw_in(rng, *spec.brightness_range)
        img = _quantize(img.astype(np.float64) + delta)
    if rng.next_float() < spec.gamma_prob:
        g = _draw_in(rng, *spec.gamma_range)
        lut = _quantize(255.0 * (np.arange(256, dtype=np.float64) / 255.0) ** g)
        img = lut[img]
    if rng.next_float() < spec.contrast_prob:
        c = _draw_in(rng, *spec.contrast_range)
        img = _quantize((img.astype(np.float64) - 127.5) * c + 127.5)
    if rng.next_float() < spec.blur_prob:
        sigma = _draw_in(rng, *spec.blur_sigma_range)
        img = _blur_u8(img, sigma)
    if rng.next_float() < spec.motion_blur_prob:
        lo, hi = spec.motion_length_range
        length = lo + int(rng.next_float() * (hi - lo + 1))
        angle = rng.next_float() * 180.0
        kern = _motion_kernel(length, angle)
        img = _quantize(kernels.correlate2d_replicate(img.astype(np.float64), kern))
    if rng.next_float() < spec.sharpen_prob:
        amount = _draw_in(rng, *spec.sharpen_amount_range)
        taps = _gaussian_taps(1.0)
        src = img.astype(np.float64)
        blurred = kernels.correlate1d_replicate(src, taps, axis=1)
        blurred = kernels.correlate1d_replicate(blurred, taps, axis=0)
        img = _quantize(src + amount * (src - blurred))

    return GrayImage(np.ascontiguousarray(img)), BinaryMask(np.ascontiguousarray(msk))


# ---------------------------------------------------------------------------
# Dataset split
# ---------------------------------------------------------------------------


def split_dataset(item_ids, train_fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic shuffled split; train gets floor(n * fraction) items."""
    items = list(item_ids)
    if not items:
        raise ValueError("cannot split an empty item list")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie strictly in (0, 1), got {train_fraction}")
    rng = Xoshiro256(seed)
    for i in range(len(items) - 1, 0, -1):
        j = rng.next_below(i + 1)
        items[i], items[j] = items[j], items[i]
    n_train = int(len(items) * train_fraction)
    return items[:n_train], items[n_train:]
