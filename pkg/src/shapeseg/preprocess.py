"""Shape-aware pre-processing: edge response, CLAHE, input-tensor assembly.

The input tensor concatenates an edge response map with two
contrast-limited-equalized versions of the image (low and high clip factor),
so the downstream network sees shape cues that are stable under lighting
changes.

The CLAHE definition is pinned exactly (the test oracle implements the same
rules independently):

* the image is partitioned into ``grid_rows x grid_cols`` tiles; the last
  row/column of tiles absorbs any remainder pixels
* per tile, a 256-bin histogram is clipped at
  ``clip_limit = max(1, floor(clip_factor * tile_pixels / 256))`` and the
  clipped excess is redistributed uniformly in a single pass: every bin gains
  ``excess // 256`` and bins ``0 .. excess % 256 - 1`` gain one more
* the tile mapping is ``m(v) = round(255 * CDF(v))`` with ties rounded up,
  computed in exact integer arithmetic
* each output pixel bilinearly interpolates the mappings of the four
  surrounding tile centers (a tile's center is the centroid of its pixel
  index range); outside the outermost centers the nearest tile wins
"""

from __future__ import annotations

import enum
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .image import ChannelKind, FloatMap, GrayImage, InputTensor, write_pgm

__all__ = [
    "ClaheParams",
    "EdgeBackendKind",
    "EdgeBackend",
    "ExternalBackendError",
    "clahe",
    "edge_response",
    "assemble_tensor",
    "assemble_variant",
    "DEFAULT_LOW",
    "DEFAULT_HIGH",
]


class ExternalBackendError(RuntimeError):
    """An external edge backend misbehaved (exit code, shape, or codomain)."""


@dataclass(frozen=True)
class ClaheParams:
    """Contrast-limited adaptive equalization parameters (256 bins fixed)."""

    grid_cols: int = 8
    grid_rows: int = 8
    clip_factor: float = 2.0
    bins: int = 256

    def __post_init__(self):
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise ValueError("tile grid must be at least 1x1")
        if not self.clip_factor > 0:
            raise ValueError("clip_factor must be > 0")
        if self.bins != 256:
            raise ValueError("histogram bin count is fixed at 256")


DEFAULT_LOW = ClaheParams(clip_factor=2.0)
DEFAULT_HIGH = ClaheParams(clip_factor=4.0)


class EdgeBackendKind(enum.Enum):
    BUILTIN_MULTISCALE = "builtin_multiscale"
    EXTERNAL = "external"


@dataclass(frozen=True)
class EdgeBackend:
    """Pluggable edge-response producer.

    The built-in backend is a deterministic multi-scale gradient operator.
    An external backend is any command that reads a PGM path (sole argument)
    and writes a little-endian float32 plane of identical dimensions to its
    standard output.
    """

    kind: EdgeBackendKind = EdgeBackendKind.BUILTIN_MULTISCALE
    command: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind is EdgeBackendKind.EXTERNAL:
            if not self.command:
                raise ValueError("external edge backend requires a command")
            object.__setattr__(self, "command", tuple(self.command))
        elif self.command is not None:
            raise ValueError("built-in edge backend takes no command")

    @classmethod
    def builtin(cls) -> "EdgeBackend":
        return cls()

    @classmethod
    def external(cls, command) -> "EdgeBackend":
        return cls(kind=EdgeBackendKind.EXTERNAL, command=tuple(command))


# ---------------------------------------------------------------------------
# CLAHE
# ---------------------------------------------------------------------------


def _axis_tiles(extent: int, count: int) -> tuple[list[int], list[int]]:
    """Tile start offsets and sizes; the last tile absorbs the remainder."""
    base = extent // count
    starts = [i * base for i in range(count)]
    sizes = [base] * (count - 1) + [extent - base * (count - 1)]
    return starts, sizes


def _axis_lut(starts: list[int], sizes: list[int], extent: int):
    """Per-coordinate neighboring tile indices and interpolation weight."""
    centers = [starts[i] + (sizes[i] - 1) / 2.0 for i in range(len(starts))]
    lo = np.empty(extent, dtype=np.intp)
    hi = np.empty(extent, dtype=np.intp)
    weight = np.empty(extent, dtype=np.float64)
    last = len(centers) - 1
    j = 0
    for p in range(extent):
        if p <= centers[0]:
            lo[p] = hi[p] = 0
            weight[p] = 0.0
        elif p >= centers[last]:
            lo[p] = hi[p] = last
            weight[p] = 0.0
        else:
            while p >= centers[j + 1]:
                j += 1
            lo[p] = j
            hi[p] = j + 1
            weight[p] = (p - centers[j]) / (centers[j + 1] - centers[j])
    return lo, hi, weight


def _tile_maps(data: np.ndarray, params: ClaheParams) -> np.ndarray:
    """Per-tile value mappings, shape (grid_rows, grid_cols, 256), float64."""
    row_starts, row_sizes = _axis_tiles(data.shape[0], params.grid_rows)
    col_starts, col_sizes = _axis_tiles(data.shape[1], params.grid_cols)
    maps = np.empty((params.grid_rows, params.grid_cols, 256), dtype=np.float64)
    for r in range(params.grid_rows):
        for c in range(params.grid_cols):
            tile = data[
                row_starts[r] : row_starts[r] + row_sizes[r],
                col_starts[c] : col_starts[c] + col_sizes[c],
            ]
            npix = tile.size
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.int64)
            clip_limit = max(1, int(params.clip_factor * npix / 256.0))
            clipped = np.minimum(hist, clip_limit)
            excess = int(hist.sum() - clipped.sum())
            clipped += excess // 256
            clipped[: excess % 256] += 1
            cum = np.cumsum(clipped)
            # round(255 * cum / npix) with ties up, in exact integer math
            maps[r, c, :] = (2 * 255 * cum + npix) // (2 * npix)
    return maps


def clahe(image: GrayImage, params: ClaheParams) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    With a 1x1 grid and a clip factor large enough that no bin is clipped
    this reduces to classical global histogram equalization.
    """
    if image.height < params.grid_rows or image.width < params.grid_cols:
        raise ValueError(
            f"image {image.width}x{image.height} smaller than tile grid "
            f"{params.grid_cols}x{params.grid_rows}"
        )
    maps = _tile_maps(image.data, params)
    row_starts, row_sizes = _axis_tiles(image.height, params.grid_rows)
    col_starts, col_sizes = _axis_tiles(image.width, params.grid_cols)
    row_lo, row_hi, row_w = _axis_lut(row_starts, row_sizes, image.height)
    col_lo, col_hi, col_w = _axis_lut(col_starts, col_sizes, image.width)
    out = kernels.clahe_apply(image.data, maps, row_lo, row_hi, row_w, col_lo, col_hi, col_w)
    return GrayImage(out)


# ---------------------------------------------------------------------------
# Edge response
# ---------------------------------------------------------------------------

_SCHARR_X = np.array([[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]])
_SCHARR_Y = _SCHARR_X.T.copy()
_EDGE_SIGMAS = (1, 2, 4)
_EDGE_EPS = 1e-12


def _gaussian_taps(sigma: float) -> np.ndarray:
    """Truncated, renormalized Gaussian taps with kernel radius 3*sigma."""
    radius = int(round(3 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _gaussian_blur(data: np.ndarray, sigma: float) -> np.ndarray:
    taps = _gaussian_taps(sigma)
    out = kernels.correlate1d_replicate(data, taps, axis=1)
    return kernels.correlate1d_replicate(out, taps, axis=0)


def _scharr_magnitude(data: np.ndarray) -> np.ndarray:
    gx = kernels.correlate2d_replicate(data, _SCHARR_X)
    gy = kernels.correlate2d_replicate(data, _SCHARR_Y)
    return np.sqrt(gx * gx + gy * gy)


def _builtin_edge(data: np.ndarray) -> np.ndarray:
    src = data.astype(np.float64)
    # The gradient of a constant image is identically zero; computing it in
    # floats leaves ~1e-14 residue that the per-scale max-normalization
    # would then blow up to visible values.
    if float(src.max()) == float(src.min()):
        return np.zeros_like(src)
    acc = None
    for sigma in _EDGE_SIGMAS:
        mag = _scharr_magnitude(_gaussian_blur(src, sigma))
        mag = mag / max(float(mag.max()), _EDGE_EPS)
        acc = mag if acc is None else acc + mag
    return acc / float(len(_EDGE_SIGMAS))


def _external_edge(image: GrayImage, command: tuple[str, ...]) -> np.ndarray:
    with tempfile.TemporaryDirectory(prefix="shapeseg-edge-") as tmp:
        pgm_path = Path(tmp) / "input.pgm"
        write_pgm(image.data, pgm_path)
        try:
            proc = subprocess.run(
                [*command, str(pgm_path)],
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                check=False,
            )
        except OSError as exc:
            raise ExternalBackendError(f"cannot invoke edge backend: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalBackendError(
            f"edge backend exited with {proc.returncode}: {proc.stderr.decode(errors='replace').strip()}"
        )
    expected = image.height * image.width * 4
    if len(proc.stdout) != expected:
        raise ExternalBackendError(
            f"edge backend wrote {len(proc.stdout)} bytes, expected {expected}"
        )
    plane = np.frombuffer(proc.stdout, dtype="<f4").reshape(image.height, image.width)
    if not bool(np.all((plane >= 0.0) & (plane <= 1.0))):
        raise ExternalBackendError("out-of-range external values (must lie in [0, 1])")
    return plane.astype(np.float64)


def edge_response(image: GrayImage, backend: EdgeBackend = EdgeBackend()) -> FloatMap:
    """Per-pixel edge likelihood in [0, 1].

    The built-in backend blurs the image at sigmas 1, 2, and 4, takes the
    Scharr gradient magnitude at each scale (replicate borders), normalizes
    each magnitude map by its maximum, and averages the three maps. Constant
    images therefore map to the all-zero response.
    """
    if backend.kind is EdgeBackendKind.EXTERNAL:
        result = _external_edge(image, backend.command)
    else:
        result = _builtin_edge(image.data)
    return FloatMap(result.astype(np.float32))


# ---------------------------------------------------------------------------
# Tensor assembly
# ---------------------------------------------------------------------------


def _unit_scale(data: np.ndarray) -> FloatMap:
    return FloatMap(data.astype(np.float32) / np.float32(255.0))


def assemble_tensor(
    image: GrayImage,
    backend: EdgeBackend = EdgeBackend(),
    low: ClaheParams = DEFAULT_LOW,
    high: ClaheParams = DEFAULT_HIGH,
) -> InputTensor:
    """Build the [edge, clahe_low, clahe_high] input tensor."""
    if not low.clip_factor < high.clip_factor:
        raise ValueError(
            f"low clip factor ({low.clip_factor}) must be below high ({high.clip_factor})"
        )
    return InputTensor(
        (
            edge_response(image, backend),
            _unit_scale(clahe(image, low).data),
            _unit_scale(clahe(image, high).data),
        ),
        (ChannelKind.EDGE, ChannelKind.CLAHE_LOW, ChannelKind.CLAHE_HIGH),
    )


def _as_kind(tag) -> ChannelKind:
    if isinstance(tag, ChannelKind):
        return tag
    try:
        return ChannelKind[str(tag).upper()]
    except KeyError:
        raise ValueError(f"unknown channel tag {tag!r}") from None


def assemble_variant(
    image: GrayImage,
    composition,
    backend: EdgeBackend = EdgeBackend(),
    low: ClaheParams = DEFAULT_LOW,
    high: ClaheParams = DEFAULT_HIGH,
) -> InputTensor:
    """Build a tensor for an arbitrary 3-channel composition.

    ``composition`` lists three channel tags (RAW, EDGE, CLAHE_LOW,
    CLAHE_HIGH); repeated tags are computed once and share one plane.
    """
    tags = [_as_kind(t) for t in composition]
    if len(tags) != 3:
        raise ValueError(f"composition must list exactly 3 channels, got {len(tags)}")
    cache: dict[ChannelKind, FloatMap] = {}
    for tag in tags:
        if tag in cache:
            continue
        if tag is ChannelKind.RAW:
            cache[tag] = _unit_scale(image.data)
        elif tag is ChannelKind.EDGE:
            cache[tag] = edge_response(image, backend)
        elif tag is ChannelKind.CLAHE_LOW:
            cache[tag] = _unit_scale(clahe(image, low).data)
        else:
            cache[tag] = _unit_scale(clahe(image, high).data)
    return InputTensor(tuple(cache[t] for t in tags), tuple(tags))  # type: ignore[arg-type]
