"""Pixel containers and bit-exact file I/O.

All values are immutable after construction (the backing arrays are marked
non-writeable), so they are safe to share across threads. Supported raster
formats are 8-bit grayscale/RGB PNG and binary PGM (P5, maxval <= 255);
3-channel float tensors use the SAT1 container described in
:func:`save_tensor`.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "ChannelKind",
    "GrayImage",
    "FloatMap",
    "BinaryMask",
    "InputTensor",
    "ImageFormatError",
    "Sat1Error",
    "load_gray_image",
    "save_gray_image",
    "load_mask",
    "save_mask",
    "read_pgm",
    "write_pgm",
    "save_tensor",
    "read_tensor",
]


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported raster files."""


class Sat1Error(ValueError):
    """Raised for malformed SAT1 tensor containers."""


class ChannelKind(enum.IntEnum):
    """Tensor channel semantics; values double as the SAT1 header codes."""

    RAW = 0
    EDGE = 1
    CLAHE_LOW = 2
    CLAHE_HIGH = 3


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel raster, row-major, origin at the top-left."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"image data must be integer, got {arr.dtype}")
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("image intensities out of 8-bit range")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None and not copy:
            return self.data
        return np.array(self.data, dtype=dtype)

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class FloatMap:
    """Single-channel float32 raster with every value in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"float map must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"float map dimensions must be >= 1, got {arr.shape}")
        if not bool(np.all((arr >= 0.0) & (arr <= 1.0))):
            raise ValueError("float map values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None and not copy:
            return self.data
        return np.array(self.data, dtype=dtype)

    def __eq__(self, other) -> bool:
        return isinstance(other, FloatMap) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel foreground labels (True = foreground)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"mask data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {arr.shape}")
        object.__setattr__(self, "data", _frozen(arr.astype(bool)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))

    def __array__(self, dtype=None, copy=None):
        if dtype is None and not copy:
            return self.data
        return np.array(self.data, dtype=dtype)

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class InputTensor:
    """Ordered 3-channel float stack fed to the segmentation network."""

    channels: tuple[FloatMap, FloatMap, FloatMap]
    semantics: tuple[ChannelKind, ChannelKind, ChannelKind]

    def __post_init__(self):
        channels = tuple(self.channels)
        semantics = tuple(ChannelKind(s) for s in self.semantics)
        if len(channels) != 3:
            raise ValueError(f"tensor must have exactly 3 channels, got {len(channels)}")
        if len(semantics) != 3:
            raise ValueError(f"tensor must have exactly 3 semantics tags, got {len(semantics)}")
        if not all(isinstance(c, FloatMap) for c in channels):
            raise ValueError("tensor channels must be FloatMap instances")
        shape = channels[0].data.shape
        if any(c.data.shape != shape for c in channels[1:]):
            raise ValueError("tensor channels must share one width/height")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "semantics", semantics)

    @property
    def width(self) -> int:
        return self.channels[0].width

    @property
    def height(self) -> int:
        return self.channels[0].height

    def stack(self) -> np.ndarray:
        """Channel-major (3, H, W) float32 view of the tensor."""
        return np.stack([c.data for c in self.channels])

    def __eq__(self, other) -> bool:
        if not isinstance(other, InputTensor):
            return False
        return self.semantics == other.semantics and all(
            a == b for a, b in zip(self.channels, other.channels)
        )


# ---------------------------------------------------------------------------
# Grayscale image I/O
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# ITU-R 601 luma weights, rounded half-up.
_LUMA = (0.299, 0.587, 0.114)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B, rounded half-up."""
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    y = _LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b
    return np.floor(y + 0.5).astype(np.uint8)


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5) file with maxval <= 255."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")

    # Header tokens: "P5", width, height, maxval; '#' starts a comment line.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(raw[start:pos]))
        except ValueError as exc:
            raise ImageFormatError(f"{path}: bad PGM header token") from exc
    pos += 1  # single whitespace byte after maxval

    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: zero-dimension image")
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval}")
    body = raw[pos : pos + width * height]
    if len(body) != width * height:
        raise ImageFormatError(f"{path}: PGM payload shorter than {width}x{height}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def write_pgm(arr: np.ndarray, path: str | Path) -> None:
    """Write a uint8 array as binary PGM (P5)."""
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def load_gray_image(path: str | Path) -> GrayImage:
    """Load a PNG or PGM file as an 8-bit grayscale image.

    Color PNGs are converted with the standard luma weighting
    0.299 R + 0.587 G + 0.114 B, rounded half-up. The format is sniffed from
    the file magic, not the extension.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    with path.open("rb") as fh:
        magic = fh.read(8)
    if magic[:2] == b"P5":
        return GrayImage(read_pgm(path))
    if magic == _PNG_MAGIC:
        with PILImage.open(path) as img:
            if img.width < 1 or img.height < 1:
                raise ImageFormatError(f"{path}: zero-dimension image")
            if img.mode == "L":
                arr = np.asarray(img, dtype=np.uint8)
                return GrayImage(arr)
            if img.mode in ("RGB", "RGBA", "P", "LA"):
                rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
                return GrayImage(rgb_to_gray(rgb))
            raise ImageFormatError(f"{path}: unsupported PNG mode {img.mode!r}")
    raise ImageFormatError(f"{path}: unsupported format (expected PNG or PGM)")


def save_gray_image(image: GrayImage, path: str | Path) -> None:
    """Write a grayscale image as PNG (or PGM when the suffix is .pgm)."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(image.data, path)
    else:
        PILImage.fromarray(image.data, mode="L").save(path, format="PNG")


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a mask as an 8-bit PNG with values {0, 255}."""
    arr = np.where(mask.data, np.uint8(255), np.uint8(0))
    PILImage.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask(path: str | Path) -> BinaryMask:
    """Read a mask PNG/PGM; intensities >= 128 count as foreground."""
    img = load_gray_image(path)
    return BinaryMask(img.data >= 128)


# ---------------------------------------------------------------------------
# SAT1 tensor container
# ---------------------------------------------------------------------------

_SAT1_MAGIC = b"SAT1"
_SAT1_VERSION = 1
_SAT1_DTYPE_F32 = 0
_SAT1_HEADER = struct.Struct("<4sIIIIIIII")  # magic, version, channels, height,
# width, dtype, 3 semantics codes


def save_tensor(tensor: InputTensor, path: str | Path) -> None:
    """Write an input tensor as a SAT1 container.

    Layout (little-endian): magic ``"SAT1"``, version u32 = 1, channels
    u32 = 3, height u32, width u32, dtype u32 = 0 (IEEE-754 float32), three
    u32 channel-semantics codes, then channels x height x width float32
    values, planar, channel-major, row-major within each plane.
    """
    header = _SAT1_HEADER.pack(
        _SAT1_MAGIC,
        _SAT1_VERSION,
        3,
        tensor.height,
        tensor.width,
        _SAT1_DTYPE_F32,
        *(int(s) for s in tensor.semantics),
    )
    planes = tensor.stack()
    if planes.dtype.byteorder not in ("<", "="):  # big-endian hosts unsupported here
        planes = planes.astype("<f4")
    Path(path).write_bytes(header + planes.tobytes())


def read_tensor(path: str | Path) -> InputTensor:
    """Read a SAT1 container written by :func:`save_tensor`."""
    raw = Path(path).read_bytes()
    if len(raw) < _SAT1_HEADER.size:
        raise Sat1Error(f"{path}: truncated header")
    magic, version, channels, height, width, dtype, *codes = _SAT1_HEADER.unpack_from(raw)
    if magic != _SAT1_MAGIC:
        raise Sat1Error(f"{path}: bad magic {magic!r}")
    if version != _SAT1_VERSION:
        raise Sat1Error(f"{path}: unsupported version {version}")
    if channels != 3:
        raise Sat1Error(f"{path}: expected 3 channels, header says {channels}")
    if dtype != _SAT1_DTYPE_F32:
        raise Sat1Error(f"{path}: unsupported dtype code {dtype}")
    if height < 1 or width < 1:
        raise Sat1Error(f"{path}: zero-dimension tensor")
    try:
        semantics = tuple(ChannelKind(c) for c in codes)
    except ValueError as exc:
        raise Sat1Error(f"{path}: unknown channel-semantics code") from exc

    payload = raw[_SAT1_HEADER.size :]
    expected = 3 * height * width * 4
    if len(payload) < expected:
        raise Sat1Error(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise Sat1Error(f"{path}: trailing data after payload")
    planes = np.frombuffer(payload, dtype="<f4").reshape(3, height, width)
    try:
        maps = tuple(FloatMap(p) for p in planes)
    except ValueError as exc:
        raise Sat1Error(f"{path}: {exc}") from exc
    return InputTensor(maps, semantics)  # type: ignore[arg-type]
