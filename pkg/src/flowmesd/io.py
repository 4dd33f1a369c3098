"""Flow and image containers plus readers/writers for benchmark formats.

Supported on-disk formats:

* Middlebury / Sintel ``.flo``: little-endian float32 magic ``202021.25``,
  int32 width, int32 height, then row-major interleaved (u, v) float32 pairs.
* KITTI flow PNG: 16-bit RGB, ``u = (R - 2**15) / 64``, ``v = (G - 2**15) / 64``,
  ``B != 0`` marks a valid pixel.
* 8-bit grayscale / RGB PNG or PPM images (the colour frame used by edge
  refinement) and 8-bit PNG output for visualizations.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .exceptions import (
    BadMagicError,
    NonPositiveDimsError,
    NotPngError,
    OutOfRangeError,
    TruncatedError,
    UnsupportedFormatError,
    WrongBitDepthError,
    WrongChannelCountError,
)

FLO_MAGIC = 202021.25
UNKNOWN_FLOW_THRESH = 1e9
UNKNOWN_FLOW = 1e10

KITTI_OFFSET = 2 ** 15
KITTI_SCALE = 64.0
KITTI_MIN = -512.0
KITTI_MAX = (65535 - KITTI_OFFSET) / KITTI_SCALE  # 511.984375

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_FLO_HEADER = struct.Struct("<fii")


@dataclass
class FlowField:
    """Dense two-component flow with a per-pixel validity mask.

    ``u`` and ``v`` are ``(height, width)`` arrays in pixels, ``valid`` a
    boolean array of the same shape. If ``valid`` is omitted every pixel is
    valid.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u = np.asarray(self.u)
        self.v = np.asarray(self.v)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ValueError(
                f"u and v must be 2-D arrays of equal shape, got {self.u.shape} and {self.v.shape}"
            )
        if self.u.shape[0] < 1 or self.u.shape[1] < 1:
            raise NonPositiveDimsError(f"flow dimensions must be positive, got {self.u.shape}")
        if self.valid is None:
            self.valid = np.ones(self.u.shape, dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.u.shape:
                raise ValueError(
                    f"valid mask shape {self.valid.shape} does not match flow shape {self.u.shape}"
                )
        finite = np.isfinite(self.u) & np.isfinite(self.v)
        if not finite[self.valid].all():
            raise ValueError("valid flow samples must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @classmethod
    def from_array(cls, uv, valid=None) -> "FlowField":
        """Build from an ``(H, W, 2)`` array."""
        uv = np.asarray(uv)
        if uv.ndim != 3 or uv.shape[2] != 2:
            raise ValueError(f"expected an (H, W, 2) array, got shape {uv.shape}")
        return cls(uv[..., 0], uv[..., 1], valid)

    def to_array(self) -> np.ndarray:
        return np.stack([self.u, self.v], axis=-1)

    def __neg__(self) -> "FlowField":
        return FlowField(-self.u, -self.v, self.valid.copy())

    def scaled(self, s: float) -> "FlowField":
        return FlowField(self.u * s, self.v * s, self.valid.copy())

    def shifted(self, du: float, dv: float) -> "FlowField":
        return FlowField(self.u + du, self.v + dv, self.valid.copy())

    def crop(self, top: int, left: int, height: int, width: int) -> "FlowField":
        sl = (slice(top, top + height), slice(left, left + width))
        return FlowField(self.u[sl].copy(), self.v[sl].copy(), self.valid[sl].copy())


@dataclass
class ColorImage:
    """8-bit raster stored as an ``(H, W, C)`` uint8 array, ``C`` in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[..., None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"image must be (H, W) or (H, W, 1|3), got {data.shape}")
        if data.dtype != np.uint8:
            if np.any(data < 0) or np.any(data > 255):
                raise ValueError("image intensities must lie in [0, 255]")
            data = data.astype(np.uint8)
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


@dataclass
class GrayImage:
    """Single-channel 8-bit raster, ``(H, W)`` uint8."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"gray image must be 2-D, got {data.shape}")
        self.data = data.astype(np.uint8, copy=False)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


# ---------------------------------------------------------------------------
# .flo
# ---------------------------------------------------------------------------

def read_flo(data: bytes) -> FlowField:
    """Decode a Middlebury ``.flo`` byte string.

    Pixels with ``|u| > 1e9`` or ``|v| > 1e9`` (the "unknown flow" sentinel)
    and non-finite pixels are marked invalid.
    """
    if len(data) < _FLO_HEADER.size:
        raise TruncatedError(f".flo header needs {_FLO_HEADER.size} bytes, got {len(data)}")
    magic, width, height = _FLO_HEADER.unpack_from(data, 0)
    if magic != np.float32(FLO_MAGIC):
        raise BadMagicError(f"bad .flo magic {magic!r}, expected {FLO_MAGIC}")
    if width <= 0 or height <= 0:
        raise NonPositiveDimsError(f".flo dimensions must be positive, got {width}x{height}")
    n = width * height * 2
    expected = _FLO_HEADER.size + 4 * n
    if len(data) < expected:
        raise TruncatedError(
            f".flo payload truncated: {width}x{height} needs {expected} bytes, got {len(data)}"
        )
    uv = np.frombuffer(data, dtype="<f4", count=n, offset=_FLO_HEADER.size)
    uv = uv.astype(np.float32).reshape(height, width, 2)
    u, v = uv[..., 0].copy(), uv[..., 1].copy()
    with np.errstate(invalid="ignore"):
        valid = (
            np.isfinite(u) & np.isfinite(v)
            & (np.abs(u) <= UNKNOWN_FLOW_THRESH)
            & (np.abs(v) <= UNKNOWN_FLOW_THRESH)
        )
    return FlowField(u, v, valid)


def write_flo(flow: FlowField) -> bytes:
    """Encode ``flow`` as ``.flo`` bytes; invalid pixels become (1e10, 1e10)."""
    u = np.where(flow.valid, flow.u, UNKNOWN_FLOW).astype("<f4")
    v = np.where(flow.valid, flow.v, UNKNOWN_FLOW).astype("<f4")
    header = _FLO_HEADER.pack(FLO_MAGIC, flow.width, flow.height)
    return header + np.stack([u, v], axis=-1).tobytes()


# ---------------------------------------------------------------------------
# KITTI 16-bit PNG
# ---------------------------------------------------------------------------

def _png_header(data: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, bit_depth, colour_type) from the IHDR chunk."""
    if len(data) < 33 or data[:8] != _PNG_SIGNATURE or data[12:16] != b"IHDR":
        raise NotPngError("input is not a PNG file")
    width, height, depth, ctype = struct.unpack(">IIBB", data[16:26])
    return width, height, depth, ctype


def read_kitti_png(data: bytes) -> FlowField:
    """Decode a KITTI flow PNG."""
    _, _, depth, ctype = _png_header(data)
    if depth != 16:
        raise WrongBitDepthError(f"KITTI flow PNG must be 16-bit, got {depth}-bit")
    if ctype != 2:
        channels = {0: 1, 4: 2, 6: 4}.get(ctype, "indexed")
        raise WrongChannelCountError(f"KITTI flow PNG must have 3 channels, got {channels}")
    raw = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise NotPngError("PNG payload could not be decoded")
    raw = raw[..., ::-1].astype(np.float64)  # BGR -> RGB
    u = (raw[..., 0] - KITTI_OFFSET) / KITTI_SCALE
    v = (raw[..., 1] - KITTI_OFFSET) / KITTI_SCALE
    valid = raw[..., 2] != 0
    return FlowField(u, v, valid)


def _kitti_encode(x: np.ndarray) -> np.ndarray:
    # value*64 + 2**15 is nonnegative in range, so floor(x + 0.5) rounds ties away from zero
    return np.floor(x * KITTI_SCALE + KITTI_OFFSET + 0.5).astype(np.uint16)


def write_kitti_png(flow: FlowField) -> bytes:
    """Encode ``flow`` as a KITTI 16-bit PNG.

    Raises :class:`OutOfRangeError` if a valid displacement falls outside
    ``[-512, 511.984375]``.
    """
    valid = flow.valid
    for name, comp in (("u", flow.u), ("v", flow.v)):
        bad = valid & ((comp < KITTI_MIN) | (comp > KITTI_MAX))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise OutOfRangeError(
                f"{name}={comp[r, c]} at ({r}, {c}) outside KITTI range [{KITTI_MIN}, {KITTI_MAX}]"
            )
    raw = np.zeros(flow.shape + (3,), dtype=np.uint16)
    raw[..., 0] = np.where(valid, _kitti_encode(np.where(valid, flow.u, 0.0)), 0)
    raw[..., 1] = np.where(valid, _kitti_encode(np.where(valid, flow.v, 0.0)), 0)
    raw[..., 2] = valid
    ok, buf = cv2.imencode(".png", raw[..., ::-1])
    if not ok:
        raise OutOfRangeError("PNG encoder failed")
    return buf.tobytes()


# ---------------------------------------------------------------------------
# 8-bit images
# ---------------------------------------------------------------------------

def read_image(data: bytes) -> ColorImage:
    """Decode an 8-bit grayscale or RGB PNG/PPM/PGM into a :class:`ColorImage`."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:  # PIL raises a zoo of exception types
        raise UnsupportedFormatError(f"cannot decode image: {exc}") from exc
    if img.format not in ("PNG", "PPM"):
        raise UnsupportedFormatError(f"unsupported image format {img.format}")
    mode = img.mode
    if mode in ("L", "RGB"):
        pass
    elif mode == "LA":
        img = img.convert("L")
    elif mode in ("RGBA", "P", "1"):
        img = img.convert("RGB") if mode != "1" else img.convert("L")
    else:
        raise UnsupportedFormatError(f"unsupported image mode {mode!r}; need 8-bit gray or RGB")
    return ColorImage(np.asarray(img, dtype=np.uint8))


def write_png(image: ColorImage | GrayImage) -> bytes:
    """Encode an 8-bit image as PNG bytes."""
    data = image.data
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(data, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# path helpers
# ---------------------------------------------------------------------------

def flow_format(path) -> str:
    """Return ``"flo"`` or ``"kitti"`` from the file extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".flo":
        return "flo"
    if suffix == ".png":
        return "kitti"
    raise UnsupportedFormatError(f"{path}: unknown flow extension {suffix!r} (expected .flo or .png)")


def load_flow(path) -> FlowField:
    fmt = flow_format(path)
    data = Path(path).read_bytes()
    return read_flo(data) if fmt == "flo" else read_kitti_png(data)


def save_flow(path, flow: FlowField) -> None:
    fmt = flow_format(path)
    data = write_flo(flow) if fmt == "flo" else write_kitti_png(flow)
    Path(path).write_bytes(data)


def load_image(path) -> ColorImage:
    return read_image(Path(path).read_bytes())


def save_png(path, image: ColorImage | GrayImage) -> None:
    Path(path).write_bytes(write_png(image))
