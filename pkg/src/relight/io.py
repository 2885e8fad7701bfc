"""Image file decode/encode.

Supported formats: 8/16-bit PNG and 8-bit PPM/PGM.  Pixels decode to linear
floats as value/maxval and are treated as-is (no transfer function) unless
sRGB linearization is explicitly requested.  Encoding clamps to [0, 1] and
quantizes round-half-up.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import CorruptDataError, MissingFileError, UnsupportedFormatError

_IMAGE_EXTENSIONS = {".png", ".ppm", ".pgm"}


def _open(path: str) -> PILImage.Image:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext not in _IMAGE_EXTENSIONS:
        raise UnsupportedFormatError(f"unsupported image format {ext!r}: {path}")
    try:
        img = PILImage.open(path)
        img.load()
        return img
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptDataError(f"cannot decode {path}: {exc}") from exc


def _maxval(img: PILImage.Image) -> float:
    return 65535.0 if img.mode in ("I", "I;16", "I;16B", "I;16L") else 255.0


def srgb_to_linear(values: np.ndarray) -> np.ndarray:
    """Standard sRGB electro-optical transfer function."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values <= 0.04045, values / 12.92, ((values + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    values = np.clip(values, 0.0, None)
    return np.where(values <= 0.0031308, values * 12.92, 1.055 * values ** (1.0 / 2.4) - 0.055)


def load_image(path: str, linearize: bool = False) -> np.ndarray:
    """Decode to an (H, W, 3) float array, value/maxval.

    Grayscale inputs are replicated across channels.  ``linearize`` applies
    the sRGB transfer function after decoding.
    """
    img = _open(path)
    maxval = _maxval(img)
    if img.mode in ("I", "I;16", "I;16B", "I;16L", "L"):
        data = np.asarray(img, dtype=np.float64) / maxval
        data = np.repeat(data[:, :, None], 3, axis=2)
    else:
        data = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return srgb_to_linear(data) if linearize else data


def quantize(values: np.ndarray, maxval: int) -> np.ndarray:
    """Clamp to [0, 1] and quantize round-half-up."""
    clamped = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(clamped * maxval + 0.5)


def save_image(path: str, image: np.ndarray, delinearize: bool = False) -> None:
    """Encode an (H, W, 3) float array as 8-bit PNG or PPM by extension."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {image.shape}")
    ext = os.path.splitext(path)[1].lower()
    if ext not in (".png", ".ppm"):
        raise UnsupportedFormatError(f"unsupported output format {ext!r}: {path}")
    if delinearize:
        image = linear_to_srgb(image)
    data = quantize(image, 255).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path)


def encode_png_bytes(image: np.ndarray) -> bytes:
    """8-bit PNG encode of a float image, for in-memory transport."""
    import io as _io

    data = quantize(image, 255).astype(np.uint8)
    buf = _io.BytesIO()
    PILImage.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_depth(path: str, renormalize: bool = False) -> np.ndarray:
    """Decode a single-channel 8/16-bit image to depth in [0, 1].

    ``renormalize`` rescales min..max to 0..1 (constant inputs map to 0.5).
    """
    img = _open(path)
    if img.mode not in ("I", "I;16", "I;16B", "I;16L", "L"):
        raise UnsupportedFormatError(f"depth image must be single-channel, got mode {img.mode!r}: {path}")
    depth = np.asarray(img, dtype=np.float64) / _maxval(img)
    if renormalize:
        lo, hi = float(depth.min()), float(depth.max())
        depth = np.full_like(depth, 0.5) if hi == lo else (depth - lo) / (hi - lo)
    return depth


def save_gray16(path: str, values: np.ndarray) -> None:
    """Encode a single-channel float raster as 16-bit grayscale PNG."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {values.shape}")
    data = quantize(values, 65535).astype(np.uint16)
    PILImage.fromarray(data, mode="I;16").save(path)
