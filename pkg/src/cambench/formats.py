"""File formats: CBSM v1 saliency maps and 8-bit PNG images/masks.

CBSM v1 layout (little-endian, bit-exact):
    magic   4 bytes  0x43 0x42 0x51 0x52 ("CBQR")
    version u8       1
    dtype   u8       1 (float32)
    reserved u16     0
    H, W    u32 each
    data    H*W float32, row-major raw saliency values

Masks are single-channel 8-bit PNGs with values {0, 255}, binarized at
128 on read. Images are single-channel 8-bit PNGs holding gray levels
round(v * 255) for v in [0, 1].
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .grid import MAX_SIDE

CBSM_MAGIC = b"CBQR"
CBSM_VERSION = 1
CBSM_DTYPE_F32 = 1
_HEADER = struct.Struct("<4sBBHII")


def cbsm_bytes(raw) -> bytes:
    """Serialize a 2-D nonnegative field as CBSM v1 bytes."""
    arr = np.ascontiguousarray(np.asarray(raw, dtype=np.float32))
    if arr.ndim != 2:
        raise FormatError(f"CBSM payload must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    header = _HEADER.pack(CBSM_MAGIC, CBSM_VERSION, CBSM_DTYPE_F32, 0, h, w)
    return header + arr.astype("<f4").tobytes()


def parse_cbsm(data: bytes) -> np.ndarray:
    """Parse CBSM v1 bytes into a float32 (H, W) array of raw values."""
    if len(data) < _HEADER.size:
        raise FormatError(f"CBSM truncated: {len(data)} bytes")
    magic, version, dtype, reserved, h, w = _HEADER.unpack_from(data)
    if magic != CBSM_MAGIC:
        raise FormatError(f"bad CBSM magic {magic!r}")
    if version != CBSM_VERSION:
        raise FormatError(f"unsupported CBSM version {version}")
    if dtype != CBSM_DTYPE_F32:
        raise FormatError(f"unsupported CBSM dtype {dtype}")
    if reserved != 0:
        raise FormatError(f"CBSM reserved field must be 0, got {reserved}")
    if not (1 <= h <= MAX_SIDE and 1 <= w <= MAX_SIDE):
        raise FormatError(f"CBSM dims {h}x{w} out of range")
    expected = _HEADER.size + 4 * h * w
    if len(data) != expected:
        raise FormatError(f"CBSM size {len(data)} != expected {expected}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(h, w).copy()


def write_cbsm(path, raw) -> None:
    Path(path).write_bytes(cbsm_bytes(raw))


def read_cbsm(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read CBSM {path}: {exc}") from exc
    return parse_cbsm(data)


def write_mask_png(path, mask01) -> None:
    arr = np.asarray(mask01)
    out = np.where(arr > 0, 255, 0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    """Read an 8-bit mask PNG, binarizing at 128 (>= 128 -> 1)."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return (arr >= 128).astype(np.uint8)


def write_image_png(path, image01) -> None:
    arr = np.clip(np.asarray(image01, dtype=np.float64), 0.0, 1.0)
    out = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path, format="PNG")


def read_image_png(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr.astype(np.float64) / 255.0
