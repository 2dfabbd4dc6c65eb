"""Deterministic image writers: 8-bit PNG, binary PPM, 16-bit PGM.

The PNG encoder is self-contained (zlib at a fixed level, filter type 0)
so identical pixel data always produces identical bytes; quantization
rounds half-up after clamping to [0, 1].
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .render import Image, LoadMap

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


def quantize8(pixels: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and round half-up to 8-bit."""
    return np.floor(np.clip(pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def _write_png_bytes(path, raster: np.ndarray, color_type: int) -> None:
    height, width = raster.shape[:2]
    channels = 1 if raster.ndim == 2 else raster.shape[2]
    filtered = np.zeros((height, 1 + width * channels), dtype=np.uint8)
    filtered[:, 1:] = raster.reshape(height, width * channels)
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    data = (_PNG_SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(filtered.tobytes(), _ZLIB_LEVEL))
            + _chunk(b"IEND", b""))
    Path(path).write_bytes(data)


def write_png(image: Image, path) -> None:
    """Write an RGB image as an 8-bit truecolor PNG."""
    _write_png_bytes(path, quantize8(image.pixels), color_type=2)


def write_ppm(image: Image, path) -> None:
    """Write an RGB image as binary PPM (P6, maxval 255)."""
    q = quantize8(image.pixels)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def write_pgm16(load_map: LoadMap, path) -> None:
    """Write raw per-pixel counts as 16-bit binary PGM (P5, big-endian)."""
    counts = np.clip(load_map.counts, 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{load_map.width} {load_map.height}\n65535\n".encode("ascii"))
        fh.write(counts.tobytes())


def write_loadmap_png(load_map: LoadMap, path) -> None:
    """Write a normalized grayscale PNG; brighter pixels carry heavier load."""
    counts = load_map.counts.astype(np.float64)
    peak = counts.max()
    gray = counts / peak if peak > 0 else counts
    _write_png_bytes(path, np.floor(gray * 255.0 + 0.5).astype(np.uint8), color_type=0)
