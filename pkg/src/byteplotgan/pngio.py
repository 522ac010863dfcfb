"""Minimal deterministic PNG writer plus a PIL-backed reader.

Byteplots use at most 16 colors, so the RGB-palette archival format is an
indexed PNG with bit depth 4: pixel data is the nibble values themselves,
packed two per byte. That is 6x less data than 24-bit RGB and is what keeps
a 50 MB sample within the encoding time budget. Greyscale byteplots are
written as 8-bit greyscale PNGs.

Output bytes are a pure function of the pixel data and compress settings
(no timestamps, no ancillary chunks).
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from PIL import Image

__all__ = ["write_indexed_png", "write_grey_png", "read_png"]

_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _compress(raw: bytes, level: int) -> bytes:
    if level == 0:
        return zlib.compress(raw, 0)
    # Z_RLE at level 1 keeps worst-case (high entropy) inputs near memcpy
    # speed while still collapsing padding runs; higher levels get the
    # default matcher.
    strategy = zlib.Z_RLE if level == 1 else zlib.Z_DEFAULT_STRATEGY
    co = zlib.compressobj(level, zlib.DEFLATED, 15, 8, strategy)
    return co.compress(raw) + co.flush()


def write_indexed_png(
    path: str, indices: np.ndarray, palette: np.ndarray, compress_level: int = 1
) -> None:
    """Write a 4-bit indexed PNG.

    indices: (h, w) uint8 array of palette indices in [0, 16); w must be even.
    palette: (16, 3) uint8 RGB table.
    """
    h, w = indices.shape
    if w % 2:
        raise ValueError("indexed byteplot width must be even")
    if indices.max(initial=0) > 15:
        raise ValueError("palette index out of range for 4-bit depth")
    raw = np.empty((h, 1 + w // 2), dtype=np.uint8)
    raw[:, 0] = 0  # per-row filter byte: None
    np.bitwise_or(indices[:, 0::2] << 4, indices[:, 1::2], out=raw[:, 1:])
    ihdr = struct.pack(">IIBBBBB", w, h, 4, 3, 0, 0, 0)
    with open(path, "wb") as f:
        f.write(_SIGNATURE)
        f.write(_chunk(b"IHDR", ihdr))
        f.write(_chunk(b"PLTE", np.ascontiguousarray(palette, dtype=np.uint8).tobytes()))
        f.write(_chunk(b"IDAT", _compress(raw.tobytes(), compress_level)))
        f.write(_chunk(b"IEND", b""))


def write_grey_png(path: str, pixels: np.ndarray, compress_level: int = 1) -> None:
    """Write an 8-bit greyscale PNG from a (h, w) uint8 array."""
    h, w = pixels.shape
    raw = np.empty((h, 1 + w), dtype=np.uint8)
    raw[:, 0] = 0
    raw[:, 1:] = pixels
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    with open(path, "wb") as f:
        f.write(_SIGNATURE)
        f.write(_chunk(b"IHDR", ihdr))
        f.write(_chunk(b"IDAT", _compress(raw.tobytes(), compress_level)))
        f.write(_chunk(b"IEND", b""))


def read_png(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a PNG written by this module.

    Returns (pixels, palette): for indexed files, pixels are the (h, w)
    palette indices and palette the (n, 3) color table; for greyscale,
    pixels are the (h, w) intensities and palette is None.
    """
    # archival byteplots of large samples exceed PIL's default
    # decompression-bomb ceiling; these are our own trusted files
    old_max = Image.MAX_IMAGE_PIXELS
    Image.MAX_IMAGE_PIXELS = None
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "P":
                pal = np.asarray(im.getpalette(), dtype=np.uint8).reshape(-1, 3)
                return np.asarray(im, dtype=np.uint8), pal
            if im.mode == "L":
                return np.asarray(im, dtype=np.uint8), None
            raise ValueError(f"unsupported PNG mode {im.mode!r} in {path}")
    finally:
        Image.MAX_IMAGE_PIXELS = old_max
