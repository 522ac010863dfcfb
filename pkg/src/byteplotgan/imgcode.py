"""Nibble streams to byteplot images: layouts, coloring, model inputs.

A byteplot lays the 4-bit symbols of a file onto a 2D grid (Hilbert curve
or row-major) and colors each cell either through the 16-entry
high-contrast RGB palette or as greyscale intensity. Palette-colored
images are stored as palette indices internally (the index IS the nibble
value), which keeps archival encoding lossless by construction and cheap
enough to beat the 6 s / 50 MB throughput gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import pngio
from .extract import NibbleStream
from .hilbert import HilbertOrder, choose_order, curve_linear_positions

__all__ = [
    "Palette",
    "DEFAULT_PALETTE",
    "ByteplotImage",
    "ModelInput",
    "CorruptByteplot",
    "encode_image",
    "decode_image",
    "encode_greyscale_hilbert",
    "encode_greyscale_rowmajor",
    "resize_normalize",
    "write_archival_png",
    "load_archival_png",
    "archival_name",
]

HILBERT = "hilbert"
ROW_MAJOR = "row_major"
PALETTE_RGB = "palette_rgb"
GREYSCALE = "greyscale"

# Standardized high-contrast color per hexadecimal symbol 0..F.
_DEFAULT_COLORS = (
    (0, 0, 0),
    (128, 0, 0),
    (154, 99, 36),
    (128, 128, 0),
    (70, 153, 144),
    (0, 0, 117),
    (230, 25, 75),
    (245, 130, 49),
    (255, 225, 25),
    (191, 239, 69),
    (60, 180, 75),
    (66, 212, 244),
    (67, 99, 216),
    (145, 30, 180),
    (240, 50, 230),
    (255, 255, 255),
)


class CorruptByteplot(ValueError):
    pass


@dataclass(frozen=True)
class Palette:
    """16 pairwise-distinct RGB triples indexed by nibble value."""

    colors: np.ndarray = field(
        default_factory=lambda: np.array(_DEFAULT_COLORS, dtype=np.uint8)
    )

    def __post_init__(self) -> None:
        colors = np.asarray(self.colors, dtype=np.uint8)
        if colors.shape != (16, 3):
            raise ValueError(f"palette must be 16 RGB triples, got {colors.shape}")
        packed = self._packed(colors)
        if np.unique(packed).size != 16:
            raise ValueError("palette colors must be pairwise distinct")
        object.__setattr__(self, "colors", colors)
        self.colors.setflags(write=False)

    @staticmethod
    def _packed(colors: np.ndarray) -> np.ndarray:
        c = colors.astype(np.uint32)
        return (c[..., 0] << 16) | (c[..., 1] << 8) | c[..., 2]

    def index_of_colors(self, rgb: np.ndarray) -> np.ndarray:
        """Map (n, 3) uint8 colors to palette indices; raise on unknowns."""
        keys = self._packed(self.colors)
        order = np.argsort(keys)
        sorted_keys = keys[order]
        probe = self._packed(np.asarray(rgb, dtype=np.uint8))
        pos = np.searchsorted(sorted_keys, probe)
        pos = np.clip(pos, 0, 15)
        ok = sorted_keys[pos] == probe
        if not np.all(ok):
            bad = np.asarray(rgb)[~ok][0]
            raise CorruptByteplot(f"corrupt byteplot: color {tuple(int(v) for v in bad)} not in palette")
        return order[pos].astype(np.uint8)


DEFAULT_PALETTE = Palette()


@dataclass
class ByteplotImage:
    """Byteplot pixel grid plus the metadata needed to invert it.

    For palette_rgb coloring, `data` holds palette indices (h, w); the
    rendered RGB pixels are available through `.pixels`. For greyscale,
    `data` holds the 8-bit intensities directly.
    """

    data: np.ndarray  # (h, w) uint8
    layout: str
    coloring: str
    payload_len: int
    palette: Palette | None = None

    def __post_init__(self) -> None:
        if self.layout not in (HILBERT, ROW_MAJOR):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.coloring not in (PALETTE_RGB, GREYSCALE):
            raise ValueError(f"unknown coloring {self.coloring!r}")
        if self.coloring == PALETTE_RGB and self.palette is None:
            raise ValueError("palette_rgb byteplot requires its palette")
        h, w = self.data.shape
        if self.layout == HILBERT:
            if h != w or h & (h - 1):
                raise ValueError("hilbert byteplot must be square with power-of-two side")
        if self.payload_len > h * w:
            raise ValueError("payload_len exceeds grid capacity")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def side(self) -> int:
        if self.height != self.width:
            raise ValueError("non-square byteplot has no side length")
        return self.height

    @property
    def channels(self) -> int:
        return 3 if self.coloring == PALETTE_RGB else 1

    @property
    def pixels(self) -> np.ndarray:
        """Rendered 8-bit pixel values: (h, w, 3) for RGB, (h, w) for grey."""
        if self.coloring == PALETTE_RGB:
            return self.palette.colors[self.data]
        return self.data


@dataclass
class ModelInput:
    """Network-facing tensor: float32, channels-first, values in [-1, 1]."""

    values: np.ndarray  # (3, resolution, resolution) float32

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3 or v.shape[0] != 3 or v.shape[1] != v.shape[2]:
            raise ValueError(f"model input must be (3, r, r), got {v.shape}")
        if v.size and (v.min() < -1.0 or v.max() > 1.0):
            raise ValueError("model input values must lie in [-1, 1]")
        self.values = v

    @property
    def resolution(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 3


def _symbol_grid(symbols: np.ndarray, layout: str, pad_value: int = 0) -> np.ndarray:
    """Lay symbols (or intensities) onto the square grid in curve order."""
    n = symbols.size
    if n == 0:
        raise ValueError("cannot encode an empty stream")
    order = choose_order(n)
    side = order.side
    grid = np.full(side * side, np.uint8(pad_value), dtype=np.uint8)
    if layout == HILBERT:
        lin = curve_linear_positions(order)
        # chunked scatter: consecutive curve indices touch adjacent cells,
        # so writes stay cache-local
        chunk = 1 << 24
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            grid[lin[lo:hi]] = symbols[lo:hi]
    elif layout == ROW_MAJOR:
        grid[:n] = symbols
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return grid.reshape(side, side)


def encode_image(
    stream: NibbleStream, layout: str = HILBERT, palette: Palette = DEFAULT_PALETTE
) -> ByteplotImage:
    """Color a nibble stream through the palette on the chosen layout.

    The grid is the smallest power-of-two square that fits the stream;
    cells beyond the payload take palette color 0.
    """
    grid = _symbol_grid(stream.symbols, layout)
    return ByteplotImage(
        data=grid,
        layout=layout,
        coloring=PALETTE_RGB,
        payload_len=len(stream),
        palette=palette,
    )


def decode_image(img: ByteplotImage, palette: Palette = DEFAULT_PALETTE) -> NibbleStream:
    """Recover the first payload_len symbols in curve order.

    Inverse of encode_image for palette_rgb byteplots; raises
    CorruptByteplot when a payload pixel's color is not in `palette`.
    """
    if img.coloring != PALETTE_RGB:
        raise ValueError("decode_image requires palette_rgb coloring")
    flat = img.data.reshape(-1)
    if img.layout == HILBERT:
        lin = curve_linear_positions(HilbertOrder(img.side.bit_length() - 1))
        payload = flat[lin[: img.payload_len]]
    else:
        payload = flat[: img.payload_len]
    if np.array_equal(img.palette.colors, palette.colors):
        symbols = payload
    else:
        symbols = palette.index_of_colors(img.palette.colors[payload])
    return NibbleStream(symbols=np.ascontiguousarray(symbols), origin="byte_sequence")


def encode_greyscale_hilbert(stream: NibbleStream) -> ByteplotImage:
    """Hilbert layout with intensity 17*s, mapping symbols onto 0..255."""
    grid = _symbol_grid(stream.symbols * np.uint8(17), HILBERT)
    return ByteplotImage(
        data=grid, layout=HILBERT, coloring=GREYSCALE, payload_len=len(stream)
    )


def encode_greyscale_rowmajor(data: bytes, width: int) -> ByteplotImage:
    """Traditional byteplot: byte intensities left-to-right at fixed width."""
    if width < 1:
        raise ValueError("width must be >= 1")
    arr = np.frombuffer(data, dtype=np.uint8)
    if arr.size == 0:
        raise ValueError("cannot encode an empty file")
    rows = (arr.size + width - 1) // width
    grid = np.zeros(rows * width, dtype=np.uint8)
    grid[: arr.size] = arr
    return ByteplotImage(
        data=grid.reshape(rows, width),
        layout=ROW_MAJOR,
        coloring=GREYSCALE,
        payload_len=arr.size,
    )


def _block_mean(channel: np.ndarray, resolution: int) -> np.ndarray:
    side = channel.shape[0]
    f = side // resolution
    view = channel.reshape(resolution, f, resolution, f)
    return view.mean(axis=(1, 3), dtype=np.float32)


def resize_normalize(img: ByteplotImage, resolution: int = 256) -> ModelInput:
    """Resample to resolution^2, replicate grey to 3 channels, scale to [-1, 1].

    Downsampling is area-averaging (exact block means on square
    power-of-two byteplots); upsampling is bilinear.
    """
    if resolution < 8 or resolution & (resolution - 1):
        raise ValueError("resolution must be a power of two >= 8")
    h, w = img.data.shape
    exact = h == w and not (h & (h - 1)) and h >= resolution
    if img.coloring == PALETTE_RGB:
        if exact:
            pal = img.palette.colors
            out = np.empty((3, resolution, resolution), dtype=np.float32)
            for c in range(3):
                out[c] = _block_mean(pal[:, c][img.data], resolution)
        else:
            out = np.asarray(
                _pil_resize(img.pixels, resolution), dtype=np.float32
            ).transpose(2, 0, 1)
    else:
        if exact:
            grey = _block_mean(img.data, resolution)
        else:
            grey = np.asarray(_pil_resize(img.data, resolution), dtype=np.float32)
        out = np.repeat(grey[None, :, :], 3, axis=0)
    out /= np.float32(127.5)
    out -= np.float32(1.0)
    np.clip(out, -1.0, 1.0, out=out)
    return ModelInput(values=out)


def _pil_resize(pixels: np.ndarray, resolution: int) -> np.ndarray:
    im = Image.fromarray(pixels)
    shrink = pixels.shape[0] >= resolution and pixels.shape[1] >= resolution
    resample = Image.Resampling.BOX if shrink else Image.Resampling.BILINEAR
    return np.asarray(im.resize((resolution, resolution), resample=resample))


def archival_name(sha256: str, layout: str, coloring: str) -> str:
    short = {PALETTE_RGB: "rgb", GREYSCALE: "greyscale"}[coloring]
    return f"{sha256}.{layout}.{short}.png"


def write_archival_png(img: ByteplotImage, path: str, compress_level: int = 1) -> None:
    """Persist a byteplot losslessly; bytes are deterministic per settings."""
    if img.coloring == PALETTE_RGB:
        pngio.write_indexed_png(path, img.data, img.palette.colors, compress_level)
    else:
        pngio.write_grey_png(path, img.data, compress_level)


def load_archival_png(
    path: str, layout: str, payload_len: int, palette: Palette = DEFAULT_PALETTE
) -> ByteplotImage:
    """Load a byteplot written by write_archival_png plus its sidecar metadata."""
    pixels, pal = pngio.read_png(path)
    if pal is not None:
        if pal.shape[0] < 16:
            pal = np.vstack([pal, np.zeros((16 - pal.shape[0], 3), np.uint8)])
        return ByteplotImage(
            data=pixels,
            layout=layout,
            coloring=PALETTE_RGB,
            payload_len=payload_len,
            palette=Palette(colors=pal[:16]),
        )
    return ByteplotImage(
        data=pixels, layout=layout, coloring=GREYSCALE, payload_len=payload_len
    )
