"""File-to-model-input plumbing shared by the CLI and the ablation harness."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from . import imgcode
from .corpus import ManifestEntry
from .extract import bytes_to_nibbles
from .imgcode import (
    DEFAULT_PALETTE,
    GREYSCALE,
    HILBERT,
    PALETTE_RGB,
    ROW_MAJOR,
    ByteplotImage,
    Palette,
)
from .train import LabeledSample

__all__ = ["encode_file", "encode_file_to_input", "load_inputs", "load_split_inputs"]

log = logging.getLogger(__name__)


def encode_file(
    path: str | Path,
    layout: str = HILBERT,
    coloring: str = PALETTE_RGB,
    palette: Palette = DEFAULT_PALETTE,
    rowmajor_width: int = 256,
) -> ByteplotImage:
    """Encode one file into a byteplot under the given layout/coloring."""
    data = Path(path).read_bytes()
    if not data:
        raise ValueError(f"empty input: {path}")
    if coloring == PALETTE_RGB:
        return imgcode.encode_image(bytes_to_nibbles(data), layout, palette)
    if layout == HILBERT:
        return imgcode.encode_greyscale_hilbert(bytes_to_nibbles(data))
    return imgcode.encode_greyscale_rowmajor(data, rowmajor_width)


def encode_file_to_input(
    path: str | Path,
    layout: str = HILBERT,
    coloring: str = PALETTE_RGB,
    resolution: int = 64,
    palette: Palette = DEFAULT_PALETTE,
    rowmajor_width: int = 256,
) -> np.ndarray:
    """File -> (3, resolution, resolution) float32 model-input values."""
    img = encode_file(path, layout, coloring, palette, rowmajor_width)
    return imgcode.resize_normalize(img, resolution).values


def load_inputs(
    entries: Sequence[ManifestEntry],
    split: str,
    layout: str,
    coloring: str,
    resolution: int,
    rowmajor_width: int = 256,
) -> list[LabeledSample]:
    """Encode every manifest entry of one split, in manifest order."""
    out = []
    for e in entries:
        if e.split != split:
            continue
        values = encode_file_to_input(
            e.path, layout, coloring, resolution, rowmajor_width=rowmajor_width
        )
        out.append(LabeledSample(sample_id=e.sha256, values=values, label=e.label))
    return out


def load_split_inputs(
    entries: Sequence[ManifestEntry],
    layout: str,
    coloring: str,
    resolution: int,
    rowmajor_width: int = 256,
) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """(train, test) inputs for a split manifest."""
    train = load_inputs(entries, "train", layout, coloring, resolution, rowmajor_width)
    test = load_inputs(entries, "test", layout, coloring, resolution, rowmajor_width)
    return train, test
