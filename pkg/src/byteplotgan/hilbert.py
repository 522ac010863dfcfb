"""Hilbert space-filling curve index <-> 2D coordinate mappings.

Orientation convention (pinned for reproducibility): the order-1 motif
visits (0,0) -> (0,1) -> (1,1) -> (1,0); higher orders follow the standard
quadrant rotation/reflection recursion. Coordinates are (x, y) with x the
column and y the row, both in [0, 2^n).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HilbertOrder",
    "choose_order",
    "hilbert_d2xy",
    "hilbert_xy2d",
    "curve_positions",
    "curve_linear_positions",
    "mean_offset_distance",
]

# Orders up to this size keep their position arrays in an LRU cache
# (4^10 cells * 2 coords * 2 bytes = 4 MiB per entry).
_CACHE_MAX_ORDER = 10


@dataclass(frozen=True)
class HilbertOrder:
    """Curve order n; the grid is 2^n x 2^n and holds 4^n cells."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Hilbert order must be >= 1, got {self.n}")

    @property
    def side(self) -> int:
        return 1 << self.n

    @property
    def capacity(self) -> int:
        return 1 << (2 * self.n)


def choose_order(n_symbols: int) -> HilbertOrder:
    """Smallest order whose grid holds n_symbols cells (minimum order 1)."""
    if n_symbols < 1:
        raise ValueError("cannot choose a Hilbert order for an empty stream")
    n = 1
    while (1 << (2 * n)) < n_symbols:
        n += 1
    return HilbertOrder(n)


def hilbert_d2xy(order: HilbertOrder, d: int) -> tuple[int, int]:
    """Map curve index d to its (x, y) cell."""
    if not 0 <= d < order.capacity:
        raise ValueError(f"curve index {d} out of range [0, {order.capacity})")
    x = y = 0
    t = d
    s = 1
    while s < order.side:
        rx = 1 & (t >> 1)
        ry = 1 & (t ^ rx)
        x, y = _rotate(s, x, y, rx, ry)
        x += s * rx
        y += s * ry
        t >>= 2
        s <<= 1
    return x, y


def hilbert_xy2d(order: HilbertOrder, x: int, y: int) -> int:
    """Map cell (x, y) to its curve index; inverse of hilbert_d2xy."""
    side = order.side
    if not (0 <= x < side and 0 <= y < side):
        raise ValueError(f"coordinate ({x}, {y}) out of range [0, {side})^2")
    d = 0
    s = side >> 1
    while s > 0:
        rx = 1 if (x & s) > 0 else 0
        ry = 1 if (y & s) > 0 else 0
        d += s * s * ((3 * rx) ^ ry)
        x, y = _rotate(s, x, y, rx, ry)
        s >>= 1
    return d


def _rotate(s: int, x: int, y: int, rx: int, ry: int) -> tuple[int, int]:
    if ry == 0:
        if rx == 1:
            x = s - 1 - x
            y = s - 1 - y
        x, y = y, x
    return x, y


@functools.lru_cache(maxsize=4)
def _cached_positions(n: int) -> tuple[np.ndarray, np.ndarray]:
    return _build_positions(n)


def _build_positions(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized quadrant recursion; ~1.2 s for order 14 (268M cells)."""
    x = np.zeros(1, dtype=np.uint16)
    y = np.zeros(1, dtype=np.uint16)
    for level in range(n):
        s = np.uint16(1 << level)
        q = x.size
        nx = np.empty(4 * q, dtype=np.uint16)
        ny = np.empty(4 * q, dtype=np.uint16)
        # quadrants in visit order: transposed, shifted up, shifted
        # up-right, reflected back down
        nx[0:q] = y
        ny[0:q] = x
        nx[q : 2 * q] = x
        np.add(y, s, out=ny[q : 2 * q])
        np.add(x, s, out=nx[2 * q : 3 * q])
        np.add(y, s, out=ny[2 * q : 3 * q])
        np.subtract(np.uint16(2 * s - 1), y, out=nx[3 * q :])
        np.subtract(np.uint16(s - 1), x, out=ny[3 * q :])
        x, y = nx, ny
    x.setflags(write=False)
    y.setflags(write=False)
    return x, y


def curve_positions(order: HilbertOrder) -> tuple[np.ndarray, np.ndarray]:
    """(X, Y) uint16 arrays with (X[d], Y[d]) = hilbert_d2xy(order, d).

    Read-only views; small orders are cached across calls.
    """
    if order.n <= _CACHE_MAX_ORDER:
        return _cached_positions(order.n)
    return _build_positions(order.n)


def curve_linear_positions(order: HilbertOrder) -> np.ndarray:
    """Row-major flat index of each curve cell: lin[d] = y*side + x (uint32)."""
    x, y = curve_positions(order)
    lin = y.astype(np.uint32)
    lin *= np.uint32(order.side)
    lin += x
    return lin


def mean_offset_distance(order: HilbertOrder, offset: int, layout: str) -> float:
    """Mean Euclidean 2D distance between cells d and d+offset, over all d.

    Computed exhaustively on the full grid for the given layout
    ("hilbert" or "row_major" on the same 2^n-wide grid).
    """
    capacity = order.capacity
    if not 1 <= offset < capacity:
        raise ValueError(f"offset {offset} out of range [1, {capacity})")
    if layout == "hilbert":
        x, y = curve_positions(order)
        x = x.astype(np.int64)
        y = y.astype(np.int64)
    elif layout == "row_major":
        d = np.arange(capacity, dtype=np.int64)
        x = d % order.side
        y = d // order.side
    else:
        raise ValueError(f"unknown layout {layout!r}")
    dx = x[offset:] - x[:-offset]
    dy = y[offset:] - y[:-offset]
    return float(np.sqrt((dx * dx + dy * dy).astype(np.float64)).mean())
