"""Bounding boxes and binary masks decoded from COCO segmentations.

Pixel (r, c) has its center at (c + 0.5, r + 0.5); polygons are filled
with the even-odd rule on pixel centers. The mask kernels come from the
compiled extension when it is importable, otherwise from the numpy
fallback; set ``OORO_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .core import OoroError

if os.environ.get("OORO_PURE_PYTHON"):
    from . import _fallback as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        from . import _fallback as kernels

KERNEL_IMPLEMENTATION: str = kernels.IMPLEMENTATION


class LengthMismatch(OoroError, ValueError):
    pass


class DegeneratePolygon(OoroError, ValueError):
    pass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; (x, y) is the top-left corner, y grows downward."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size: {self}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def bottom(self) -> float:
        return self.y + self.h

    def as_list(self) -> list[float]:
        return [_num(self.x), _num(self.y), _num(self.w), _num(self.h)]

    def clamp(self, width: float, height: float) -> "BBox":
        x0 = min(max(self.x, 0.0), width)
        y0 = min(max(self.y, 0.0), height)
        x1 = min(max(self.x + self.w, 0.0), width)
        y1 = min(max(self.y + self.h, 0.0), height)
        return BBox(x0, y0, x1 - x0, y1 - y0)


def _num(v: float) -> float | int:
    # integral floats serialize as ints so fixture bytes stay stable
    return int(v) if float(v).is_integer() else float(v)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray  # (height, width) bool, row-major

    def __post_init__(self) -> None:
        bits = np.ascontiguousarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __getitem__(self, rc: tuple[int, int]) -> bool:
        return bool(self.bits[rc])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None  # type: ignore[assignment]

    def __or__(self, other: "BinaryMask") -> "BinaryMask":
        return BinaryMask(self.bits | other.bits)


def decode_rle(counts: Sequence[int], height: int, width: int) -> BinaryMask:
    """Decode uncompressed column-major RLE counts (first run is zeros)."""
    arr = np.asarray(counts, dtype=np.int64).reshape(-1)
    if (arr < 0).any():
        raise LengthMismatch("RLE counts must be non-negative")
    total = int(arr.sum())
    if total != height * width:
        raise LengthMismatch(f"RLE counts sum to {total}, expected {height}x{width}={height * width}")
    return BinaryMask(kernels.rle_to_mask(np.ascontiguousarray(arr), height, width))


def rle_string_to_counts(s: str | bytes) -> list[int]:
    """Expand COCO's compressed RLE string into integer run counts."""
    if isinstance(s, str):
        s = s.encode("ascii")
    return [int(v) for v in kernels.rle_string_to_counts(bytes(s))]


def decode_rle_object(rle: dict) -> BinaryMask:
    height, width = (int(v) for v in rle["size"])
    counts = rle["counts"]
    if isinstance(counts, (str, bytes)):
        counts = rle_string_to_counts(counts)
    return decode_rle(counts, height, width)


def rasterize_polygon(points: Sequence[float] | Sequence[Sequence[float]], height: int, width: int) -> BinaryMask:
    """Rasterize one flat polygon ``[x0, y0, x1, y1, ...]`` or a list of them (unioned)."""
    parts = _polygon_parts(points)
    bits = np.zeros((height, width), dtype=bool)
    for part in parts:
        if len(part) < 6 or len(part) % 2:
            raise DegeneratePolygon(f"polygon needs at least 3 vertices, got {len(part) / 2:g}")
        pts = np.ascontiguousarray(part, dtype=np.float64)
        if not np.isfinite(pts).all():
            raise DegeneratePolygon("polygon has non-finite coordinates")
        bits |= kernels.rasterize_polygon(pts, height, width)
    return BinaryMask(bits)


def _polygon_parts(points: Any) -> list[Sequence[float]]:
    if len(points) and isinstance(points[0], (list, tuple, np.ndarray)):
        return list(points)
    return [points]


def decode_segmentation(seg: Any, height: int, width: int) -> BinaryMask:
    """Decode a COCO ``segmentation`` field (polygon list or RLE object)."""
    if isinstance(seg, dict):
        return decode_rle_object(seg)
    return rasterize_polygon(seg, height, width)


def segmentation_bbox(seg: Any, height: int, width: int) -> BBox:
    """Tight box around a segmentation; polygons use their vertex extents."""
    if isinstance(seg, dict):
        bits = decode_rle_object(seg).bits
        rows = np.flatnonzero(bits.any(axis=1))
        cols = np.flatnonzero(bits.any(axis=0))
        if len(rows) == 0:
            return BBox(0.0, 0.0, 0.0, 0.0)
        return BBox(float(cols[0]), float(rows[0]), float(cols[-1] + 1 - cols[0]), float(rows[-1] + 1 - rows[0]))
    coords = np.concatenate([np.asarray(p, dtype=np.float64) for p in _polygon_parts(seg)])
    xs, ys = coords[0::2], coords[1::2]
    x0, y0 = float(xs.min()), float(ys.min())
    return BBox(x0, y0, float(xs.max()) - x0, float(ys.max()) - y0).clamp(width, height)


def bbox_intersection(a: BBox, b: BBox) -> BBox | None:
    """Overlap rectangle, or None when the overlap has zero area."""
    x0 = max(a.x, b.x)
    y0 = max(a.y, b.y)
    x1 = min(a.x + a.w, b.x + b.w)
    y1 = min(a.y + a.h, b.y + b.h)
    if x1 <= x0 or y1 <= y0:
        return None
    return BBox(x0, y0, x1 - x0, y1 - y0)


def region_pixel_span(region: BBox, height: int, width: int) -> tuple[int, int, int, int]:
    """Rows [r0, r1) and columns [c0, c1) whose pixel centers lie in ``region``."""
    r0 = min(max(math.ceil(region.y - 0.5), 0), height)
    r1 = min(max(math.ceil(region.y + region.h - 0.5), 0), height)
    c0 = min(max(math.ceil(region.x - 0.5), 0), width)
    c1 = min(max(math.ceil(region.x + region.w - 0.5), 0), width)
    return r0, max(r0, r1), c0, max(c0, c1)


def count_in_region(mask: BinaryMask, region: BBox) -> int:
    r0, r1, c0, c1 = region_pixel_span(region, mask.height, mask.width)
    if r1 <= r0 or c1 <= c0:
        return 0
    return int(kernels.count_in_rect(mask.bits, r0, r1, c0, c1))
