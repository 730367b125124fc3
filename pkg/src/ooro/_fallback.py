"""Pure numpy mask kernels, used when the compiled extension is unavailable."""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "numpy"


def rle_string_to_counts(s: bytes) -> np.ndarray:
    counts: list[int] = []
    p = 0
    n = len(s)
    while p < n:
        x = 0
        k = 0
        more = True
        while more:
            if p >= n:
                raise ValueError("truncated RLE string")
            c = s[p] - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return np.asarray(counts, dtype=np.int64)


def rle_to_mask(counts: np.ndarray, h: int, w: int) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    if (counts < 0).any() or counts.sum() != h * w:
        raise ValueError("RLE runs do not cover the mask")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return np.ascontiguousarray(flat.reshape((w, h)).T)


def rasterize_polygon(pts: np.ndarray, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=bool)
    xs = np.asarray(pts[0::2], dtype=np.float64)
    ys = np.asarray(pts[1::2], dtype=np.float64)
    nv = len(xs)
    if nv < 3 or h == 0 or w == 0:
        return out
    r0 = int(max(0.0, np.floor(ys.min() - 0.5)))
    r1 = int(min(float(h), np.ceil(ys.max() + 0.5)))
    c0 = int(max(0.0, np.floor(xs.min() - 0.5)))
    c1 = int(min(float(w), np.ceil(xs.max() + 0.5)))
    if r1 <= r0 or c1 <= c0:
        return out
    cy = np.arange(r0, r1, dtype=np.float64) + 0.5
    cx = np.arange(c0, c1, dtype=np.float64) + 0.5
    parity = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    # edge e runs from vertex e-1 to vertex e, matching the compiled kernel
    xj_all = np.roll(xs, 1)
    yj_all = np.roll(ys, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        for xi, yi, xj, yj in zip(xs, ys, xj_all, yj_all):
            crosses = (yi > cy) != (yj > cy)
            if not crosses.any():
                continue
            xint = (xj - xi) * (cy - yi) / (yj - yi) + xi
            parity ^= crosses[:, None] & (xint[:, None] > cx[None, :])
    out[r0:r1, c0:c1] = parity
    return out


def count_in_rect(mask: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> int:
    return int(np.count_nonzero(mask[r0:r1, c0:c1]))
