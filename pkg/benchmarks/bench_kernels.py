"""Time the compiled kernels against the numpy fallback on COCO-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 20]
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from ooro import _fallback

try:
    from ooro import _kernels
except ImportError:
    _kernels = None

H, W = 480, 640


def _star_polygon(rng: np.random.Generator, vertices: int) -> np.ndarray:
    angles = np.sort(rng.uniform(0, 2 * np.pi, vertices))
    radii = rng.uniform(60, 200, vertices)
    xs = W / 2 + radii * np.cos(angles)
    ys = H / 2 + radii * np.sin(angles)
    return np.ascontiguousarray(np.stack([xs, ys], axis=1).ravel(), dtype=np.float64)


def _counts(bits: np.ndarray) -> np.ndarray:
    flat = bits.T.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(edges)
    if flat[0]:
        runs = np.concatenate([[0], runs])
    return runs.astype(np.int64)


def _encode_string(counts: np.ndarray) -> bytes:
    out = bytearray()
    for i, c in enumerate(counts.tolist()):
        x = c - counts[i - 2] if i > 2 else c
        x = int(x)
        more = True
        while more:
            ch = x & 0x1F
            x >>= 5
            more = not ((ch & 0x10 == 0 and x == 0) or (ch & 0x10 and x == -1))
            if more:
                ch |= 0x20
            out.append(ch + 48)
    return bytes(out)


def cases(rng: np.random.Generator):
    pts = _star_polygon(rng, 60)
    mask = _fallback.rasterize_polygon(pts, H, W)
    counts = _counts(mask)
    rle = _encode_string(counts)
    return {
        "rasterize_polygon (60 vertices)": lambda k: k.rasterize_polygon(pts, H, W),
        "rle_string_to_counts": lambda k: k.rle_string_to_counts(rle),
        "rle_to_mask": lambda k: k.rle_to_mask(counts, H, W),
        "count_in_rect (half image)": lambda k: k.count_in_rect(mask, 100, 400, 100, 500),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the numpy fallback is available", file=sys.stderr)
        return 1
    for name, fn in cases(np.random.default_rng(0)).items():
        a, b = fn(_kernels), fn(_fallback)
        assert np.array_equal(np.asarray(a), np.asarray(b)), name
        t_c = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        t_n = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        print(f"{name:34s} cython {t_c * 1e3:8.3f} ms   numpy {t_n * 1e3:8.3f} ms   x{t_n / t_c:6.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
