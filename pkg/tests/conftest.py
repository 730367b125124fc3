from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from ooro import _fallback
from ooro.annotations import assign_display_names
from ooro.core import InstanceRef, OcclusionRelations, Scene, relations_from_edges
from ooro.geometry import BBox

FIXTURES = Path(__file__).parent / "fixtures"


def make_scene(categories, bboxes=None, segmentations=None, edges=(), image_id=1, width=64, height=64):
    n = len(categories)
    bboxes = bboxes or [(0, 0, 1, 1)] * n
    segmentations = segmentations or [None] * n
    insts = [
        InstanceRef(k, cat, 0, "", BBox(*map(float, box)), seg)
        for k, (cat, box, seg) in enumerate(zip(categories, bboxes, segmentations))
    ]
    return Scene(
        image_id=image_id,
        file_name=f"{image_id:06d}.png",
        width=width,
        height=height,
        instances=tuple(assign_display_names(insts)),
        ground_truth=relations_from_edges(n, list(edges)),
    )


def random_relations(rng: np.random.Generator, n: int, p: float = 0.3) -> OcclusionRelations:
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return OcclusionRelations(adj)


@pytest.fixture
def tower_scene():
    return make_scene(["clock", "clock", "building"], edges=[(0, 2), (1, 2)])


def kernel_modules():
    mods = [_fallback]
    try:
        from ooro import _kernels

        mods.append(_kernels)
    except ImportError:
        pass
    return mods


@pytest.fixture(params=kernel_modules(), ids=lambda m: m.IMPLEMENTATION)
def kernels(request):
    return request.param


def synthetic_bbbd_scene(rng: np.random.Generator, image_id: int = 1):
    """Random 2-5 instance scene with RLE masks up to 32x32 and tight boxes.

    Returns the scene plus the raw bit masks and integer boxes, so a test can
    recompute expectations without going through the package.
    """
    from .oracles import encode_rle, tight_box

    h, w = (int(v) for v in rng.integers(4, 33, size=2))
    k = int(rng.integers(2, 6))
    masks, boxes, segs = [], [], []
    for _ in range(k):
        bits = np.zeros((h, w), dtype=bool)
        for _ in range(int(rng.integers(1, 4))):
            y0, x0 = int(rng.integers(0, h)), int(rng.integers(0, w))
            y1, x1 = int(rng.integers(y0, h)) + 1, int(rng.integers(x0, w)) + 1
            bits[y0:y1, x0:x1] = True
        bits &= rng.random((h, w)) < rng.uniform(0.5, 1.0)
        masks.append(bits.tolist())
        boxes.append(tight_box(bits.tolist()))
        segs.append({"size": [h, w], "counts": encode_rle(bits)})
    cats = [str(rng.choice(["person", "car", "dog"])) for _ in range(k)]
    scene = make_scene(cats, boxes, segs, image_id=image_id, width=w, height=h)
    return scene, masks, boxes


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
