"""Heuristic occlusion-order predictors: Area, Y-Axis and BBBD.

All three only assert a relation for pairs whose bounding boxes overlap
with positive area, and never emit a mutual pair.
"""

from __future__ import annotations

import enum
from typing import Callable

import numpy as np

from .core import OcclusionRelations, OoroError, Scene
from .geometry import BinaryMask, bbox_intersection, count_in_region, decode_segmentation


class MissingMask(OoroError, ValueError):
    def __init__(self, image_id: int, instances: list[int]):
        self.image_id = image_id
        self.instances = instances
        super().__init__(f"image {image_id}: no modal mask for instances {instances}")


class BaselineKind(str, enum.Enum):
    AREA = "area"
    YAXIS = "yaxis"
    BBBD = "bbbd"


def candidate_pairs(scene: Scene) -> list[tuple[int, int]]:
    insts = scene.instances
    return [
        (i, j)
        for i in range(len(insts))
        for j in range(i + 1, len(insts))
        if bbox_intersection(insts[i].bbox, insts[j].bbox) is not None
    ]


def _relations(n: int, edges: list[tuple[int, int]]) -> OcclusionRelations:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = True
    return OcclusionRelations(adj)


def predict_area(scene: Scene) -> OcclusionRelations:
    edges = []
    for i, j in candidate_pairs(scene):
        # ties go to the lower index, which is i
        if scene.instances[j].bbox.area > scene.instances[i].bbox.area:
            edges.append((j, i))
        else:
            edges.append((i, j))
    return _relations(scene.n, edges)


def predict_yaxis(scene: Scene) -> OcclusionRelations:
    edges = []
    for i, j in candidate_pairs(scene):
        bi, bj = scene.instances[i].bbox, scene.instances[j].bbox
        if (bj.bottom, bj.area) > (bi.bottom, bi.area):
            edges.append((j, i))
        else:
            edges.append((i, j))
    return _relations(scene.n, edges)


def predict_bbbd(scene: Scene) -> OcclusionRelations:
    """Inside the pair's box intersection, the instance with more mask pixels occludes."""
    pairs = candidate_pairs(scene)
    if not pairs:
        return _relations(scene.n, [])
    involved = sorted({k for pair in pairs for k in pair})
    missing = [k for k in involved if not scene.instances[k].has_mask]
    if len(missing) == len(involved):
        raise MissingMask(scene.image_id, missing)

    masks: dict[int, BinaryMask] = {}

    def mask(k: int) -> BinaryMask:
        if k not in masks:
            masks[k] = decode_segmentation(scene.instances[k].segmentation, scene.height, scene.width)
        return masks[k]

    edges = []
    for i, j in pairs:
        a, b = scene.instances[i], scene.instances[j]
        if not (a.has_mask and b.has_mask):
            continue
        region = bbox_intersection(a.bbox, b.bbox)
        ci = count_in_region(mask(i), region)
        cj = count_in_region(mask(j), region)
        if ci > cj:
            edges.append((i, j))
        elif cj > ci:
            edges.append((j, i))
    return _relations(scene.n, edges)


PREDICTORS: dict[BaselineKind, Callable[[Scene], OcclusionRelations]] = {
    BaselineKind.AREA: predict_area,
    BaselineKind.YAXIS: predict_yaxis,
    BaselineKind.BBBD: predict_bbbd,
}


def predict(kind: BaselineKind | str, scene: Scene) -> OcclusionRelations:
    return PREDICTORS[BaselineKind(kind)](scene)
