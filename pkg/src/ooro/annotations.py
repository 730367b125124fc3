"""COCOA and InstaOrder ingestion, and the normalized scenes JSONL format.

COCOA stores one annotation per image with a ``regions`` list and a
``depth_constraint`` string such as ``"1-2,1-3"``: 1-based region indices,
the left region occluding the right one. InstaOrder stores, per image, a
list of COCO ``instance_ids`` and ``occlusion`` records whose ``order`` is
``"i<j"`` (i occludes j), ``"i>j"`` (j occludes i) or ``"i<->j"`` (mutual),
with 0-based positions into ``instance_ids``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .core import (
    InstanceRef,
    OcclusionRelations,
    OoroError,
    Scene,
    SignedOrderMatrix,
    from_signed,
    to_signed,
)
from .geometry import BBox, segmentation_bbox

logger = logging.getLogger(__name__)


class MalformedAnnotation(OoroError, ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DanglingReference(MalformedAnnotation):
    pass


class UnmatchedImageId(UserWarning):
    """An InstaOrder record names an image the COCO file does not have."""


@dataclass
class IngestReport:
    ordering_records: int = 0
    edges: int = 0
    skipped_image_ids: list[int] = field(default_factory=list)
    crowd_excluded: int = 0


def _load_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"annotation file not found: {path}")
    try:
        with path.open("rb") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"invalid JSON ({exc})", str(path)) from exc


def _require(obj: Any, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedAnnotation(f"missing field {key!r}", where)
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise MalformedAnnotation(f"field {key!r} has type {type(value).__name__}", where)
    return value


def _images_by_id(data: Any, source: str) -> dict[int, dict]:
    images = _require(data, "images", list, source)
    out: dict[int, dict] = {}
    for k, img in enumerate(images):
        where = f"{source}:images[{k}]"
        image_id = _require(img, "id", int, where)
        _require(img, "width", (int, float), where)
        _require(img, "height", (int, float), where)
        if image_id in out:
            raise MalformedAnnotation(f"duplicate image id {image_id}", where)
        if img["width"] <= 0 or img["height"] <= 0:
            raise MalformedAnnotation("image dimensions must be positive", where)
        out[image_id] = img
    return out


def assign_display_names(instances: Sequence[InstanceRef]) -> list[InstanceRef]:
    """Number instances per category in list order: ``person 0, bottle 0, bottle 1``."""
    seen: dict[str, int] = defaultdict(int)
    out = []
    for inst in instances:
        idx = seen[inst.category]
        seen[inst.category] += 1
        out.append(replace(inst, category_index=idx, display_name=f"{inst.category} {idx}"))
    return out


def _build_instances(raw: list[tuple[str, BBox, Any, bool]]) -> list[InstanceRef]:
    insts = [
        InstanceRef(scene_local_id=k, category=cat, category_index=0, display_name="", bbox=bbox,
                    segmentation=seg, iscrowd=crowd)
        for k, (cat, bbox, seg, crowd) in enumerate(raw)
    ]
    return assign_display_names(insts)


def category_csv(scene: Scene) -> str:
    """Display names as a single CSV line, in instance order."""
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(scene.display_names)
    return buf.getvalue()


def _parse_depth_constraint(text: str, n: int, where: str) -> list[tuple[int, int]]:
    pairs = []
    for k, token in enumerate(t.strip() for t in text.split(",")):
        if not token:
            continue
        m = re.fullmatch(r"(\d+)\s*-\s*(\d+)", token)
        if m is None:
            raise MalformedAnnotation(f"bad ordering record {token!r}", f"{where}.depth_constraint[{k}]")
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        for idx in (i, j):
            if not 0 <= idx < n:
                raise DanglingReference(
                    f"ordering record {token!r} names region {idx + 1} but there are {n} regions",
                    f"{where}.depth_constraint[{k}]",
                )
        if i == j:
            raise MalformedAnnotation(f"self-occlusion record {token!r}", f"{where}.depth_constraint[{k}]")
        pairs.append((i, j))
    return pairs


def _subset_relations(n: int, edges: Iterable[tuple[int, int]], keep: list[int]) -> OcclusionRelations:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = True
    return OcclusionRelations(adj[np.ix_(keep, keep)])


def load_cocoa(annotation_file: str | Path, *, report: IngestReport | None = None) -> list[Scene]:
    """One Scene per image of a COCOA amodal annotation file.

    Modal masks come from a region's ``visible_mask`` when present; an
    unoccluded region has none, so its amodal polygon is its modal mask.
    """
    source = str(annotation_file)
    data = _load_json(annotation_file)
    report = report if report is not None else IngestReport()
    images = _images_by_id(data, source)
    anns_by_image: dict[int, tuple[int, dict]] = {}
    for k, ann in enumerate(_require(data, "annotations", list, source)):
        where = f"{source}:annotations[{k}]"
        image_id = _require(ann, "image_id", int, where)
        if image_id not in images:
            raise DanglingReference(f"annotation for unknown image id {image_id}", where)
        if image_id in anns_by_image:
            raise MalformedAnnotation(f"second annotation for image id {image_id}", where)
        anns_by_image[image_id] = (k, ann)

    scenes = []
    for image_id, img in images.items():
        width, height = int(img["width"]), int(img["height"])
        raw: list[tuple[str, BBox, Any, bool]] = []
        edges: list[tuple[int, int]] = []
        if image_id in anns_by_image:
            k, ann = anns_by_image[image_id]
            where = f"{source}:annotations[{k}]"
            regions = _require(ann, "regions", list, where)
            for r, reg in enumerate(regions):
                rwhere = f"{where}.regions[{r}]"
                name = _require(reg, "name", str, rwhere).strip()
                amodal = _require(reg, "segmentation", (list, dict), rwhere)
                modal = reg.get("visible_mask") or amodal
                try:
                    bbox = segmentation_bbox(modal, height, width).clamp(width, height)
                except (ValueError, KeyError, TypeError) as exc:
                    raise MalformedAnnotation(f"undecodable segmentation ({exc})", rwhere) from exc
                raw.append((name, bbox, modal, False))
            constraint = ann.get("depth_constraint", "")
            if not isinstance(constraint, str):
                raise MalformedAnnotation("depth_constraint must be a string", where)
            edges = _parse_depth_constraint(constraint, len(regions), where)
            report.ordering_records += len(edges)
        scene = Scene(
            image_id=image_id,
            file_name=str(img.get("file_name", "")),
            width=width,
            height=height,
            instances=tuple(_build_instances(raw)),
            ground_truth=_subset_relations(len(raw), edges, list(range(len(raw)))),
        )
        report.edges += int(scene.ground_truth.adj.sum())
        scenes.append(scene)
    return scenes


_ORDER_RE = re.compile(r"^\s*(\d+)\s*(<->|<|>)\s*(\d+)\s*$")


def load_instaorder(instaorder_file: str | Path, coco_file: str | Path, *, exclude_crowd: bool = False,
                    report: IngestReport | None = None) -> list[Scene]:
    """Join InstaOrder occlusion records with COCO instance metadata by image id.

    Depth-order records are ignored. Records whose image id is missing from
    the COCO file are skipped with an ``UnmatchedImageId`` warning.
    """
    report = report if report is not None else IngestReport()
    isrc, csrc = str(instaorder_file), str(coco_file)
    order_data = _load_json(instaorder_file)
    coco = _load_json(coco_file)
    images = _images_by_id(coco, csrc)

    categories = {}
    for k, cat in enumerate(_require(coco, "categories", list, csrc)):
        where = f"{csrc}:categories[{k}]"
        categories[_require(cat, "id", int, where)] = _require(cat, "name", str, where)

    coco_anns: dict[int, tuple[str, dict]] = {}
    for k, ann in enumerate(_require(coco, "annotations", list, csrc)):
        where = f"{csrc}:annotations[{k}]"
        coco_anns[_require(ann, "id", int, where)] = (where, ann)

    records = order_data.get("annotations") if isinstance(order_data, dict) else order_data
    if not isinstance(records, list):
        raise MalformedAnnotation("expected a list of records or an 'annotations' list", isrc)

    scenes = []
    seen_images: set[int] = set()
    for k, rec in enumerate(records):
        where = f"{isrc}:annotations[{k}]"
        image_id = _require(rec, "image_id", int, where)
        instance_ids = _require(rec, "instance_ids", list, where)
        if image_id not in images:
            report.skipped_image_ids.append(image_id)
            continue
        if image_id in seen_images:
            raise MalformedAnnotation(f"second record for image id {image_id}", where)
        seen_images.add(image_id)
        img = images[image_id]
        width, height = int(img["width"]), int(img["height"])

        raw = []
        for p, ann_id in enumerate(instance_ids):
            if ann_id not in coco_anns:
                raise DanglingReference(f"instance id {ann_id} is not a COCO annotation id", f"{where}.instance_ids[{p}]")
            awhere, ann = coco_anns[ann_id]
            if ann.get("image_id") != image_id:
                raise DanglingReference(f"annotation {ann_id} belongs to image {ann.get('image_id')}", awhere)
            cat_id = _require(ann, "category_id", int, awhere)
            if cat_id not in categories:
                raise DanglingReference(f"unknown category id {cat_id}", awhere)
            bbox_raw = _require(ann, "bbox", list, awhere)
            if len(bbox_raw) != 4:
                raise MalformedAnnotation("bbox must have 4 entries", awhere)
            try:
                bbox = BBox(*(float(v) for v in bbox_raw)).clamp(width, height)
            except (TypeError, ValueError) as exc:
                raise MalformedAnnotation(f"bad bbox ({exc})", awhere) from exc
            raw.append((categories[cat_id].strip(), bbox, ann.get("segmentation"), bool(ann.get("iscrowd", 0))))

        n = len(raw)
        edges = []
        occlusion = rec.get("occlusion") or []
        if not isinstance(occlusion, list):
            raise MalformedAnnotation("'occlusion' must be a list", where)
        for q, occ in enumerate(occlusion):
            owhere = f"{where}.occlusion[{q}]"
            order = _require(occ, "order", str, owhere)
            m = _ORDER_RE.match(order)
            if m is None:
                raise MalformedAnnotation(f"bad occlusion order {order!r}", owhere)
            a, op, b = int(m.group(1)), m.group(2), int(m.group(3))
            for idx in (a, b):
                if not 0 <= idx < n:
                    raise DanglingReference(f"order {order!r} names position {idx} of {n} instances", owhere)
            if a == b:
                raise MalformedAnnotation(f"self-occlusion record {order!r}", owhere)
            if op == "<":
                edges.append((a, b))
            elif op == ">":
                edges.append((b, a))
            else:
                edges.extend([(a, b), (b, a)])
            report.ordering_records += 1

        keep = [i for i, r in enumerate(raw) if not (exclude_crowd and r[3])]
        report.crowd_excluded += n - len(keep)
        scene = Scene(
            image_id=image_id,
            file_name=str(img.get("file_name", "")),
            width=width,
            height=height,
            instances=tuple(_build_instances([raw[i] for i in keep])),
            ground_truth=_subset_relations(n, edges, keep),
        )
        report.edges += int(scene.ground_truth.adj.sum())
        scenes.append(scene)

    if report.skipped_image_ids:
        warnings.warn(
            f"{len(report.skipped_image_ids)} InstaOrder record(s) name image ids absent from "
            f"{csrc}; skipped: {report.skipped_image_ids[:10]}",
            UnmatchedImageId,
            stacklevel=2,
        )
    return scenes


# scenes JSONL


def scene_to_json(scene: Scene) -> dict:
    return {
        "image_id": scene.image_id,
        "file_name": scene.file_name,
        "width": scene.width,
        "height": scene.height,
        "instances": [
            {
                "category": inst.category,
                "category_index": inst.category_index,
                "display_name": inst.display_name,
                "bbox": inst.bbox.as_list(),
                "segmentation": inst.segmentation,
                "iscrowd": inst.iscrowd,
            }
            for inst in scene.instances
        ],
        "gt_signed": to_signed(scene.ground_truth).to_json(),
    }


def scene_from_json(obj: dict, where: str = "") -> Scene:
    try:
        instances = tuple(
            InstanceRef(
                scene_local_id=k,
                category=inst["category"],
                category_index=int(inst["category_index"]),
                display_name=inst["display_name"],
                bbox=BBox(*(float(v) for v in inst["bbox"])),
                segmentation=inst.get("segmentation"),
                iscrowd=bool(inst.get("iscrowd", False)),
            )
            for k, inst in enumerate(obj["instances"])
        )
        return Scene(
            image_id=int(obj["image_id"]),
            file_name=obj.get("file_name", ""),
            width=int(obj["width"]),
            height=int(obj["height"]),
            instances=instances,
            ground_truth=from_signed(SignedOrderMatrix.from_json(obj["gt_signed"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedAnnotation(f"bad scene record ({exc!r})", where) from exc


def write_scenes(scenes: Iterable[Scene], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for scene in scenes:
            f.write(json.dumps(scene_to_json(scene), separators=(",", ":")) + "\n")


def iter_scenes(path: str | Path) -> Iterator[Scene]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                yield scene_from_json(json.loads(line), f"{path}:{lineno}")


def read_scenes(path: str | Path) -> list[Scene]:
    return list(iter_scenes(path))
