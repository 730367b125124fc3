"""Regenerate the committed test fixtures.

    python tests/fixtures/make_fixtures.py          # inputs only
    python tests/fixtures/make_fixtures.py --golden  # inputs + golden outputs

Inputs are COCOA-format annotation files, tiny PNG images and a recorded
response cache. The responses are hand-scripted replies in the style of a
vision model (some with wrong, missing or unmatched statements, two empty);
they are not output captured from any real model. Golden outputs are
produced once by running the CLI on the inputs and are then frozen.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent.parent / "src"))
sys.path.insert(0, str(HERE.parent))

from oracles import counts_to_string, encode_rle  # noqa: E402

FIXTURE_MODEL = "fixture-model"
EMPTY_RESPONSE_SCENES = (5, 13)


def png_bytes(seed: int, w: int, h: int) -> bytes:
    rng = np.random.default_rng(seed)
    img = (rng.random((h, w, 3)) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def rect_poly(x, y, w, h):
    return [float(x), float(y), float(x + w), float(y), float(x + w), float(y + h), float(x), float(y + h)]


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def clock_tower_fixture(out: Path) -> None:
    """One image: two clocks on a building facade; both clocks occlude the building."""
    out.mkdir(parents=True, exist_ok=True)
    w, h = 48, 64
    building = np.zeros((h, w), dtype=bool)
    building[4:60, 4:44] = True
    building[10:20, 8:18] = False  # clock 0 hides this part
    building[10:20, 28:38] = False  # clock 1 hides this part
    data = {
        "images": [{"id": 1, "file_name": "clock_tower.png", "width": w, "height": h}],
        "annotations": [
            {
                "id": 1,
                "image_id": 1,
                "size": 3,
                "depth_constraint": "1-3,2-3",
                "regions": [
                    {"name": "clock", "order": 1, "segmentation": rect_poly(8, 10, 10, 10), "isStuff": 0},
                    {"name": "clock", "order": 2, "segmentation": rect_poly(28, 10, 10, 10), "isStuff": 0},
                    {
                        "name": "building",
                        "order": 3,
                        "segmentation": rect_poly(4, 4, 40, 56),
                        "visible_mask": {"size": [h, w], "counts": counts_to_string(encode_rle(building))},
                        "isStuff": 1,
                    },
                ],
            }
        ],
    }
    write_json(out / "cocoa_clock_tower.json", data)
    (out / "response.txt").write_text(
        "0. Clock 0\n1. Clock 1\n2. Building 0\n\nObject Clock 0 occludes Object Building 0\n"
        "Object Clock 1 occludes Object Building 0\n",
        encoding="utf-8",
    )
    # six objects found without a category list, versus three annotated ones
    nocat = {
        "n": 6,
        "m": [
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 1, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [0, -1, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [-1, 0, -1, 0, -1, 0],
        ],
    }
    write_json(out / "nocategory_prediction.json", nocat)


CATEGORIES = ["person", "bottle", "clock", "dog", "car", "chair", "cup", "building"]


def random_image(rng, image_id: int):
    w, h = int(rng.integers(32, 65)), int(rng.integers(32, 65))
    k = int(rng.integers(2, 6))
    regions, boxes = [], []
    for r in range(k):
        bw, bh = int(rng.integers(6, w // 2 + 4)), int(rng.integers(6, h // 2 + 4))
        x, y = int(rng.integers(0, w - bw)), int(rng.integers(0, h - bh))
        boxes.append((x, y, bw, bh))
        regions.append({"name": str(rng.choice(CATEGORIES)), "order": r + 1, "segmentation": rect_poly(x, y, bw, bh)})
    # ground truth: every overlapping pair gets a seeded direction
    constraints = []
    for i in range(k):
        for j in range(i + 1, k):
            a, b = boxes[i], boxes[j]
            if min(a[0] + a[2], b[0] + b[2]) > max(a[0], b[0]) and min(a[1] + a[3], b[1] + b[3]) > max(a[1], b[1]):
                front, back = (i, j) if rng.random() < 0.5 else (j, i)
                constraints.append((front, back))
    # the occluded region's visible part is its box minus its occluders' boxes
    for front, back in constraints:
        reg = regions[back]
        bits = np.zeros((h, w), dtype=bool)
        x, y, bw, bh = boxes[back]
        if "visible_mask" in reg:
            from ooro.geometry import decode_rle_object

            bits = decode_rle_object(reg["visible_mask"]).bits.copy()
        else:
            bits[y : y + bh, x : x + bw] = True
        fx, fy, fw, fh = boxes[front]
        bits[fy : fy + fh, fx : fx + fw] = False
        reg["visible_mask"] = {"size": [h, w], "counts": counts_to_string(encode_rle(bits))}
    ann = {
        "id": image_id,
        "image_id": image_id,
        "size": k,
        "depth_constraint": ",".join(f"{a + 1}-{b + 1}" for a, b in constraints),
        "regions": regions,
    }
    img = {"id": image_id, "file_name": f"{image_id:012d}.png", "width": w, "height": h}
    return img, ann


def scripted_reply(rng, scene, k: int) -> str:
    """A reply in the expected format with scene-dependent mistakes."""
    names = [n.title() for n in scene.display_names]
    order = list(rng.permutation(scene.n))
    lines = ["Ordered list:"] + [f"{q}. {names[i]}" for q, i in enumerate(order)] + ["", "Occlusions:"]
    edges = scene.ground_truth.edges()
    kind = k % 5
    stmts = []
    for idx, (i, j) in enumerate(edges):
        if kind == 1 and idx == 0:
            i, j = j, i  # reversed direction
        if kind == 2 and idx == len(edges) - 1 and len(edges) > 1:
            continue  # missed relation
        stmts.append((i, j))
    if kind == 3:
        stmts.append((0, 1) if scene.n > 1 else (0, 0))  # spurious relation
    if not stmts:
        stmts.append((0, 1))
    for i, j in stmts:
        if i != j:
            lines.append(f'"Object {names[i]} occludes Object {names[j]}"')
    if kind == 4:
        lines.append("Automobile 0 occludes " + names[0])
    return "\n".join(lines) + "\n"


def e2e_fixture(out: Path, n_images: int = 20) -> None:
    from ooro.annotations import category_csv, load_cocoa
    from ooro.llm import LlmExchange, build_prompt, cache_key, image_digest

    out.mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(exist_ok=True)
    rng = np.random.default_rng(2024)
    images, anns = [], []
    for k in range(n_images):
        img, ann = random_image(rng, 1000 + k)
        images.append(img)
        anns.append(ann)
    write_json(out / "cocoa_e2e.json", {"images": images, "annotations": anns})

    scenes = load_cocoa(out / "cocoa_e2e.json")
    cache_lines = []
    for k, (scene, img) in enumerate(zip(scenes, images)):
        data = png_bytes(k, img["width"], img["height"])
        (out / "images" / img["file_name"]).write_bytes(data)
        prompt = build_prompt(category_csv(scene)).rendered
        reply = "" if k in EMPTY_RESPONSE_SCENES else scripted_reply(rng, scene, k)
        ex = LlmExchange(cache_key(FIXTURE_MODEL, prompt, image_digest(data)), FIXTURE_MODEL,
                         image_digest(data), prompt, reply, 1700000000 + k)
        cache_lines.append(json.dumps(ex.to_json(), ensure_ascii=False, sort_keys=True))
    (out / "cache.jsonl").write_text("\n".join(cache_lines) + "\n", encoding="utf-8")


def small_fixture(out: Path) -> None:
    rng = np.random.default_rng(7)
    images, anns = [], []
    for k in range(3):
        img, ann = random_image(rng, 500 + k)
        images.append(img)
        anns.append(ann)
    write_json(out / "cocoa_small.json", {"images": images, "annotations": anns})


def goldens(root: Path) -> None:
    import tempfile

    from ooro.cli import main

    with tempfile.TemporaryDirectory() as tmp:
        t = Path(tmp)
        e2e = root / "e2e"
        assert main(["ingest", "--cocoa", str(e2e / "cocoa_e2e.json"), "--out", str(t / "scenes.jsonl")]) == 0
        assert main(["predict", "--scenes", str(t / "scenes.jsonl"), "--method", "gpt", "--replay-only",
                     "--cache", str(e2e / "cache.jsonl"), "--model", FIXTURE_MODEL,
                     "--images", str(e2e / "images"), "--out", str(e2e / "golden_predictions.jsonl")]) == 0
        assert main(["eval", "--pred", str(e2e / "golden_predictions.jsonl"), "--scenes", str(t / "scenes.jsonl"),
                     "--dataset", "e2e-fixture", "--out", str(e2e / "golden_report.json"),
                     "--csv", str(e2e / "golden_report.csv")]) == 0
        assert main(["ingest", "--cocoa", str(root / "cocoa_small.json"), "--out", str(t / "small.jsonl")]) == 0
        assert main(["predict", "--scenes", str(t / "small.jsonl"), "--method", "area",
                     "--out", str(root / "golden_small_area.jsonl")]) == 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--golden", action="store_true")
    args = ap.parse_args()
    clock_tower_fixture(HERE / "clock_tower")
    e2e_fixture(HERE / "e2e")
    small_fixture(HERE)
    if args.golden:
        goldens(HERE)
