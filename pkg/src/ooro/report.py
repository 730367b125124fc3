"""Prediction records, per-scene prediction runners, evaluation and DOT export."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import baselines
from .annotations import category_csv
from .core import OcclusionRelations, OoroError, Scene, SignedOrderMatrix, from_signed, to_signed
from .llm import CacheMiss, EndpointConfig, ResponseCache, build_prompt, query
from .metrics import PAIR_MODES, EmptyEvaluation, EvaluationReport, SceneEvaluation, aggregate, reports_to_csv, scene_accuracy
from .parser import parse_response

logger = logging.getLogger(__name__)

GPT_METHOD = "gpt"
METHODS = ("area", "yaxis", "bbbd", GPT_METHOD)


@dataclass
class PredictionRecord:
    image_id: int
    method: str
    signed: SignedOrderMatrix | None
    provenance: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] | None = None
    error: str | None = None

    @property
    def relations(self) -> OcclusionRelations | None:
        return from_signed(self.signed) if self.signed is not None else None

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "image_id": self.image_id,
            "method": self.method,
            "matrix": self.signed.to_json() if self.signed is not None else None,
            "provenance": self.provenance,
        }
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics
        if self.error is not None:
            out["error"] = self.error
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PredictionRecord":
        matrix = obj.get("matrix")
        signed = SignedOrderMatrix.from_json(matrix) if matrix is not None else None
        if signed is not None:
            from_signed(signed)  # validates the encoding
        return cls(
            image_id=int(obj["image_id"]),
            method=str(obj["method"]),
            signed=signed,
            provenance=obj.get("provenance") or {},
            diagnostics=obj.get("diagnostics"),
            error=obj.get("error"),
        )


def predict_baseline(scene: Scene, method: str) -> PredictionRecord:
    try:
        rel = baselines.predict(method, scene)
    except OoroError as exc:
        return PredictionRecord(scene.image_id, method, None, {"baseline": method}, error=f"{type(exc).__name__}: {exc}")
    return PredictionRecord(scene.image_id, method, to_signed(rel), {"baseline": method})


def predict_gpt(
    scene: Scene,
    images_dir: Path,
    config: EndpointConfig,
    cache: ResponseCache,
    include_bboxes: bool = False,
) -> PredictionRecord:
    """Prompt, query (or replay) and parse one scene; failures land in ``error``."""
    provenance: dict[str, Any] = {"model": config.model, "temperature": config.temperature}
    if include_bboxes:
        provenance["include_bboxes"] = True
    try:
        image_bytes = (images_dir / scene.file_name).read_bytes()
    except OSError as exc:
        return PredictionRecord(scene.image_id, GPT_METHOD, None, provenance, error=f"ImageUnavailable: {exc}")
    try:
        prompt = build_prompt(
            category_csv(scene),
            include_bboxes,
            [(inst.display_name, inst.bbox) for inst in scene.instances],
        )
        exchange = query(image_bytes, prompt, config, cache)
    except (OoroError, ValueError) as exc:
        return PredictionRecord(scene.image_id, GPT_METHOD, None, provenance, error=f"{type(exc).__name__}: {exc}")
    provenance["cache_key"] = exchange.cache_key
    rel, parsed = parse_response(exchange.response_text, scene)
    diagnostics = {
        "unmatched_labels": parsed.unmatched_labels,
        "all_zero": parsed.all_zero,
        "ignored_lines": parsed.ignored_lines,
        "sequence_mismatch": parsed.sequence_mismatch,
    }
    return PredictionRecord(scene.image_id, GPT_METHOD, to_signed(rel), provenance, diagnostics)


def is_cache_miss(record: PredictionRecord) -> bool:
    return record.error is not None and record.error.startswith(CacheMiss.__name__ + ":")


def write_predictions(records: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_json(), separators=(",", ":"), sort_keys=True) + "\n")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(PredictionRecord.from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction record ({exc})") from exc
    return out


class UnknownImageId(OoroError, KeyError):
    pass


CONVENTIONS = {
    "pair": "ordered (i, j), i != j; correct when predicted occludes(i, j) equals ground truth",
    "mutual_ground_truth": "a mutual pair is scored as two independent ordered pairs",
    "all_zero_rate_denominator": "comparable scenes",
    "failed_predictions": "scored as incomparable",
}


@dataclass
class EvaluationResult:
    primary: EvaluationReport
    alternate: EvaluationReport | None
    failed_predictions: int
    scenes_without_prediction: int
    provenance: dict[str, Any]

    def to_json(self) -> dict:
        out = self.primary.to_json()
        out["alternate"] = self.alternate.summary() if self.alternate is not None else None
        out["failed_predictions"] = self.failed_predictions
        out["scenes_without_prediction"] = self.scenes_without_prediction
        out["provenance"] = self.provenance
        out["conventions"] = CONVENTIONS
        return out


def evaluate(
    records: Sequence[PredictionRecord],
    scenes: Sequence[Scene],
    dataset: str,
    pair_mode: str = "all",
) -> EvaluationResult:
    """Score predictions in both pair modes; ``pair_mode`` picks the primary one.

    Records that carry an error instead of a matrix count as incomparable.
    """
    by_id = {s.image_id: s for s in scenes}
    unknown = [r.image_id for r in records if r.image_id not in by_id]
    if unknown:
        raise UnknownImageId(f"predictions name image ids absent from scenes: {unknown[:10]}")
    methods = sorted({r.method for r in records})
    if len(methods) > 1:
        raise ValueError(f"predictions mix methods {methods}")
    method = methods[0] if methods else "none"

    reports: dict[str, EvaluationReport | None] = {}
    for mode in sorted(PAIR_MODES, key=lambda m: m != pair_mode):
        evals = []
        for rec in records:
            gt = by_id[rec.image_id].ground_truth
            pred = rec.relations
            if pred is None:
                evals.append(SceneEvaluation(rec.image_id, gt.n, 0, 0, False, comparable=False))
            else:
                evals.append(scene_accuracy(pred, gt, mode, rec.image_id))  # type: ignore[arg-type]
        try:
            reports[mode] = aggregate(evals, method, dataset, mode)  # type: ignore[arg-type]
        except EmptyEvaluation:
            if mode == pair_mode:
                raise
            reports[mode] = None

    predicted_ids = {r.image_id for r in records}
    primary = reports[pair_mode]
    assert primary is not None
    return EvaluationResult(
        primary=primary,
        alternate=reports[next(m for m in PAIR_MODES if m != pair_mode)],
        failed_predictions=sum(r.signed is None for r in records),
        scenes_without_prediction=sum(s.image_id not in predicted_ids for s in scenes),
        provenance=_merge_provenance(records),
    )


def _merge_provenance(records: Sequence[PredictionRecord]) -> dict:
    merged: dict[str, list] = {}
    for rec in records:
        for key, value in rec.provenance.items():
            if key == "cache_key":
                continue
            bucket = merged.setdefault(key, [])
            if value not in bucket:
                bucket.append(value)
    return {k: v[0] if len(v) == 1 else v for k, v in sorted(merged.items())}


def write_report(result: EvaluationResult, json_path: str | Path, csv_path: str | Path | None = None) -> None:
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(result.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            f.write(reports_to_csv([r for r in (result.primary, result.alternate) if r is not None]))


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(relations: OcclusionRelations | PredictionRecord, scene: Scene, name: str | None = None) -> str:
    """Occlusion order graph: one node per instance, occluder -> occludee edges."""
    rel = relations.relations if isinstance(relations, PredictionRecord) else relations
    if rel is None:
        raise ValueError(f"prediction for image {scene.image_id} has no matrix")
    if rel.n != scene.n:
        raise ValueError(f"relation has n={rel.n}, scene {scene.image_id} has {scene.n} instances")
    names = scene.display_names
    lines = [f"digraph {_dot_quote(name or f'image_{scene.image_id}')} {{"]
    lines += [f"  {_dot_quote(nm)};" for nm in names]
    lines += [f"  {_dot_quote(names[i])} -> {_dot_quote(names[j])};" for i, j in rel.edges()]
    lines.append("}")
    return "\n".join(lines) + "\n"
