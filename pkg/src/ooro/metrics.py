"""Pairwise occlusion accuracy and dataset-level aggregation.

A pair is an ordered (i, j), i != j, and it is correct when the predicted
``occludes(i, j)`` equals the ground truth. ``"all"`` mode scores every
ordered pair; ``"gt-occluded"`` mode only pairs where the ground truth has
an edge in either direction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .core import OcclusionRelations, OoroError, is_all_zero

PairMode = Literal["all", "gt-occluded"]
PAIR_MODES: tuple[str, ...] = ("all", "gt-occluded")


class EmptyEvaluation(OoroError, ValueError):
    pass


@dataclass(frozen=True)
class SceneEvaluation:
    image_id: int
    n: int
    correct_pairs: int
    total_pairs: int
    all_zero_prediction: bool
    comparable: bool

    @property
    def accuracy(self) -> float | None:
        if not self.comparable or self.total_pairs == 0:
            return None
        return self.correct_pairs / self.total_pairs


def scene_accuracy(
    pred: OcclusionRelations,
    gt: OcclusionRelations,
    pair_mode: PairMode = "all",
    image_id: int = -1,
) -> SceneEvaluation:
    if pair_mode not in PAIR_MODES:
        raise ValueError(f"unknown pair mode {pair_mode!r}")
    n = gt.n
    if pred.n != n:
        return SceneEvaluation(image_id, n, 0, 0, is_all_zero(pred), comparable=False)
    off_diag = ~np.eye(n, dtype=bool)
    if pair_mode == "gt-occluded":
        scored = off_diag & (gt.adj | gt.adj.T)
    else:
        scored = off_diag
    agree = (pred.adj == gt.adj) & scored
    return SceneEvaluation(
        image_id=image_id,
        n=n,
        correct_pairs=int(agree.sum()),
        total_pairs=int(scored.sum()),
        all_zero_prediction=is_all_zero(pred),
        comparable=True,
    )


def all_zero_rate(evals: Sequence[SceneEvaluation]) -> float:
    comparable = [e for e in evals if e.comparable]
    if not comparable:
        return 0.0
    return sum(e.all_zero_prediction for e in comparable) / len(comparable)


@dataclass
class EvaluationReport:
    method: str
    dataset: str
    pair_mode: str
    micro_accuracy: float
    macro_accuracy: float
    all_zero_rate: float
    incomparable_count: int
    per_scene: list[SceneEvaluation] = field(default_factory=list)
    correct_pairs: int = 0
    total_pairs: int = 0
    scenes_scored: int = 0

    def summary(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "pair_mode": self.pair_mode,
            "micro_accuracy": self.micro_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "all_zero_rate": self.all_zero_rate,
            "incomparable_count": self.incomparable_count,
            "correct_pairs": self.correct_pairs,
            "total_pairs": self.total_pairs,
            "scenes_scored": self.scenes_scored,
        }

    def to_json(self) -> dict:
        out = self.summary()
        out["per_scene"] = [asdict(e) for e in self.per_scene]
        return out


def aggregate(
    evals: Sequence[SceneEvaluation],
    method: str,
    dataset: str,
    pair_mode: PairMode = "all",
) -> EvaluationReport:
    scored = [e for e in evals if e.comparable and e.total_pairs > 0]
    if not scored:
        raise EmptyEvaluation(f"{method}/{dataset}: no comparable scene has any scored pair")
    correct = sum(e.correct_pairs for e in scored)
    total = sum(e.total_pairs for e in scored)
    macro = sum(e.correct_pairs / e.total_pairs for e in scored) / len(scored)
    return EvaluationReport(
        method=method,
        dataset=dataset,
        pair_mode=pair_mode,
        micro_accuracy=correct / total,
        macro_accuracy=macro,
        all_zero_rate=all_zero_rate(evals),
        incomparable_count=sum(not e.comparable for e in evals),
        per_scene=list(evals),
        correct_pairs=correct,
        total_pairs=total,
        scenes_scored=len(scored),
    )


CSV_FIELDS = ("method", "dataset", "pair_mode", "micro", "macro", "all_zero_rate", "incomparable")


def reports_to_csv(reports: Sequence[EvaluationReport]) -> str:
    """One row per report, shaped like a results table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow([r.method, r.dataset, r.pair_mode, f"{r.micro_accuracy:.6f}", f"{r.macro_accuracy:.6f}",
                    f"{r.all_zero_rate:.6f}", r.incomparable_count])
    return buf.getvalue()
