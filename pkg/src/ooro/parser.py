"""Turn a model reply into occlusion relations over a scene's instances.

Only explicit ``<X> occludes <Y>`` lines create edges. A leading numbered
list is kept as the foreground-to-background order for diagnostics. Labels
are matched exactly after normalization; anything unmatched is reported.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import OcclusionRelations, Scene

_BULLET = re.compile(r"^\s*(?:[-*•]+|\d+\s*[.)])\s*")
_ENUMERATED = re.compile(r"^\s*\d+\s*[.)]\s*")
_STATEMENT = re.compile(r"^(?P<a>.+?)\s+occludes\s+(?P<b>.+)$", re.IGNORECASE)
_OBJECT_PREFIX = re.compile(r"^object\s+", re.IGNORECASE)
_TRAILING_INDEX = re.compile(r"\s\d+$")
_EDGE_PUNCT = "\"'`.,;:!?()[]{}*_ \t"


@dataclass
class ParsedStatement:
    raw_line: str
    occluder_text: str
    occludee_text: str
    resolved: tuple[int, int] | None = None


@dataclass
class ParseReport:
    statements: list[ParsedStatement] = field(default_factory=list)
    unmatched_labels: list[str] = field(default_factory=list)
    ordered_list: list[int] | None = None
    all_zero: bool = True
    ignored_lines: int = 0
    sequence_mismatch: bool = False

    def to_json(self) -> dict:
        return {
            "statements": [
                {
                    "raw_line": s.raw_line,
                    "occluder": s.occluder_text,
                    "occludee": s.occludee_text,
                    "resolved": list(s.resolved) if s.resolved else None,
                }
                for s in self.statements
            ],
            "unmatched_labels": self.unmatched_labels,
            "ordered_list": self.ordered_list,
            "all_zero": self.all_zero,
            "ignored_lines": self.ignored_lines,
            "sequence_mismatch": self.sequence_mismatch,
        }


def _collapse(text: str) -> str:
    return " ".join(text.split()).lower()


def normalize_label(text: str, singletons: dict[str, str] | None = None) -> str:
    """Canonical form used for matching: ``"Object Bottle 1."`` -> ``"bottle 1"``.

    ``singletons`` maps a normalized category to its display name when the
    scene has exactly one instance of it, so a bare ``"building"`` resolves.
    """
    label = _collapse(text).strip(_EDGE_PUNCT)
    label = _OBJECT_PREFIX.sub("", label).strip(_EDGE_PUNCT)
    label = " ".join(label.split())
    if singletons and not _TRAILING_INDEX.search(label) and label in singletons:
        label = singletons[label]
    return label


class LabelResolver:
    """Maps normalized labels to instance indices for one list of display names."""

    def __init__(self, names: Sequence[str], categories: Sequence[str] | None = None):
        self.index = {_collapse(name): k for k, name in enumerate(names)}
        if categories is None:
            categories = [_TRAILING_INDEX.sub("", name) for name in names]
        counts = Counter(_collapse(c) for c in categories)
        self.singletons = {
            _collapse(cat): _collapse(name)
            for cat, name in zip(categories, names)
            if counts[_collapse(cat)] == 1
        }

    @classmethod
    def for_scene(cls, scene: Scene) -> "LabelResolver":
        return cls(scene.display_names, [inst.category for inst in scene.instances])

    def resolve(self, text: str) -> tuple[str, int | None]:
        label = normalize_label(text, self.singletons)
        return label, self.index.get(label)


def parse_response(text: str, scene: Scene | LabelResolver) -> tuple[OcclusionRelations, ParseReport]:
    resolver = scene if isinstance(scene, LabelResolver) else LabelResolver.for_scene(scene)
    n = len(resolver.index)
    adj = np.zeros((n, n), dtype=bool)
    report = ParseReport()
    ordered: list[int] = []
    ordered_seen = False
    list_open = True

    for raw in text.splitlines():
        if not raw.strip():
            continue
        enumerated = bool(_ENUMERATED.match(raw))
        line = _BULLET.sub("", raw, count=1).strip()
        m = _STATEMENT.match(line)
        if m is not None:
            list_open = False
            a_label, i = resolver.resolve(m.group("a"))
            b_label, j = resolver.resolve(m.group("b"))
            stmt = ParsedStatement(raw, m.group("a").strip(), m.group("b").strip())
            report.statements.append(stmt)
            for label, idx in ((a_label, i), (b_label, j)):
                if idx is None and label not in report.unmatched_labels:
                    report.unmatched_labels.append(label)
            if i is None or j is None:
                continue
            if i == j:
                report.ignored_lines += 1
                continue
            stmt.resolved = (i, j)
            adj[i, j] = True
        elif enumerated and list_open:
            ordered_seen = True
            label, idx = resolver.resolve(line)
            if idx is None:
                if label not in report.unmatched_labels:
                    report.unmatched_labels.append(label)
                report.sequence_mismatch = True
            else:
                ordered.append(idx)
        else:
            if ordered_seen:
                list_open = False
            report.ignored_lines += 1

    report.all_zero = not any(s.resolved for s in report.statements)
    if ordered_seen:
        report.ordered_list = ordered
        report.sequence_mismatch |= _contradicts_order(ordered, report.statements)
    return OcclusionRelations(adj), report


def _contradicts_order(ordered: list[int], statements: list[ParsedStatement]) -> bool:
    if len(set(ordered)) != len(ordered):
        return True
    rank = {idx: k for k, idx in enumerate(ordered)}
    for s in statements:
        if s.resolved is None:
            continue
        i, j = s.resolved
        if i in rank and j in rank and rank[i] > rank[j]:
            return True
    return False


def relations_to_statements(r: OcclusionRelations, names: Sequence[str]) -> str:
    """One ``"<a> occludes <b>"`` line per edge, row-major."""
    if len(names) != r.n:
        raise ValueError(f"{len(names)} names for an n={r.n} relation")
    return "\n".join(f"{names[i]} occludes {names[j]}" for i, j in r.edges())
