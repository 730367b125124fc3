"""Instance and occlusion-relation data model.

``OcclusionRelations`` (a boolean directed adjacency) is the canonical form.
``SignedOrderMatrix`` is the {-1, 0, 1, 2} interchange form written to
prediction files, where 2 marks a mutual pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

if TYPE_CHECKING:
    from .geometry import BBox


class OoroError(Exception):
    """Base class for library errors."""


class IndexOutOfRange(OoroError, IndexError):
    pass


class SelfOcclusion(OoroError, ValueError):
    pass


class InconsistentMatrix(OoroError, ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InstanceRef:
    """One annotated object within a scene."""

    scene_local_id: int
    category: str
    category_index: int
    display_name: str
    bbox: "BBox"
    segmentation: Any = None
    iscrowd: bool = False

    @property
    def has_mask(self) -> bool:
        return self.segmentation is not None


@dataclass(frozen=True, eq=False)
class OcclusionRelations:
    """``adj[i, j]`` is True iff instance i occludes instance j."""

    adj: np.ndarray

    def __post_init__(self) -> None:
        adj = np.array(self.adj, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.diagonal().any():
            raise SelfOcclusion("adjacency has a true diagonal entry")
        object.__setattr__(self, "adj", _frozen(adj))

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def occludes(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def edges(self) -> list[tuple[int, int]]:
        """Directed edges in row-major order."""
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OcclusionRelations):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self) -> int:
        return hash((self.n, self.adj.tobytes()))

    def __repr__(self) -> str:
        return f"OcclusionRelations(n={self.n}, edges={self.edges()})"


@dataclass(frozen=True, eq=False)
class SignedOrderMatrix:
    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=np.int8, copy=True)
        if m.size == 0:
            m = m.reshape(0, 0)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InconsistentMatrix(f"signed matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "m", _frozen(m))

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m.astype(int).tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "SignedOrderMatrix":
        n = int(obj["n"])
        rows = obj["m"]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise InconsistentMatrix(f"matrix rows do not match n={n}")
        return cls(np.array(rows, dtype=np.int8).reshape(n, n))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedOrderMatrix):
            return NotImplemented
        return self.m.shape == other.m.shape and bool(np.array_equal(self.m, other.m))

    def __hash__(self) -> int:
        return hash((self.n, self.m.tobytes()))

    def __repr__(self) -> str:
        return f"SignedOrderMatrix({self.m.astype(int).tolist()})"


@dataclass(frozen=True)
class Scene:
    image_id: int
    file_name: str
    width: int
    height: int
    instances: tuple[InstanceRef, ...]
    ground_truth: OcclusionRelations = field(compare=True)

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.ground_truth.n != len(self.instances):
            raise ValueError(
                f"image {self.image_id}: ground truth has n={self.ground_truth.n} "
                f"but the scene has {len(self.instances)} instances"
            )

    @property
    def n(self) -> int:
        return len(self.instances)

    @property
    def display_names(self) -> list[str]:
        return [inst.display_name for inst in self.instances]


def relations_new(n: int) -> OcclusionRelations:
    if n < 0:
        raise ValueError("instance count must be non-negative")
    return OcclusionRelations(np.zeros((n, n), dtype=bool))


def set_occludes(r: OcclusionRelations, i: int, j: int) -> OcclusionRelations:
    """Return a copy of ``r`` with the edge i -> j added."""
    n = r.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexOutOfRange(f"({i}, {j}) outside an n={n} relation")
    if i == j:
        raise SelfOcclusion(f"instance {i} cannot occlude itself")
    adj = r.adj.copy()
    adj[i, j] = True
    return OcclusionRelations(adj)


def relations_from_edges(n: int, edges: Sequence[tuple[int, int]]) -> OcclusionRelations:
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"({i}, {j}) outside an n={n} relation")
        if i == j:
            raise SelfOcclusion(f"instance {i} cannot occlude itself")
        adj[i, j] = True
    return OcclusionRelations(adj)


def to_signed(r: OcclusionRelations) -> SignedOrderMatrix:
    a = r.adj
    at = a.T
    m = np.zeros(a.shape, dtype=np.int8)
    m[a & ~at] = 1
    m[at & ~a] = -1
    m[a & at] = 2
    return SignedOrderMatrix(m)


def from_signed(s: SignedOrderMatrix) -> OcclusionRelations:
    m = s.m
    if np.any(np.diagonal(m) != 0):
        raise InconsistentMatrix("diagonal entries must be 0")
    bad = ~np.isin(m, (-1, 0, 1, 2))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise InconsistentMatrix(f"entry ({i}, {j}) = {m[i, j]} is not in {{-1, 0, 1, 2}}")
    mt = m.T
    checks = (
        (m == 1) & (mt != -1),
        (m == -1) & (mt != 1),
        (m == 2) & (mt != 2),
        (m == 0) & (mt != 0),
    )
    for bad in checks:
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise InconsistentMatrix(
                f"entries ({i}, {j}) = {m[i, j]} and ({j}, {i}) = {m[j, i]} disagree"
            )
    return OcclusionRelations((m == 1) | (m == 2))


def is_all_zero(r: OcclusionRelations) -> bool:
    return not r.adj.any()
