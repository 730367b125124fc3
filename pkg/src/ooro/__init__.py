"""Occlusion order recovery from annotated images.

Relations between a scene's instances come either from a vision-LLM reply
(prompt, query, parse) or from the Area / Y-Axis / BBBD heuristics, and
are scored against COCOA or InstaOrder ground truth.
"""

from .core import (
    InconsistentMatrix,
    IndexOutOfRange,
    InstanceRef,
    OcclusionRelations,
    OoroError,
    Scene,
    SelfOcclusion,
    SignedOrderMatrix,
    from_signed,
    is_all_zero,
    relations_new,
    set_occludes,
    to_signed,
)
from .geometry import KERNEL_IMPLEMENTATION, BBox, BinaryMask

__all__ = [
    "BBox",
    "BinaryMask",
    "InconsistentMatrix",
    "IndexOutOfRange",
    "InstanceRef",
    "KERNEL_IMPLEMENTATION",
    "OcclusionRelations",
    "OoroError",
    "Scene",
    "SelfOcclusion",
    "SignedOrderMatrix",
    "from_signed",
    "is_all_zero",
    "relations_new",
    "set_occludes",
    "to_signed",
]
