"""Static analyses that discover the tuning opportunities of a kernel."""

from imagecl.analysis.report import (
    AnalysisReport,
    GridSpec,
    LoopInfo,
    analyze,
    array_bytes,
    infer_grid,
)
from imagecl.analysis.stencil import (
    READ_ONLY,
    READ_WRITE,
    WRITE_ONLY,
    AccessClass,
    Ineligible,
    StencilExtent,
    classify_accesses,
    offset_set,
    stencil_extent,
)
from imagecl.analysis.valuesets import TOP, ValueSets, propagate_value_sets

__all__ = [
    "AnalysisReport", "GridSpec", "LoopInfo", "analyze", "array_bytes", "infer_grid",
    "READ_ONLY", "READ_WRITE", "WRITE_ONLY", "AccessClass", "Ineligible", "StencilExtent",
    "classify_accesses", "offset_set", "stencil_extent", "TOP", "ValueSets",
    "propagate_value_sets",
]
