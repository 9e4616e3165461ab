"""Composition of the individual analyses into an AnalysisReport."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from imagecl.analysis.stencil import (
    READ_ONLY,
    READ_WRITE,
    AccessClass,
    Ineligible,
    StencilExtent,
    classify_accesses,
    stencil_extent,
)
from imagecl.analysis.valuesets import DEFAULT_MAX_SET_SIZE, propagate_value_sets
from imagecl.errors import MissingGridError
from imagecl.frontend.consteval import loop_values
from imagecl.frontend.nodes import TYPE_SIZES, For, ForcePragma, GridPragma, KernelAst, walk

DEFAULT_CONST_THRESHOLD = 4096


@dataclass(frozen=True)
class GridSpec:
    """Logical thread grid: bound to an image's dimensions or a literal size."""

    image: str | None = None
    size: tuple[int, int] | None = None

    @property
    def symbolic(self) -> bool:
        return self.image is not None

    def to_json(self):
        if self.symbolic:
            return {"kind": "image", "image": self.image}
        return {"kind": "literal", "width": self.size[0], "height": self.size[1]}


@dataclass(frozen=True)
class LoopInfo:
    id: str
    var: str
    trip: int | None
    values: tuple[int, ...] | None = None

    def to_json(self):
        return {"id": self.id, "var": self.var, "trip": self.trip}


@dataclass
class AnalysisReport:
    kernel: str
    grid: GridSpec
    access: dict[str, AccessClass]
    stencils: dict[str, StencilExtent | Ineligible]
    loops: list[LoopInfo]
    const_eligible: dict[str, bool]
    local_eligible: dict[str, bool]
    image_eligible: dict[str, bool]
    sizes: dict[str, int | None] = field(default_factory=dict)
    const_threshold: int = DEFAULT_CONST_THRESHOLD
    elem_bytes: dict[str, int] = field(default_factory=dict)
    # parameter id -> on/off from force pragmas
    forces: dict[str, bool] = field(default_factory=dict)

    def loop(self, loop_id: str) -> LoopInfo:
        for lp in self.loops:
            if lp.id == loop_id:
                return lp
        raise KeyError(loop_id)

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel,
            "grid": self.grid.to_json(),
            "accessClasses": {k: v.to_json() for k, v in self.access.items()},
            "stencils": {k: v.to_json() for k, v in self.stencils.items()},
            "loops": [lp.to_json() for lp in self.loops],
            "constEligible": self.const_eligible,
            "localEligible": self.local_eligible,
            "imageEligible": self.image_eligible,
            "sizeBytes": self.sizes,
            "constThresholdBytes": self.const_threshold,
            "forces": self.forces,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def infer_grid(ast: KernelAst) -> GridSpec:
    for p in ast.pragmas:
        if isinstance(p, GridPragma):
            if p.target is not None:
                return GridSpec(image=p.target)
            return GridSpec(size=tuple(p.size))
    raise MissingGridError(f"kernel {ast.name!r} has no '#pragma imcl grid(...)' directive")


def array_bytes(ast: KernelAst, grid: GridSpec, name: str) -> int | None:
    """Static size bound of an array parameter in bytes, if known."""
    p = ast.param(name)
    bound = ast.maxsize(name)
    if bound is not None:
        return bound
    if p.kind == "array" and p.length is not None:
        return p.length * TYPE_SIZES[p.type]
    if p.kind == "image" and not grid.symbolic:
        return grid.size[0] * grid.size[1] * TYPE_SIZES[p.type]
    return None


def analyze(
    ast: KernelAst,
    const_threshold: int = DEFAULT_CONST_THRESHOLD,
    max_set_size: int = DEFAULT_MAX_SET_SIZE,
) -> AnalysisReport:
    """Find the optimisation opportunities in a typechecked kernel."""
    grid = infer_grid(ast)
    access = classify_accesses(ast)
    vs = propagate_value_sets(ast, max_set_size)
    stencils = stencil_extent(ast, vs)
    loops = []
    for n in walk(ast.body):
        if isinstance(n, For):
            values = loop_values(n)
            loops.append(LoopInfo(n.loop_id, n.var, len(values) if values is not None else None,
                                  tuple(values) if values is not None else None))
    sizes = {}
    const_ok, local_ok, image_ok = {}, {}, {}
    for p in ast.params:
        if p.kind == "scalar":
            continue
        cls = access[p.name]
        size = array_bytes(ast, grid, p.name)
        sizes[p.name] = size
        const_ok[p.name] = cls.kind == READ_ONLY and size is not None and size <= const_threshold
        if p.kind == "image":
            local_ok[p.name] = (
                cls.kind == READ_ONLY and cls.reads > 0
                and isinstance(stencils[p.name], StencilExtent)
            )
            image_ok[p.name] = cls.kind != READ_WRITE
    elem = {p.name: TYPE_SIZES[p.type] for p in ast.params if p.kind != "scalar"}
    forces = {p.param: p.on for p in ast.pragmas if isinstance(p, ForcePragma)}
    return AnalysisReport(
        ast.name, grid, access, stencils, loops, const_ok, local_ok, image_ok, sizes,
        const_threshold, elem, forces,
    )
