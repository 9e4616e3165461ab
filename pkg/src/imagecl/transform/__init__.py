"""Apply a tuning configuration to a kernel AST."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from imagecl.analysis.report import AnalysisReport
from imagecl.frontend.nodes import TYPE_SIZES, KernelAst
from imagecl.frontend.printer import SourcePrinter
from imagecl.transform.passes import (
    BLOCKED,
    INTERLEAVED,
    INTERLEAVED_WG,
    LocalTile,
    check_barriers,
    coarsen_and_map,
    dim_names,
    flatten_blocks,
    grid_dims,
    logical_index,
    lower_images_and_boundaries,
    make_tile,
    mapping_mode,
    place_constant_memory,
    place_image_memory,
    place_local_memory,
    tidy_signs,
    split_prologue,
    unroll_loop,
)
from imagecl.tuning import Configuration


@dataclass(frozen=True)
class Binding:
    param: str
    space: str  # global, constant, image2d_read, image2d_write, scalar
    elem_type: str
    length: str | None  # element count as an expression over W and H

    def to_json(self):
        return {"name": self.param, "space": self.space, "type": self.elem_type, "length": self.length}


@dataclass(frozen=True)
class LaunchDescriptor:
    local_size: tuple[int, int]
    coarsen: tuple[int, int]
    bindings: tuple[Binding, ...]
    logical_grid: tuple[int, int] | None = None
    dims: tuple[str, str] | None = None  # names of the W/H kernel arguments, if any

    @property
    def global_size(self) -> tuple[int, int] | None:
        if self.logical_grid is None:
            return None
        return tuple(
            global_extent(n, c, w)
            for n, c, w in zip(self.logical_grid, self.coarsen, self.local_size)
        )

    def resolve(self, width: int, height: int) -> "LaunchDescriptor":
        return LaunchDescriptor(self.local_size, self.coarsen, self.bindings, (width, height), self.dims)

    def to_json(self) -> dict:
        return {
            "globalSize": list(self.global_size) if self.global_size else None,
            "localSize": list(self.local_size),
            "logicalGrid": list(self.logical_grid) if self.logical_grid else None,
            "bindings": [b.to_json() for b in self.bindings],
        }


def global_extent(n: int, coarsen: int, wg: int) -> int:
    """Least multiple of ``wg`` covering ``ceil(n / coarsen)`` work-items."""
    items = math.ceil(n / coarsen)
    return math.ceil(items / wg) * wg


@dataclass
class TransformedKernel:
    ast: KernelAst
    launch: LaunchDescriptor
    config: Configuration
    provenance: list[str] = field(default_factory=list)
    tiles: list[LocalTile] = field(default_factory=list)
    mapping: str = BLOCKED

    @property
    def local_bytes(self) -> int:
        return sum(t.nbytes for t in self.tiles)

    def dump(self) -> str:
        """Annotated pseudo-source for debugging."""
        lines = [f"// pass: {p}" for p in self.provenance]
        lines.append(f"// launch: {self.launch.to_json()}")
        lines.append(SourcePrinter().kernel(self.ast))
        return "\n".join(lines)


def _bindings(ast: KernelAst, report: AnalysisReport, dims) -> tuple[Binding, ...]:
    out = []
    for p in ast.params:
        if p.kind == "scalar":
            out.append(Binding(p.name, "scalar", p.type, None))
        elif p.kind == "image":
            n = f"{dims[0]}*{dims[1]}" if dims else str(report.grid.size[0] * report.grid.size[1])
            out.append(Binding(p.name, p.space or "global", p.type, n))
        else:
            size = report.sizes.get(p.name)
            length = str(size // TYPE_SIZES[p.type]) if size is not None else None
            out.append(Binding(p.name, p.space or "global", p.type, length))
    if dims:
        out += [Binding(dims[0], "scalar", "int", None), Binding(dims[1], "scalar", "int", None)]
    return tuple(out)


def apply_configuration(
    ast: KernelAst,
    report: AnalysisReport,
    cfg,
    grid_size: tuple[int, int] | None = None,
    local_mem_limit: int | None = None,
) -> TransformedKernel:
    """Generate the kernel variant selected by ``cfg``.

    ``grid_size`` fixes the launch geometry for symbolic grids; literal
    grids carry their own size.
    """
    cfg = Configuration(cfg)
    wg = (cfg["wgX"], cfg["wgY"])
    co = (cfg["cX"], cfg["cY"])
    dims = grid_dims(ast, report.grid)
    prov = []
    tiles = []
    for p in ast.params:
        if cfg.get(f"constantMem.{p.name}"):
            ast = place_constant_memory(ast, p.name)
            prov.append(f"placeConstantMemory({p.name})")
    for p in ast.params:
        if cfg.get(f"imageMem.{p.name}"):
            ast = place_image_memory(ast, p.name)
            prov.append(f"placeImageMemory({p.name})")
    for p in ast.params:
        if cfg.get(f"localMem.{p.name}"):
            ast = place_local_memory(ast, p.name, report.stencils[p.name], wg, co, local_mem_limit)
            tiles.append(make_tile(p.name, p.type, report.stencils[p.name], wg, co))
            prov.append(f"placeLocalMemory({p.name})")
    mode = mapping_mode(cfg, bool(tiles))
    fold = (False, False)
    if not report.grid.symbolic:
        fold = tuple(n % (w * c) == 0 for n, w, c in zip(report.grid.size, wg, co))
    ast = coarsen_and_map(ast, wg, co, mode, dims, fold)
    prov.append(f"coarsenAndMap({mode})")
    prov.append("insertGuards")
    for lp in report.loops:
        f = cfg.get(f"unroll.{lp.id}", 1)
        if f != 1:
            ast = unroll_loop(ast, lp.id, f)
            prov.append(f"unrollLoop({lp.id},{f})")
    ast = lower_images_and_boundaries(ast, dims)
    prov.append("lowerImagesAndBoundaries")
    ast = dataclasses.replace(ast, body=flatten_blocks(ast.body))
    check_barriers(ast)
    names = dim_names(ast) if report.grid.symbolic else None
    launch = LaunchDescriptor(wg, co, _bindings(ast, report, names), dims=names)
    if not report.grid.symbolic:
        launch = launch.resolve(*report.grid.size)
    elif grid_size is not None:
        launch = launch.resolve(*grid_size)
    return TransformedKernel(ast, launch, cfg, prov, tiles, mode)


__all__ = [
    "BLOCKED",
    "INTERLEAVED",
    "INTERLEAVED_WG",
    "Binding",
    "LaunchDescriptor",
    "LocalTile",
    "TransformedKernel",
    "apply_configuration",
    "coarsen_and_map",
    "global_extent",
    "logical_index",
    "lower_images_and_boundaries",
    "place_constant_memory",
    "place_image_memory",
    "place_local_memory",
    "tidy_signs",
    "split_prologue",
    "unroll_loop",
]
