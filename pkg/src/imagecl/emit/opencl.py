"""OpenCL C rendering of transformed kernels."""

from __future__ import annotations

from imagecl.errors import EmitError
from imagecl.frontend.nodes import (
    Barrier,
    ImageRead,
    ImageWrite,
    LocalDecl,
    Origin,
    ThreadId,
)
from imagecl.frontend.printer import INDENT, SourcePrinter
from imagecl.transform import TransformedKernel

SAMPLER = "_smp"
_TID_FUNCS = {
    "global": "get_global_id",
    "local": "get_local_id",
    "group": "get_group_id",
    "global_size": "get_global_size",
    "local_size": "get_local_size",
}
_READ = {"float": "read_imagef", "int": "read_imagei", "uint": "read_imageui", "uchar": "read_imageui"}
_WRITE = {
    "float": ("write_imagef", "float4"),
    "int": ("write_imagei", "int4"),
    "uint": ("write_imageui", "uint4"),
    "uchar": ("write_imageui", "uint4"),
}


class OpenCLPrinter(SourcePrinter):
    float_suffix = "f"

    def __init__(self, kernel):
        self.types = {p.name: p.type for p in kernel.params}

    def extended_expr(self, e) -> str:
        if isinstance(e, ThreadId):
            return f"(int){_TID_FUNCS[e.kind]}({e.axis})"
        if isinstance(e, ImageRead):
            ty = self.types[e.image]
            call = f"{_READ[ty]}({e.image}, {SAMPLER}, (int2)({self.expr(e.x)}, {self.expr(e.y)})).x"
            return f"(uchar){call}" if ty == "uchar" else call
        if isinstance(e, Origin):
            raise EmitError("origin metadata is not an expression")
        raise EmitError(f"node {type(e).__name__} is outside the extended dialect")

    def extended_stmt(self, s, depth: int) -> list[str]:
        pad = INDENT * depth
        if isinstance(s, Barrier):
            return [f"{pad}barrier(CLK_LOCAL_MEM_FENCE);"]
        if isinstance(s, LocalDecl):
            return [f"{pad}__local {s.type} {s.name}[{s.size}];"]
        if isinstance(s, ImageWrite):
            ty = self.types[s.image]
            func, vec = _WRITE[ty]
            coord = f"(int2)({self.expr(s.x)}, {self.expr(s.y)})"
            return [f"{pad}{func}({s.image}, {coord}, ({vec})(({ty})({self.expr(s.value)})));"]
        raise EmitError(f"statement {type(s).__name__} is outside the extended dialect")

    def kernel_param(self, p) -> str:
        if p.kind == "scalar":
            return f"{p.type} {p.name}"
        if p.space == "image2d_read":
            return f"read_only image2d_t {p.name}"
        if p.space == "image2d_write":
            return f"write_only image2d_t {p.name}"
        qual = "__constant" if p.space == "constant" else "__global"
        return f"{qual} {p.type} * {p.name}"


def emit_kernel(tk: TransformedKernel) -> str:
    """OpenCL C source of one ``__kernel`` function."""
    ast = tk.ast
    pr = OpenCLPrinter(ast)
    params = [pr.kernel_param(p) for p in ast.params]
    if tk.launch.dims:
        params += [f"int {tk.launch.dims[0]}", f"int {tk.launch.dims[1]}"]
    lines = [f"// {p}" for p in tk.provenance]
    if any(p.space == "image2d_read" for p in ast.params):
        lines.append(
            f"__constant sampler_t {SAMPLER} = CLK_NORMALIZED_COORDS_FALSE | "
            "CLK_ADDRESS_CLAMP_TO_EDGE | CLK_FILTER_NEAREST;"
        )
    lines.append("")
    lines.append(f"__kernel void {ast.name}({', '.join(params)})")
    lines.append("{")
    try:
        lines += pr.stmts(ast.body.stmts, 1)
    except TypeError as exc:
        raise EmitError(str(exc)) from None
    lines.append("}")
    return "\n".join(lines) + "\n"
