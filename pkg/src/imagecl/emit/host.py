"""Standalone C host stub that launches one kernel variant."""

from __future__ import annotations

from imagecl.frontend.nodes import Assign, Index1, walk
from imagecl.transform import TransformedKernel

_CL_SCALAR = {"float": "cl_float", "int": "cl_int", "uint": "cl_uint", "uchar": "cl_uchar"}
_CHANNEL = {
    "float": "CL_FLOAT",
    "int": "CL_SIGNED_INT32",
    "uint": "CL_UNSIGNED_INT32",
    "uchar": "CL_UNSIGNED_INT8",
}


def _c_type(ty: str) -> str:
    return {"uchar": "unsigned char", "uint": "unsigned int"}.get(ty, ty)


def emit_host_stub(tk: TransformedKernel) -> str:
    """C source for ``<kernel>_launch``, callable with raw host buffers."""
    name = tk.ast.name
    launch = tk.launch
    dims = launch.dims
    W, H = dims if dims else ("W", "H")
    lit = launch.logical_grid if not dims else None
    kinds = {p.name: p for p in tk.ast.params}

    args = ["cl_context ctx", "cl_command_queue queue", "cl_kernel kernel"]
    for b in launch.bindings:
        if dims and b.param in dims:
            continue
        if b.space == "scalar":
            args.append(f"{_c_type(b.elem_type)} {b.param}")
            continue
        ro = b.space in ("constant", "image2d_read") or (
            b.space == "global" and _read_only(tk, b.param)
        )
        const = "const " if ro else ""
        args.append(f"{const}{_c_type(b.elem_type)} *{b.param}")
        if b.length is None:
            args.append(f"size_t {b.param}_len")
    if dims:
        args += [f"int {W}", f"int {H}"]

    out = [
        f"/* host launcher for {name}; generated */",
        "#include <CL/cl.h>",
        "",
        f"cl_int {name}_launch({', '.join(args)})",
        "{",
        "    cl_int err = CL_SUCCESS;",
    ]
    if lit:
        out.append(f"    const int {W} = {lit[0]}, {H} = {lit[1]};")
    cleanup = []
    for b in launch.bindings:
        if b.space == "scalar":
            continue
        p = kinds[b.param]
        ctype = _c_type(b.elem_type)
        if b.space.startswith("image2d"):
            ro = b.space == "image2d_read"
            flags = "CL_MEM_READ_ONLY | CL_MEM_COPY_HOST_PTR" if ro else "CL_MEM_WRITE_ONLY"
            host = f"(void *){b.param}" if ro else "NULL"
            out += [
                f"    cl_image_format fmt_{b.param} = {{CL_R, {_CHANNEL[b.elem_type]}}};",
                f"    cl_image_desc desc_{b.param} = {{0}};",
                f"    desc_{b.param}.image_type = CL_MEM_OBJECT_IMAGE2D;",
                f"    desc_{b.param}.image_width = (size_t){W};",
                f"    desc_{b.param}.image_height = (size_t){H};",
                f"    cl_mem d_{b.param} = clCreateImage(ctx, {flags}, &fmt_{b.param}, "
                f"&desc_{b.param}, {host}, &err);",
                "    if (err != CL_SUCCESS) return err;",
            ]
        else:
            n = f"{b.param}_len" if b.length is None else f"(size_t)({b.length})"
            ro = b.space == "constant" or p.kind == "array" or _read_only(tk, b.param)
            flags = "CL_MEM_READ_ONLY | CL_MEM_COPY_HOST_PTR" if ro else "CL_MEM_READ_WRITE | CL_MEM_COPY_HOST_PTR"
            out += [
                f"    cl_mem d_{b.param} = clCreateBuffer(ctx, {flags}, {n} * sizeof({ctype}), "
                f"(void *){b.param}, &err);",
                "    if (err != CL_SUCCESS) return err;",
            ]
        cleanup.append(f"    clReleaseMemObject(d_{b.param});")
    for i, b in enumerate(launch.bindings):
        if b.space == "scalar":
            ctype = "cl_int" if dims and b.param in dims else _CL_SCALAR[b.elem_type]
            out.append(f"    {ctype} a{i} = ({ctype}){b.param};")
            out.append(f"    err |= clSetKernelArg(kernel, {i}, sizeof({ctype}), &a{i});")
        else:
            out.append(f"    err |= clSetKernelArg(kernel, {i}, sizeof(cl_mem), &d_{b.param});")
    out.append("    if (err != CL_SUCCESS) return err;")
    wx, wy = launch.local_size
    cx, cy = launch.coarsen
    out += [
        f"    size_t local[2] = {{{wx}, {wy}}};",
        "    size_t global[2];",
        f"    global[0] = ((size_t)(({W} + {cx - 1}) / {cx}) + {wx - 1}) / {wx} * {wx};",
        f"    global[1] = ((size_t)(({H} + {cy - 1}) / {cy}) + {wy - 1}) / {wy} * {wy};",
        "    err = clEnqueueNDRangeKernel(queue, kernel, 2, NULL, global, local, 0, NULL, NULL);",
        "    if (err != CL_SUCCESS) return err;",
    ]
    for b in launch.bindings:
        if b.space == "scalar":
            continue
        if b.space == "image2d_write":
            out += [
                "    {",
                "        size_t origin[3] = {0, 0, 0};",
                f"        size_t region[3] = {{(size_t){W}, (size_t){H}, 1}};",
                f"        err = clEnqueueReadImage(queue, d_{b.param}, CL_TRUE, origin, region, 0, 0, "
                f"{b.param}, 0, NULL, NULL);",
                "    }",
            ]
        elif b.space == "global" and kinds[b.param].kind == "image" and not _read_only(tk, b.param):
            out.append(
                f"    err = clEnqueueReadBuffer(queue, d_{b.param}, CL_TRUE, 0, "
                f"(size_t)({b.length}) * sizeof({_c_type(b.elem_type)}), {b.param}, 0, NULL, NULL);"
            )
    out += cleanup
    out += ["    return err;", "}"]
    return "\n".join(out) + "\n"


def _read_only(tk: TransformedKernel, param: str) -> bool:
    for n in walk(tk.ast.body):
        if isinstance(n, Assign) and isinstance(n.target, Index1) and n.target.array == param:
            return False
    return True
