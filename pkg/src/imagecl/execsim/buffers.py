"""Input buffers: random generation and the on-disk formats.

Binary layout (little-endian): magic ``IMCL``, uint8 dtype code, three pad
bytes, uint32 width, uint32 height, then row-major data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from imagecl.errors import BufferFormatError
from imagecl.frontend.nodes import TYPE_SIZES, KernelAst

MAGIC = b"IMCL"
DTYPE_CODES = {1: np.float32, 2: np.int32, 3: np.uint32, 4: np.uint8}
CODE_OF = {np.dtype(v): k for k, v in DTYPE_CODES.items()}
TYPE_DTYPES = {"float": np.float32, "int": np.int32, "uint": np.uint32, "uchar": np.uint8}
_HEADER = struct.Struct("<4sB3xII")


def random_buffer(ty: str, shape, rng: np.random.Generator) -> np.ndarray:
    if ty == "float":
        return rng.random(shape, dtype=np.float32)
    if ty == "uchar":
        return rng.integers(0, 256, shape, dtype=np.uint8)
    if ty == "uint":
        return rng.integers(0, 1 << 16, shape, dtype=np.uint32)
    return rng.integers(-(1 << 15), 1 << 15, shape, dtype=np.int32)


def array_length(ast: KernelAst, name: str, default: int = 64) -> int:
    p = ast.param(name)
    if p.length is not None:
        return p.length
    nbytes = ast.maxsize(name)
    return nbytes // TYPE_SIZES[p.type] if nbytes is not None else default


def random_inputs(ast: KernelAst, width: int, height: int, seed: int = 0) -> dict:
    """Seeded pseudo-random values for every kernel parameter.

    Images the kernel only writes start zeroed; float scalars are drawn
    small so that products stay well inside float range.
    """
    from imagecl.analysis.stencil import WRITE_ONLY, classify_accesses

    rng = np.random.default_rng(seed)
    access = classify_accesses(ast)
    out = {}
    for p in ast.params:
        if p.kind == "image":
            if access[p.name].kind == WRITE_ONLY:
                out[p.name] = np.zeros((height, width), dtype=TYPE_DTYPES[p.type])
            else:
                out[p.name] = random_buffer(p.type, (height, width), rng)
        elif p.kind == "array":
            buf = random_buffer(p.type, array_length(ast, p.name), rng)
            if p.type == "float":
                # weights summing to one keep filtered values in pixel range
                buf = (buf / buf.sum(dtype=np.float32)).astype(np.float32)
            out[p.name] = buf
        else:
            out[p.name] = random_buffer(p.type, (), rng)[()] if p.type != "float" else np.float32(0.04)
    return out


def save_buffer(path, arr: np.ndarray):
    arr = np.asarray(arr)
    if arr.dtype not in CODE_OF:
        raise BufferFormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise BufferFormatError("buffers must be one- or two-dimensional")
    h, w = arr.shape
    header = _HEADER.pack(MAGIC, CODE_OF[arr.dtype], w, h)
    Path(path).write_bytes(header + np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_buffer(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        return load_pgm(path)
    if len(data) < _HEADER.size:
        raise BufferFormatError(f"{path}: file too short")
    magic, code, w, h = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BufferFormatError(f"{path}: bad magic {magic!r}")
    if code not in DTYPE_CODES:
        raise BufferFormatError(f"{path}: unknown dtype code {code}")
    dt = np.dtype(DTYPE_CODES[code]).newbyteorder("<")
    body = data[_HEADER.size:]
    if len(body) != w * h * dt.itemsize:
        raise BufferFormatError(f"{path}: expected {w * h * dt.itemsize} data bytes, got {len(body)}")
    return np.frombuffer(body, dtype=dt).astype(DTYPE_CODES[code]).reshape(h, w)


def load_pgm(path) -> np.ndarray:
    """Binary (P5) 8-bit PGM as a uint8 array."""
    data = Path(path).read_bytes()
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise BufferFormatError(f"{path}: truncated PGM header")
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    if maxval > 255:
        raise BufferFormatError(f"{path}: only 8-bit PGM is supported")
    body = data[pos + 1:pos + 1 + w * h]
    if len(body) != w * h:
        raise BufferFormatError(f"{path}: truncated PGM data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def save_pgm(path, arr: np.ndarray):
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise BufferFormatError("PGM output needs a 2D uint8 array")
    h, w = arr.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + arr.tobytes())
