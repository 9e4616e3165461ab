"""The individual AST-to-AST transformations applied for a configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from imagecl.analysis.report import GridSpec, infer_grid
from imagecl.analysis.stencil import StencilExtent
from imagecl.errors import InternalInvariantError, TileTooLargeError
from imagecl.frontend.consteval import loop_values
from imagecl.frontend.nodes import (
    TYPE_SIZES,
    Assign,
    Barrier,
    Binary,
    Block,
    Cond,
    Decl,
    Expr,
    FloatLit,
    For,
    If,
    ImageRead,
    ImageWrite,
    Index1,
    Index2,
    IntLit,
    KernelAst,
    LocalDecl,
    Origin,
    Stmt,
    Var,
    rewrite,
    substitute,
    walk,
)
from imagecl.transform.build import (
    add,
    clamp,
    ge,
    land,
    lit,
    lt,
    mul,
    sub,
    tid,
    var,
)

# mapping modes
BLOCKED = "blocked"
INTERLEAVED = "interleaved"
INTERLEAVED_WG = "interleaved-in-work-group"

IMAGE_SPACES = ("image2d_read", "image2d_write")


def dim_names(ast: KernelAst) -> tuple[str, str]:
    """Names of the generated width/height arguments, avoiding user names."""
    used = {p.name for p in ast.params}
    used |= {n.name for n in walk(ast.body) if isinstance(n, Decl)}
    w = "W" if "W" not in used else "_W"
    h = "H" if "H" not in used else "_H"
    return w, h


def grid_dims(ast: KernelAst, grid: GridSpec | None = None) -> tuple[Expr, Expr]:
    grid = grid or infer_grid(ast)
    if grid.symbolic:
        w, h = dim_names(ast)
        return var(w), var(h)
    return lit(grid.size[0]), lit(grid.size[1])


def _set_space(ast: KernelAst, param: str, space: str) -> KernelAst:
    params = tuple(dataclasses.replace(p, space=space) if p.name == param else p for p in ast.params)
    return dataclasses.replace(ast, params=params)


def _elem_literal(ty: str, value) -> Expr:
    if ty == "float":
        return FloatLit(float(value), ty="float")
    return IntLit(int(value), ty="int")


def _in_bounds(x: Expr, y: Expr, W: Expr, H: Expr) -> Expr:
    return land(ge(x, lit(0)), lt(x, W), ge(y, lit(0)), lt(y, H))


def split_prologue(body: Block) -> tuple[list[Stmt], list[Stmt]]:
    """Leading cooperative-load statements versus the per-pixel body."""
    stmts = list(body.stmts)
    i = 0
    while i < len(stmts) and (
        isinstance(stmts[i], (LocalDecl, Barrier))
        or (isinstance(stmts[i], For) and stmts[i].role == "load")
    ):
        i += 1
    return stmts[:i], stmts[i:]


# --- memory placement ------------------------------------------------------


def place_constant_memory(ast: KernelAst, param: str) -> KernelAst:
    return _set_space(ast, param, "constant")


def _rewrite_writes(ast: KernelAst, param: str, make) -> KernelAst:
    def fn(n):
        if isinstance(n, Assign) and isinstance(n.target, Index2) and n.target.image == param:
            return make(n)
        return None

    return dataclasses.replace(ast, body=rewrite(ast.body, fn))


def _rewrite_reads(ast: KernelAst, param: str, make) -> KernelAst:
    def fn(n):
        if isinstance(n, Index2) and n.image == param:
            return make(n)
        return None

    return dataclasses.replace(ast, body=rewrite(ast.body, fn))


def place_image_memory(ast: KernelAst, param: str) -> KernelAst:
    """Route reads and writes of an image through the texture path."""
    p = ast.param(param)
    W, H = grid_dims(ast)
    written = any(
        isinstance(n, Assign) and isinstance(n.target, Index2) and n.target.image == param
        for n in walk(ast.body)
    )

    def write(n: Assign):
        if n.op != "=":
            raise InternalInvariantError(f"compound write to image-memory {param}")
        return ImageWrite(param, n.target.x, n.target.y, n.value, span=n.span)

    ast = _rewrite_writes(ast, param, write)
    bnd = ast.boundary(param)

    def read(n: Index2):
        r = ImageRead(param, n.x, n.y, span=n.span, ty=p.type)
        if bnd.mode == "clamped":
            return r
        return Cond(_in_bounds(n.x, n.y, W, H), r, _elem_literal(p.type, bnd.value), ty=p.type)

    ast = _rewrite_reads(ast, param, read)
    return _set_space(ast, param, "image2d_write" if written else "image2d_read")


@dataclass(frozen=True)
class LocalTile:
    name: str
    source: str
    type: str
    width: int
    height: int
    # logical coordinates of tile element (0, 0)
    base_x: Expr
    base_y: Expr

    @property
    def nbytes(self) -> int:
        return self.width * self.height * TYPE_SIZES[self.type]


def tile_geometry(stencil: StencilExtent, wg: tuple[int, int], coarsen: tuple[int, int]):
    return (wg[0] * coarsen[0] + stencil.width, wg[1] * coarsen[1] + stencil.height)


def make_tile(param: str, ty: str, stencil: StencilExtent, wg, coarsen) -> LocalTile:
    tw, th = tile_geometry(stencil, wg, coarsen)
    return LocalTile(
        f"_l_{param}", param, ty, tw, th,
        add(mul(tid("group", 0), lit(wg[0] * coarsen[0])), lit(stencil.lo_x)),
        add(mul(tid("group", 1), lit(wg[1] * coarsen[1])), lit(stencil.lo_y)),
    )


def place_local_memory(
    ast: KernelAst,
    param: str,
    stencil: StencilExtent,
    wg: tuple[int, int],
    coarsen: tuple[int, int],
    local_mem_limit: int | None = None,
) -> KernelAst:
    """Stage a work-group's bounding-box tile of an image in local memory.

    Adds the tile declaration and a strided cooperative load to the kernel
    prologue (followed by a single barrier) and redirects every read of the
    image to the tile.
    """
    p = ast.param(param)
    tile = make_tile(param, p.type, stencil, wg, coarsen)
    name, tw, th = tile.name, tile.width, tile.height
    prior = sum(
        n.size * TYPE_SIZES[n.type] for n in walk(ast.body) if isinstance(n, LocalDecl)
    )
    if local_mem_limit is not None and prior + tile.nbytes > local_mem_limit:
        raise TileTooLargeError(
            f"local tile for {param!r} needs {prior + tile.nbytes} bytes, "
            f"device has {local_mem_limit}"
        )

    def read(n: Index2):
        ix = add(sub(n.x, tile.base_x), mul(sub(n.y, tile.base_y), lit(tw)))
        return Index1(name, ix, Origin(param, n.x, n.y), span=n.span, ty=p.type)

    ast = _rewrite_reads(ast, param, read)
    lx, ly = f"_lx_{param}", f"_ly_{param}"
    copy = Assign(
        Index1(name, add(var(lx), mul(var(ly), lit(tw))), ty=p.type),
        "=",
        Index2(param, add(tile.base_x, var(lx)), add(tile.base_y, var(ly)), ty=p.type),
    )
    inner = For(lx, tid("local", 0), "<", lit(tw), wg[0], Block((copy,)), role="load")
    load = For(ly, tid("local", 1), "<", lit(th), wg[1], Block((inner,)), role="load")
    prologue, rest = split_prologue(ast.body)
    prologue = [s for s in prologue if not isinstance(s, Barrier)]
    prologue += [LocalDecl(p.type, name, tw * th, param), load, Barrier()]
    return dataclasses.replace(ast, body=Block(tuple(prologue + rest)))


# --- coarsening, mapping and guards ----------------------------------------


def logical_index(mode: str, axis: int, wg: int, c: int, iv: Expr) -> Expr:
    """Logical pixel coordinate handled by a work-item in coarsening step ``iv``."""
    if mode == BLOCKED:
        return add(mul(tid("global", axis), lit(c)), iv)
    if mode == INTERLEAVED:
        return add(tid("global", axis), mul(iv, tid("global_size", axis)))
    if mode == INTERLEAVED_WG:
        base = add(mul(tid("group", axis), lit(wg * c)), tid("local", axis))
        return add(base, mul(iv, lit(wg)))
    raise ValueError(f"unknown mapping mode {mode!r}")


def coarsen_and_map(
    ast: KernelAst,
    wg: tuple[int, int],
    coarsen: tuple[int, int],
    mode: str,
    dims: tuple[Expr, Expr],
    fold: tuple[bool, bool] = (False, False),
) -> KernelAst:
    """Wrap the per-pixel body in coarsening loops with guarded logical indices.

    ``fold`` drops the guard term of an axis known to divide evenly.
    """
    prologue, rest = split_prologue(ast.body)
    ivs = []
    for axis, name in ((0, "_ix"), (1, "_iy")):
        ivs.append(lit(0) if coarsen[axis] == 1 else var(name))
    lx = logical_index(mode, 0, wg[0], coarsen[0], ivs[0])
    ly = logical_index(mode, 1, wg[1], coarsen[1], ivs[1])
    body = substitute(Block(tuple(rest)), {"idx": var("_x"), "idy": var("_y")})
    cond = land(
        None if fold[0] else lt(var("_x"), dims[0]),
        None if fold[1] else lt(var("_y"), dims[1]),
    )
    step: Stmt = Block((
        Decl("int", "_x", lx),
        Decl("int", "_y", ly),
        If(cond, body, logical=(var("_x"), var("_y"))),
    ))
    if coarsen[0] > 1:
        step = For("_ix", lit(0), "<", lit(coarsen[0]), 1, Block((step,)), role="coarsen")
    if coarsen[1] > 1:
        step = For("_iy", lit(0), "<", lit(coarsen[1]), 1, Block((step,)), role="coarsen")
    ast = dataclasses.replace(ast, body=Block(tuple(prologue) + (step,)))
    for n in walk(ast.body):
        if isinstance(n, Var) and n.name in ("idx", "idy"):
            raise InternalInvariantError(f"builtin {n.name} survived coarsening")
    return ast


# --- unrolling -------------------------------------------------------------

def tidy_signs(node):
    """Rewrite ``a + -c`` as ``a - c``; the operation count is unchanged."""

    def fn(n):
        if isinstance(n, Binary) and n.op in ("+", "-"):
            b = n.rhs
            if isinstance(b, IntLit) and not b.unsigned and b.value < 0:
                flip = "-" if n.op == "+" else "+"
                return Binary(flip, n.lhs, lit(-b.value), span=n.span, ty=n.ty)
        return None

    return rewrite(node, fn)


def unroll_loop(ast: KernelAst, loop_id: str, factor: int) -> KernelAst:
    """Replicate a loop body ``factor`` times; full unrolls become straight-line."""
    if factor == 1:
        return ast

    def fn(n):
        if not (isinstance(n, For) and n.loop_id == loop_id and n.role == "source"):
            return None
        values = loop_values(n)
        if values is None or len(values) % factor:
            raise InternalInvariantError(
                f"unroll factor {factor} does not divide trip count of {loop_id}"
            )
        # copies are not constant-folded, so unrolling changes only loop overhead
        if factor == len(values):
            return Block(tuple(tidy_signs(substitute(n.body, {n.var: lit(v)})) for v in values))
        iv = Var(n.var, ty="int")
        copies = tuple(substitute(n.body, {n.var: add(iv, lit(k * n.step))}) for k in range(factor))
        return dataclasses.replace(n, step=n.step * factor, body=Block(copies))

    return dataclasses.replace(ast, body=rewrite(ast.body, fn))


# --- flattening and boundaries ---------------------------------------------


def lower_images_and_boundaries(ast: KernelAst, dims: tuple[Expr, Expr]) -> KernelAst:
    """Turn remaining 2D image accesses into row-major 1D accesses."""
    W, H = dims
    for p in ast.params:
        if p.kind != "image" or p.space in IMAGE_SPACES:
            continue
        name, ty = p.name, p.type

        def write(n: Assign, name=name, ty=ty):
            t = n.target
            target = Index1(name, add(t.x, mul(t.y, W)), Origin(name, t.x, t.y), span=t.span, ty=ty)
            return dataclasses.replace(n, target=target)

        ast = _rewrite_writes(ast, name, write)
        bnd = ast.boundary(name)

        def read(n: Index2, name=name, ty=ty, bnd=bnd):
            origin = Origin(name, n.x, n.y)
            if bnd.mode == "clamped":
                ix = add(clamp(n.x, lit(0), sub(W, lit(1))), mul(clamp(n.y, lit(0), sub(H, lit(1))), W))
                return Index1(name, ix, origin, span=n.span, ty=ty)
            inside = Index1(name, add(n.x, mul(n.y, W)), origin, span=n.span, ty=ty)
            return Cond(_in_bounds(n.x, n.y, W, H), inside, _elem_literal(ty, bnd.value), ty=ty)

        ast = _rewrite_reads(ast, name, read)
        ast = _set_space(ast, name, "global")
    for n in walk(ast.body):
        if isinstance(n, Index2):
            raise InternalInvariantError(f"2D access to {n.image} survived lowering")
    return ast


def flatten_blocks(node):
    """Inline nested blocks that declare nothing at their own level."""

    def fn(n):
        if not isinstance(n, Block):
            return None
        out = []
        changed = False
        for s in n.stmts:
            if isinstance(s, Block) and not any(isinstance(t, (Decl, LocalDecl)) for t in s.stmts):
                out.extend(s.stmts)
                changed = True
            else:
                out.append(s)
        return Block(tuple(out), span=n.span) if changed else None

    return rewrite(node, fn)


def mapping_mode(cfg, any_local: bool) -> str:
    if not cfg.get("interleaved", 0):
        return BLOCKED
    return INTERLEAVED_WG if any_local else INTERLEAVED


def check_barriers(ast: KernelAst):
    prologue, rest = split_prologue(ast.body)
    n_pro = sum(isinstance(s, Barrier) for s in prologue)
    n_all = sum(isinstance(n, Barrier) for n in walk(ast.body))
    if n_all > 1 or n_all != n_pro:
        raise InternalInvariantError("barrier outside the cooperative-load prologue")


__all__ = [
    "BLOCKED",
    "INTERLEAVED",
    "INTERLEAVED_WG",
    "LocalTile",
    "check_barriers",
    "coarsen_and_map",
    "dim_names",
    "flatten_blocks",
    "grid_dims",
    "logical_index",
    "make_tile",
    "lower_images_and_boundaries",
    "mapping_mode",
    "place_constant_memory",
    "place_image_memory",
    "place_local_memory",
    "tidy_signs",
    "split_prologue",
    "tile_geometry",
    "unroll_loop",
]

