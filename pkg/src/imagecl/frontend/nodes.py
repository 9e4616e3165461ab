"""AST for ImageCL kernels and the extended dialect produced by the transforms.

Nodes are frozen dataclasses. Source spans and inferred types are excluded
from equality, so ``==`` compares structure only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Iterator

SCALAR_TYPES = ("float", "int", "uint", "uchar")
BUILTIN_VARS = ("idx", "idy")
# name -> arity; clamp is only produced by lowering
BUILTIN_FUNCS = {"sqrt": 1, "fabs": 1, "exp": 1, "min": 2, "max": 2, "fmin": 2, "fmax": 2}
EXTENDED_FUNCS = {"clamp": 3}

TYPE_SIZES = {"float": 4, "int": 4, "uint": 4, "uchar": 1}


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


def _span():
    return field(default=None, compare=False, repr=False, kw_only=True)


class Node:
    __slots__ = ()


class Expr(Node):
    __slots__ = ()


class Stmt(Node):
    __slots__ = ()


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    unsigned: bool = False
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class FloatLit(Expr):
    value: float
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Cond(Expr):
    cond: Expr
    then: Expr
    other: Expr
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Origin(Node):
    """Where a lowered or staged read came from: ``image[x][y]`` in logical terms."""

    image: str
    x: Expr
    y: Expr


@dataclass(frozen=True)
class Index1(Expr):
    array: str
    index: Expr
    origin: Origin | None = None
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Index2(Expr):
    image: str
    x: Expr
    y: Expr
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class Cast(Expr):
    to: str
    operand: Expr
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class ThreadId(Expr):
    """Work-item query; kind is one of global, local, group, global_size, local_size."""

    kind: str
    axis: int
    span: Span | None = _span()
    ty: str | None = _span()


@dataclass(frozen=True)
class ImageRead(Expr):
    image: str
    x: Expr
    y: Expr
    span: Span | None = _span()
    ty: str | None = _span()


# --- statements ------------------------------------------------------------


@dataclass(frozen=True)
class Decl(Stmt):
    type: str
    name: str
    init: Expr | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr
    op: str
    value: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple[Stmt, ...]
    span: Span | None = _span()


@dataclass(frozen=True)
class For(Stmt):
    """``for (int var = start; var cmp bound; var += step) body``.

    ``role`` is ``source`` for user loops, ``coarsen`` for the thread
    coarsening wrappers and ``load`` for the cooperative tile load.
    """

    var: str
    start: Expr
    cmp: str
    bound: Expr
    step: int
    body: Block
    loop_id: str | None = None
    role: str = "source"
    span: Span | None = _span()


@dataclass(frozen=True)
class If(Stmt):
    """Conditional; ``logical`` marks the coarsening guard and holds the
    logical (x, y) pixel of the guarded iteration."""

    cond: Expr | None
    then: Block
    other: Block | None = None
    logical: tuple[Expr, Expr] | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class ExprStmt(Stmt):
    expr: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class Barrier(Stmt):
    span: Span | None = _span()


@dataclass(frozen=True)
class LocalDecl(Stmt):
    type: str
    name: str
    size: int
    source: str
    span: Span | None = _span()


@dataclass(frozen=True)
class ImageWrite(Stmt):
    image: str
    x: Expr
    y: Expr
    value: Expr
    span: Span | None = _span()


# --- top level -------------------------------------------------------------


@dataclass(frozen=True)
class ParamDecl(Node):
    """Kernel parameter. ``kind`` is image, array or scalar; ``space`` is set
    by the memory-placement transforms (global, constant, image)."""

    name: str
    kind: str
    type: str
    length: int | None = None
    space: str | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class GridPragma(Node):
    target: str | None = None
    size: tuple[int, int] | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class BoundaryPragma(Node):
    image: str
    mode: str
    value: float | int | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class MaxSizePragma(Node):
    array: str
    nbytes: int
    span: Span | None = _span()


@dataclass(frozen=True)
class ForcePragma(Node):
    param: str
    on: bool
    span: Span | None = _span()


@dataclass(frozen=True)
class KernelAst(Node):
    name: str
    params: tuple[ParamDecl, ...]
    body: Block
    pragmas: tuple[Node, ...] = ()
    span: Span | None = _span()

    def param(self, name: str) -> ParamDecl | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def boundary(self, image: str) -> BoundaryPragma:
        for p in self.pragmas:
            if isinstance(p, BoundaryPragma) and p.image == image:
                return p
        # images without a boundary pragma read 0 outside their bounds
        return BoundaryPragma(image, "constant", 0)

    def maxsize(self, array: str) -> int | None:
        for p in self.pragmas:
            if isinstance(p, MaxSizePragma) and p.array == array:
                return p.nbytes
        return None


# --- traversal -------------------------------------------------------------


def children(node: Node) -> Iterator[Node]:
    for f in dataclasses.fields(node):
        if f.name in ("span", "ty"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            yield v
        elif isinstance(v, tuple):
            for item in v:
                if isinstance(item, Node):
                    yield item


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal over every node reachable from ``node``."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(children(n))))


def rewrite(node, fn: Callable[[Node], Node | None]):
    """Bottom-up rebuild. ``fn`` receives each rebuilt node and may return a
    replacement (or None to keep it)."""
    if isinstance(node, tuple):
        out = tuple(rewrite(n, fn) for n in node)
        return node if all(a is b for a, b in zip(out, node)) else out
    if not isinstance(node, Node):
        return node
    changes = {}
    for f in dataclasses.fields(node):
        if f.name in ("span", "ty"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, (Node, tuple)):
            nv = rewrite(v, fn)
            if nv is not v:
                changes[f.name] = nv
    if changes:
        node = dataclasses.replace(node, **changes)
    out = fn(node)
    return node if out is None else out


def substitute(node, mapping: dict[str, Expr]):
    """Replace variable references by expressions."""

    def fn(n):
        if isinstance(n, Var) and n.name in mapping:
            return mapping[n.name]
        return None

    return rewrite(node, fn)
