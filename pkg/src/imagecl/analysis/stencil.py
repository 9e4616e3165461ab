"""Read/write classification of array parameters and stencil extents of images."""

from __future__ import annotations

from dataclasses import dataclass

from imagecl.analysis.valuesets import TOP, ValueSets, eval_set
from imagecl.frontend.nodes import (
    Assign,
    Binary,
    Block,
    Decl,
    Expr,
    ExprStmt,
    For,
    If,
    Index1,
    Index2,
    KernelAst,
    Span,
    Stmt,
    Unary,
    Var,
    walk,
)

READ_ONLY = "read-only"
WRITE_ONLY = "write-only"
READ_WRITE = "read-write"


@dataclass(frozen=True)
class AccessClass:
    kind: str
    reads: int
    writes: int

    @property
    def unreferenced(self) -> bool:
        return self.reads == 0 and self.writes == 0

    def to_json(self):
        out = {"class": self.kind, "reads": self.reads, "writes": self.writes}
        if self.unreferenced:
            out["note"] = "unreferenced"
        return out


@dataclass(frozen=True)
class StencilExtent:
    lo_x: int
    hi_x: int
    lo_y: int
    hi_y: int
    x_offsets: frozenset = frozenset()
    y_offsets: frozenset = frozenset()

    @property
    def width(self) -> int:
        return self.hi_x - self.lo_x

    @property
    def height(self) -> int:
        return self.hi_y - self.lo_y

    def contains(self, c1: int, c2: int) -> bool:
        return self.lo_x <= c1 <= self.hi_x and self.lo_y <= c2 <= self.hi_y

    def to_json(self):
        return {"loX": self.lo_x, "hiX": self.hi_x, "loY": self.lo_y, "hiY": self.hi_y}


@dataclass(frozen=True)
class Ineligible:
    reason: str
    span: Span | None = None

    def to_json(self):
        out = {"ineligible": self.reason}
        if self.span is not None:
            out["at"] = str(self.span)
        return out


def _accesses(ast: KernelAst):
    """Yield (name, is_write, node) for every array/image reference."""
    targets = set()
    for node in walk(ast.body):
        if isinstance(node, Assign) and isinstance(node.target, (Index1, Index2)):
            t = node.target
            targets.add(id(t))
            name = t.array if isinstance(t, Index1) else t.image
            yield name, True, t
            if node.op != "=":
                yield name, False, t
    for node in walk(ast.body):
        if isinstance(node, (Index1, Index2)) and id(node) not in targets:
            yield (node.array if isinstance(node, Index1) else node.image), False, node


def classify_accesses(ast: KernelAst) -> dict[str, AccessClass]:
    """Classify each array/image parameter as read-only, write-only or read-write.

    Parameters never referenced are reported read-only so the map is total.
    """
    reads: dict[str, int] = {}
    writes: dict[str, int] = {}
    for name, is_write, node in _accesses(ast):
        d = writes if is_write else reads
        d[name] = d.get(name, 0) + 1
    out = {}
    for p in ast.params:
        if p.kind == "scalar":
            continue
        r, w = reads.get(p.name, 0), writes.get(p.name, 0)
        kind = READ_WRITE if r and w else (WRITE_ONLY if w else READ_ONLY)
        out[p.name] = AccessClass(kind, r, w)
    return out


def _signed_terms(e: Expr, sign=1):
    if isinstance(e, Binary) and e.op in ("+", "-"):
        yield from _signed_terms(e.lhs, sign)
        yield from _signed_terms(e.rhs, sign if e.op == "+" else -sign)
    elif isinstance(e, Unary) and e.op in ("+", "-"):
        yield from _signed_terms(e.operand, sign if e.op == "+" else -sign)
    else:
        yield sign, e


def offset_set(index: Expr, axis_var: str, env: dict, limit: int):
    """Values c such that ``index == axis_var + c``, or None if the index is
    not of that form with a finite value set for c."""
    found = 0
    total = frozenset({0})
    for sign, term in _signed_terms(index):
        if isinstance(term, Var) and term.name == axis_var:
            if sign != 1:
                return None
            found += 1
            continue
        if any(isinstance(n, Var) and n.name in ("idx", "idy") for n in walk(term)):
            return None
        v = eval_set(term, env, limit)
        if v is TOP:
            return None
        total = frozenset(a + sign * b for a in total for b in v)
        if len(total) > limit:
            return None
    if found != 1:
        return None
    return total


def _stmt_exprs(s: Stmt):
    """Expressions evaluated by ``s`` itself (not by nested statements)."""
    if isinstance(s, Decl):
        return [s.init] if s.init is not None else []
    if isinstance(s, Assign):
        return [s.target, s.value]
    if isinstance(s, ExprStmt):
        return [s.expr]
    if isinstance(s, If):
        return [s.cond]
    if isinstance(s, For):
        return [s.start, s.bound]
    return []


def _statements(block: Block):
    for s in block.stmts:
        yield s
        if isinstance(s, Block):
            yield from _statements(s)
        elif isinstance(s, For):
            yield from _statements(s.body)
        elif isinstance(s, If):
            yield from _statements(s.then)
            if s.other is not None:
                yield from _statements(s.other)


def stencil_extent(ast: KernelAst, value_sets: ValueSets) -> dict[str, StencilExtent | Ineligible]:
    """Bounding box of the ``(c1, c2)`` offsets at which each Image is read."""
    limit = value_sets.max_set_size
    images = [p.name for p in ast.params if p.kind == "image"]
    xs: dict[str, set] = {n: set() for n in images}
    ys: dict[str, set] = {n: set() for n in images}
    bad: dict[str, Ineligible] = {}
    nreads = {n: 0 for n in images}
    for s in _statements(ast.body):
        env = value_sets.at(s)
        write_target = s.target if isinstance(s, Assign) and isinstance(s.target, Index2) else None
        if write_target is not None and write_target.image in xs:
            bad.setdefault(write_target.image, Ineligible("image is written", write_target.span))
        for e in _stmt_exprs(s):
            for n in walk(e):
                if not isinstance(n, Index2) or n.image not in xs:
                    continue
                if n is write_target and s.op == "=":
                    continue
                nreads[n.image] += 1
                ox = offset_set(n.x, "idx", env, limit)
                oy = offset_set(n.y, "idy", env, limit)
                if ox is None or oy is None:
                    bad.setdefault(
                        n.image,
                        Ineligible("read index is not of the form idx + c, idy + c", n.span),
                    )
                    continue
                xs[n.image] |= ox
                ys[n.image] |= oy
    out = {}
    for name in images:
        if name in bad:
            out[name] = bad[name]
        elif nreads[name] == 0:
            out[name] = Ineligible("no read sites")
        else:
            out[name] = StencilExtent(
                min(xs[name]), max(xs[name]), min(ys[name]), max(ys[name]),
                frozenset(xs[name]), frozenset(ys[name]),
            )
    return out
