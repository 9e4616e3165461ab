"""Pretty-printing of kernel ASTs.

``SourcePrinter`` renders ImageCL text that parses back to a structurally
identical AST. The OpenCL emitter subclasses it for the extended dialect.
"""

from __future__ import annotations

import numpy as np

from imagecl.frontend.nodes import (
    Assign,
    Barrier,
    Binary,
    Block,
    BoundaryPragma,
    Call,
    Cast,
    Cond,
    Decl,
    ExprStmt,
    FloatLit,
    For,
    ForcePragma,
    GridPragma,
    If,
    ImageRead,
    ImageWrite,
    Index1,
    Index2,
    IntLit,
    KernelAst,
    LocalDecl,
    MaxSizePragma,
    ThreadId,
    Unary,
    Var,
)

PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6,
}
UNARY_PREC = 7
POSTFIX_PREC = 8
INDENT = "    "


def format_float(value: float) -> str:
    text = np.format_float_positional(np.float32(value), unique=True, trim="0")
    if "e" not in text and "." not in text:
        text += ".0"
    return text


class SourcePrinter:
    float_suffix = ""

    def prec(self, e) -> int:
        if isinstance(e, Binary):
            return PREC[e.op]
        if isinstance(e, Cond):
            return 0
        if isinstance(e, (Unary, Cast)):
            return UNARY_PREC
        if isinstance(e, IntLit) and e.value < 0:
            return UNARY_PREC
        if isinstance(e, FloatLit) and (e.value < 0 or str(e.value).startswith("-")):
            return UNARY_PREC
        return POSTFIX_PREC

    def wrap(self, e, min_prec: int) -> str:
        s = self.expr(e)
        return f"({s})" if self.prec(e) < min_prec else s

    def expr(self, e) -> str:
        if isinstance(e, IntLit):
            return f"{e.value}u" if e.unsigned else str(e.value)
        if isinstance(e, FloatLit):
            return format_float(e.value) + self.float_suffix
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Unary):
            inner = self.wrap(e.operand, UNARY_PREC)
            if inner.startswith(e.op) or (e.op in "+-" and inner[:1] in "+-"):
                inner = f"({inner})"
            return f"{e.op}{inner}"
        if isinstance(e, Binary):
            p = PREC[e.op]
            return f"{self.wrap(e.lhs, p)} {e.op} {self.wrap(e.rhs, p + 1)}"
        if isinstance(e, Cast):
            return f"({self.type_name(e.to)}){self.wrap(e.operand, UNARY_PREC)}"
        if isinstance(e, Call):
            return f"{e.func}({', '.join(self.expr(a) for a in e.args)})"
        if isinstance(e, Index1):
            return f"{e.array}[{self.expr(e.index)}]"
        if isinstance(e, Index2):
            return f"{e.image}[{self.expr(e.x)}][{self.expr(e.y)}]"
        if isinstance(e, Cond):
            return f"{self.wrap(e.cond, 1)} ? {self.wrap(e.then, 1)} : {self.wrap(e.other, 0)}"
        return self.extended_expr(e)

    def extended_expr(self, e) -> str:
        if isinstance(e, ThreadId):
            return f"__{e.kind}_id{e.axis}"
        if isinstance(e, ImageRead):
            return f"readImage2D({e.image}, {self.expr(e.x)}, {self.expr(e.y)})"
        raise TypeError(f"cannot print {type(e).__name__}")

    def type_name(self, ty: str) -> str:
        return ty

    # -- statements ---------------------------------------------------------

    def update(self, s: For) -> str:
        if s.step == 1:
            return f"{s.var}++"
        if s.step == -1:
            return f"{s.var}--"
        if s.step > 0:
            return f"{s.var} += {s.step}"
        return f"{s.var} -= {-s.step}"

    def stmt(self, s, depth: int) -> list[str]:
        pad = INDENT * depth
        if isinstance(s, Decl):
            init = f" = {self.expr(s.init)}" if s.init is not None else ""
            return [f"{pad}{self.type_name(s.type)} {s.name}{init};"]
        if isinstance(s, Assign):
            return [f"{pad}{self.expr(s.target)} {s.op} {self.expr(s.value)};"]
        if isinstance(s, ExprStmt):
            return [f"{pad}{self.expr(s.expr)};"]
        if isinstance(s, Block):
            return [f"{pad}{{"] + self.stmts(s.stmts, depth + 1) + [f"{pad}}}"]
        if isinstance(s, For):
            head = (
                f"{pad}for (int {s.var} = {self.expr(s.start)}; "
                f"{s.var} {s.cmp} {self.expr(s.bound)}; {self.update(s)}) {{"
            )
            return [head] + self.stmts(s.body.stmts, depth + 1) + [f"{pad}}}"]
        if isinstance(s, If):
            if s.cond is None:
                return [f"{pad}{{"] + self.stmts(s.then.stmts, depth + 1) + [f"{pad}}}"]
            lines = [f"{pad}if ({self.expr(s.cond)}) {{"]
            lines += self.stmts(s.then.stmts, depth + 1)
            if s.other is not None:
                lines.append(f"{pad}}} else {{")
                lines += self.stmts(s.other.stmts, depth + 1)
            lines.append(f"{pad}}}")
            return lines
        return self.extended_stmt(s, depth)

    def extended_stmt(self, s, depth: int) -> list[str]:
        pad = INDENT * depth
        if isinstance(s, Barrier):
            return [f"{pad}barrier();"]
        if isinstance(s, LocalDecl):
            return [f"{pad}local {s.type} {s.name}[{s.size}];"]
        if isinstance(s, ImageWrite):
            return [f"{pad}writeImage2D({s.image}, {self.expr(s.x)}, {self.expr(s.y)}, {self.expr(s.value)});"]
        raise TypeError(f"cannot print {type(s).__name__}")

    def stmts(self, stmts, depth: int) -> list[str]:
        out = []
        for s in stmts:
            out.extend(self.stmt(s, depth))
        return out

    # -- kernel -------------------------------------------------------------

    def pragma(self, p) -> str:
        if isinstance(p, GridPragma):
            arg = p.target if p.target is not None else f"{p.size[0]}, {p.size[1]}"
            return f"#pragma imcl grid({arg})"
        if isinstance(p, BoundaryPragma):
            if p.mode == "clamped":
                return f"#pragma imcl boundary({p.image}, clamped)"
            v = format_float(p.value) if isinstance(p.value, float) else str(p.value)
            return f"#pragma imcl boundary({p.image}, constant({v}))"
        if isinstance(p, MaxSizePragma):
            return f"#pragma imcl maxsize({p.array}, {p.nbytes})"
        if isinstance(p, ForcePragma):
            return f"#pragma imcl force({p.param}, {'on' if p.on else 'off'})"
        raise TypeError(f"unknown pragma {p!r}")

    def param(self, p) -> str:
        if p.kind == "image":
            return f"Image<{p.type}> {p.name}"
        if p.kind == "array":
            return f"{p.type} {p.name}[{p.length if p.length is not None else ''}]"
        return f"{p.type} {p.name}"

    def kernel(self, ast: KernelAst) -> str:
        lines = [self.pragma(p) for p in ast.pragmas]
        params = ", ".join(self.param(p) for p in ast.params)
        lines.append(f"void {ast.name}({params})")
        lines.append("{")
        lines += self.stmts(ast.body.stmts, 1)
        lines.append("}")
        return "\n".join(lines) + "\n"


def pretty(ast: KernelAst) -> str:
    """Render ImageCL source for ``ast``."""
    return SourcePrinter().kernel(ast)
