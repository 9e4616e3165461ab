"""Small constructors for generated index arithmetic, folding trivial cases."""

from __future__ import annotations

from imagecl.frontend.nodes import Binary, Call, Expr, IntLit, ThreadId, Var

ZERO = IntLit(0, ty="int")
ONE = IntLit(1, ty="int")


def lit(v: int) -> IntLit:
    return IntLit(int(v), ty="int")


def var(name: str) -> Var:
    return Var(name, ty="int")


def tid(kind: str, axis: int) -> ThreadId:
    return ThreadId(kind, axis, ty="int")


def _is(e, v):
    return isinstance(e, IntLit) and not e.unsigned and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, IntLit) and isinstance(b, IntLit):
        return lit(a.value + b.value)
    if isinstance(b, IntLit) and b.value < 0:
        return Binary("-", a, lit(-b.value), ty="int")
    return Binary("+", a, b, ty="int")


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if isinstance(a, IntLit) and isinstance(b, IntLit):
        return lit(a.value - b.value)
    if isinstance(b, IntLit) and b.value < 0:
        return Binary("+", a, lit(-b.value), ty="int")
    return Binary("-", a, b, ty="int")


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if isinstance(a, IntLit) and isinstance(b, IntLit):
        return lit(a.value * b.value)
    return Binary("*", a, b, ty="int")


def lt(a: Expr, b: Expr) -> Expr:
    return Binary("<", a, b, ty="int")


def ge(a: Expr, b: Expr) -> Expr:
    return Binary(">=", a, b, ty="int")


def land(*terms: Expr) -> Expr | None:
    terms = [t for t in terms if t is not None]
    if not terms:
        return None
    out = terms[0]
    for t in terms[1:]:
        out = Binary("&&", out, t, ty="int")
    return out


def clamp(x: Expr, lo: Expr, hi: Expr) -> Expr:
    return Call("clamp", (x, lo, hi), ty="int")
