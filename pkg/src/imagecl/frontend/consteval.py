"""Compile-time evaluation of integer expressions and loop trip sets."""

from __future__ import annotations

from imagecl.frontend.nodes import Binary, Cast, Expr, For, IntLit, Unary


def c_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def c_mod(a: int, b: int) -> int:
    return a - b * c_div(a, b)


def const_int(e: Expr) -> int | None:
    """Fold an expression built only from integer literals; None otherwise."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Unary):
        v = const_int(e.operand)
        if v is None:
            return None
        return {"-": -v, "+": v, "!": int(not v)}[e.op]
    if isinstance(e, Cast) and e.to in ("int", "uint"):
        return const_int(e.operand)
    if isinstance(e, Binary):
        a, b = const_int(e.lhs), const_int(e.rhs)
        if a is None or b is None:
            return None
        op = e.op
        if op in ("/", "%") and b == 0:
            return None
        return {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "/": lambda: c_div(a, b), "%": lambda: c_mod(a, b),
            "<": lambda: int(a < b), "<=": lambda: int(a <= b),
            ">": lambda: int(a > b), ">=": lambda: int(a >= b),
            "==": lambda: int(a == b), "!=": lambda: int(a != b),
            "&&": lambda: int(bool(a) and bool(b)), "||": lambda: int(bool(a) or bool(b)),
        }[op]()
    return None


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}

MAX_TRIP = 1 << 20


def loop_values(loop: For) -> list[int] | None:
    """Induction-variable values of a constant loop, in execution order.

    Returns None when bounds are not compile-time constants or the loop does
    not terminate within MAX_TRIP iterations.
    """
    start, bound = const_int(loop.start), const_int(loop.bound)
    if start is None or bound is None or loop.step == 0:
        return None
    test = _CMP[loop.cmp]
    upward = loop.cmp in ("<", "<=")
    if test(start, bound) and upward != (loop.step > 0):
        return None  # moving away from the bound
    values = []
    v = start
    while test(v, bound):
        values.append(v)
        v += loop.step
        if len(values) > MAX_TRIP:
            return None
    return values
