"""Constant propagation generalised to small sets of integer values.

Each integer variable maps to a finite set of possible values, or to TOP
when the set is unknown or would exceed ``max_set_size``. Loops with
constant bounds bind their induction variable to the full iteration set
and iterate the body to a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from imagecl.frontend.consteval import c_div, c_mod, loop_values
from imagecl.frontend.nodes import (
    BUILTIN_VARS,
    Assign,
    Binary,
    Block,
    Call,
    Cast,
    Decl,
    Expr,
    ExprStmt,
    For,
    If,
    IntLit,
    KernelAst,
    Stmt,
    Unary,
    Var,
)

DEFAULT_MAX_SET_SIZE = 64


class _Top:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TOP"


TOP = _Top()

_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": c_div,
    "%": c_mod,
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "&&": lambda a, b: int(bool(a) and bool(b)),
    "||": lambda a, b: int(bool(a) or bool(b)),
}


def _cap(values, limit):
    s = frozenset(values)
    return TOP if len(s) > limit else s


def eval_set(e: Expr, env: dict, limit: int = DEFAULT_MAX_SET_SIZE):
    """Abstract value of an integer expression under ``env``."""
    if e.ty == "float":
        return TOP
    if isinstance(e, IntLit):
        return frozenset({e.value})
    if isinstance(e, Var):
        if e.name in BUILTIN_VARS:
            return TOP
        return env.get(e.name, TOP)
    if isinstance(e, Unary):
        a = eval_set(e.operand, env, limit)
        if a is TOP:
            return TOP
        f = {"-": lambda v: -v, "+": lambda v: v, "!": lambda v: int(not v)}[e.op]
        return _cap((f(v) for v in a), limit)
    if isinstance(e, Binary):
        a = eval_set(e.lhs, env, limit)
        if a is TOP:
            return TOP
        b = eval_set(e.rhs, env, limit)
        if b is TOP:
            return TOP
        if e.op in ("/", "%") and 0 in b:
            return TOP
        f = _BINOPS[e.op]
        return _cap((f(x, y) for x, y in product(a, b)), limit)
    if isinstance(e, Cast):
        if e.to == "float" or e.operand.ty == "float":
            return TOP
        a = eval_set(e.operand, env, limit)
        if a is TOP or e.to != "uchar":
            return a
        return _cap((v % 256 for v in a), limit)
    if isinstance(e, Call) and e.func in ("min", "max"):
        a = eval_set(e.args[0], env, limit)
        b = eval_set(e.args[1], env, limit)
        if a is TOP or b is TOP:
            return TOP
        f = min if e.func == "min" else max
        return _cap((f(x, y) for x, y in product(a, b)), limit)
    return TOP


def join(a, b, limit):
    if a is TOP or b is TOP:
        return TOP
    return _cap(a | b, limit)


def _join_env(e1: dict, e2: dict, limit) -> dict:
    out = {}
    for k in set(e1) | set(e2):
        if k in e1 and k in e2:
            out[k] = join(e1[k], e2[k], limit)
        else:
            out[k] = TOP
    return out


@dataclass
class ValueSets:
    """Result of value-set propagation.

    ``entry`` maps ``id(stmt)`` to the environment holding just before that
    statement; ``points`` lists statements in pre-order so a program point
    is an index into it.
    """

    max_set_size: int
    points: list[Stmt] = field(default_factory=list)
    entry: dict[int, dict] = field(default_factory=dict)

    def at(self, stmt: Stmt) -> dict:
        return self.entry[id(stmt)]

    def table(self) -> dict[tuple[str, int], object]:
        out = {}
        for i, s in enumerate(self.points):
            for var, val in self.entry.get(id(s), {}).items():
                out[(var, i)] = val
        return out

    def lookup(self, var: str, stmt: Stmt):
        return self.at(stmt).get(var, TOP)


class _Propagator:
    def __init__(self, limit: int, result: ValueSets):
        self.limit = limit
        self.result = result
        self.seen: set[int] = set()

    def record(self, s: Stmt, env: dict):
        if id(s) not in self.seen:
            self.seen.add(id(s))
            self.result.points.append(s)
        self.result.entry[id(s)] = dict(env)

    def block(self, b: Block, env: dict) -> dict:
        for s in b.stmts:
            env = self.stmt(s, env)
        return env

    def stmt(self, s: Stmt, env: dict) -> dict:
        self.record(s, env)
        lim = self.limit
        if isinstance(s, Decl):
            env = dict(env)
            if s.type == "float" or s.init is None:
                env[s.name] = TOP
            else:
                env[s.name] = self.convert(eval_set(s.init, env, lim), s.type)
            return env
        if isinstance(s, Assign):
            t = s.target
            if not isinstance(t, Var):
                return env
            env = dict(env)
            if t.ty == "float":
                env[t.name] = TOP
                return env
            if s.op == "=":
                v = eval_set(s.value, env, lim)
            else:
                v = eval_set(Binary(s.op[:-1], t, s.value, ty=t.ty), env, lim)
            env[t.name] = self.convert(v, t.ty)
            return env
        if isinstance(s, Block):
            return self.block(s, env)
        if isinstance(s, If):
            e1 = self.block(s.then, env)
            e2 = self.block(s.other, env) if s.other is not None else env
            return _join_env(e1, e2, lim)
        if isinstance(s, For):
            values = loop_values(s)
            ivals = TOP if values is None or len(values) > lim else frozenset(values)
            if values == []:
                return env
            cur = dict(env)
            while True:
                inner = dict(cur)
                inner[s.var] = ivals
                out = self.block(s.body, inner)
                out.pop(s.var, None)
                nxt = _join_env(cur, {k: out.get(k, TOP) for k in cur}, lim)
                for k in out:
                    if k not in nxt:
                        nxt[k] = out[k]
                if nxt == cur:
                    return cur
                cur = nxt
        if isinstance(s, ExprStmt):
            return env
        return env

    @staticmethod
    def convert(v, ty):
        if v is TOP or ty != "uchar":
            return v
        return frozenset(x % 256 for x in v)


def propagate_value_sets(ast: KernelAst, max_set_size: int = DEFAULT_MAX_SET_SIZE) -> ValueSets:
    """Forward value-set propagation over a typechecked kernel."""
    if max_set_size < 1:
        raise ValueError("max_set_size must be positive")
    result = ValueSets(max_set_size)
    _Propagator(max_set_size, result).block(ast.body, {})
    return result
