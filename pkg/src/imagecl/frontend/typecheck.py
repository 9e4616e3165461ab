"""Scope resolution and C-style type inference for ImageCL kernels."""

from __future__ import annotations

import dataclasses

from imagecl.errors import KernelTypeError, RestrictionError
from imagecl.frontend.consteval import loop_values
from imagecl.frontend.nodes import (
    BUILTIN_FUNCS,
    BUILTIN_VARS,
    Assign,
    Binary,
    Block,
    Call,
    Cast,
    Decl,
    Expr,
    ExprStmt,
    FloatLit,
    For,
    If,
    Index1,
    Index2,
    IntLit,
    KernelAst,
    Unary,
    Var,
    walk,
)

INTEGER_TYPES = ("int", "uint", "uchar")
RESERVED_PREFIX = "_"


def promote(a: str, b: str) -> str:
    """Usual arithmetic conversions restricted to {uchar, int, uint, float}."""
    if "float" in (a, b):
        return "float"
    if "uint" in (a, b):
        return "uint"
    return "int"


def _err(msg, node):
    sp = node.span
    raise KernelTypeError(msg, sp.line if sp else None, sp.col if sp else None)


class _Checker:
    def __init__(self, ast: KernelAst):
        self.ast = ast
        self.params = {p.name: p for p in ast.params}
        self.scopes: list[dict[str, str]] = []
        self.loop_vars: list[str] = []

    def lookup(self, name):
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        return None

    def declare(self, name, ty, node):
        if name.startswith(RESERVED_PREFIX):
            _err(f"identifiers starting with '_' are reserved: {name!r}", node)
        if name in BUILTIN_VARS or name in BUILTIN_FUNCS:
            _err(f"{name!r} shadows a builtin", node)
        if name in self.params or self.lookup(name) is not None:
            _err(f"{name!r} is already declared", node)
        self.scopes[-1][name] = ty

    # -- expressions ----------------------------------------------------------

    def expr(self, e: Expr) -> Expr:
        if isinstance(e, IntLit):
            return dataclasses.replace(e, ty="uint" if e.unsigned else "int")
        if isinstance(e, FloatLit):
            return dataclasses.replace(e, ty="float")
        if isinstance(e, Var):
            if e.name in BUILTIN_VARS:
                return dataclasses.replace(e, ty="int")
            ty = self.lookup(e.name)
            if ty is not None:
                return dataclasses.replace(e, ty=ty)
            p = self.params.get(e.name)
            if p is None:
                _err(f"undeclared identifier {e.name!r}", e)
            if p.kind != "scalar":
                _err(f"{p.kind} {e.name!r} must be indexed", e)
            return dataclasses.replace(e, ty=p.type)
        if isinstance(e, Unary):
            o = self.expr(e.operand)
            if e.op == "!":
                ty = "int"
            else:
                ty = "float" if o.ty == "float" else ("uint" if o.ty == "uint" else "int")
            return dataclasses.replace(e, operand=o, ty=ty)
        if isinstance(e, Binary):
            a, b = self.expr(e.lhs), self.expr(e.rhs)
            if e.op in ("<", "<=", ">", ">=", "==", "!=", "&&", "||"):
                ty = "int"
            else:
                ty = promote(a.ty, b.ty)
                if e.op == "%" and ty == "float":
                    _err("operator % requires integer operands", e)
            return dataclasses.replace(e, lhs=a, rhs=b, ty=ty)
        if isinstance(e, Cast):
            return dataclasses.replace(e, operand=self.expr(e.operand), ty=e.to)
        if isinstance(e, Call):
            arity = BUILTIN_FUNCS.get(e.func)
            if arity is None:
                _err(f"unknown function {e.func!r}", e)
            if len(e.args) != arity:
                _err(f"{e.func} expects {arity} argument(s), got {len(e.args)}", e)
            args = tuple(self.expr(a) for a in e.args)
            if e.func in ("sqrt", "fabs", "exp", "fmin", "fmax"):
                ty = "float"
            else:
                ty = promote(args[0].ty, args[1].ty)
            return dataclasses.replace(e, args=args, ty=ty)
        if isinstance(e, (Index1, Index2)):
            name = e.array if isinstance(e, Index1) else e.image
            p = self.params.get(name)
            if p is None or p.kind == "scalar" or self.lookup(name) is not None:
                what = "builtin" if name in BUILTIN_VARS else "scalar"
                if p is None and self.lookup(name) is None and name not in BUILTIN_VARS:
                    _err(f"undeclared identifier {name!r}", e)
                _err(f"cannot index {what} {name!r}", e)
            if isinstance(e, Index1):
                if p.kind == "image":
                    _err(f"Image {name!r} must be indexed as {name}[x][y]", e)
                i = self.index(e.index)
                return dataclasses.replace(e, index=i, ty=p.type)
            if p.kind != "image":
                _err(f"array {name!r} takes a single index", e)
            return dataclasses.replace(e, x=self.index(e.x), y=self.index(e.y), ty=p.type)
        _err(f"unsupported expression {type(e).__name__}", e)

    def index(self, e):
        t = self.expr(e)
        if t.ty not in INTEGER_TYPES:
            _err("array index must be an integer", e)
        return t

    # -- statements ---------------------------------------------------------

    def block(self, b: Block, extra: dict[str, str] | None = None) -> Block:
        self.scopes.append(dict(extra or {}))
        try:
            stmts = tuple(self.stmt(s) for s in b.stmts)
        finally:
            self.scopes.pop()
        return dataclasses.replace(b, stmts=stmts)

    def stmt(self, s):
        if isinstance(s, Decl):
            init = self.expr(s.init) if s.init is not None else None
            self.declare(s.name, s.type, s)
            return dataclasses.replace(s, init=init)
        if isinstance(s, Assign):
            t = s.target
            if isinstance(t, Var):
                if t.name in BUILTIN_VARS:
                    _err(f"cannot assign to builtin {t.name!r}", t)
                if t.name in self.loop_vars:
                    _err(f"cannot assign to loop variable {t.name!r}", t)
                if self.lookup(t.name) is None:
                    if t.name in self.params:
                        _err(f"kernel parameter {t.name!r} is read-only", t)
                    _err(f"undeclared identifier {t.name!r}", t)
            elif not isinstance(t, (Index1, Index2)):
                _err("invalid assignment target", t)
            target = self.expr(t)
            value = self.expr(s.value)
            if s.op == "%=" and "float" in (target.ty, value.ty):
                _err("operator % requires integer operands", s)
            return dataclasses.replace(s, target=target, value=value)
        if isinstance(s, Block):
            return self.block(s)
        if isinstance(s, For):
            start, bound = self.expr(s.start), self.expr(s.bound)
            if start.ty not in INTEGER_TYPES or bound.ty not in INTEGER_TYPES:
                _err("loop bounds must be integers", s)
            if loop_values(s) is None:
                raise RestrictionError(
                    "loop bounds and step must be compile-time constants with a finite trip count",
                    s.span.line if s.span else None, s.span.col if s.span else None,
                )
            self.scopes.append({})
            self.declare(s.var, "int", s)
            self.loop_vars.append(s.var)
            try:
                body = self.block(s.body)
            finally:
                self.loop_vars.pop()
                self.scopes.pop()
            return dataclasses.replace(s, start=start, bound=bound, body=body)
        if isinstance(s, If):
            cond = self.expr(s.cond)
            then = self.block(s.then)
            other = self.block(s.other) if s.other is not None else None
            return dataclasses.replace(s, cond=cond, then=then, other=other)
        if isinstance(s, ExprStmt):
            return dataclasses.replace(s, expr=self.expr(s.expr))
        _err(f"unsupported statement {type(s).__name__}", s)


def typecheck(ast: KernelAst) -> KernelAst:
    """Return a copy of ``ast`` with every expression's ``ty`` filled in.

    Raises KernelTypeError on scope or typing violations.
    """
    for p in ast.params:
        if p.name.startswith(RESERVED_PREFIX):
            _err(f"identifiers starting with '_' are reserved: {p.name!r}", p)
        if p.name in BUILTIN_VARS or p.name in BUILTIN_FUNCS:
            _err(f"parameter {p.name!r} shadows a builtin", p)
    checker = _Checker(ast)
    body = checker.block(ast.body)
    return dataclasses.replace(ast, body=body)
