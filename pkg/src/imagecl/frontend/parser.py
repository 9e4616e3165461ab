"""Recursive-descent parser for the ImageCL kernel subset."""

from __future__ import annotations

import numpy as np

from imagecl.errors import ParseError, RestrictionError
from imagecl.frontend.lexer import Token, tokenize
from imagecl.frontend.nodes import (
    BUILTIN_FUNCS,
    Assign,
    Binary,
    Block,
    BoundaryPragma,
    Call,
    Cast,
    Decl,
    ExprStmt,
    FloatLit,
    For,
    ForcePragma,
    GridPragma,
    If,
    Index1,
    Index2,
    IntLit,
    KernelAst,
    MaxSizePragma,
    ParamDecl,
    Span,
    Unary,
    Var,
    walk,
)

TYPE_WORDS = ("float", "int", "uint", "uchar", "unsigned")
FORBIDDEN_KEYWORDS = {
    "while": "while loops are not supported",
    "do": "do loops are not supported",
    "goto": "goto is not supported",
    "switch": "switch statements are not supported",
    "break": "break is not supported",
    "continue": "continue is not supported",
    "return": "return statements are not supported",
    "struct": "struct types are not supported",
    "union": "union types are not supported",
    "typedef": "typedef is not supported",
    "sizeof": "sizeof is not supported",
    "double": "double is not supported",
    "char": "char is not supported; use uchar",
}
BINARY_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
BITWISE = ("&", "|", "^", "<<", ">>")
ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=")
COMPARISONS = ("<", "<=", ">", ">=")
FORCE_KINDS = ("interleaved", "imageMem", "constantMem", "localMem", "unroll")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = [t for t in tokens if t.kind != "pragma"]
        self.pragma_tokens = [t for t in tokens if t.kind == "pragma"]
        self.pos = 0
        self.loop_counter = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, k=0) -> Token | None:
        j = self.pos + k
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, text, k=0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind in ("punct", "ident") and t.text == text

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseError(
                "unexpected end of input",
                last.line if last else 1,
                (last.col + len(last.text)) if last else 1,
            )
        self.pos += 1
        return t

    def expect(self, text) -> Token:
        t = self.peek()
        if t is None or t.text != text or t.kind not in ("punct", "ident"):
            self.fail([text])
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t is None or t.kind != "ident":
            self.fail(["identifier"])
        return self.next()

    def fail(self, expected):
        t = self.peek()
        if t is None:
            last = self.tokens[-1] if self.tokens else None
            line, col, got = (last.line, last.col + len(last.text), "end of input") if last else (1, 1, "end of input")
        else:
            line, col, got = t.line, t.col, repr(t.text)
        raise ParseError(
            f"expected {' or '.join(map(str, expected))}, got {got}", line, col, expected
        )

    @staticmethod
    def span(t: Token) -> Span:
        return Span(t.line, t.col)

    # -- types --------------------------------------------------------------

    def at_type(self) -> bool:
        t = self.peek()
        return t is not None and t.kind == "ident" and t.text in TYPE_WORDS

    def parse_type(self) -> str:
        t = self.expect_ident()
        if t.text == "unsigned":
            if self.at("char"):
                self.next()
                return "uchar"
            if self.at("int"):
                self.next()
            return "uint"
        if t.text in ("float", "int", "uint", "uchar"):
            return t.text
        if t.text in FORBIDDEN_KEYWORDS:
            raise RestrictionError(FORBIDDEN_KEYWORDS[t.text], t.line, t.col)
        raise ParseError(f"unknown type {t.text!r}", t.line, t.col, ["type"])

    # -- top level ----------------------------------------------------------

    def parse_program(self) -> KernelAst:
        first = self.peek()
        if first is None:
            raise ParseError("empty program: expected a kernel function", 1, 1, ["void"])
        t = self.expect("void")
        name = self.expect_ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.parse_param())
            while self.at(","):
                self.next()
                params.append(self.parse_param())
        self.expect(")")
        body = self.parse_block()
        rest = self.peek()
        if rest is not None:
            if rest.kind == "ident" and (rest.text == "void" or rest.text in TYPE_WORDS):
                raise RestrictionError(
                    "the kernel must be written as a single function", rest.line, rest.col
                )
            self.fail(["end of input"])
        seen = set()
        for p in params:
            if p.name in seen:
                raise ParseError(f"duplicate parameter {p.name!r}", p.span.line, p.span.col)
            seen.add(p.name)
        ast = KernelAst(name.text, tuple(params), body, (), span=self.span(t))
        pragmas = tuple(self.parse_pragma(pt, ast) for pt in self.pragma_tokens)
        grids = [p for p in pragmas if isinstance(p, GridPragma)]
        if len(grids) > 1:
            raise ParseError("more than one grid pragma", grids[1].span.line, grids[1].span.col)
        bounds = [p.image for p in pragmas if isinstance(p, BoundaryPragma)]
        for p in pragmas:
            if isinstance(p, BoundaryPragma) and bounds.count(p.image) > 1:
                raise ParseError(
                    f"duplicate boundary pragma for {p.image!r}", p.span.line, p.span.col
                )
        return KernelAst(ast.name, ast.params, ast.body, pragmas, span=ast.span)

    def parse_param(self) -> ParamDecl:
        t = self.peek()
        if self.at("Image"):
            self.next()
            self.expect("<")
            ty = self.parse_type()
            self.expect(">")
            name = self.expect_ident()
            return ParamDecl(name.text, "image", ty, span=self.span(t))
        if t is not None and t.kind == "ident" and t.text in ("const", "__global", "global"):
            raise RestrictionError(f"qualifier {t.text!r} is not supported", t.line, t.col)
        ty = self.parse_type()
        if self.at("*"):
            self.next()
            name = self.expect_ident()
            return ParamDecl(name.text, "array", ty, span=self.span(t))
        name = self.expect_ident()
        if self.at("["):
            self.next()
            length = None
            if not self.at("]"):
                lt = self.next()
                if lt.kind != "int" or lt.value <= 0:
                    raise ParseError("array length must be a positive integer literal", lt.line, lt.col)
                length = lt.value
            self.expect("]")
            return ParamDecl(name.text, "array", ty, length, span=self.span(t))
        return ParamDecl(name.text, "scalar", ty, span=self.span(t))

    # -- pragmas ------------------------------------------------------------

    def parse_pragma(self, pt: Token, ast: KernelAst):
        sub = _Parser(pt.value)
        head = sub.peek()
        if head is None:
            raise ParseError("empty imcl pragma", pt.line, pt.col)
        sp = Span(pt.line, pt.col)
        kind = sub.expect_ident().text
        sub.expect("(")
        if kind == "grid":
            a = sub.next()
            if a.kind == "int":
                sub.expect(",")
                b = sub.next()
                if b.kind != "int" or a.value <= 0 or b.value <= 0:
                    raise ParseError("grid size must be two positive integers", a.line, a.col)
                prag = GridPragma(size=(a.value, b.value), span=sp)
            elif a.kind == "ident":
                p = ast.param(a.text)
                if p is None:
                    raise ParseError(f"grid pragma names unknown parameter {a.text!r}", a.line, a.col)
                if p.kind != "image":
                    raise ParseError(f"grid pragma target {a.text!r} is not an Image", a.line, a.col)
                prag = GridPragma(target=a.text, span=sp)
            else:
                raise ParseError("grid pragma expects an Image name or (W, H)", a.line, a.col)
        elif kind == "boundary":
            a = sub.expect_ident()
            p = ast.param(a.text)
            if p is None or p.kind != "image":
                raise ParseError(f"boundary pragma must name an Image parameter, got {a.text!r}", a.line, a.col)
            sub.expect(",")
            m = sub.expect_ident()
            if m.text == "clamped":
                prag = BoundaryPragma(a.text, "clamped", span=sp)
            elif m.text == "constant":
                value = 0
                if sub.at("("):
                    sub.next()
                    neg = False
                    if sub.at("-"):
                        sub.next()
                        neg = True
                    v = sub.next()
                    if v.kind not in ("int", "float"):
                        raise ParseError("boundary constant must be a number", v.line, v.col)
                    value = -v.value if neg else v.value
                    sub.expect(")")
                prag = BoundaryPragma(a.text, "constant", value, span=sp)
            else:
                raise ParseError(
                    f"unknown boundary mode {m.text!r}", m.line, m.col, ["clamped", "constant"]
                )
        elif kind == "maxsize":
            a = sub.expect_ident()
            p = ast.param(a.text)
            if p is None or p.kind == "scalar":
                raise ParseError(f"maxsize pragma must name an array parameter, got {a.text!r}", a.line, a.col)
            sub.expect(",")
            v = sub.next()
            if v.kind != "int" or v.value <= 0:
                raise ParseError("maxsize expects a positive byte count", v.line, v.col)
            prag = MaxSizePragma(a.text, v.value, span=sp)
        elif kind == "force":
            a = sub.expect_ident()
            pid = a.text
            if pid not in FORCE_KINDS:
                raise ParseError(f"cannot force {pid!r}", a.line, a.col, FORCE_KINDS)
            if sub.at("."):
                sub.next()
                b = sub.expect_ident()
                if pid == "unroll":
                    ids = {n.loop_id for n in walk(ast.body) if isinstance(n, For)}
                    if b.text not in ids:
                        raise ParseError(f"force names unknown loop {b.text!r}", b.line, b.col)
                elif ast.param(b.text) is None:
                    raise ParseError(f"force names unknown parameter {b.text!r}", b.line, b.col)
                pid = f"{pid}.{b.text}"
            elif pid != "interleaved":
                sub.fail(["."])
            sub.expect(",")
            v = sub.expect_ident()
            if v.text not in ("on", "off"):
                raise ParseError("force expects on or off", v.line, v.col, ["on", "off"])
            prag = ForcePragma(pid, v.text == "on", span=sp)
        else:
            raise ParseError(f"unknown imcl pragma {kind!r}", head.line, head.col,
                             ["grid", "boundary", "maxsize", "force"])
        sub.expect(")")
        if sub.peek() is not None:
            sub.fail(["end of pragma"])
        return prag

    # -- statements ---------------------------------------------------------

    def parse_block(self) -> Block:
        t = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek() is None:
                self.fail(["}"])
            stmts.extend(self.parse_stmt())
        self.expect("}")
        return Block(tuple(stmts), span=self.span(t))

    def parse_body(self) -> Block:
        if self.at("{"):
            return self.parse_block()
        t = self.peek()
        stmts = self.parse_stmt()
        return Block(tuple(stmts), span=self.span(t) if t else None)

    def parse_stmt(self) -> list:
        t = self.peek()
        if t.kind == "ident" and t.text in FORBIDDEN_KEYWORDS:
            raise RestrictionError(FORBIDDEN_KEYWORDS[t.text], t.line, t.col)
        if self.at("{"):
            return [self.parse_block()]
        if self.at(";"):
            self.next()
            return []
        if self.at("for"):
            return [self.parse_for()]
        if self.at("if"):
            return [self.parse_if()]
        if self.at("void"):
            raise RestrictionError("the kernel must be written as a single function", t.line, t.col)
        if self.at_type():
            ty = self.parse_type()
            decls = []
            while True:
                name = self.expect_ident()
                if self.at("["):
                    raise RestrictionError("local array declarations are not supported", name.line, name.col)
                init = None
                if self.at("="):
                    self.next()
                    init = self.parse_expr()
                decls.append(Decl(ty, name.text, init, span=self.span(name)))
                if not self.at(","):
                    break
                self.next()
            self.expect(";")
            return decls
        if self.at("++") or self.at("--"):
            op = self.next()
            target = self.parse_postfix()
            self.expect(";")
            return [Assign(target, "+=" if op.text == "++" else "-=", IntLit(1, span=self.span(op)), span=self.span(op))]
        lhs = self.parse_expr()
        nt = self.peek()
        if nt is not None and nt.kind == "punct" and nt.text in ASSIGN_OPS:
            self.next()
            value = self.parse_expr()
            self.expect(";")
            return [Assign(lhs, nt.text, value, span=self.span(t))]
        if nt is not None and nt.kind == "punct" and nt.text in ("++", "--"):
            self.next()
            self.expect(";")
            one = IntLit(1, span=self.span(nt))
            return [Assign(lhs, "+=" if nt.text == "++" else "-=", one, span=self.span(t))]
        if nt is not None and nt.kind == "punct" and nt.text in ("&=", "|=", "^=", "<<=", ">>="):
            raise RestrictionError("bitwise operators are not supported", nt.line, nt.col)
        self.expect(";")
        return [ExprStmt(lhs, span=self.span(t))]

    def parse_for(self) -> For:
        t = self.expect("for")
        loop_id = None
        self.loop_counter += 1
        loop_id = f"L{self.loop_counter}"
        self.expect("(")
        ty = self.peek()
        if not self.at("int"):
            raise RestrictionError(
                "for-loops must declare an int induction variable", ty.line, ty.col
            )
        self.next()
        var = self.expect_ident().text
        self.expect("=")
        start = self.parse_expr()
        self.expect(";")
        cv = self.expect_ident()
        if cv.text != var:
            raise RestrictionError(
                f"loop condition must test the induction variable {var!r}", cv.line, cv.col
            )
        c = self.next()
        if c.text not in COMPARISONS:
            raise RestrictionError(
                "loop condition must be one of <, <=, >, >=", c.line, c.col
            )
        bound = self.parse_expr()
        self.expect(";")
        step = self.parse_update(var)
        self.expect(")")
        body = self.parse_body()
        return For(var, start, c.text, bound, step, body, loop_id, span=self.span(t))

    def parse_update(self, var: str) -> int:
        t = self.peek()
        if self.at("++") or self.at("--"):
            op = self.next()
            v = self.expect_ident()
            if v.text != var:
                raise RestrictionError("loop update must modify the induction variable", v.line, v.col)
            return 1 if op.text == "++" else -1
        v = self.expect_ident()
        if v.text != var:
            raise RestrictionError("loop update must modify the induction variable", v.line, v.col)
        op = self.next()
        if op.text == "++":
            return 1
        if op.text == "--":
            return -1
        if op.text in ("+=", "-="):
            neg = False
            if self.at("-"):
                self.next()
                neg = True
            lit = self.next()
            if lit.kind != "int" or lit.value == 0:
                raise RestrictionError("loop step must be a nonzero integer literal", lit.line, lit.col)
            step = -lit.value if neg else lit.value
            return step if op.text == "+=" else -step
        raise RestrictionError("unsupported loop update", t.line, t.col)

    def parse_if(self) -> If:
        t = self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_body()
        other = None
        if self.at("else"):
            self.next()
            other = self.parse_body()
        return If(cond, then, other, span=self.span(t))

    # -- expressions --------------------------------------------------------

    def parse_expr(self, min_prec=1):
        lhs = self.parse_unary()
        while True:
            t = self.peek()
            if t is None or t.kind != "punct":
                return lhs
            if t.text in BITWISE:
                raise RestrictionError("bitwise operators are not supported", t.line, t.col)
            if t.text == "?":
                raise RestrictionError("the conditional operator is not supported", t.line, t.col)
            prec = BINARY_PREC.get(t.text)
            if prec is None or prec < min_prec:
                return lhs
            self.next()
            rhs = self.parse_expr(prec + 1)
            lhs = Binary(t.text, lhs, rhs, span=self.span(t))

    def parse_unary(self):
        t = self.peek()
        if t is None:
            self.fail(["expression"])
        if t.kind == "punct":
            if t.text in ("-", "+", "!"):
                self.next()
                return Unary(t.text, self.parse_unary(), span=self.span(t))
            if t.text == "&":
                raise RestrictionError("address-of is not supported", t.line, t.col)
            if t.text == "*":
                raise RestrictionError("pointer dereference is not supported", t.line, t.col)
            if t.text == "~":
                raise RestrictionError("bitwise operators are not supported", t.line, t.col)
            if t.text in ("++", "--"):
                raise RestrictionError("increment inside expressions is not supported", t.line, t.col)
            if t.text == "(" and self.peek(1) is not None and self.peek(1).kind == "ident" \
                    and self.peek(1).text in TYPE_WORDS:
                self.next()
                ty = self.parse_type()
                self.expect(")")
                return Cast(ty, self.parse_unary(), span=self.span(t))
        return self.parse_postfix()

    def parse_postfix(self):
        t = self.next()
        if t.kind == "int":
            return IntLit(t.value, t.text[-1] in "uU", span=self.span(t))
        if t.kind == "float":
            return FloatLit(float(np.float32(t.value)), span=self.span(t))
        if t.kind == "punct" and t.text == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text in FORBIDDEN_KEYWORDS:
                raise RestrictionError(FORBIDDEN_KEYWORDS[t.text], t.line, t.col)
            if self.at("("):
                if t.text not in BUILTIN_FUNCS:
                    raise RestrictionError(
                        f"call to {t.text!r}: user function calls are not supported", t.line, t.col
                    )
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.at(","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect(")")
                return Call(t.text, tuple(args), span=self.span(t))
            if self.at("["):
                self.next()
                i1 = self.parse_expr()
                self.expect("]")
                if self.at("["):
                    self.next()
                    i2 = self.parse_expr()
                    self.expect("]")
                    if self.at("["):
                        nt = self.peek()
                        raise RestrictionError("3D indexing is not supported", nt.line, nt.col)
                    return Index2(t.text, i1, i2, span=self.span(t))
                return Index1(t.text, i1, span=self.span(t))
            if self.at(".") or self.at("->"):
                nt = self.peek()
                raise RestrictionError("member access is not supported", nt.line, nt.col)
            return Var(t.text, span=self.span(t))
        if t.kind == "string":
            raise RestrictionError("string and character literals are not supported", t.line, t.col)
        self.pos -= 1
        self.fail(["expression"])


def parse(tokens: list[Token]) -> KernelAst:
    """Build a KernelAst from a token list; pragmas are validated against the
    parsed parameter list."""
    return _Parser(tokens).parse_program()


def parse_source(source: str) -> KernelAst:
    return parse(tokenize(source))
