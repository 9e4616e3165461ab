"""A small syntactic checker for the OpenCL C subset this package emits.

It is not a compiler: it parses the text, tracks scopes and rejects
undeclared identifiers, unknown functions and malformed statements. Tests
use it to validate emitted kernels on machines without an OpenCL toolchain.
"""

from __future__ import annotations

import re

from imagecl.errors import ImageCLError


class CLSyntaxError(ImageCLError):
    pass


SCALARS = {"float", "int", "uint", "uchar", "char", "short", "ushort", "long", "ulong", "size_t", "bool"}
VECTORS = {f"{t}{n}" for t in ("float", "int", "uint") for n in (2, 4)}
FUNCS = {
    "get_global_id", "get_local_id", "get_group_id", "get_global_size", "get_local_size",
    "read_imagef", "read_imagei", "read_imageui", "write_imagef", "write_imagei", "write_imageui",
    "barrier", "sqrt", "fabs", "exp", "min", "max", "fmin", "fmax", "clamp",
}
CONSTS = {
    "CLK_LOCAL_MEM_FENCE", "CLK_GLOBAL_MEM_FENCE", "CLK_NORMALIZED_COORDS_FALSE",
    "CLK_ADDRESS_CLAMP_TO_EDGE", "CLK_ADDRESS_CLAMP", "CLK_ADDRESS_NONE", "CLK_FILTER_NEAREST",
}
KEYWORDS = {"for", "if", "else", "__kernel", "__global", "__constant", "__local", "void",
            "read_only", "write_only", "image2d_t", "sampler_t", "return"}

_TOKEN = re.compile(
    r"\s+|//[^\n]*|/\*.*?\*/"
    r"|(?P<num>(\d+\.\d*|\.\d+)([eE][-+]?\d+)?f?|\d+[eE][-+]?\d+f?|0[xX][0-9a-fA-F]+[uU]?|\d+[uU]?)"
    r"|(?P<id>[A-Za-z_]\w*)"
    r"|(?P<op>\+\+|--|\+=|-=|\*=|/=|%=|<=|>=|==|!=|&&|\|\||[-+*/%<>=!?:;,(){}\[\].|&])",
    re.S,
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos, line = 0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise CLSyntaxError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind:
            out.append((kind, m.group(kind), line))
        line += m.group(0).count("\n")
        pos = m.end()
    out.append(("eof", "", line))
    return out


class _Checker:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.scopes: list[set[str]] = [set()]
        self.kernels: list[str] = []

    # -- helpers ------------------------------------------------------------
    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg):
        raise CLSyntaxError(f"{msg} (got {self.tok[1]!r})", self.tok[2])

    def accept(self, text):
        if self.tok[1] == text and self.tok[0] != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def ident(self):
        if self.tok[0] != "id" or self.tok[1] in KEYWORDS:
            self.error("expected identifier")
        name = self.tok[1]
        self.i += 1
        return name

    def declare(self, name):
        if name in self.scopes[-1]:
            self.error(f"redeclaration of {name!r}")
        self.scopes[-1].add(name)

    def known(self, name):
        return any(name in s for s in self.scopes) or name in CONSTS

    def is_type(self, t=None):
        t = t or self.tok
        return t[0] == "id" and (t[1] in SCALARS or t[1] in VECTORS)

    # -- top level ----------------------------------------------------------
    def unit(self):
        while self.tok[0] != "eof":
            if self.tok[1] == "__constant" and self.peek()[1] == "sampler_t":
                self.i += 2
                self.declare(self.ident())
                self.expect("=")
                self.flag()
                while self.accept("|"):
                    self.flag()
                self.expect(";")
            elif self.tok[1] == "__kernel":
                self.kernel()
            else:
                self.error("expected kernel or sampler declaration")
        if not self.kernels:
            raise CLSyntaxError("no __kernel function", self.tok[2])

    def flag(self):
        name = self.ident()
        if name not in CONSTS:
            self.error(f"unknown sampler flag {name!r}")

    def kernel(self):
        self.expect("__kernel")
        self.expect("void")
        self.kernels.append(self.ident())
        self.expect("(")
        self.scopes.append(set())
        if not self.accept(")"):
            self.param()
            while self.accept(","):
                self.param()
            self.expect(")")
        self.block(new_scope=False)
        self.scopes.pop()

    def param(self):
        if self.tok[1] in ("__global", "__constant", "__local"):
            self.i += 1
            self.accept("const")
            if not self.is_type():
                self.error("expected element type")
            self.i += 1
            self.expect("*")
        elif self.tok[1] in ("read_only", "write_only"):
            self.i += 1
            self.expect("image2d_t")
        elif self.is_type():
            self.i += 1
        else:
            self.error("expected parameter")
        self.declare(self.ident())

    # -- statements ---------------------------------------------------------
    def block(self, new_scope=True):
        self.expect("{")
        if new_scope:
            self.scopes.append(set())
        while not self.accept("}"):
            if self.tok[0] == "eof":
                self.error("unterminated block")
            self.stmt()
        if new_scope:
            self.scopes.pop()

    def stmt(self):
        t = self.tok[1]
        if t == "{":
            self.block()
        elif t == "__local":
            self.i += 1
            if not self.is_type():
                self.error("expected local element type")
            self.i += 1
            self.declare(self.ident())
            self.expect("[")
            if self.tok[0] != "num":
                self.error("local arrays need a static size")
            self.i += 1
            self.expect("]")
            self.expect(";")
        elif t == "for":
            self.i += 1
            self.expect("(")
            self.scopes.append(set())
            self.expect("int")
            self.declare(self.ident())
            self.expect("=")
            self.expr()
            self.expect(";")
            self.expr()
            self.expect(";")
            self.update()
            self.expect(")")
            self.block()
            self.scopes.pop()
        elif t == "if":
            self.i += 1
            self.expect("(")
            self.expr()
            self.expect(")")
            self.block()
            if self.accept("else"):
                self.block()
        elif self.is_type() and self.peek()[0] == "id":
            self.i += 1
            name = self.ident()
            if self.accept("="):
                self.expr()
            self.declare(name)
            self.expect(";")
        else:
            self.expr()
            if self.tok[1] in ("=", "+=", "-=", "*=", "/=", "%="):
                self.i += 1
                self.expr()
            self.expect(";")

    def update(self):
        name = self.ident()
        if not self.known(name):
            self.error(f"undeclared {name!r}")
        if self.accept("++") or self.accept("--"):
            return
        if self.tok[1] in ("+=", "-="):
            self.i += 1
            self.expr()
            return
        self.error("expected loop update")

    # -- expressions --------------------------------------------------------
    BINARY = [("||",), ("&&",), ("|",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%")]

    def expr(self):
        self.binary(0)
        if self.accept("?"):
            self.expr()
            self.expect(":")
            self.expr()

    def binary(self, level):
        if level == len(self.BINARY):
            self.unary()
            return
        self.binary(level + 1)
        while self.tok[0] == "op" and self.tok[1] in self.BINARY[level]:
            self.i += 1
            self.binary(level + 1)

    def unary(self):
        if self.tok[1] in ("-", "+", "!"):
            self.i += 1
            self.unary()
            return
        if self.tok[1] == "(" and self.is_type(self.peek()) and self.peek(2)[1] == ")":
            vec = self.peek()[1] in VECTORS
            self.i += 3
            if vec:
                self.expect("(")
                self.args()
            else:
                self.unary()
            return
        self.postfix()

    def args(self):
        if self.accept(")"):
            return
        self.expr()
        while self.accept(","):
            self.expr()
        self.expect(")")

    def postfix(self):
        t = self.tok
        if t[0] == "num":
            self.i += 1
        elif t[0] == "id":
            name = t[1]
            if self.peek()[1] == "(":
                if name not in FUNCS:
                    self.error(f"unknown function {name!r}")
                self.i += 2
                self.args()
            elif not self.known(name):
                self.error(f"undeclared identifier {name!r}")
            else:
                self.ident()
        elif self.accept("("):
            self.expr()
            self.expect(")")
        else:
            self.error("expected expression")
        while True:
            if self.accept("["):
                self.expr()
                self.expect("]")
            elif self.accept("."):
                comp = self.ident()
                if comp not in ("x", "y", "z", "w"):
                    self.error(f"bad vector component {comp!r}")
            else:
                break


def check_opencl(text: str) -> list[str]:
    """Parse emitted OpenCL C; return the kernel names or raise CLSyntaxError."""
    c = _Checker(text)
    c.unit()
    return c.kernels
