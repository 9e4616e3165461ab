"""Lexing, parsing and typechecking of ImageCL source."""

from __future__ import annotations

from pathlib import Path

from imagecl.frontend.lexer import Token, tokenize
from imagecl.frontend.nodes import KernelAst
from imagecl.frontend.parser import parse
from imagecl.frontend.printer import pretty
from imagecl.frontend.typecheck import typecheck


def compile_source(source: str) -> KernelAst:
    """tokenize -> parse -> typecheck."""
    return typecheck(parse(tokenize(source)))


def load(path: str | Path) -> KernelAst:
    return compile_source(Path(path).read_text(encoding="utf-8"))


__all__ = ["Token", "KernelAst", "tokenize", "parse", "typecheck", "pretty", "compile_source", "load"]
