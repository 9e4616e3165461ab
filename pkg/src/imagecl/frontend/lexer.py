"""Tokenizer for ImageCL source.

``#pragma imcl`` lines become a single ``pragma`` token whose ``value`` is
the token list of the directive body. Any other preprocessor line is
rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from imagecl.errors import LexError

PUNCT = (
    "<<=", ">>=",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "<=", ">=", "==", "!=", "&&", "||",
    "<<", ">>", "->",
    "<", ">", "=", "+", "-", "*", "/", "%", "!", "(", ")", "[", "]", "{", "}",
    ";", ",", "?", ":", "&", "|", "^", "~", ".",
)

_NUMBER = re.compile(
    r"""
    (?P<float>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?[fF]?
             |\d+[eE][+-]?\d+[fF]?
             |\d+[fF](?![\w]))
    |(?P<int>0[xX][0-9a-fA-F]+[uU]?|\d+[uU]?)
    """,
    re.VERBOSE,
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, float, string, punct, pragma
    text: str
    line: int
    col: int
    value: object = field(default=None, compare=False)

    def __repr__(self):
        return f"{self.kind}({self.text})@{self.line}:{self.col}"


def tokenize(source: str) -> list[Token]:
    """Split ImageCL source into tokens with 1-based line/column positions."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    at_line_start = True

    def advance(k):
        nonlocal i, line, col
        for ch in source[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = source[i]
        if ch == "\n":
            advance(1)
            at_line_start = True
            continue
        if ch in " \t\r\f\v":
            advance(1)
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            advance((n if end < 0 else end) - i)
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError("unterminated comment", line, col)
            advance(end + 2 - i)
            continue
        if ch == "#":
            if not at_line_start:
                raise LexError("'#' is only allowed at the start of a line", line, col)
            end = source.find("\n", i)
            end = n if end < 0 else end
            text = source[i:end]
            m = re.match(r"#\s*pragma\s+imcl\b(.*)$", text)
            if not m:
                raise LexError(
                    f"unsupported preprocessor directive: {text.strip()!r}", line, col
                )
            body_col = col + m.start(1)
            try:
                sub = tokenize(m.group(1))
            except LexError as e:
                raise LexError(e.message, line, body_col + (e.col or 1) - 1) from None
            sub = [Token(t.kind, t.text, line, body_col + t.col - 1, t.value) for t in sub]
            tokens.append(Token("pragma", text.strip(), line, col, sub))
            advance(end - i)
            continue
        at_line_start = False
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            if m is None or (m.end() < n and (source[m.end()].isalnum() or source[m.end()] == "_")):
                raise LexError(f"malformed number near {source[i:i + 12]!r}", line, col)
            text = m.group(0)
            if m.group("float") is not None:
                tokens.append(Token("float", text, line, col, float(text.rstrip("fF"))))
            else:
                digits = text.rstrip("uU")
                value = int(digits, 16) if digits[:2] in ("0x", "0X") else int(digits)
                tokens.append(Token("int", text, line, col, value))
            advance(len(text))
            continue
        if ch.isalpha() or ch == "_":
            m = _IDENT.match(source, i)
            tokens.append(Token("ident", m.group(0), line, col))
            advance(len(m.group(0)))
            continue
        if ch in "\"'":
            j = i + 1
            while j < n and source[j] != ch:
                if source[j] == "\n":
                    break
                j += 2 if source[j] == "\\" else 1
            if j >= n or source[j] != ch:
                raise LexError("unterminated literal", line, col)
            tokens.append(Token("string", source[i:j + 1], line, col))
            advance(j + 1 - i)
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                advance(len(p))
                break
        else:
            raise LexError(f"illegal character {ch!r}", line, col)
    return tokens
