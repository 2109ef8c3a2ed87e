"""Tokenizer for the tensor-calculus dependency notation.

Comments start at '#' and run to end of line; they count as whitespace
and produce no tokens.  Concatenating token texts with the original
whitespace reproduces the input minus comments.  Input must be ASCII.

Two context rules live here rather than in the parser:

* a standalone name ``d`` inside square brackets lexes as DERIV (the
  parser re-reads it as a plain name when no name follows, which covers
  slice bounds like ``y[:d]``);
* a ``+`` whose immediate neighbors are index-list delimiters lexes as
  BROADCAST (``q[:, +, :]``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class TokenKind(Enum):
    NAME = "name"
    NUMBER = "number"
    LAMBDA = "^"
    ARROW = "->"
    FATARROW = "=>"
    ASSIGN = "="
    LBRACKET = "["
    RBRACKET = "]"
    LPAREN = "("
    RPAREN = ")"
    LBRACE = "{"
    RBRACE = "}"
    COLON = ":"
    COMMA = ","
    SEMI = ";"
    AT = "@"
    AMPNAME = "&name"
    DERIV = "d"
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    BROADCAST = "+bc"


@dataclass(frozen=True)
class DslToken:
    kind: TokenKind
    text: str
    line: int      # 1-based
    col: int       # 1-based

    @property
    def span(self):
        return (self.line, self.col, len(self.text))


class LexError(Exception):
    def __init__(self, message, line, col, length=1):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.length = length


_SINGLE = {
    "^": TokenKind.LAMBDA,
    "[": TokenKind.LBRACKET,
    "]": TokenKind.RBRACKET,
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
    "{": TokenKind.LBRACE,
    "}": TokenKind.RBRACE,
    ":": TokenKind.COLON,
    ",": TokenKind.COMMA,
    ";": TokenKind.SEMI,
    "@": TokenKind.AT,
    "+": TokenKind.PLUS,
    "*": TokenKind.STAR,
    "/": TokenKind.SLASH,
}


def _is_digit(ch):
    return "0" <= ch <= "9"


def _is_name_start(ch):
    return ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ch == "_"


def _is_name_char(ch):
    return _is_name_start(ch) or ("0" <= ch <= "9")


def tokenize(text: str):
    """Token list for ``text``; raises :class:`LexError` on bad input."""
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    bracket_depth = 0

    def advance(k):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ord(ch) > 127:
            raise LexError(f"non-ASCII character {ch!r}", line, col)
        if ch in " \t\r\n":
            advance(1)
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                advance(1)
            continue
        tl, tc = line, col
        if text.startswith("->", i):
            tokens.append(DslToken(TokenKind.ARROW, "->", tl, tc))
            advance(2)
            continue
        if text.startswith("=>", i):
            tokens.append(DslToken(TokenKind.FATARROW, "=>", tl, tc))
            advance(2)
            continue
        if ch == "=":
            tokens.append(DslToken(TokenKind.ASSIGN, "=", tl, tc))
            advance(1)
            continue
        if ch == "-":
            tokens.append(DslToken(TokenKind.MINUS, "-", tl, tc))
            advance(1)
            continue
        if ch == "&":
            j = i + 1
            if j >= n or not _is_name_start(text[j]):
                raise LexError("'&' must introduce a builtin name", tl, tc)
            while j < n and _is_name_char(text[j]):
                j += 1
            word = text[i:j]
            tokens.append(DslToken(TokenKind.AMPNAME, word, tl, tc))
            advance(j - i)
            continue
        if _is_name_start(ch):
            j = i
            while j < n and _is_name_char(text[j]):
                j += 1
            word = text[i:j]
            if word == "d" and bracket_depth > 0:
                tokens.append(DslToken(TokenKind.DERIV, word, tl, tc))
            else:
                tokens.append(DslToken(TokenKind.NAME, word, tl, tc))
            advance(j - i)
            continue
        if _is_digit(ch) or (ch == "." and i + 1 < n and _is_digit(text[i + 1])):
            j = i
            while j < n and _is_digit(text[j]):
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and _is_digit(text[j]):
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and _is_digit(text[k]):
                    j = k
                    while j < n and _is_digit(text[j]):
                        j += 1
            word = text[i:j]
            tokens.append(DslToken(TokenKind.NUMBER, word, tl, tc))
            advance(j - i)
            continue
        if ch in _SINGLE:
            if ch == "[":
                bracket_depth += 1
            elif ch == "]":
                bracket_depth = max(0, bracket_depth - 1)
            tokens.append(DslToken(_SINGLE[ch], ch, tl, tc))
            advance(1)
            continue
        raise LexError(f"unexpected character {ch!r}", tl, tc)

    return _mark_broadcast(tokens)


def _mark_broadcast(tokens):
    """Rewrite PLUS tokens that sit alone between index-list delimiters."""
    out = list(tokens)
    for k, tok in enumerate(out):
        if tok.kind is not TokenKind.PLUS:
            continue
        prev_ok = k > 0 and out[k - 1].kind in (TokenKind.LBRACKET, TokenKind.COMMA)
        next_ok = k + 1 < len(out) and out[k + 1].kind in (TokenKind.COMMA,
                                                           TokenKind.RBRACKET)
        if prev_ok and next_ok:
            out[k] = DslToken(TokenKind.BROADCAST, tok.text, tok.line, tok.col)
    return out
