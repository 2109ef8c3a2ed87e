"""Tensor-calculus dependency notation: tokenizer, parser, checker.

The notation describes multi-index quantities with explicit index counts
(``x[:, :]``), lambdas with named, optionally immediately-bound slots
(``^(a[], b[] = a[] * a[]) -> ...``), derivative indices (``[d y[:]]``),
and generalized Einstein summation (``&es(u[:] @ i; v[:] @ i ->)``).

The public surface is :func:`tokenize`, :func:`parse`, :func:`check`,
and :func:`check_document`; diagnostics carry source spans and stable
codes.  The grammar is kept alongside this package in ``grammar.peg``.
"""

from .tokens import DslToken, TokenKind, LexError, tokenize
from .parse import parse, parse_text
from .check import check, check_document
from .diagnostics import Diagnostic, Severity, format_line, to_json

__all__ = [
    "DslToken",
    "TokenKind",
    "LexError",
    "tokenize",
    "parse",
    "parse_text",
    "check",
    "check_document",
    "Diagnostic",
    "Severity",
    "format_line",
    "to_json",
]
