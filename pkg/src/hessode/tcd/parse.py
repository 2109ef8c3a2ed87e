"""Recursive-descent parser producing AST + diagnostics.

Errors never raise past :func:`parse`; a failed top-level form yields a
PARSE diagnostic and the parser resynchronizes at the next plausible
binding (a line-initial name followed by '=', ':' or an index spec and
'=').  A nesting-depth guard keeps pathological inputs from recursing
without bound.
"""

from __future__ import annotations

from . import ast as A
from .diagnostics import Diagnostic, Severity
from .tokens import LexError, TokenKind, tokenize

_MAX_DEPTH = 200


class _ParseAbort(Exception):
    pass


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0
        self.diags = []
        self.depth = 0

    # --- token plumbing ---------------------------------------------------

    def peek(self, offset=0):
        k = self.pos + offset
        return self.toks[k] if k < len(self.toks) else None

    def at(self, *kinds):
        t = self.peek()
        return t is not None and t.kind in kinds

    def take(self):
        t = self.peek()
        if t is not None:
            self.pos += 1
        return t

    def expect(self, kind, what):
        t = self.peek()
        if t is None or t.kind is not kind:
            self.fail(f"expected {what}", t)
        return self.take()

    def fail(self, message, tok=None):
        tok = tok if tok is not None else (self.peek() or self.last())
        if tok is None:
            span = (1, 1, 1)
        else:
            span = tok.span
        self.diags.append(Diagnostic(Severity.ERROR, "PARSE", message, *span))
        raise _ParseAbort()

    def last(self):
        return self.toks[-1] if self.toks else None

    def guard(self):
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            self.fail("expression nesting too deep")

    # --- top level ----------------------------------------------------------

    def parse_document(self):
        bindings = []
        while self.peek() is not None:
            mark = self.pos
            try:
                bindings.append(self.binding())
            except _ParseAbort:
                self.depth = 0
                self.resync(mark)
        return bindings

    def resync(self, failed_at):
        # Skip to the next line-initial NAME that looks like a binding head.
        self.pos = max(self.pos, failed_at + 1)
        while self.peek() is not None:
            t = self.peek()
            if t.kind is TokenKind.NAME and self.starts_line(self.pos):
                nxt = self.peek(1)
                if nxt is not None and nxt.kind in (TokenKind.ASSIGN, TokenKind.COLON):
                    return
                if nxt is not None and nxt.kind is TokenKind.LBRACKET:
                    j = self.pos + 1
                    depth = 0
                    while j < len(self.toks):
                        k = self.toks[j].kind
                        if k is TokenKind.LBRACKET:
                            depth += 1
                        elif k is TokenKind.RBRACKET:
                            depth -= 1
                            if depth == 0:
                                break
                        j += 1
                    if j + 1 < len(self.toks) and self.toks[j + 1].kind is TokenKind.ASSIGN:
                        return
            self.pos += 1

    def starts_line(self, k):
        if k == 0:
            return True
        return self.toks[k - 1].line < self.toks[k].line

    def binding(self):
        self.depth = 0
        head = self.expect(TokenKind.NAME, "a binding name")
        if self.at(TokenKind.COLON):
            self.take()
            sig = self.signature()
            return A.Binding(head.text, None, "signature", sig, head.span)
        spec = None
        if self.at(TokenKind.LBRACKET):
            spec = self.index_items()
        self.expect(TokenKind.ASSIGN, "'=' after the binding name")
        value = self.expr()
        return A.Binding(head.text, spec, "assign", value, head.span)

    def signature(self):
        lam = self.expect(TokenKind.LAMBDA, "'^' starting a signature")
        self.expect(TokenKind.LPAREN, "'(' after '^'")
        params = []
        if not self.at(TokenKind.RPAREN):
            params.append(self.param(allow_bound=False))
            while self.at(TokenKind.COMMA):
                self.take()
                params.append(self.param(allow_bound=False))
        self.expect(TokenKind.RPAREN, "')' closing the parameter list")
        self.expect(TokenKind.FATARROW, "'=>' in a signature")
        spec = self.index_items()
        return A.Signature(params, spec, lam.span)

    # --- parameters -----------------------------------------------------------

    def param(self, allow_bound=True):
        name = self.expect(TokenKind.NAME, "a parameter name")
        is_slot = False
        spec = None
        if self.at(TokenKind.LBRACE):
            self.take()
            self.expect(TokenKind.RBRACE, "'}' after '{' in a function slot")
            is_slot = True
        elif self.at(TokenKind.LBRACKET):
            spec = self.index_items()
        bound = None
        if self.at(TokenKind.ASSIGN):
            if not allow_bound:
                self.fail("signatures cannot bind parameter values")
            self.take()
            bound = self.expr()
        if spec is None and not is_slot and bound is None:
            self.fail("parameter needs an index spec '[...]', a function "
                      "slot '{}', or a bound value")
        return A.Param(name.text, spec, is_slot, bound, name.span)

    # --- expressions ------------------------------------------------------------

    def expr(self):
        self.guard()
        try:
            if self.at(TokenKind.LAMBDA):
                return self.lambda_expr()
            return self.arith()
        finally:
            self.depth -= 1

    def lambda_expr(self):
        lam = self.take()
        self.expect(TokenKind.LPAREN, "'(' after '^'")
        params = []
        if not self.at(TokenKind.RPAREN):
            params.append(self.param())
            while self.at(TokenKind.COMMA):
                self.take()
                params.append(self.param())
        self.expect(TokenKind.RPAREN, "')' closing the parameter list")
        self.expect(TokenKind.ARROW, "'->' before the lambda body")
        body = self.expr()
        return A.Lambda(params, body, lam.span)

    def arith(self):
        self.guard()
        try:
            left = self.term()
            while self.at(TokenKind.PLUS, TokenKind.MINUS):
                op = self.take()
                right = self.term()
                left = A.BinOp(op.text, left, right, op.span)
            return left
        finally:
            self.depth -= 1

    def term(self):
        left = self.unary()
        while self.at(TokenKind.STAR, TokenKind.SLASH):
            op = self.take()
            right = self.unary()
            left = A.BinOp(op.text, left, right, op.span)
        return left

    def unary(self):
        self.guard()
        try:
            if self.at(TokenKind.MINUS):
                op = self.take()
                return A.UnaryNeg(self.unary(), op.span)
            return self.postfix()
        finally:
            self.depth -= 1

    def postfix(self):
        node = self.atom()
        while True:
            if self.at(TokenKind.LPAREN):
                node = self.call(node)
            elif self.at(TokenKind.LBRACKET):
                tok = self.peek()
                items = self.index_items()
                node = A.Index(node, items, tok.span)
            else:
                return node

    def call(self, callee):
        lp = self.take()
        kwargs = []
        if not self.at(TokenKind.RPAREN):
            kwargs.append(self.kwarg())
            while self.at(TokenKind.COMMA):
                self.take()
                kwargs.append(self.kwarg())
        self.expect(TokenKind.RPAREN, "')' closing the call")
        return A.Apply(callee, kwargs, lp.span)

    def kwarg(self):
        name = self.expect(TokenKind.NAME, "a keyword argument name")
        is_slot = False
        spec = None
        if self.at(TokenKind.LBRACE):
            self.take()
            self.expect(TokenKind.RBRACE, "'}' in a function-slot argument")
            is_slot = True
        elif self.at(TokenKind.LBRACKET):
            spec = self.index_items()
        self.expect(TokenKind.ASSIGN, "'=' after the keyword argument name")
        value = self.expr()
        return A.Kwarg(name.text, spec, is_slot, value, name.span)

    def atom(self):
        self.guard()
        try:
            t = self.peek()
            if t is None:
                self.fail("unexpected end of input")
            if t.kind is TokenKind.LPAREN:
                self.take()
                inner = self.expr()
                self.expect(TokenKind.RPAREN, "')'")
                return inner
            if t.kind is TokenKind.LAMBDA:
                return self.lambda_expr()
            if t.kind is TokenKind.AMPNAME:
                return self.builtin()
            if t.kind is TokenKind.NUMBER:
                self.take()
                return A.Number(t.text, float(t.text), t.span)
            if t.kind is TokenKind.NAME:
                self.take()
                return A.NameRef(t.text, t.span)
            if t.kind is TokenKind.DERIV:
                # a bare 'd' in index context used as an ordinary name
                self.take()
                return A.NameRef(t.text, t.span)
            if t.kind is TokenKind.LBRACKET:
                return self.list_expr()
            self.fail(f"unexpected {t.text!r}")
        finally:
            self.depth -= 1

    def list_expr(self):
        lb = self.take()
        items = []
        if not self.at(TokenKind.RBRACKET):
            items.append(self.expr())
            while self.at(TokenKind.COMMA):
                self.take()
                items.append(self.expr())
        self.expect(TokenKind.RBRACKET, "']' closing the list")
        return A.ListExpr(items, lb.span)

    def builtin(self):
        amp = self.take()
        name = amp.text[1:]
        if name == "es":
            return self.einsum(amp)
        self.expect(TokenKind.LPAREN, f"'(' after &{name}")
        args = []
        if not self.at(TokenKind.RPAREN):
            args.append(self.expr())
            while self.at(TokenKind.COMMA):
                self.take()
                args.append(self.expr())
        self.expect(TokenKind.RPAREN, f"')' closing &{name}(...)")
        return A.Builtin(name, args, amp.span)

    def einsum(self, amp):
        self.expect(TokenKind.LPAREN, "'(' after &es")
        operands = [self.es_operand()]
        while self.at(TokenKind.SEMI):
            self.take()
            operands.append(self.es_operand())
        self.expect(TokenKind.ARROW, "'->' before the &es output indices")
        output = []
        if self.at(TokenKind.NAME):
            output.append(self.take().text)
            while self.at(TokenKind.COMMA):
                self.take()
                output.append(self.expect(TokenKind.NAME, "an output index name").text)
        self.expect(TokenKind.RPAREN, "')' closing &es(...)")
        return A.EinSum(operands, output, amp.span)

    def es_operand(self):
        expr = self.arith()
        at = self.expect(TokenKind.AT, "'@' naming the operand indices")
        names = [self.expect(TokenKind.NAME, "an index name").text]
        while (self.at(TokenKind.COMMA)
               and self.peek(1) is not None
               and self.peek(1).kind is TokenKind.NAME):
            self.take()
            names.append(self.take().text)
        return A.EsOperand(expr, names, at.span)

    # --- index lists ----------------------------------------------------------

    def index_items(self):
        self.guard()
        try:
            self.expect(TokenKind.LBRACKET, "'['")
            items = []
            if not self.at(TokenKind.RBRACKET):
                items.append(self.index_item())
                while self.at(TokenKind.COMMA):
                    self.take()
                    items.append(self.index_item())
            self.expect(TokenKind.RBRACKET, "']' closing the index list")
            return items
        finally:
            self.depth -= 1

    def index_item(self):
        t = self.peek()
        if t is None:
            self.fail("unterminated index list")
        if t.kind is TokenKind.BROADCAST:
            self.take()
            return A.BroadcastItem(t.span)
        if t.kind is TokenKind.DERIV and self.peek(1) is not None \
                and self.peek(1).kind is TokenKind.NAME:
            self.take()
            name_tok = self.take()
            ref = A.NameRef(name_tok.text, name_tok.span)
            spec = None
            if self.at(TokenKind.LBRACKET):
                spec = self.index_items()
            return A.DerivItem(ref, spec, t.span)
        lo = None
        if not self.at(TokenKind.COLON):
            lo = self.arith()
        if self.at(TokenKind.COLON):
            colon = self.take()
            hi = None
            if not self.at(TokenKind.COMMA, TokenKind.RBRACKET):
                hi = self.arith()
            return A.SliceItem(lo, hi, colon.span)
        if lo is None:
            self.fail("empty index item")
        return A.IntItem(lo, t.span)


def parse(tokens):
    """(bindings, diagnostics) from a token sequence."""
    p = _Parser(list(tokens))
    bindings = p.parse_document()
    return bindings, p.diags


def parse_text(text: str):
    """Tokenize + parse; lexer failures become a single diagnostic."""
    try:
        tokens = tokenize(text)
    except LexError as e:
        return [], [Diagnostic(Severity.ERROR, "LEX", e.message, e.line, e.col,
                               e.length)]
    return parse(tokens)
