"""Name resolution and index-count checking.

Resolution rules: inside a bound-parameter value, names look up earlier
parameters of the same list (latest first); elsewhere the tightest
enclosing lambda's parameters are searched right-to-left, then outer
lambdas, then document-level bindings; anything left is global context
(reported with a GLOBAL_NAME warning).  A bound value naming a *later*
parameter of its own list is an error, as are duplicate slot names,
index-count mismatches wherever a count is determinable, '@' arity
mismatches on &es operands, and broadcast markers inside derivative
index lists.
"""

from __future__ import annotations

from . import ast as A
from .diagnostics import Diagnostic, Severity
from .parse import parse_text

__all__ = ["check", "check_document", "normalize"]

# Result index counts of the builtins (None = depends on arguments).
_BUILTIN_COUNTS = {
    "zeros": 1,
    "onehot": 1,
    "eigvals": 1,
    "e_vec": 2,
}


# --- AST normalization -----------------------------------------------------------

def normalize(node):
    """Identify zero-parameter lambdas with their bodies, recursively."""
    if isinstance(node, A.Lambda):
        params = [normalize(p) for p in node.params]
        body = normalize(node.body)
        if not params:
            return body
        return A.Lambda(params, body, node.span)
    if isinstance(node, A.Param):
        return A.Param(node.name, node.index_spec, node.is_function_slot,
                       normalize(node.bound_value) if node.bound_value else None,
                       node.span)
    if isinstance(node, A.UnaryNeg):
        return A.UnaryNeg(normalize(node.operand), node.span)
    if isinstance(node, A.BinOp):
        return A.BinOp(node.op, normalize(node.left), normalize(node.right), node.span)
    if isinstance(node, A.Apply):
        return A.Apply(normalize(node.callee),
                       [A.Kwarg(k.name, k.index_spec, k.is_function_slot,
                                normalize(k.value), k.span) for k in node.kwargs],
                       node.span)
    if isinstance(node, A.Index):
        return A.Index(normalize(node.base), [_norm_item(i) for i in node.items],
                       node.span)
    if isinstance(node, A.EinSum):
        return A.EinSum([A.EsOperand(normalize(o.expr), o.names, o.span)
                         for o in node.operands], node.output, node.span)
    if isinstance(node, A.Builtin):
        return A.Builtin(node.name, [normalize(a) for a in node.args], node.span)
    if isinstance(node, A.ListExpr):
        return A.ListExpr([normalize(i) for i in node.items], node.span)
    return node


def _norm_item(item):
    if isinstance(item, A.SliceItem):
        return A.SliceItem(normalize(item.lo) if item.lo else None,
                           normalize(item.hi) if item.hi else None, item.span)
    if isinstance(item, A.IntItem):
        return A.IntItem(normalize(item.expr), item.span)
    return item


# --- checker ---------------------------------------------------------------------

def _spec_count(spec):
    """Axis count declared by an index spec; None when not a pure shape."""
    if spec is None:
        return None
    count = 0
    for item in spec:
        if isinstance(item, A.SliceItem):
            count += 1
        else:
            return None
    return count


class _Checker:
    def __init__(self):
        self.diags = []
        # document-level name -> declared/derived result axis count (or None)
        self.globals = {}

    def error(self, code, message, span):
        self.diags.append(Diagnostic(Severity.ERROR, code, message, *span))

    def warn(self, code, message, span):
        self.diags.append(Diagnostic(Severity.WARNING, code, message, *span))

    # resolution -------------------------------------------------------------

    def resolve(self, ref: A.NameRef, scopes, bound_upto=None):
        """Tag ref and return the axis count of what it names (or None)."""
        name = ref.name
        if scopes:
            *outer, innermost = scopes
            if bound_upto is not None:
                for param in reversed(innermost[:bound_upto]):
                    if param.name == name:
                        ref.resolution = ("param", param.name)
                        return self.param_count(param)
                for later in innermost[bound_upto:]:
                    if later.name == name:
                        ref.resolution = ("forward", later.name)
                        self.error(
                            "FORWARD_REF",
                            f"'{name}' is bound later in the same parameter list",
                            ref.span)
                        return self.param_count(later)
                search = outer
            else:
                search = scopes
            for scope in reversed(search):
                for param in reversed(scope):
                    if param.name == name:
                        ref.resolution = ("param", param.name)
                        return self.param_count(param)
        if name in self.globals:
            ref.resolution = ("global", name)
            return self.globals[name]
        ref.resolution = ("global", None)
        self.warn("GLOBAL_NAME", f"'{name}' resolves to global context", ref.span)
        return None

    @staticmethod
    def param_count(param: A.Param):
        if param.is_function_slot:
            return None
        return _spec_count(param.index_spec)

    # expression walk ----------------------------------------------------------

    def count_of(self, node, scopes, bound_upto=None):
        """Walk ``node`` emitting diagnostics; return its axis count or None."""
        if isinstance(node, A.Number):
            return 0
        if isinstance(node, A.NameRef):
            return self.resolve(node, scopes, bound_upto)
        if isinstance(node, A.ListExpr):
            for item in node.items:
                self.count_of(item, scopes, bound_upto)
            return None
        if isinstance(node, A.UnaryNeg):
            return self.count_of(node.operand, scopes, bound_upto)
        if isinstance(node, A.BinOp):
            lc = self.count_of(node.left, scopes, bound_upto)
            rc = self.count_of(node.right, scopes, bound_upto)
            if lc is not None and rc is not None:
                if lc == rc:
                    return lc
                if 0 in (lc, rc):          # scalar broadcasting
                    return max(lc, rc)
            return None
        if isinstance(node, A.Lambda):
            self.check_lambda(node, scopes)
            return None
        if isinstance(node, A.Apply):
            return self.check_apply(node, scopes, bound_upto)
        if isinstance(node, A.Index):
            return self.check_index(node, scopes, bound_upto)
        if isinstance(node, A.EinSum):
            for op in node.operands:
                c = self.count_of(op.expr, scopes, bound_upto)
                if c is not None and c != len(op.names):
                    self.error(
                        "ES_ARITY",
                        f"&es operand carries {c} index(es) but names "
                        f"{len(op.names)}", op.span)
            return len(node.output)
        if isinstance(node, A.Builtin):
            counts = [self.count_of(a, scopes, bound_upto) for a in node.args]
            if node.name in _BUILTIN_COUNTS:
                return _BUILTIN_COUNTS[node.name]
            if node.name == "pow":
                return counts[0] if counts else None
            if node.name == "reshape":
                return max(0, len(node.args) - 1)
            if node.name == "concat":
                return counts[1] if len(counts) > 1 else None
            return None
        return None

    def check_lambda(self, lam: A.Lambda, scopes):
        seen = set()
        for param in lam.params:
            if param.name in seen:
                self.error("DUP_PARAM",
                           f"duplicate parameter '{param.name}'", param.span)
            seen.add(param.name)
        inner = list(lam.params)
        for k, param in enumerate(lam.params):
            if param.bound_value is not None:
                self.count_of(param.bound_value, scopes + [inner], bound_upto=k)
        return self.count_of(lam.body, scopes + [inner])

    def check_apply(self, node: A.Apply, scopes, bound_upto):
        result = self.count_of(node.callee, scopes, bound_upto)
        for kw in node.kwargs:
            self.count_of(kw.value, scopes, bound_upto)
        return result

    def check_index(self, node: A.Index, scopes, bound_upto):
        base_count = self.count_of(node.base, scopes, bound_upto)
        consumed = 0
        produced = 0
        for item in node.items:
            if isinstance(item, A.SliceItem):
                consumed += 1
                produced += 1
                for bound in (item.lo, item.hi):
                    if bound is not None:
                        self.count_of(bound, scopes, bound_upto)
            elif isinstance(item, A.IntItem):
                consumed += 1
                self.count_of(item.expr, scopes, bound_upto)
            elif isinstance(item, A.BroadcastItem):
                produced += 1
            elif isinstance(item, A.DerivItem):
                produced += self.check_deriv(item, node.base, scopes, bound_upto)
        if base_count is not None and consumed != base_count:
            self.error(
                "INDEX_COUNT",
                f"index list consumes {consumed} axis(es) but the quantity "
                f"carries {base_count}", node.span)
            return None
        if base_count is None:
            return None
        return produced

    def check_deriv(self, item: A.DerivItem, base, scopes, bound_upto):
        """Resolve the derivative name and return its spliced axis count."""
        if item.index_spec is not None:
            for sub in item.index_spec:
                if isinstance(sub, A.BroadcastItem):
                    self.error("BROADCAST_IN_DERIV",
                               "broadcast '+' not permitted in a derivative "
                               "index list", sub.span)
        # Derivatives with respect to a keyword slot of the applied callee
        # resolve to that slot; otherwise lexically.
        kw = self._kwarg_slot(base, item.name.name)
        if kw is not None:
            item.name.resolution = ("slot", kw.name)
            declared = _spec_count(kw.index_spec)
        else:
            declared = self.resolve(item.name, scopes, bound_upto)
        if item.index_spec is not None:
            own = _spec_count(item.index_spec)
            if own is not None:
                return own
        return declared if declared is not None else 0

    @staticmethod
    def _kwarg_slot(base, name):
        # unwrap chained indexing to find the Apply whose kwargs may bind name
        node = base
        while isinstance(node, A.Index):
            node = node.base
        if isinstance(node, A.Apply):
            for kw in node.kwargs:
                if kw.name == name:
                    return kw
        return None

    # top level ------------------------------------------------------------------

    def check_binding(self, binding: A.Binding):
        if binding.kind == "signature":
            sig: A.Signature = binding.value
            seen = set()
            for param in sig.params:
                if param.name in seen:
                    self.error("DUP_PARAM",
                               f"duplicate parameter '{param.name}'", param.span)
                seen.add(param.name)
            self.globals[binding.name] = _spec_count(sig.result_spec)
            return
        value = normalize(binding.value)
        if isinstance(value, A.Lambda):
            derived = self.check_lambda(value, [])
        else:
            derived = self.count_of(value, [])
        declared = _spec_count(binding.index_spec)
        self.globals[binding.name] = declared if declared is not None else derived


def check(bindings) -> list:
    """Diagnostics for a parsed document (order: as encountered)."""
    checker = _Checker()
    for binding in bindings:
        checker.check_binding(binding)
    return checker.diags


# --- whole documents ---------------------------------------------------------------

_FENCE = "```"
_VERB_OPEN = "\\begin{verbatim}"
_VERB_CLOSE = "\\end{verbatim}"


def _fenced_blocks(text: str):
    """(line_offset, block_text) pairs for fenced regions of ``text``."""
    blocks = []
    lines = text.splitlines()
    open_at = None
    closer = None
    for k, line in enumerate(lines):
        stripped = line.strip()
        if open_at is None:
            if stripped == _FENCE or stripped.startswith(_FENCE):
                open_at, closer = k, _FENCE
            elif stripped == _VERB_OPEN:
                open_at, closer = k, _VERB_CLOSE
        else:
            if (closer == _FENCE and stripped == _FENCE) or stripped == closer:
                blocks.append((open_at + 1, "\n".join(lines[open_at + 1:k])))
                open_at = None
                closer = None
    if open_at is not None:
        blocks.append((open_at + 1, "\n".join(lines[open_at + 1:])))
    return blocks


def check_document(text: str, mode: str = "whole") -> list:
    """Parse + check a document; fenced mode extracts ``` / verbatim blocks."""
    if mode not in ("whole", "fenced"):
        raise ValueError(f"mode must be 'whole' or 'fenced', got {mode!r}")
    if mode == "whole":
        bindings, diags = parse_text(text)
        return diags + check(bindings)
    out = []
    checker = _Checker()      # document-level names carry across blocks
    for offset, block in _fenced_blocks(text):
        bindings, diags = parse_text(block)
        seen = len(checker.diags)
        for binding in bindings:
            checker.check_binding(binding)
        for d in diags + checker.diags[seen:]:
            out.append(d.shifted(offset))
    return out
