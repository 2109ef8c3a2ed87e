"""AST nodes.  Spans are (line, col, length) of the introducing token."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

Span = Tuple[int, int, int]


# --- index items ---------------------------------------------------------------

@dataclass
class SliceItem:
    lo: Optional["Expr"]
    hi: Optional["Expr"]
    span: Span


@dataclass
class IntItem:
    expr: "Expr"
    span: Span


@dataclass
class DerivItem:
    name: "NameRef"
    index_spec: Optional[List["IndexItem"]]
    span: Span


@dataclass
class BroadcastItem:
    span: Span


IndexItem = Union[SliceItem, IntItem, DerivItem, BroadcastItem]


# --- expressions ---------------------------------------------------------------

@dataclass
class NameRef:
    name: str
    span: Span
    resolution: Optional[object] = field(default=None, compare=False)


@dataclass
class Number:
    text: str
    value: float
    span: Span


@dataclass
class ListExpr:
    items: List["Expr"]
    span: Span


@dataclass
class UnaryNeg:
    operand: "Expr"
    span: Span


@dataclass
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span


@dataclass
class Param:
    name: str
    index_spec: Optional[List[IndexItem]]   # None for function slots
    is_function_slot: bool
    bound_value: Optional["Expr"]
    span: Span


@dataclass
class Lambda:
    params: List[Param]
    body: "Expr"
    span: Span


@dataclass
class Kwarg:
    name: str
    index_spec: Optional[List[IndexItem]]
    is_function_slot: bool
    value: "Expr"
    span: Span


@dataclass
class Apply:
    callee: "Expr"
    kwargs: List[Kwarg]
    span: Span


@dataclass
class Index:
    base: "Expr"
    items: List[IndexItem]
    span: Span


@dataclass
class EsOperand:
    expr: "Expr"
    names: List[str]
    span: Span


@dataclass
class EinSum:
    operands: List[EsOperand]
    output: List[str]
    span: Span


@dataclass
class Builtin:
    name: str                     # without the '&'
    args: List["Expr"]
    span: Span


Expr = Union[NameRef, Number, ListExpr, UnaryNeg, BinOp, Lambda, Apply,
             Index, EinSum, Builtin]


# --- top level -------------------------------------------------------------------

@dataclass
class Signature:
    params: List[Param]
    result_spec: List[IndexItem]
    span: Span


@dataclass
class Binding:
    name: str
    index_spec: Optional[List[IndexItem]]
    kind: str                     # "assign" | "signature"
    value: Union[Expr, Signature]
    span: Span
