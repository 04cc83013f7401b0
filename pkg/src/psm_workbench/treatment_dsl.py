"""Boolean expression DSL for bespoke treatment definitions.

Replaces free-form SQL with a closed grammar over already-ingested columns:
comparisons of columns against literals (or other columns) combined with
NOT / AND / OR. Offsets in error messages are 1-based character positions.

Grammar (canonical form, LL(1)):

    expr       := or_expr
    or_expr    := and_expr ( "OR" and_expr )*
    and_expr   := unary ( "AND" unary )*
    unary      := "NOT" unary | primary
    primary    := "(" expr ")" | comparison
    comparison := operand relop operand
    operand    := column | number | string
    relop      := "==" | "!=" | "<=" | ">=" | "<" | ">"

Operator precedence is therefore NOT > comparison > AND > OR, and AND/OR
associate to the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .dataset import AnalysisDataset, DatasetSchema
from .errors import DegenerateTreatmentError, DslBindError, DslLexError, DslSyntaxError

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRef:
    name: str


@dataclass(frozen=True)
class NumberLit:
    value: float


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class Comparison:
    op: str  # ==, !=, <, <=, >, >=
    left: "Operand"
    right: "Operand"


@dataclass(frozen=True)
class NotExpr:
    operand: "TreatmentExpr"


@dataclass(frozen=True)
class AndExpr:
    left: "TreatmentExpr"
    right: "TreatmentExpr"


@dataclass(frozen=True)
class OrExpr:
    left: "TreatmentExpr"
    right: "TreatmentExpr"


Operand = Union[ColumnRef, NumberLit, StringLit]
TreatmentExpr = Union[Comparison, NotExpr, AndExpr, OrExpr]

_COMPARISON_OPS = ("==", "!=", "<=", ">=", "<", ">")


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------

_KEYWORDS = {"AND", "OR", "NOT"}


@dataclass(frozen=True)
class _Token:
    kind: str  # AND OR NOT LPAREN RPAREN OP IDENT NUMBER STRING EOF
    text: str
    offset: int  # 1-based position of the first character


def _lex(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        start = i + 1  # 1-based
        if ch == "(":
            tokens.append(_Token("LPAREN", "(", start))
            i += 1
        elif ch == ")":
            tokens.append(_Token("RPAREN", ")", start))
            i += 1
        elif source.startswith(("==", "!=", "<=", ">="), i):
            tokens.append(_Token("OP", source[i:i + 2], start))
            i += 2
        elif ch in "<>":
            tokens.append(_Token("OP", ch, start))
            i += 1
        elif ch == "'":
            j = source.find("'", i + 1)
            if j < 0:
                raise DslLexError("unterminated string literal", offset=start)
            tokens.append(_Token("STRING", source[i + 1:j], start))
            i = j + 1
        elif ch.isdigit() or (ch == "-" and i + 1 < n and (source[i + 1].isdigit() or source[i + 1] == ".")) \
                or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k >= n or not source[k].isdigit():
                    raise DslLexError("malformed exponent", offset=start)
                j = k
                while j < n and source[j].isdigit():
                    j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise DslLexError(f"malformed number '{text}'", offset=start) from None
            tokens.append(_Token("NUMBER", text, start))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            if text in _KEYWORDS:
                tokens.append(_Token(text, text, start))
            else:
                tokens.append(_Token("IDENT", text, start))
            i = j
        else:
            raise DslLexError(f"illegal character {ch!r}", offset=start)
    tokens.append(_Token("EOF", "end of input", n + 1))
    return tokens


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: tuple[str, ...]) -> "DslSyntaxError":
        tok = self.peek()
        found = tok.text if tok.kind != "EOF" else "end of input"
        return DslSyntaxError(offset=tok.offset, expected=expected, found=found)

    def parse(self) -> TreatmentExpr:
        node = self.or_expr()
        if self.peek().kind != "EOF":
            raise self.fail(("AND", "OR", "end of input"))
        return node

    def or_expr(self) -> TreatmentExpr:
        node = self.and_expr()
        while self.peek().kind == "OR":
            self.advance()
            node = OrExpr(node, self.and_expr())
        return node

    def and_expr(self) -> TreatmentExpr:
        node = self.unary()
        while self.peek().kind == "AND":
            self.advance()
            node = AndExpr(node, self.unary())
        return node

    def unary(self) -> TreatmentExpr:
        if self.peek().kind == "NOT":
            self.advance()
            return NotExpr(self.unary())
        return self.primary()

    def primary(self) -> TreatmentExpr:
        if self.peek().kind == "LPAREN":
            self.advance()
            node = self.or_expr()
            if self.peek().kind != "RPAREN":
                raise self.fail((")",))
            self.advance()
            return node
        return self.comparison()

    def comparison(self) -> Comparison:
        left = self.operand()
        tok = self.peek()
        if tok.kind != "OP":
            raise self.fail(_COMPARISON_OPS)
        self.advance()
        right = self.operand()
        return Comparison(tok.text, left, right)

    def operand(self) -> Operand:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.advance()
            return ColumnRef(tok.text)
        if tok.kind == "NUMBER":
            self.advance()
            return NumberLit(float(tok.text))
        if tok.kind == "STRING":
            self.advance()
            return StringLit(tok.text)
        raise self.fail(("column", "number", "string"))


def parse(source: str) -> TreatmentExpr:
    """Parse a treatment expression into its AST.

    Raises :class:`DslLexError` or :class:`DslSyntaxError` with a 1-based
    character offset on malformed input.
    """
    return _Parser(_lex(source)).parse()


# ---------------------------------------------------------------------------
# canonical printer
# ---------------------------------------------------------------------------

_PREC = {OrExpr: 1, AndExpr: 2, NotExpr: 3, Comparison: 4}


def to_source(expr: TreatmentExpr) -> str:
    """Canonical text form; ``parse(to_source(e)) == e`` for every AST."""
    return _print(expr, parent_prec=0, right_side=False)


def _print(node, parent_prec: int, right_side: bool) -> str:
    prec = _PREC[type(node)]
    if isinstance(node, Comparison):
        text = f"{_print_operand(node.left)} {node.op} {_print_operand(node.right)}"
    elif isinstance(node, NotExpr):
        text = f"NOT {_print(node.operand, prec, False)}"
    elif isinstance(node, AndExpr):
        text = f"{_print(node.left, prec, False)} AND {_print(node.right, prec, True)}"
    else:
        text = f"{_print(node.left, prec, False)} OR {_print(node.right, prec, True)}"
    # left-associative grammar: a right child at equal precedence needs parens
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def _print_operand(op: Operand) -> str:
    if isinstance(op, ColumnRef):
        return op.name
    if isinstance(op, NumberLit):
        return repr(op.value)
    return f"'{op.value}'"


# ---------------------------------------------------------------------------
# binding and evaluation
# ---------------------------------------------------------------------------

def _operand_type(op: Operand, schema: DatasetSchema) -> str:
    if isinstance(op, NumberLit):
        return "num"
    if isinstance(op, StringLit):
        return "str"
    name = op.name
    for role, col in (("unit id", schema.unit_id), ("outcome", schema.outcome),
                      ("treatment", schema.treatment), ("date", schema.date)):
        if col is not None and name == col:
            raise DslBindError(f"column '{name}' is the {role} column and not usable "
                               "in treatment expressions")
    for spec in schema.covariates:
        if spec.name == name:
            return "cat" if spec.kind == "categorical" else "num"
    raise DslBindError(f"unknown column '{name}'")


def referenced_columns(expr: TreatmentExpr | Operand) -> set[str]:
    """Every column name the expression reads."""
    if isinstance(expr, ColumnRef):
        return {expr.name}
    if isinstance(expr, (NumberLit, StringLit)):
        return set()
    if isinstance(expr, Comparison):
        return referenced_columns(expr.left) | referenced_columns(expr.right)
    if isinstance(expr, NotExpr):
        return referenced_columns(expr.operand)
    return referenced_columns(expr.left) | referenced_columns(expr.right)


def bind(expr: TreatmentExpr, schema: DatasetSchema) -> None:
    """Check every column reference and comparison against the schema.

    Numeric columns compare against numbers (any operator); categorical
    columns compare against strings or other categoricals with == and !=
    only. Raises :class:`DslBindError` on any violation.
    """
    if isinstance(expr, Comparison):
        lt = _operand_type(expr.left, schema)
        rt = _operand_type(expr.right, schema)
        numeric = {"num"}
        stringy = {"str", "cat"}
        if {lt, rt} <= numeric:
            return
        if {lt, rt} <= stringy:
            if expr.op not in ("==", "!="):
                raise DslBindError(
                    f"operator '{expr.op}' not defined for categorical/string operands")
            return
        raise DslBindError(f"type mismatch: cannot compare {lt} with {rt}")
    elif isinstance(expr, NotExpr):
        bind(expr.operand, schema)
    elif isinstance(expr, (AndExpr, OrExpr)):
        bind(expr.left, schema)
        bind(expr.right, schema)
    else:
        raise DslBindError(f"expression of type {type(expr).__name__} is not boolean")


@dataclass(frozen=True)
class TreatmentAssignment:
    """Row-aligned binary treatment derived from an expression."""

    unit_ids: tuple[str, ...]
    values: np.ndarray  # float64 of 0.0 / 1.0
    n_treated: int
    n_control: int

    def __post_init__(self):
        self.values.setflags(write=False)

    def as_mapping(self) -> dict[str, int]:
        return {uid: int(v) for uid, v in zip(self.unit_ids, self.values)}


def _eval_operand(op: Operand, ds: AnalysisDataset):
    if isinstance(op, NumberLit):
        return op.value
    if isinstance(op, StringLit):
        return op.value
    return ds.columns[op.name]


def _eval(expr: TreatmentExpr, ds: AnalysisDataset) -> np.ndarray:
    if isinstance(expr, Comparison):
        left = _eval_operand(expr.left, ds)
        right = _eval_operand(expr.right, ds)
        if expr.op == "==":
            out = left == right
        elif expr.op == "!=":
            out = left != right
        elif expr.op == "<":
            out = left < right
        elif expr.op == "<=":
            out = left <= right
        elif expr.op == ">":
            out = left > right
        else:
            out = left >= right
        if np.isscalar(out) or getattr(out, "shape", None) == ():
            return np.full(ds.n_units, bool(out))
        return np.asarray(out, dtype=bool)
    if isinstance(expr, NotExpr):
        return ~_eval(expr.operand, ds)
    if isinstance(expr, AndExpr):
        return _eval(expr.left, ds) & _eval(expr.right, ds)
    return _eval(expr.left, ds) | _eval(expr.right, ds)


def assign(expr: TreatmentExpr, ds: AnalysisDataset) -> TreatmentAssignment:
    """Evaluate the expression row-wise: true maps to treatment 1.

    Raises :class:`DegenerateTreatmentError` when every unit lands on the
    same side, since a one-armed comparison has no counterfactual group.
    """
    bind(expr, ds.schema)
    mask = _eval(expr, ds)
    n_treated = int(mask.sum())
    n_control = int(ds.n_units - n_treated)
    if n_treated == 0 or n_control == 0:
        side = "treated" if n_control == 0 else "control"
        raise DegenerateTreatmentError(
            f"degenerate treatment: all {ds.n_units} units are {side}")
    return TreatmentAssignment(
        unit_ids=ds.unit_ids,
        values=mask.astype(np.float64),
        n_treated=n_treated,
        n_control=n_control,
    )
