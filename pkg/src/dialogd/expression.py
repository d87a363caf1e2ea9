"""Safe filter/order mini-language: lexer, parser, binder, evaluator.

The grammar is a closed replacement for raw SQL clause bodies (no statement
separators, no comments, no subqueries — injection attempts fail to parse):

    expr    := or
    or      := and ("or" and)*
    and     := unary ("and" unary)*
    unary   := "not" unary | primary
    primary := "(" expr ")" | fieldref "is" ["not"] "null" | fieldref cmpop literal
    cmpop   := "=" | "<>" | "<" | "<=" | ">" | ">=" | "like"
    literal := integer | decimal | "'" chars "'" | "true" | "false" | datetime"'" iso8601 "'"

    order     := orderitem ("," orderitem)* | <empty>
    orderitem := fieldref ["asc" | "desc"]

Keywords are case-insensitive; field references are case-sensitive; embedded
quotes in string literals are doubled (''). Empty filter text means "match
everything". Full reference: docs/filter-grammar.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConversionError, ExprTypeError, LikeOnNonText, ParseError, UnknownField
from .model import DataType, Value, parse_datetime_text, value_to_string

__all__ = [
    "FilterExpr",
    "TrueLiteral",
    "Or",
    "And",
    "Not",
    "Compare",
    "IsNull",
    "OrderSpec",
    "OrderKey",
    "parse_filter",
    "parse_order",
    "render_filter",
    "render_order",
    "bind_filter",
    "bind_order",
    "BoundFilter",
    "BoundOrder",
]

COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=", "like")


# -- abstract syntax ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TrueLiteral:
    """Empty filter: matches every row."""


@dataclass(frozen=True, slots=True)
class Or:
    items: tuple["FilterExpr", ...]


@dataclass(frozen=True, slots=True)
class And:
    items: tuple["FilterExpr", ...]


@dataclass(frozen=True, slots=True)
class Not:
    child: "FilterExpr"


@dataclass(frozen=True, slots=True)
class Compare:
    field: str
    op: str  # one of COMPARE_OPS
    literal: Value


@dataclass(frozen=True, slots=True)
class IsNull:
    field: str
    negated: bool = False


FilterExpr = TrueLiteral | Or | And | Not | Compare | IsNull


@dataclass(frozen=True, slots=True)
class OrderKey:
    field: str
    ascending: bool = True


@dataclass(frozen=True, slots=True)
class OrderSpec:
    keys: tuple[OrderKey, ...] = ()


# -- lexer -------------------------------------------------------------------

_KEYWORDS = frozenset(
    ["and", "or", "not", "is", "null", "like", "true", "false", "asc", "desc", "datetime"]
)

_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")


@dataclass(frozen=True, slots=True)
class _Token:
    type: str  # ident keyword int real string op lparen rparen comma eof
    text: str
    offset: int  # 1-based position in the source text


def _tokenize(text: str) -> list[_Token]:
    """Eager tokenization of the whole input; any stray character (';', '-',
    '--', '/*', ...) fails here with its exact offset."""
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        start = i
        if ch in _IDENT_START:
            i += 1
            while i < n and text[i] in _IDENT_CONT:
                i += 1
            word = text[start:i]
            kind = "keyword" if word.lower() in _KEYWORDS else "ident"
            tokens.append(_Token(kind, word, start + 1))
            continue
        if ch in _DIGITS or (ch in "+-" and i + 1 < n and (text[i + 1] in _DIGITS or text[i + 1] == ".")) or (
            ch == "." and i + 1 < n and text[i + 1] in _DIGITS
        ):
            i += 1
            is_real = ch == "."
            while i < n and text[i] in _DIGITS:
                i += 1
            if i < n and text[i] == "." and not is_real:
                is_real = True
                i += 1
                while i < n and text[i] in _DIGITS:
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j] in _DIGITS:
                    is_real = True
                    i = j + 1
                    while i < n and text[i] in _DIGITS:
                        i += 1
            tokens.append(_Token("real" if is_real else "int", text[start:i], start + 1))
            continue
        if ch == "'":
            i += 1
            chars: list[str] = []
            while True:
                if i >= n:
                    raise ParseError("unterminated string literal", start + 1)
                if text[i] == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        chars.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                chars.append(text[i])
                i += 1
            tokens.append(_Token("string", "".join(chars), start + 1))
            continue
        if ch == "<":
            if i + 1 < n and text[i + 1] in ">=":
                tokens.append(_Token("op", text[i : i + 2], start + 1))
                i += 2
            else:
                tokens.append(_Token("op", "<", start + 1))
                i += 1
            continue
        if ch == ">":
            if i + 1 < n and text[i + 1] == "=":
                tokens.append(_Token("op", ">=", start + 1))
                i += 2
            else:
                tokens.append(_Token("op", ">", start + 1))
                i += 1
            continue
        if ch == "=":
            tokens.append(_Token("op", "=", start + 1))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", "(", start + 1))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ")", start + 1))
            i += 1
            continue
        if ch == ",":
            tokens.append(_Token("comma", ",", start + 1))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", start + 1)
    tokens.append(_Token("eof", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self._tokens = _tokenize(text)
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _advance(self) -> _Token:
        tok = self._tokens[self._pos]
        if tok.type != "eof":
            self._pos += 1
        return tok

    def _at_keyword(self, word: str) -> bool:
        tok = self._peek()
        return tok.type == "keyword" and tok.text.lower() == word

    def _accept_keyword(self, word: str) -> bool:
        if self._at_keyword(word):
            self._advance()
            return True
        return False

    def _describe(self, tok: _Token) -> str:
        return "end of input" if tok.type == "eof" else repr(tok.text)

    def _fail(self, expected: str) -> None:
        tok = self._peek()
        raise ParseError(f"expected {expected}, found {self._describe(tok)}", tok.offset)

    # filter grammar --------------------------------------------------------

    def parse_filter(self) -> FilterExpr:
        if self._peek().type == "eof":
            return TrueLiteral()
        expr = self._or()
        if self._peek().type != "eof":
            self._fail("end of input")
        return expr

    def _or(self) -> FilterExpr:
        items = [self._and()]
        while self._accept_keyword("or"):
            items.append(self._and())
        return Or(tuple(items)) if len(items) > 1 else items[0]

    def _and(self) -> FilterExpr:
        items = [self._unary()]
        while self._accept_keyword("and"):
            items.append(self._unary())
        return And(tuple(items)) if len(items) > 1 else items[0]

    def _unary(self) -> FilterExpr:
        if self._accept_keyword("not"):
            return Not(self._unary())
        return self._primary()

    def _primary(self) -> FilterExpr:
        tok = self._peek()
        if tok.type == "lparen":
            self._advance()
            expr = self._or()
            if self._peek().type != "rparen":
                self._fail("')'")
            self._advance()
            return expr
        if tok.type != "ident":
            self._fail("field name or '('")
        field = self._advance().text
        if self._accept_keyword("is"):
            negated = self._accept_keyword("not")
            if not self._accept_keyword("null"):
                self._fail("'null'")
            return IsNull(field, negated)
        op_tok = self._peek()
        if op_tok.type == "op":
            op = self._advance().text
        elif self._at_keyword("like"):
            self._advance()
            op = "like"
        else:
            self._fail("comparison operator or 'is'")
        return Compare(field, op, self._literal())

    def _literal(self) -> Value:
        tok = self._peek()
        if tok.type == "int":
            self._advance()
            try:
                return Value.of_int(int(tok.text))
            except ValueError:
                raise ParseError("integer literal out of 64-bit range", tok.offset) from None
        if tok.type == "real":
            self._advance()
            try:
                return Value.of_real(float(tok.text))
            except (ValueError, OverflowError):
                raise ParseError("invalid numeric literal", tok.offset) from None
        if tok.type == "string":
            self._advance()
            return Value.of_varchar(tok.text)
        if self._at_keyword("true"):
            self._advance()
            return Value.of_bit(True)
        if self._at_keyword("false"):
            self._advance()
            return Value.of_bit(False)
        if self._at_keyword("datetime"):
            self._advance()
            str_tok = self._peek()
            if str_tok.type != "string":
                self._fail("quoted ISO-8601 text after 'datetime'")
            self._advance()
            try:
                return Value.of_datetime(parse_datetime_text(str_tok.text))
            except ConversionError:
                raise ParseError("invalid datetime literal", str_tok.offset) from None
        self._fail("literal")
        raise AssertionError("unreachable")

    # order grammar ---------------------------------------------------------

    def parse_order(self) -> OrderSpec:
        if self._peek().type == "eof":
            return OrderSpec()
        keys: list[OrderKey] = []
        seen: set[str] = set()
        while True:
            tok = self._peek()
            if tok.type != "ident":
                self._fail("field name")
            field = self._advance().text
            if field in seen:
                raise ParseError(f"duplicate order field {field!r}", tok.offset)
            seen.add(field)
            ascending = True
            if self._accept_keyword("desc"):
                ascending = False
            else:
                self._accept_keyword("asc")
            keys.append(OrderKey(field, ascending))
            if self._peek().type != "comma":
                break
            self._advance()
        if self._peek().type != "eof":
            self._fail("',' or end of input")
        return OrderSpec(tuple(keys))


def parse_filter(text: str) -> FilterExpr:
    """Parse filter text; empty or whitespace-only input matches all rows."""
    return _Parser(text).parse_filter()


def parse_order(text: str) -> OrderSpec:
    """Parse order text like "name asc, amount desc"; empty means unordered."""
    return _Parser(text).parse_order()


# -- rendering (pretty-print / parse round-trip) -----------------------------


def _render_literal(v: Value) -> str:
    if v.kind is DataType.VARCHAR:
        return "'" + v.payload.replace("'", "''") + "'"
    if v.kind is DataType.BIT:
        return "true" if v.payload else "false"
    if v.kind is DataType.DATETIME:
        return f"datetime'{value_to_string(v)}'"
    return value_to_string(v)


def render_filter(expr: FilterExpr) -> str:
    """Text form that parses back to a structurally equal tree."""
    if isinstance(expr, TrueLiteral):
        return ""
    if isinstance(expr, Or):
        parts = []
        for item in expr.items:
            text = render_filter(item)
            # parenthesize nested or-nodes so n-ary flattening on re-parse
            # cannot change the tree shape
            parts.append(f"({text})" if isinstance(item, Or) else text)
        return " or ".join(parts)
    if isinstance(expr, And):
        parts = []
        for item in expr.items:
            text = render_filter(item)
            parts.append(f"({text})" if isinstance(item, (Or, And)) else text)
        return " and ".join(parts)
    if isinstance(expr, Not):
        text = render_filter(expr.child)
        if isinstance(expr.child, (Or, And)):
            text = f"({text})"
        return f"not {text}"
    if isinstance(expr, IsNull):
        return f"{expr.field} is not null" if expr.negated else f"{expr.field} is null"
    return f"{expr.field} {expr.op} {_render_literal(expr.literal)}"


def render_order(spec: OrderSpec) -> str:
    return ", ".join(f"{k.field} {'asc' if k.ascending else 'desc'}" for k in spec.keys)


# -- binding and evaluation --------------------------------------------------

_NUMERIC = (DataType.INT, DataType.REAL)


def _resolve(field: str, by_name: dict[str, tuple[int, DataType]]) -> tuple[int, DataType]:
    try:
        return by_name[field]
    except KeyError:
        raise UnknownField(f"unknown field {field!r}") from None


def _like_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.DOTALL)


_EvalFn = Callable[[Sequence[Value]], bool | None]


def _compile(expr: FilterExpr, by_name: dict[str, tuple[int, DataType]]) -> _EvalFn:
    if isinstance(expr, TrueLiteral):
        return lambda row: True

    if isinstance(expr, Or):
        subs = [_compile(item, by_name) for item in expr.items]

        def eval_or(row, _subs=subs):
            unknown = False
            for fn in _subs:
                r = fn(row)
                if r is True:
                    return True
                if r is None:
                    unknown = True
            return None if unknown else False

        return eval_or

    if isinstance(expr, And):
        subs = [_compile(item, by_name) for item in expr.items]

        def eval_and(row, _subs=subs):
            unknown = False
            for fn in _subs:
                r = fn(row)
                if r is False:
                    return False
                if r is None:
                    unknown = True
            return None if unknown else True

        return eval_and

    if isinstance(expr, Not):
        child = _compile(expr.child, by_name)

        def eval_not(row, _child=child):
            r = _child(row)
            return None if r is None else not r

        return eval_not

    if isinstance(expr, IsNull):
        idx, _ = _resolve(expr.field, by_name)
        if expr.negated:
            return lambda row, _i=idx: row[_i].payload is not None
        return lambda row, _i=idx: row[_i].payload is None

    # Compare
    idx, field_type = _resolve(expr.field, by_name)
    lit = expr.literal
    if expr.op == "like":
        if field_type is not DataType.VARCHAR:
            raise LikeOnNonText(f"LIKE needs a varchar field, {expr.field!r} is {field_type.value}")
        if lit.kind is not DataType.VARCHAR:
            raise ExprTypeError(
                f"LIKE pattern for {expr.field!r} must be a string literal"
            )
        rx = _like_regex(lit.payload)

        def eval_like(row, _i=idx, _rx=rx):
            p = row[_i].payload
            if p is None:
                return None
            return _rx.fullmatch(p) is not None

        return eval_like

    if field_type is not lit.kind and not (field_type in _NUMERIC and lit.kind in _NUMERIC):
        raise ExprTypeError(
            f"cannot compare {field_type.value} field {expr.field!r} with "
            f"{lit.kind.value} literal using {expr.op!r}"
        )
    lp = lit.payload
    op = expr.op
    if op == "=":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p == _lp
    if op == "<>":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p != _lp
    if op == "<":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p < _lp
    if op == "<=":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p <= _lp
    if op == ">":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p > _lp
    if op == ">=":
        return lambda row, _i=idx, _lp=lp: None if (p := row[_i].payload) is None else p >= _lp
    raise AssertionError(f"unknown operator {op!r}")


def _field_index(fields) -> dict[str, tuple[int, DataType]]:
    return {f.name: (i, f.data_type) for i, f in enumerate(fields)}


class BoundFilter:
    """Filter compiled against one table's field list.

    Evaluation follows SQL three-valued logic internally; a row passes only
    when the root result is true (unknown collapses to "no match").
    """

    def __init__(self, expr: FilterExpr, fields):
        self.expr = expr
        self._fn = _compile(expr, _field_index(fields))

    def evaluate(self, row: Sequence[Value]) -> bool | None:
        """Raw three-valued result (None = unknown)."""
        return self._fn(row)

    def matches(self, row: Sequence[Value]) -> bool:
        return self._fn(row) is True


class BoundOrder:
    """Order spec resolved to column ordinals; sorts deterministically."""

    def __init__(self, spec: OrderSpec, fields):
        self.spec = spec
        by_name = _field_index(fields)
        self._keys = [((_resolve(k.field, by_name))[0], k.ascending) for k in spec.keys]

    def sort_rows(self, rows: list[tuple[int, Sequence[Value]]]) -> list[tuple[int, Sequence[Value]]]:
        """Stable sort of (row_id, values) pairs.

        Nulls come before non-nulls ascending and after them descending; ties
        break by row id ascending, so the result is a total order.
        """
        out = sorted(rows, key=lambda r: r[0])
        for idx, ascending in reversed(self._keys):
            # nulls get sort rank 0, everything else rank 1 with its payload
            out.sort(
                key=lambda r, _i=idx: (0, 0) if (p := r[1][_i].payload) is None else (1, p),
                reverse=not ascending,
            )
        return out


def bind_filter(expr: FilterExpr, fields) -> BoundFilter:
    """Resolve field refs and type-check literals against a field list."""
    return BoundFilter(expr, fields)


def bind_order(spec: OrderSpec, fields) -> BoundOrder:
    return BoundOrder(spec, fields)
