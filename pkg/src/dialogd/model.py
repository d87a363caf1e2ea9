"""Typed value domain and the record shapes exchanged over the dialog protocol.

Values are immutable tagged cells. The canonical string form (value_to_string)
is what travels inside item arrays; string_to_value is its inverse for writes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .errors import ConversionError

__all__ = [
    "DataType",
    "Value",
    "NULL",
    "value_to_string",
    "string_to_value",
    "compare_values",
    "FieldDescriptor",
    "RelationDescriptor",
    "TableHeader",
    "TablePayload",
]


class DataType(str, Enum):
    """Closed set of column types. Only varchar carries a length attribute."""

    INT = "int"
    VARCHAR = "varchar"
    BIT = "bit"
    REAL = "real"
    DATETIME = "datetime"


_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
_REAL_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")


@dataclass(frozen=True, slots=True)
class Value:
    """One typed cell. ``kind`` is None for the SQL null."""

    kind: DataType | None
    payload: int | float | bool | str | datetime | None

    def __post_init__(self):
        k, p = self.kind, self.payload
        if k is None:
            if p is not None:
                raise ValueError("null value must carry no payload")
        elif k is DataType.INT:
            if type(p) is not int:
                raise ValueError(f"int value needs an int payload, got {type(p).__name__}")
            if not _INT64_MIN <= p <= _INT64_MAX:
                raise ValueError("int value out of 64-bit range")
        elif k is DataType.REAL:
            if type(p) is not float:
                raise ValueError(f"real value needs a float payload, got {type(p).__name__}")
            if not math.isfinite(p):
                raise ValueError("real value must be finite")
        elif k is DataType.BIT:
            if type(p) is not bool:
                raise ValueError(f"bit value needs a bool payload, got {type(p).__name__}")
        elif k is DataType.VARCHAR:
            if type(p) is not str:
                raise ValueError(f"varchar value needs a str payload, got {type(p).__name__}")
        elif k is DataType.DATETIME:
            if type(p) is not datetime:
                raise ValueError(f"datetime value needs a datetime payload, got {type(p).__name__}")
            if p.tzinfo is None or p.utcoffset() != timezone.utc.utcoffset(None):
                raise ValueError("datetime value must be UTC-aware")
            if p.microsecond % 1000 != 0:
                raise ValueError("datetime value is limited to millisecond precision")

    @property
    def is_null(self) -> bool:
        return self.kind is None

    # convenience constructors --------------------------------------------

    @staticmethod
    def of_int(i: int) -> "Value":
        return Value(DataType.INT, i)

    @staticmethod
    def of_real(f: float) -> "Value":
        return Value(DataType.REAL, float(f))

    @staticmethod
    def of_bit(b: bool) -> "Value":
        return Value(DataType.BIT, b)

    @staticmethod
    def of_varchar(s: str) -> "Value":
        return Value(DataType.VARCHAR, s)

    @staticmethod
    def of_datetime(dt: datetime) -> "Value":
        """Normalizes to UTC and truncates below-millisecond precision."""
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        dt = dt.astimezone(timezone.utc)
        dt = dt.replace(microsecond=dt.microsecond - dt.microsecond % 1000)
        return Value(DataType.DATETIME, dt)


NULL = Value(None, None)


def value_to_string(v: Value) -> str | None:
    """Canonical rendering; None stands for the SQL null.

    int: plain decimal. real: shortest string that round-trips. bit: "0"/"1".
    varchar: verbatim. datetime: ISO-8601 with milliseconds and a Z suffix.
    """
    if v.kind is None:
        return None
    if v.kind is DataType.INT:
        return str(v.payload)
    if v.kind is DataType.REAL:
        return repr(v.payload)
    if v.kind is DataType.BIT:
        return "1" if v.payload else "0"
    if v.kind is DataType.VARCHAR:
        return v.payload
    # datetime
    dt: datetime = v.payload
    return f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}.{dt.microsecond // 1000:03d}Z"


def parse_datetime_text(s: str) -> datetime:
    """ISO-8601 text to a UTC datetime, millisecond precision.

    Accepts the canonical trailing-Z form plus anything datetime.fromisoformat
    understands; zone-less input counts as UTC.
    """
    text = s.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ConversionError(f"not a valid datetime: {s!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=dt.microsecond - dt.microsecond % 1000)


def string_to_value(s: str | None, t: DataType) -> Value:
    """Inverse of value_to_string; raises ConversionError on unparseable input."""
    if s is None:
        return NULL
    if t is DataType.INT:
        if not _INT_RE.match(s):
            raise ConversionError(f"not a valid int: {s!r}")
        i = int(s)
        if not _INT64_MIN <= i <= _INT64_MAX:
            raise ConversionError(f"int out of 64-bit range: {s!r}")
        return Value(DataType.INT, i)
    if t is DataType.REAL:
        if not _REAL_RE.match(s):
            raise ConversionError(f"not a valid real: {s!r}")
        f = float(s)
        if not math.isfinite(f):
            raise ConversionError(f"real must be finite: {s!r}")
        return Value(DataType.REAL, f)
    if t is DataType.BIT:
        if s == "0":
            return Value(DataType.BIT, False)
        if s == "1":
            return Value(DataType.BIT, True)
        raise ConversionError(f"not a valid bit (expected \"0\" or \"1\"): {s!r}")
    if t is DataType.VARCHAR:
        return Value(DataType.VARCHAR, s)
    if t is DataType.DATETIME:
        return Value(DataType.DATETIME, parse_datetime_text(s))
    raise ConversionError(f"unknown data type: {t!r}")


_NUMERIC = (DataType.INT, DataType.REAL)


def compare_values(a: Value, b: Value) -> int | None:
    """-1/0/1 for comparable pairs, None when incomparable.

    Same-type values compare naturally; int and real cross-compare numerically;
    anything involving null, and every other cross-type pair, is incomparable.
    """
    if a.kind is None or b.kind is None:
        return None
    if a.kind is not b.kind and not (a.kind in _NUMERIC and b.kind in _NUMERIC):
        return None
    x, y = a.payload, b.payload
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


# -- dialog record shapes ----------------------------------------------------
# Wire key names follow the protocol reference in docs/protocol.md and are
# pinned by golden tests; do not rename.


@dataclass(frozen=True, slots=True)
class FieldDescriptor:
    """One column as the client sees it: type, size, nullability, constraint.

    max_length is None unless the type is varchar; -1 means unlimited text.
    pk_table/pk_field are set exactly when constraint == "FOREIGN KEY" and
    name the referenced table/column.
    """

    name: str
    table: str
    data_type: DataType
    max_length: int | None
    is_nullable: bool
    constraint: str | None
    pk_table: str | None = None
    pk_field: str | None = None

    def to_json(self) -> dict:
        return {
            "Name": self.name,
            "Table": self.table,
            "DataType": self.data_type.value,
            "MaxLength": self.max_length,
            "IsNullable": self.is_nullable,
            "Constraint": self.constraint,
            "PK_TableName": self.pk_table,
            "PK_FieldName": self.pk_field,
        }


@dataclass(frozen=True, slots=True)
class RelationDescriptor:
    """One referencing field: (fk_table.fk_field) -> (pk_table.pk_field)."""

    fk_table: str
    fk_field: str
    pk_table: str
    pk_field: str

    def to_json(self) -> dict:
        return {
            "FK_TableName": self.fk_table,
            "FK_FieldName": self.fk_field,
            "PK_TableName": self.pk_table,
            "PK_FieldName": self.pk_field,
        }


@dataclass(frozen=True, slots=True)
class TableHeader:
    table_name: str

    def to_json(self) -> dict:
        return {"TableName": self.table_name}


@dataclass(frozen=True, slots=True)
class TablePayload:
    """Aggregate response: meta-data and one page of data from one snapshot.

    Every row of items has exactly len(fields) cells, positionally aligned
    with fields; row_ids runs parallel to items; total counts all rows passing
    the filter regardless of paging.
    """

    fields: tuple[FieldDescriptor, ...]
    relations: tuple[RelationDescriptor, ...]
    items: tuple[tuple[str | None, ...], ...]
    row_ids: tuple[int, ...]
    total: int

    def to_json(self) -> dict:
        return {
            "Fields": [f.to_json() for f in self.fields],
            "Relations": [r.to_json() for r in self.relations],
            "Items": [list(row) for row in self.items],
            "RowIds": list(self.row_ids),
            "Total": self.total,
        }
