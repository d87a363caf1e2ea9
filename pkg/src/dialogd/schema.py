"""Schema building blocks: column/constraint definitions and the runtime
DDL documents (SchemaChange) shared by the HTTP API, seed files and journal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InvalidIdentifier, InvalidSchemaChange
from .model import DataType

PRIMARY_KEY = "PRIMARY KEY"
FOREIGN_KEY = "FOREIGN KEY"
UNIQUE = "UNIQUE"
CHECK = "CHECK"

CONSTRAINT_KINDS = (PRIMARY_KEY, FOREIGN_KEY, UNIQUE, CHECK)

# Keywords of the filter/order grammar; banning them as identifiers keeps
# every column reachable from a filter expression.
RESERVED_WORDS = frozenset(
    ["and", "or", "not", "is", "null", "like", "true", "false", "asc", "desc", "datetime"]
)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
MAX_IDENT_LEN = 128


def check_identifier(name: object, what: str) -> str:
    if not isinstance(name, str) or not _IDENT_RE.match(name) or len(name) > MAX_IDENT_LEN:
        raise InvalidIdentifier(f"invalid {what} name: {name!r}")
    if name.lower() in RESERVED_WORDS:
        raise InvalidIdentifier(f"{what} name {name!r} is a reserved word")
    return name


@dataclass(frozen=True, slots=True)
class ColumnDef:
    """Column definition as stored in the catalog.

    Ordinal position is implied by list position (1-based, recompacted after
    drop-column). max_length is None for non-text, -1 for unlimited varchar.
    """

    name: str
    data_type: DataType
    max_length: int | None
    is_nullable: bool

    def __post_init__(self):
        if self.data_type is DataType.VARCHAR:
            if self.max_length is None or (self.max_length != -1 and self.max_length < 1):
                raise InvalidSchemaChange(
                    f"varchar column {self.name!r} needs max_length -1 or >= 1"
                )
        elif self.max_length is not None:
            raise InvalidSchemaChange(
                f"column {self.name!r}: max_length applies only to varchar"
            )


@dataclass(frozen=True, slots=True)
class ConstraintDef:
    """One single-column constraint; name is unique database-wide.

    referenced_constraint is set only for FOREIGN KEY and names the PK/UNIQUE
    constraint on the referenced column.
    """

    name: str
    kind: str
    table: str
    column: str
    referenced_constraint: str | None = None


def pk_name(table: str) -> str:
    return f"pk_{table}"


def fk_name(table: str, column: str) -> str:
    return f"fk_{table}_{column}"


def uq_name(table: str, column: str) -> str:
    return f"uq_{table}_{column}"


def ck_name(table: str, column: str) -> str:
    return f"ck_{table}_{column}"


# -- SchemaChange documents --------------------------------------------------


@dataclass(frozen=True, slots=True)
class ColumnSpec:
    """Column as requested by create-table: a ColumnDef plus an optional
    inline constraint (PRIMARY KEY / UNIQUE / CHECK; foreign keys are added
    separately so the target table is guaranteed to exist)."""

    column: ColumnDef
    constraint: str | None = None


@dataclass(frozen=True, slots=True)
class CreateTable:
    table: str
    columns: tuple[ColumnSpec, ...]
    kind = "create-table"


@dataclass(frozen=True, slots=True)
class DropTable:
    table: str
    kind = "drop-table"


@dataclass(frozen=True, slots=True)
class AddColumn:
    table: str
    column: ColumnDef
    kind = "add-column"


@dataclass(frozen=True, slots=True)
class DropColumn:
    table: str
    column: str
    kind = "drop-column"


@dataclass(frozen=True, slots=True)
class AddForeignKey:
    table: str
    column: str
    pk_table: str
    pk_column: str
    kind = "add-foreign-key"


@dataclass(frozen=True, slots=True)
class DropConstraint:
    constraint: str
    kind = "drop-constraint"


SchemaChange = (
    CreateTable | DropTable | AddColumn | DropColumn | AddForeignKey | DropConstraint
)


def _column_def_to_json(c: ColumnDef) -> dict:
    doc = {
        "name": c.name,
        "data_type": c.data_type.value,
        "is_nullable": c.is_nullable,
    }
    if c.max_length is not None:
        doc["max_length"] = c.max_length
    return doc


def schema_change_to_json(change: SchemaChange) -> dict:
    """Wire/journal/seed form of a SchemaChange (see docs/protocol.md)."""
    if isinstance(change, CreateTable):
        cols = []
        for spec in change.columns:
            doc = _column_def_to_json(spec.column)
            if spec.constraint is not None:
                doc["constraint"] = spec.constraint
            cols.append(doc)
        return {"kind": change.kind, "table": change.table, "columns": cols}
    if isinstance(change, DropTable):
        return {"kind": change.kind, "table": change.table}
    if isinstance(change, AddColumn):
        return {
            "kind": change.kind,
            "table": change.table,
            "column": _column_def_to_json(change.column),
        }
    if isinstance(change, DropColumn):
        return {"kind": change.kind, "table": change.table, "column": change.column}
    if isinstance(change, AddForeignKey):
        return {
            "kind": change.kind,
            "table": change.table,
            "column": change.column,
            "pk_table": change.pk_table,
            "pk_column": change.pk_column,
        }
    if isinstance(change, DropConstraint):
        return {"kind": change.kind, "constraint": change.constraint}
    raise InvalidSchemaChange(f"unknown schema change: {change!r}")


def _require(doc: dict, key: str) -> object:
    if key not in doc:
        raise InvalidSchemaChange(f"schema change is missing {key!r}")
    return doc[key]


def _column_def_from_json(doc: object, *, where: str) -> ColumnDef:
    if not isinstance(doc, dict):
        raise InvalidSchemaChange(f"{where}: column must be an object")
    name = check_identifier(_require(doc, "name"), "column")
    type_token = _require(doc, "data_type")
    try:
        data_type = DataType(type_token)
    except ValueError:
        raise InvalidSchemaChange(f"{where}: unknown data type {type_token!r}") from None
    max_length = doc.get("max_length")
    if max_length is not None and not isinstance(max_length, int):
        raise InvalidSchemaChange(f"{where}: max_length must be an integer")
    is_nullable = doc.get("is_nullable", True)
    if not isinstance(is_nullable, bool):
        raise InvalidSchemaChange(f"{where}: is_nullable must be a boolean")
    return ColumnDef(name, data_type, max_length, is_nullable)


def schema_change_from_json(doc: object) -> SchemaChange:
    """Parse and validate one SchemaChange document."""
    if not isinstance(doc, dict):
        raise InvalidSchemaChange("schema change must be a JSON object")
    kind = _require(doc, "kind")

    if kind == "create-table":
        table = check_identifier(_require(doc, "table"), "table")
        cols_doc = _require(doc, "columns")
        if not isinstance(cols_doc, list) or not cols_doc:
            raise InvalidSchemaChange("create-table needs a non-empty column list")
        specs = []
        for c in cols_doc:
            col = _column_def_from_json(c, where=f"create-table {table}")
            constraint = c.get("constraint")
            if constraint is not None:
                if constraint == FOREIGN_KEY:
                    raise InvalidSchemaChange(
                        "foreign keys are added with add-foreign-key, not inline"
                    )
                if constraint not in (PRIMARY_KEY, UNIQUE, CHECK):
                    raise InvalidSchemaChange(f"unknown constraint kind {constraint!r}")
                if constraint == PRIMARY_KEY and col.is_nullable:
                    # PRIMARY KEY implies NOT NULL
                    col = ColumnDef(col.name, col.data_type, col.max_length, False)
            specs.append(ColumnSpec(col, constraint))
        return CreateTable(table, tuple(specs))

    if kind == "drop-table":
        return DropTable(check_identifier(_require(doc, "table"), "table"))

    if kind == "add-column":
        table = check_identifier(_require(doc, "table"), "table")
        col = _column_def_from_json(_require(doc, "column"), where=f"add-column {table}")
        return AddColumn(table, col)

    if kind == "drop-column":
        table = check_identifier(_require(doc, "table"), "table")
        return DropColumn(table, check_identifier(_require(doc, "column"), "column"))

    if kind == "add-foreign-key":
        return AddForeignKey(
            check_identifier(_require(doc, "table"), "table"),
            check_identifier(_require(doc, "column"), "column"),
            check_identifier(_require(doc, "pk_table"), "table"),
            check_identifier(_require(doc, "pk_column"), "column"),
        )

    if kind == "drop-constraint":
        name = _require(doc, "constraint")
        if not isinstance(name, str) or not name:
            raise InvalidSchemaChange("drop-constraint needs a constraint name")
        return DropConstraint(name)

    raise InvalidSchemaChange(f"unknown schema change kind {kind!r}")
