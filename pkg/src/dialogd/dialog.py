"""The dialog operations: model discovery reads, the single-snapshot
aggregate, and the per-message write handlers.

Every read works against one Database snapshot, so a ReadTable response is
internally consistent no matter what commits in parallel. Writes open one
transaction per message and commit before returning.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ArityMismatch, InvalidRequest, PageTooLarge
from .expression import bind_filter, bind_order, parse_filter, parse_order
from .model import (
    FieldDescriptor,
    RelationDescriptor,
    TableHeader,
    TablePayload,
    string_to_value,
    value_to_string,
)
from .schema import CHECK, FOREIGN_KEY, PRIMARY_KEY, UNIQUE, SchemaChange
from .storage import Database, Engine

__all__ = [
    "ReadItemsRequest",
    "read_table_headers",
    "read_fields",
    "read_relations",
    "read_items",
    "read_total",
    "read_table",
    "create_item",
    "update_item",
    "delete_item",
    "change_schema",
]

DEFAULT_MAX_TAKE = 1000

# When one column carries several constraints, the field descriptor reports
# the one whose metadata the client needs most: the FK target drives
# navigation, so FOREIGN KEY outranks even PRIMARY KEY.
_PRECEDENCE = {FOREIGN_KEY: 0, PRIMARY_KEY: 1, UNIQUE: 2, CHECK: 3}


@dataclass(frozen=True, slots=True)
class ReadItemsRequest:
    """Paged, filtered, ordered item read: the parameters of ReadItems."""

    table_name: str
    skip: int = 0
    take: int = DEFAULT_MAX_TAKE
    order_expression: str = ""
    filter_expression: str = ""


def read_table_headers(db: Database) -> list[TableHeader]:
    """Current table list, name ascending; cheap enough to refresh after DDL."""
    return [TableHeader(name) for name in sorted(db.tables)]


def read_fields(db: Database, table: str) -> list[FieldDescriptor]:
    """One descriptor per column in ordinal order.

    Columns with several constraints are deduplicated by precedence
    (FOREIGN KEY > PRIMARY KEY > UNIQUE > CHECK); FK descriptors carry the
    referenced table/field.
    """
    ts = db.table(table)
    by_column: dict[str, list] = {}
    for c in db.constraints.values():
        if c.table == table:
            by_column.setdefault(c.column, []).append(c)
    fields = []
    for col in ts.columns:
        best = min(by_column.get(col.name, ()), key=lambda c: _PRECEDENCE[c.kind], default=None)
        pk_table = pk_field = None
        if best is not None and best.kind == FOREIGN_KEY:
            target = db.constraints[best.referenced_constraint]
            pk_table, pk_field = target.table, target.column
        fields.append(
            FieldDescriptor(
                name=col.name,
                table=table,
                data_type=col.data_type,
                max_length=col.max_length,
                is_nullable=col.is_nullable,
                constraint=None if best is None else best.kind,
                pk_table=pk_table,
                pk_field=pk_field,
            )
        )
    return fields


def read_relations(db: Database, table: str) -> list[RelationDescriptor]:
    """Fields referencing ``table``, ordered by referencing table then field.

    The referenced-table component always equals the parameter.
    """
    db.table(table)
    rels = []
    for c in db.constraints.values():
        if c.kind != FOREIGN_KEY:
            continue
        target = db.constraints[c.referenced_constraint]
        if target.table == table:
            rels.append(RelationDescriptor(c.table, c.column, table, target.column))
    rels.sort(key=lambda r: (r.fk_table, r.fk_field))
    return rels


def _query_rows(db: Database, req: ReadItemsRequest, max_take: int | None):
    """Shared scan -> filter -> sort -> slice pipeline.

    Returns (page rows as (row_id, values), total matching count).
    """
    if req.skip < 0 or req.take < 0:
        raise InvalidRequest("skip and take must be non-negative")
    if max_take is not None and req.take > max_take:
        raise PageTooLarge(f"take {req.take} exceeds the maximum page size {max_take}")
    ts = db.table(req.table_name)
    bound_filter = bind_filter(parse_filter(req.filter_expression), ts.columns)
    bound_order = bind_order(parse_order(req.order_expression), ts.columns)
    matches = bound_filter.matches
    filtered = [r for r in db.scan(req.table_name) if matches(r[1])]
    ordered = bound_order.sort_rows(filtered)
    return ordered[req.skip : req.skip + req.take], len(filtered)


def read_items(
    db: Database, req: ReadItemsRequest, max_take: int | None = DEFAULT_MAX_TAKE
) -> list[list[str | None]]:
    """One page of rows as strings, columns in ordinal order."""
    page, _ = _query_rows(db, req, max_take)
    return [[value_to_string(v) for v in row] for _, row in page]


def read_total(db: Database, table: str, filter_expression: str = "") -> int:
    """Count of rows passing the filter, ignoring paging."""
    ts = db.table(table)
    bound = bind_filter(parse_filter(filter_expression), ts.columns)
    matches = bound.matches
    return sum(1 for _, row in db.scan(table) if matches(row))


def read_table(
    db: Database, req: ReadItemsRequest, max_take: int | None = DEFAULT_MAX_TAKE
) -> TablePayload:
    """The aggregate read: fields, relations, one item page, and the total,
    all computed from the one snapshot passed in — data and meta-data are
    mutually consistent by construction. Any error yields no partial payload.
    """
    fields = read_fields(db, req.table_name)
    relations = read_relations(db, req.table_name)
    page, total = _query_rows(db, req, max_take)
    return TablePayload(
        fields=tuple(fields),
        relations=tuple(relations),
        items=tuple(tuple(value_to_string(v) for v in row) for _, row in page),
        row_ids=tuple(rid for rid, _ in page),
        total=total,
    )


# -- write handlers: one transaction per message ------------------------------


def _to_values(txn, table: str, cells) -> list:
    columns = txn.columns_of(table)
    if len(cells) != len(columns):
        raise ArityMismatch(
            f"table {table!r} has {len(columns)} columns, got {len(cells)} cells"
        )
    return [string_to_value(cell, col.data_type) for cell, col in zip(cells, columns)]


def create_item(engine: Engine, table: str, cells: list[str | None]) -> tuple[int, int]:
    """Insert one row from wire cells; returns (row id, new epoch)."""
    with engine.begin_write() as txn:
        row_id = txn.insert(table, _to_values(txn, table, cells))
        epoch = txn.commit()
    return row_id, epoch


def update_item(engine: Engine, table: str, row_id: int, cells: list[str | None]) -> int:
    """Full-row replacement from wire cells; returns the new epoch."""
    with engine.begin_write() as txn:
        txn.update(table, row_id, _to_values(txn, table, cells))
        return txn.commit()


def delete_item(engine: Engine, table: str, row_id: int) -> int:
    with engine.begin_write() as txn:
        txn.delete(table, row_id)
        return txn.commit()


def change_schema(engine: Engine, change: SchemaChange) -> int:
    """Apply one runtime DDL document; returns the new epoch. The very next
    read reflects the change — no restart, no rebuild."""
    with engine.begin_write() as txn:
        txn.apply_schema_change(change)
        return txn.commit()
