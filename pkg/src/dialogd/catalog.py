"""INFORMATION_SCHEMA-shaped catalog views over a database snapshot.

These reproduce the standard introspection result shapes: a table list, the
columns-with-constraints left join (one row per column x constraint, columns
without constraints once with empty constraint fields), and the referencing
relations of a table. is_nullable renders "YES"/"NO" here, at the view layer;
the dialog messages stay typed.
"""

from __future__ import annotations

from . import schema
from .storage import Database

__all__ = ["info_tables", "info_columns_joined", "info_relations"]


def info_tables(db: Database) -> list[dict]:
    """One row per base table, name ascending."""
    return [{"table_name": name} for name in sorted(db.tables)]


def info_columns_joined(db: Database, table: str) -> list[dict]:
    """Columns joined with their constraints, ordered by ordinal position.

    A column under several constraints yields one row per constraint (rows
    sorted by constraint name within the ordinal); an unknown table yields an
    empty list, mirroring SQL semantics. pk_table_name/pk_column_name carry
    the referenced table/column for FOREIGN KEY rows and stay empty otherwise.
    """
    ts = db.tables.get(table)
    if ts is None:
        return []
    by_column: dict[str, list] = {c.name: [] for c in ts.columns}
    for c in db.constraints.values():
        if c.table == table:
            by_column[c.column].append(c)
    rows = []
    for col in ts.columns:
        base = {
            "column_name": col.name,
            "table_name": table,
            "data_type": col.data_type.value,
            "is_nullable": "YES" if col.is_nullable else "NO",
            "character_maximum_length": col.max_length,
        }
        constraints = sorted(by_column[col.name], key=lambda c: c.name)
        if not constraints:
            rows.append(
                base | {"constraint_type": None, "pk_table_name": None, "pk_column_name": None}
            )
            continue
        for c in constraints:
            if c.kind == schema.FOREIGN_KEY:
                target = db.constraints[c.referenced_constraint]
                pk_table, pk_column = target.table, target.column
            else:
                pk_table = pk_column = None
            rows.append(
                base
                | {
                    "constraint_type": c.kind,
                    "pk_table_name": pk_table,
                    "pk_column_name": pk_column,
                }
            )
    return rows


def info_relations(db: Database, table: str) -> list[dict]:
    """Foreign keys whose referenced table is ``table``, fk_table_name
    ascending (then fk_column_name for determinism)."""
    rows = []
    for c in db.constraints.values():
        if c.kind != schema.FOREIGN_KEY:
            continue
        target = db.constraints[c.referenced_constraint]
        if target.table != table:
            continue
        rows.append(
            {
                "fk_table_name": c.table,
                "fk_column_name": c.column,
                "pk_column_name": target.column,
            }
        )
    rows.sort(key=lambda r: (r["fk_table_name"], r["fk_column_name"]))
    return rows
