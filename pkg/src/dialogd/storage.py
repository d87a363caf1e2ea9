"""Embedded row store: snapshot-isolated reads, serialized writes, constraint
enforcement, and journal+snapshot durability.

Readers never block: begin_read hands out the latest committed Database,
which is immutable and safe to share across threads. Writers are mutually
exclusive; a WriteTxn works on a copy-on-write image and publishes a new
Database (with a bumped epoch) atomically on commit, after the journal
record is on disk.
"""

from __future__ import annotations

import logging
import os
import threading
from collections import Counter
from pathlib import Path

from . import persistence, schema
from .errors import (
    ArityMismatch,
    ConstraintInUse,
    DialogdError,
    DuplicateColumn,
    DuplicateConstraint,
    DuplicateTable,
    EngineClosed,
    ForeignKeyViolation,
    InvalidSchemaChange,
    LengthViolation,
    NotNullOnPopulated,
    NullViolation,
    RestrictViolation,
    StorageCorrupt,
    TableReferenced,
    TargetNotKey,
    TypeMismatch,
    TypeMismatchFK,
    UniqueViolation,
    UnknownColumn,
    UnknownConstraint,
    UnknownRow,
    UnknownTable,
)
from .model import NULL, DataType, Value, string_to_value, value_to_string
from .schema import (
    AddColumn,
    AddForeignKey,
    ColumnDef,
    ConstraintDef,
    CreateTable,
    DropColumn,
    DropConstraint,
    DropTable,
    SchemaChange,
    schema_change_from_json,
    schema_change_to_json,
)

logger = logging.getLogger(__name__)

STATE_FORMAT = 1


class TableStore:
    """One table: column defs plus rows keyed by a never-reused RowId.

    Treated as immutable once published inside a Database; write transactions
    work on clones. ``indexes`` holds a multiset of non-null payloads for
    every column that needs constraint lookups (PK/UNIQUE/FK source).
    """

    __slots__ = ("name", "columns", "rows", "next_row_id", "indexes", "ordinals")

    def __init__(self, name: str, columns: tuple[ColumnDef, ...]):
        self.name = name
        self.columns = columns
        self.rows: dict[int, tuple[Value, ...]] = {}
        self.next_row_id = 1
        self.indexes: dict[str, Counter] = {}
        self.ordinals = {c.name: i for i, c in enumerate(columns)}

    def clone(self) -> "TableStore":
        new = TableStore.__new__(TableStore)
        new.name = self.name
        new.columns = self.columns
        new.rows = dict(self.rows)
        new.next_row_id = self.next_row_id
        new.indexes = {c: Counter(cnt) for c, cnt in self.indexes.items()}
        new.ordinals = self.ordinals
        return new

    def set_columns(self, columns: tuple[ColumnDef, ...]) -> None:
        self.columns = columns
        self.ordinals = {c.name: i for i, c in enumerate(columns)}


class TablePlan:
    """Per-table constraint enforcement data derived from the catalog."""

    __slots__ = ("unique_cols", "fk_targets", "referenced_by", "indexed_cols")

    def __init__(self):
        self.unique_cols: list[str] = []  # PK and UNIQUE columns
        self.fk_targets: dict[str, tuple[str, str]] = {}  # fk col -> (table, col)
        self.referenced_by: dict[str, list[tuple[str, str]]] = {}  # key col -> fk sites
        self.indexed_cols: set[str] = set()


def build_plans(
    constraints: dict[str, ConstraintDef], table_names
) -> dict[str, TablePlan]:
    plans = {name: TablePlan() for name in table_names}
    for c in constraints.values():
        if c.kind in (schema.PRIMARY_KEY, schema.UNIQUE):
            plan = plans[c.table]
            if c.column not in plan.unique_cols:
                plan.unique_cols.append(c.column)
            plan.indexed_cols.add(c.column)
    for c in constraints.values():
        if c.kind == schema.FOREIGN_KEY:
            target = constraints[c.referenced_constraint]
            plans[c.table].fk_targets[c.column] = (target.table, target.column)
            plans[c.table].indexed_cols.add(c.column)
            plans[target.table].referenced_by.setdefault(target.column, []).append(
                (c.table, c.column)
            )
    return plans


class Database:
    """Immutable committed state: the snapshot handed to readers.

    ``epoch`` is the commit counter; a Database never changes after being
    published, so any number of request handlers may share it.
    """

    __slots__ = ("epoch", "tables", "constraints", "plans")

    def __init__(
        self,
        epoch: int,
        tables: dict[str, TableStore],
        constraints: dict[str, ConstraintDef],
    ):
        self.epoch = epoch
        self.tables = tables
        self.constraints = constraints
        self.plans = build_plans(constraints, tables.keys())

    def table(self, name: str) -> TableStore:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTable(f"unknown table {name!r}") from None

    def scan(self, name: str) -> list[tuple[int, tuple[Value, ...]]]:
        """All rows of a table in insertion (RowId) order."""
        return list(self.table(name).rows.items())


def _rebuild_index(ts: TableStore, column: str) -> Counter:
    idx = ts.ordinals[column]
    counter: Counter = Counter()
    for row in ts.rows.values():
        p = row[idx].payload
        if p is not None:
            counter[p] += 1
    return counter


def _reconcile_indexes(ts: TableStore, plan: TablePlan) -> None:
    for col in list(ts.indexes):
        if col not in plan.indexed_cols:
            del ts.indexes[col]
    for col in plan.indexed_cols:
        if col not in ts.indexes:
            ts.indexes[col] = _rebuild_index(ts, col)


class WriteTxn:
    """Exclusive write transaction over a copy-on-write image.

    Each operation is statement-atomic: on error the image is exactly as it
    was before the call. Nothing is visible to readers until commit returns.
    """

    def __init__(self, engine: "Engine", base: Database, replay: bool = False):
        self._engine = engine
        self._base = base
        self._replay = replay
        self._tables: dict[str, TableStore] = dict(base.tables)
        self._constraints: dict[str, ConstraintDef] = base.constraints
        self._plans: dict[str, TablePlan] = base.plans
        self._owned: set[str] = set()
        self._constraints_owned = False
        self._ops: list[dict] = []
        self._done = False

    # context manager: commit explicitly; falling out uncommitted aborts
    def __enter__(self) -> "WriteTxn":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if not self._done:
            self.abort()

    @property
    def base_epoch(self) -> int:
        return self._base.epoch

    def table_names(self) -> list[str]:
        return sorted(self._tables)

    def columns_of(self, table: str) -> tuple[ColumnDef, ...]:
        return self._require(table).columns

    def get_row(self, table: str, row_id: int) -> tuple[Value, ...]:
        ts = self._require(table)
        try:
            return ts.rows[row_id]
        except KeyError:
            raise UnknownRow(f"no row {row_id} in table {table!r}") from None

    # -- internals ----------------------------------------------------------

    def _check_open(self) -> None:
        if self._done:
            raise RuntimeError("transaction is already committed or aborted")

    def _require(self, table: str) -> TableStore:
        try:
            return self._tables[table]
        except KeyError:
            raise UnknownTable(f"unknown table {table!r}") from None

    def _own(self, table: str) -> TableStore:
        ts = self._require(table)
        if table not in self._owned:
            ts = ts.clone()
            self._tables[table] = ts
            self._owned.add(table)
        return ts

    def _own_constraints(self) -> dict[str, ConstraintDef]:
        if not self._constraints_owned:
            self._constraints = dict(self._constraints)
            self._constraints_owned = True
        return self._constraints

    def _refresh_plans(self) -> None:
        self._plans = build_plans(self._constraints, self._tables.keys())

    def _checked_row(self, ts: TableStore, values) -> tuple[Value, ...]:
        if len(values) != len(ts.columns):
            raise ArityMismatch(
                f"table {ts.name!r} has {len(ts.columns)} columns, got {len(values)} values"
            )
        for col, v in zip(ts.columns, values):
            if not isinstance(v, Value):
                raise TypeMismatch(f"column {col.name!r}: expected a Value, got {type(v).__name__}")
            if v.kind is None:
                if not col.is_nullable:
                    raise NullViolation(f"column {col.name!r} is not nullable")
                continue
            if v.kind is not col.data_type:
                raise TypeMismatch(
                    f"column {col.name!r} is {col.data_type.value}, got {v.kind.value}"
                )
            if (
                col.data_type is DataType.VARCHAR
                and col.max_length is not None
                and col.max_length >= 0
                and len(v.payload) > col.max_length
            ):
                raise LengthViolation(
                    f"column {col.name!r} allows {col.max_length} characters, got {len(v.payload)}"
                )
        return tuple(values)

    def _index_add(self, ts: TableStore, row: tuple[Value, ...]) -> None:
        for col, counter in ts.indexes.items():
            p = row[ts.ordinals[col]].payload
            if p is not None:
                counter[p] += 1

    def _index_remove(self, ts: TableStore, row: tuple[Value, ...]) -> None:
        for col, counter in ts.indexes.items():
            p = row[ts.ordinals[col]].payload
            if p is not None:
                counter[p] -= 1
                if counter[p] <= 0:
                    del counter[p]

    def _check_unique(self, ts: TableStore, row: tuple[Value, ...]) -> None:
        plan = self._plans[ts.name]
        for col in plan.unique_cols:
            p = row[ts.ordinals[col]].payload
            if p is not None and ts.indexes[col][p] > 1:
                raise UniqueViolation(f"duplicate value for {ts.name}.{col}")

    def _check_fk_out(self, ts: TableStore, row: tuple[Value, ...]) -> None:
        plan = self._plans[ts.name]
        for col, (ref_table, ref_col) in plan.fk_targets.items():
            p = row[ts.ordinals[col]].payload
            if p is None:
                continue
            target = self._tables[ref_table]
            if target.indexes[ref_col][p] == 0:
                raise ForeignKeyViolation(
                    f"{ts.name}.{col} value has no match in {ref_table}.{ref_col}"
                )

    def _check_restrict(self, table: str, col: str, payload) -> None:
        for fk_table, fk_col in self._plans[table].referenced_by.get(col, ()):
            if self._tables[fk_table].indexes[fk_col][payload] > 0:
                raise RestrictViolation(
                    f"{table}.{col} value is still referenced by {fk_table}.{fk_col}"
                )

    # -- DML -----------------------------------------------------------------

    def insert(self, table: str, values) -> int:
        """Stage one new row; returns its fresh RowId."""
        self._check_open()
        ts = self._own(table)
        row = self._checked_row(ts, values)
        row_id = ts.next_row_id
        ts.next_row_id += 1
        ts.rows[row_id] = row
        self._index_add(ts, row)
        try:
            self._check_unique(ts, row)
            self._check_fk_out(ts, row)
        except DialogdError:
            self._index_remove(ts, row)
            del ts.rows[row_id]
            ts.next_row_id = row_id
            raise
        self._ops.append(
            {
                "op": "insert",
                "table": table,
                "row_id": row_id,
                "cells": [value_to_string(v) for v in row],
            }
        )
        return row_id

    def update(self, table: str, row_id: int, values) -> None:
        """Stage a full-row replacement; every constraint is re-checked,
        including foreign keys pointing at a changed key value."""
        self._check_open()
        ts = self._own(table)
        if row_id not in ts.rows:
            raise UnknownRow(f"no row {row_id} in table {table!r}")
        row = self._checked_row(ts, values)
        old = ts.rows[row_id]
        ts.rows[row_id] = row
        self._index_remove(ts, old)
        self._index_add(ts, row)
        try:
            self._check_unique(ts, row)
            self._check_fk_out(ts, row)
            for col in self._plans[table].referenced_by:
                i = ts.ordinals[col]
                old_p = old[i].payload
                if old_p is not None and old[i] != row[i]:
                    self._check_restrict(table, col, old_p)
        except DialogdError:
            self._index_remove(ts, row)
            self._index_add(ts, old)
            ts.rows[row_id] = old
            raise
        self._ops.append(
            {
                "op": "update",
                "table": table,
                "row_id": row_id,
                "cells": [value_to_string(v) for v in row],
            }
        )

    def delete(self, table: str, row_id: int) -> None:
        """Stage a row removal; referencing rows elsewhere block it."""
        self._check_open()
        ts = self._own(table)
        if row_id not in ts.rows:
            raise UnknownRow(f"no row {row_id} in table {table!r}")
        old = ts.rows.pop(row_id)
        self._index_remove(ts, old)
        try:
            for col in self._plans[table].referenced_by:
                p = old[ts.ordinals[col]].payload
                if p is not None:
                    self._check_restrict(table, col, p)
        except DialogdError:
            ts.rows[row_id] = old
            self._index_add(ts, old)
            # re-establish RowId ordering of the rows dict
            ts.rows = dict(sorted(ts.rows.items()))
            raise
        self._ops.append({"op": "delete", "table": table, "row_id": row_id})

    # -- DDL -----------------------------------------------------------------

    def apply_schema_change(self, change: SchemaChange) -> None:
        """Apply one runtime DDL document atomically (validate, then mutate)."""
        self._check_open()
        if isinstance(change, CreateTable):
            self._create_table(change)
        elif isinstance(change, DropTable):
            self._drop_table(change)
        elif isinstance(change, AddColumn):
            self._add_column(change)
        elif isinstance(change, DropColumn):
            self._drop_column(change)
        elif isinstance(change, AddForeignKey):
            self._add_foreign_key(change)
        elif isinstance(change, DropConstraint):
            self._drop_constraint(change)
        else:
            raise InvalidSchemaChange(f"unknown schema change: {change!r}")
        self._refresh_plans()
        for name in self._tables:
            if name in self._owned:
                _reconcile_indexes(self._tables[name], self._plans[name])
        self._ops.append({"op": "schema", "change": schema_change_to_json(change)})

    def _create_table(self, change: CreateTable) -> None:
        schema.check_identifier(change.table, "table")
        if change.table in self._tables:
            raise DuplicateTable(f"table {change.table!r} already exists")
        seen: set[str] = set()
        pk_count = 0
        new_constraints: list[ConstraintDef] = []
        for spec in change.columns:
            col = spec.column
            schema.check_identifier(col.name, "column")
            if col.name in seen:
                raise DuplicateColumn(f"duplicate column {col.name!r}")
            seen.add(col.name)
            if spec.constraint == schema.PRIMARY_KEY:
                pk_count += 1
                if pk_count > 1:
                    raise InvalidSchemaChange("a table may have at most one PRIMARY KEY")
                name = schema.pk_name(change.table)
            elif spec.constraint == schema.UNIQUE:
                name = schema.uq_name(change.table, col.name)
            elif spec.constraint == schema.CHECK:
                name = schema.ck_name(change.table, col.name)
            else:
                continue
            if name in self._constraints:
                raise DuplicateConstraint(f"constraint name {name!r} already exists")
            new_constraints.append(ConstraintDef(name, spec.constraint, change.table, col.name))

        ts = TableStore(change.table, tuple(spec.column for spec in change.columns))
        constraints = self._own_constraints()
        for c in new_constraints:
            constraints[c.name] = c
        self._tables[change.table] = ts
        self._owned.add(change.table)

    def _drop_table(self, change: DropTable) -> None:
        self._require(change.table)
        for c in self._constraints.values():
            if c.kind != schema.FOREIGN_KEY or c.table == change.table:
                continue
            target = self._constraints[c.referenced_constraint]
            if target.table == change.table:
                raise TableReferenced(
                    f"table {change.table!r} is referenced by {c.table}.{c.column}"
                )
        constraints = self._own_constraints()
        for name in [n for n, c in constraints.items() if c.table == change.table]:
            del constraints[name]
        del self._tables[change.table]
        self._owned.discard(change.table)

    def _add_column(self, change: AddColumn) -> None:
        schema.check_identifier(change.column.name, "column")
        ts = self._require(change.table)
        if change.column.name in ts.ordinals:
            raise DuplicateColumn(f"column {change.column.name!r} already exists")
        if ts.rows and not change.column.is_nullable:
            raise NotNullOnPopulated(
                f"cannot add non-nullable column {change.column.name!r} to a populated table"
            )
        ts = self._own(change.table)
        ts.set_columns(ts.columns + (change.column,))
        ts.rows = {rid: row + (NULL,) for rid, row in ts.rows.items()}

    def _drop_column(self, change: DropColumn) -> None:
        ts = self._require(change.table)
        if change.column not in ts.ordinals:
            raise UnknownColumn(f"no column {change.column!r} in table {change.table!r}")
        if len(ts.columns) == 1:
            raise InvalidSchemaChange("a table must keep at least one column")
        for c in self._constraints.values():
            if c.table == change.table and c.column == change.column:
                raise ConstraintInUse(
                    f"column {change.table}.{change.column} has constraint {c.name!r}"
                )
        ts = self._own(change.table)
        idx = ts.ordinals[change.column]
        ts.set_columns(tuple(c for c in ts.columns if c.name != change.column))
        ts.rows = {rid: row[:idx] + row[idx + 1 :] for rid, row in ts.rows.items()}
        ts.indexes.pop(change.column, None)

    def _add_foreign_key(self, change: AddForeignKey) -> None:
        ts = self._require(change.table)
        if change.column not in ts.ordinals:
            raise UnknownColumn(f"no column {change.column!r} in table {change.table!r}")
        target_ts = self._require(change.pk_table)
        if change.pk_column not in target_ts.ordinals:
            raise UnknownColumn(
                f"no column {change.pk_column!r} in table {change.pk_table!r}"
            )
        name = schema.fk_name(change.table, change.column)
        if name in self._constraints:
            raise DuplicateConstraint(f"constraint name {name!r} already exists")
        col = ts.columns[ts.ordinals[change.column]]
        target_col = target_ts.columns[target_ts.ordinals[change.pk_column]]
        if col.data_type is not target_col.data_type:
            raise TypeMismatchFK(
                f"{change.table}.{change.column} is {col.data_type.value} but "
                f"{change.pk_table}.{change.pk_column} is {target_col.data_type.value}"
            )
        target_constraint = None
        for c in self._constraints.values():
            if (
                c.table == change.pk_table
                and c.column == change.pk_column
                and c.kind in (schema.PRIMARY_KEY, schema.UNIQUE)
            ):
                target_constraint = c
                if c.kind == schema.PRIMARY_KEY:
                    break
        if target_constraint is None:
            raise TargetNotKey(
                f"{change.pk_table}.{change.pk_column} has no PRIMARY KEY or UNIQUE constraint"
            )
        # existing rows must already satisfy the new reference
        idx = ts.ordinals[change.column]
        target_index = target_ts.indexes.get(change.pk_column)
        if target_index is None:  # pragma: no cover - targets are always indexed
            target_index = _rebuild_index(target_ts, change.pk_column)
        for row in ts.rows.values():
            p = row[idx].payload
            if p is not None and target_index[p] == 0:
                raise ForeignKeyViolation(
                    f"existing {change.table}.{change.column} value has no match in "
                    f"{change.pk_table}.{change.pk_column}"
                )
        constraints = self._own_constraints()
        constraints[name] = ConstraintDef(
            name, schema.FOREIGN_KEY, change.table, change.column, target_constraint.name
        )
        self._own(change.table)

    def _drop_constraint(self, change: DropConstraint) -> None:
        if change.constraint not in self._constraints:
            raise UnknownConstraint(f"no constraint named {change.constraint!r}")
        for c in self._constraints.values():
            if c.kind == schema.FOREIGN_KEY and c.referenced_constraint == change.constraint:
                raise ConstraintInUse(
                    f"constraint {change.constraint!r} is the target of {c.name!r}"
                )
        constraints = self._own_constraints()
        dropped = constraints.pop(change.constraint)
        self._own(dropped.table)

    # -- lifecycle ------------------------------------------------------------

    def commit(self) -> int:
        """Publish the staged state; returns the (possibly unchanged) epoch.

        A transaction with no staged operations is a no-op: no journal record,
        no epoch bump.
        """
        self._check_open()
        self._done = True
        if not self._ops:
            self._engine._finish_txn(self, None)
            return self._base.epoch
        new_db = Database(self._base.epoch + 1, self._tables, self._constraints)
        self._engine._finish_txn(self, new_db, self._ops, replay=self._replay)
        return new_db.epoch

    def abort(self) -> None:
        """Throw the staged state away."""
        self._check_open()
        self._done = True
        self._engine._finish_txn(self, None)


class Engine:
    """Storage engine: one writer at a time, any number of lock-free readers.

    ``data_dir=None`` runs purely in memory. With a directory, construction
    recovers committed state from the snapshot file plus journal, and every
    commit is journaled (and fsynced) before it becomes visible.
    """

    def __init__(
        self,
        data_dir: str | Path | None = None,
        *,
        checkpoint_every: int = 100,
        validate_commits: bool = False,
    ):
        if checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        self._checkpoint_every = checkpoint_every
        self._validate_commits = validate_commits
        self._writer_lock = threading.Lock()
        self._closed = False
        self._journal_f = None
        self._commits_since_checkpoint = 0
        self._data_dir = Path(data_dir) if data_dir is not None else None
        self._state = Database(0, {}, {})
        if self._data_dir is not None:
            self._recover()

    @classmethod
    def recover(
        cls, data_dir: str | Path, *, checkpoint_every: int = 100, validate_commits: bool = False
    ) -> "Engine":
        """Open (or initialize) a durable engine from a data directory."""
        return cls(
            data_dir, checkpoint_every=checkpoint_every, validate_commits=validate_commits
        )

    # -- reads ----------------------------------------------------------------

    def begin_read(self) -> Database:
        """Immutable snapshot at the latest committed epoch."""
        return self._state

    # -- writes ---------------------------------------------------------------

    def begin_write(self) -> WriteTxn:
        """Exclusive write transaction; blocks while another writer is open."""
        self._writer_lock.acquire()
        if self._closed:
            self._writer_lock.release()
            raise EngineClosed("engine is closed")
        return WriteTxn(self, self._state)

    def _finish_txn(self, txn: WriteTxn, new_db, ops=None, replay: bool = False) -> None:
        try:
            if new_db is not None:
                if self._validate_commits:
                    validate_database(new_db)
                if not replay and self._journal_f is not None:
                    record = persistence.encode_doc({"epoch": new_db.epoch, "ops": ops})
                    persistence.write_frame(self._journal_f, record)
                    self._journal_f.flush()
                    os.fsync(self._journal_f.fileno())
                self._state = new_db
                if not replay:
                    self._commits_since_checkpoint += 1
                    if (
                        self._journal_f is not None
                        and self._commits_since_checkpoint >= self._checkpoint_every
                    ):
                        self._checkpoint_locked()
        finally:
            self._writer_lock.release()

    # -- durability -------------------------------------------------------------

    def checkpoint(self) -> None:
        """Write a full snapshot file and truncate the journal."""
        with self._writer_lock:
            if self._closed:
                raise EngineClosed("engine is closed")
            if self._data_dir is None:
                return
            self._checkpoint_locked()

    def _checkpoint_locked(self) -> None:
        snap_path = self._data_dir / persistence.SNAPSHOT_FILE
        payload = persistence.encode_doc(state_to_doc(self._state))
        persistence.write_file_atomic(snap_path, persistence.encode_frame(payload))
        self._journal_f.truncate(0)
        self._journal_f.seek(0)
        self._journal_f.flush()
        os.fsync(self._journal_f.fileno())
        self._commits_since_checkpoint = 0

    def close(self) -> None:
        """Checkpoint (when durable) and refuse further writes."""
        with self._writer_lock:
            if self._closed:
                return
            if self._data_dir is not None:
                self._checkpoint_locked()
                self._journal_f.close()
                self._journal_f = None
            self._closed = True

    def dump(self) -> bytes:
        """Canonical byte form of the current committed state."""
        return persistence.encode_doc(state_to_doc(self._state))

    # -- recovery ----------------------------------------------------------------

    def _recover(self) -> None:
        self._data_dir.mkdir(parents=True, exist_ok=True)
        snap_path = self._data_dir / persistence.SNAPSHOT_FILE
        journal_path = self._data_dir / persistence.JOURNAL_FILE

        if snap_path.exists():
            scan = persistence.read_frames(snap_path)
            if scan.error is not None or len(scan.payloads) != 1:
                raise StorageCorrupt(f"snapshot file is corrupt: {scan.error or 'bad frame count'}")
            try:
                self._state = state_from_doc(persistence.decode_doc(scan.payloads[0]))
            except (ValueError, KeyError, TypeError, DialogdError) as e:
                raise StorageCorrupt(f"snapshot file is corrupt: {e}") from None

        scan = persistence.read_frames(journal_path)
        if scan.error is not None:
            logger.warning(
                "journal %s: %s; recovering to the last complete record", journal_path, scan.error
            )
        replayed = 0
        stop_error: str | None = scan.error
        valid_bytes = 0
        pos = 0
        for payload in scan.payloads:
            pos += 8 + len(payload)  # 4-byte length prefix + payload + 4-byte CRC
            try:
                doc = persistence.decode_doc(payload)
                epoch = doc["epoch"]
                ops = doc["ops"]
            except (ValueError, KeyError, TypeError) as e:
                stop_error = f"undecodable journal record: {e}"
                break
            if epoch <= self._state.epoch:
                # already contained in the snapshot (crash between checkpoint
                # steps); skip but keep the bytes
                valid_bytes = pos
                continue
            if epoch != self._state.epoch + 1:
                stop_error = f"journal epoch gap: have {self._state.epoch}, record says {epoch}"
                break
            try:
                self._replay_record(ops, epoch)
            except DialogdError as e:
                stop_error = f"journal record {epoch} failed to replay: {e}"
                break
            valid_bytes = pos
            replayed += 1
        if stop_error is not None:
            logger.warning(
                "journal %s: stopped after %d record(s): %s", journal_path, replayed, stop_error
            )
            # drop the unusable tail so future appends stay readable
            with open(journal_path, "ab") as f:
                f.truncate(valid_bytes)

        self._journal_f = open(journal_path, "ab")

    def _replay_record(self, ops: list, epoch: int) -> None:
        txn = WriteTxn(self, self._state, replay=True)
        self._writer_lock.acquire()  # _finish_txn releases
        try:
            for op in ops:
                kind = op["op"]
                if kind == "schema":
                    txn.apply_schema_change(schema_change_from_json(op["change"]))
                elif kind == "insert":
                    ts = txn._require(op["table"])
                    values = [
                        string_to_value(cell, col.data_type)
                        for cell, col in zip(op["cells"], ts.columns)
                    ]
                    got = txn.insert(op["table"], values)
                    if got != op["row_id"]:
                        raise StorageCorrupt(
                            f"replay assigned row id {got}, journal says {op['row_id']}"
                        )
                elif kind == "update":
                    ts = txn._require(op["table"])
                    values = [
                        string_to_value(cell, col.data_type)
                        for cell, col in zip(op["cells"], ts.columns)
                    ]
                    txn.update(op["table"], op["row_id"], values)
                elif kind == "delete":
                    txn.delete(op["table"], op["row_id"])
                else:
                    raise StorageCorrupt(f"unknown journal op {kind!r}")
        except BaseException:
            txn._done = True
            self._writer_lock.release()
            raise
        new_epoch = txn.commit()
        if new_epoch != epoch:
            raise StorageCorrupt(f"replay produced epoch {new_epoch}, journal says {epoch}")


# -- state (de)serialization ---------------------------------------------------


def state_to_doc(db: Database) -> dict:
    """JSON-able document of the full committed state; canonical ordering
    (tables and constraints sorted by name, rows by RowId)."""
    return {
        "format": STATE_FORMAT,
        "epoch": db.epoch,
        "constraints": [
            {
                "name": c.name,
                "kind": c.kind,
                "table": c.table,
                "column": c.column,
                "referenced_constraint": c.referenced_constraint,
            }
            for _, c in sorted(db.constraints.items())
        ],
        "tables": [
            {
                "name": ts.name,
                "columns": [
                    {
                        "name": col.name,
                        "data_type": col.data_type.value,
                        "max_length": col.max_length,
                        "is_nullable": col.is_nullable,
                    }
                    for col in ts.columns
                ],
                "next_row_id": ts.next_row_id,
                "rows": [
                    [rid, [value_to_string(v) for v in row]]
                    for rid, row in sorted(ts.rows.items())
                ],
            }
            for _, ts in sorted(db.tables.items())
        ],
    }


def state_from_doc(doc: dict) -> Database:
    if doc.get("format") != STATE_FORMAT:
        raise ValueError(f"unsupported state format {doc.get('format')!r}")
    tables: dict[str, TableStore] = {}
    for tdoc in doc["tables"]:
        columns = tuple(
            ColumnDef(
                c["name"],
                DataType(c["data_type"]),
                c["max_length"],
                c["is_nullable"],
            )
            for c in tdoc["columns"]
        )
        ts = TableStore(tdoc["name"], columns)
        ts.next_row_id = tdoc["next_row_id"]
        for rid, cells in tdoc["rows"]:
            ts.rows[rid] = tuple(
                string_to_value(cell, col.data_type) for cell, col in zip(cells, columns)
            )
        tables[ts.name] = ts
    constraints = {
        c["name"]: ConstraintDef(
            c["name"], c["kind"], c["table"], c["column"], c["referenced_constraint"]
        )
        for c in doc["constraints"]
    }
    db = Database(doc["epoch"], tables, constraints)
    for name, ts in tables.items():
        _reconcile_indexes(ts, db.plans[name])
    return db


# -- full invariant re-verification (used by test builds) -----------------------


def validate_database(db: Database) -> None:
    """Re-verify every storage invariant; raises AssertionError on violation."""
    for name, c in db.constraints.items():
        assert c.name == name
        assert c.kind in schema.CONSTRAINT_KINDS, f"bad constraint kind {c.kind!r}"
        assert c.table in db.tables, f"constraint {name} names missing table"
        ts = db.tables[c.table]
        assert c.column in ts.ordinals, f"constraint {name} names missing column"
        if c.kind == schema.FOREIGN_KEY:
            target = db.constraints.get(c.referenced_constraint)
            assert target is not None, f"{name}: dangling referenced_constraint"
            assert target.kind in (schema.PRIMARY_KEY, schema.UNIQUE)
            fk_col = ts.columns[ts.ordinals[c.column]]
            t_ts = db.tables[target.table]
            t_col = t_ts.columns[t_ts.ordinals[target.column]]
            assert fk_col.data_type is t_col.data_type, f"{name}: FK/PK type mismatch"
        else:
            assert c.referenced_constraint is None

    for name, ts in db.tables.items():
        assert ts.name == name
        col_names = [c.name for c in ts.columns]
        assert len(set(col_names)) == len(col_names), f"{name}: duplicate columns"
        pks = [
            c for c in db.constraints.values() if c.table == name and c.kind == schema.PRIMARY_KEY
        ]
        assert len(pks) <= 1, f"{name}: multiple primary keys"
        prev = 0
        for rid, row in ts.rows.items():
            assert rid > prev, f"{name}: rows out of RowId order"
            prev = rid
            assert rid < ts.next_row_id, f"{name}: row id {rid} >= next_row_id"
            assert len(row) == len(ts.columns), f"{name}: row arity mismatch"
            for col, v in zip(ts.columns, row):
                if v.kind is None:
                    assert col.is_nullable, f"{name}.{col.name}: null in non-nullable"
                else:
                    assert v.kind is col.data_type, f"{name}.{col.name}: type mismatch"
                    if col.max_length is not None and col.max_length >= 0:
                        assert len(v.payload) <= col.max_length, f"{name}.{col.name}: too long"
        plan = db.plans[name]
        assert set(ts.indexes) == plan.indexed_cols, f"{name}: index set mismatch"
        for col in plan.indexed_cols:
            assert ts.indexes[col] == _rebuild_index(ts, col), f"{name}.{col}: stale index"
        for col in plan.unique_cols:
            idx = ts.ordinals[col]
            seen = set()
            for row in ts.rows.values():
                p = row[idx].payload
                if p is not None:
                    assert p not in seen, f"{name}.{col}: duplicate value"
                    seen.add(p)
        is_pk = {c.column for c in pks}
        for col in is_pk:
            idx = ts.ordinals[col]
            for row in ts.rows.values():
                assert row[idx].payload is not None, f"{name}.{col}: null primary key"
        for col, (ref_table, ref_col) in plan.fk_targets.items():
            idx = ts.ordinals[col]
            t_ts = db.tables[ref_table]
            t_idx = t_ts.ordinals[ref_col]
            target_vals = {
                row[t_idx].payload
                for row in t_ts.rows.values()
                if row[t_idx].payload is not None
            }
            for row in ts.rows.values():
                p = row[idx].payload
                assert p is None or p in target_vals, f"{name}.{col}: dangling FK value"
