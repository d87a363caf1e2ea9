"""Shared fixtures: the reference customer/order schema used across suites."""

from __future__ import annotations

import pytest

from dialogd.model import NULL, Value
from dialogd.schema import schema_change_from_json
from dialogd.storage import Engine

REFERENCE_SCHEMA = [
    {
        "kind": "create-table",
        "table": "customer",
        "columns": [
            {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
            {"name": "name", "data_type": "varchar", "max_length": 100, "is_nullable": False},
        ],
    },
    {
        "kind": "create-table",
        "table": "order",
        "columns": [
            {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
            {"name": "customer_id", "data_type": "int", "is_nullable": False},
            {"name": "amount", "data_type": "real", "is_nullable": True},
            {"name": "note", "data_type": "varchar", "max_length": -1, "is_nullable": True},
        ],
    },
    {
        "kind": "add-foreign-key",
        "table": "order",
        "column": "customer_id",
        "pk_table": "customer",
        "pk_column": "id",
    },
]


def apply_reference_schema(engine: Engine) -> None:
    with engine.begin_write() as txn:
        for doc in REFERENCE_SCHEMA:
            txn.apply_schema_change(schema_change_from_json(doc))
        txn.commit()


def seed_reference_rows(engine: Engine) -> None:
    """Three customers, four orders (one with null amount and note)."""
    with engine.begin_write() as txn:
        for cid, name in [(1, "Alice"), (2, "Bob"), (3, "Carol")]:
            txn.insert("customer", [Value.of_int(cid), Value.of_varchar(name)])
        rows = [
            (1, 1, 120.5, "rush"),
            (2, 1, 80.0, None),
            (3, 2, None, "gift wrap"),
            (4, 3, 250.0, "O'Brien pickup"),
        ]
        for oid, cid, amount, note in rows:
            txn.insert(
                "order",
                [
                    Value.of_int(oid),
                    Value.of_int(cid),
                    NULL if amount is None else Value.of_real(amount),
                    NULL if note is None else Value.of_varchar(note),
                ],
            )
        txn.commit()


@pytest.fixture
def engine():
    return Engine(validate_commits=True)


@pytest.fixture
def ref_engine():
    eng = Engine(validate_commits=True)
    apply_reference_schema(eng)
    return eng


@pytest.fixture
def full_engine():
    eng = Engine(validate_commits=True)
    apply_reference_schema(eng)
    seed_reference_rows(eng)
    return eng
