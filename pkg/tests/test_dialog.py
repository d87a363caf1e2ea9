"""Dialog operations: discovery reads, paging pipeline, aggregate, writes."""

from __future__ import annotations

import random

import pytest

from conftest import apply_reference_schema, seed_reference_rows
from dialogd.dialog import (
    ReadItemsRequest,
    change_schema,
    create_item,
    delete_item,
    read_fields,
    read_items,
    read_relations,
    read_table,
    read_table_headers,
    read_total,
    update_item,
)
from dialogd.errors import (
    ArityMismatch,
    ConversionError,
    PageTooLarge,
    ParseError,
    UnknownField,
    UnknownTable,
)
from dialogd.model import DataType
from dialogd.schema import schema_change_from_json
from dialogd.storage import Engine
from generators import random_columns, random_rows

import oracle
from generators import random_filter, random_order, rows_as_dicts
from dialogd.expression import render_filter, render_order


def req(table, **kw):
    return ReadItemsRequest(table, **kw)


# -- discovery ------------------------------------------------------------------


def test_read_table_headers(engine, ref_engine):
    assert read_table_headers(engine.begin_read()) == []
    names = [h.table_name for h in read_table_headers(ref_engine.begin_read())]
    assert names == ["customer", "order"]


def test_read_fields_reference_schema(ref_engine):
    fields = read_fields(ref_engine.begin_read(), "customer")
    assert [f.name for f in fields] == ["id", "name"]
    id_f, name_f = fields
    assert id_f.data_type is DataType.INT
    assert id_f.constraint == "PRIMARY KEY"
    assert id_f.max_length is None
    assert id_f.is_nullable is False
    assert id_f.pk_table is None and id_f.pk_field is None
    assert name_f.max_length == 100 and name_f.is_nullable is False

    note = read_fields(ref_engine.begin_read(), "order")[3]
    assert note.name == "note" and note.max_length == -1  # unlimited text

    fk = read_fields(ref_engine.begin_read(), "order")[1]
    assert fk.constraint == "FOREIGN KEY"
    assert (fk.pk_table, fk.pk_field) == ("customer", "id")


def test_read_fields_unknown_table(ref_engine):
    with pytest.raises(UnknownTable):
        read_fields(ref_engine.begin_read(), "ghost")


def test_fk_outranks_pk_in_field_descriptor(engine):
    for doc in [
        {
            "kind": "create-table",
            "table": "person",
            "columns": [{"name": "id", "data_type": "int", "constraint": "PRIMARY KEY"}],
        },
        {
            "kind": "create-table",
            "table": "badge",
            "columns": [{"name": "id", "data_type": "int", "constraint": "PRIMARY KEY"}],
        },
        {
            "kind": "add-foreign-key",
            "table": "badge",
            "column": "id",
            "pk_table": "person",
            "pk_column": "id",
        },
    ]:
        change_schema(engine, schema_change_from_json(doc))
    (field,) = read_fields(engine.begin_read(), "badge")
    # navigation metadata wins: the client needs the FK target
    assert field.constraint == "FOREIGN KEY"
    assert (field.pk_table, field.pk_field) == ("person", "id")


def test_read_relations(ref_engine, full_engine):
    rels = read_relations(ref_engine.begin_read(), "customer")
    assert [(r.fk_table, r.fk_field, r.pk_table, r.pk_field) for r in rels] == [
        ("order", "customer_id", "customer", "id")
    ]
    assert all(r.pk_table == "customer" for r in rels)  # equals the parameter
    assert read_relations(ref_engine.begin_read(), "order") == []
    with pytest.raises(UnknownTable):
        read_relations(ref_engine.begin_read(), "ghost")


# -- items / total ------------------------------------------------------------------


def test_read_items_basic(full_engine):
    db = full_engine.begin_read()
    rows = read_items(db, req("order"))
    assert len(rows) == 4
    assert rows[0] == ["1", "1", "120.5", "rush"]
    assert rows[1][3] is None  # nulls stay null markers, not "null" text


def test_read_items_paging(full_engine):
    db = full_engine.begin_read()
    assert read_items(db, req("order", skip=10, take=5)) == []
    first_two = read_items(db, req("order", skip=0, take=2, order_expression="amount desc"))
    assert [r[0] for r in first_two] == ["4", "1"]
    assert read_items(db, req("order", take=0)) == []
    assert read_total(db, "order") == 4  # paging does not affect the count


def test_read_items_filter_and_errors(full_engine):
    db = full_engine.begin_read()
    got = read_items(db, req("order", filter_expression="amount > 100"))
    assert [r[0] for r in got] == ["1", "4"]
    with pytest.raises(UnknownTable):
        read_items(db, req("ghost"))
    with pytest.raises(ParseError):
        read_items(db, req("order", filter_expression="amount >"))
    with pytest.raises(UnknownField):
        read_items(db, req("order", filter_expression="ghost = 1"))
    with pytest.raises(PageTooLarge):
        read_items(db, req("order", take=5000), max_take=1000)


def test_read_total(full_engine):
    db = full_engine.begin_read()
    assert read_total(db, "order", "") == 4
    assert read_total(db, "order", "amount > 1000") == 0
    assert read_total(db, "order", "note is null") == 1


def test_read_total_matches_unpaged_items(full_engine):
    db = full_engine.begin_read()
    for flt in ["", "amount > 100", "note like '%i%'", "amount is null"]:
        assert read_total(db, "order", flt) == len(
            read_items(db, req("order", take=10_000), max_take=None)
        ) if flt == "" else True
        assert read_total(db, "order", flt) == len(
            read_items(db, req("order", filter_expression=flt, take=10_000), max_take=None)
        )


# -- aggregate ---------------------------------------------------------------------


def test_read_table_payload_shape(full_engine):
    payload = read_table(full_engine.begin_read(), req("order", take=2, order_expression="id desc"))
    assert [f.name for f in payload.fields] == ["id", "customer_id", "amount", "note"]
    assert len(payload.relations) == 0
    assert payload.total == 4
    assert len(payload.items) == 2
    assert len(payload.row_ids) == 2
    for row in payload.items:
        assert len(row) == len(payload.fields)
    assert payload.total >= len(payload.items)


def test_read_table_compositional_equivalence(full_engine):
    rng = random.Random(11)
    db = full_engine.begin_read()
    filters = ["", "amount > 100", "note is not null", "customer_id = 1 or amount < 100"]
    orders = ["", "amount desc", "note asc, id desc"]
    for _ in range(100):
        r = req(
            rng.choice(["order", "customer"]),
            skip=rng.randrange(0, 4),
            take=rng.randrange(0, 5),
            order_expression=rng.choice(orders) if rng.random() < 0.7 else "",
            filter_expression=rng.choice(filters) if rng.random() < 0.7 else "",
        )
        if r.table_name == "customer":
            r = req("customer", skip=r.skip, take=r.take)
        payload = read_table(db, r)
        assert payload.fields == tuple(read_fields(db, r.table_name))
        assert payload.relations == tuple(read_relations(db, r.table_name))
        assert [list(row) for row in payload.items] == read_items(db, r)
        assert payload.total == read_total(db, r.table_name, r.filter_expression)


def test_read_table_no_partial_payload_on_error(full_engine):
    with pytest.raises(ParseError):
        read_table(full_engine.begin_read(), req("order", filter_expression="broken ="))


def test_pipeline_matches_oracle(full_engine):
    rng = random.Random(2024)
    engine = Engine(validate_commits=True)
    with engine.begin_write() as txn:
        txn.apply_schema_change(
            schema_change_from_json(
                {
                    "kind": "create-table",
                    "table": "data",
                    "columns": [
                        {"name": c.name, "data_type": c.data_type.value, "is_nullable": True}
                        | ({"max_length": c.max_length} if c.max_length is not None else {})
                        for c in random_columns(rng)
                    ],
                }
            )
        )
        txn.commit()
    columns = engine.begin_read().table("data").columns
    with engine.begin_write() as txn:
        for _, row in random_rows(rng, columns, 120):
            txn.insert("data", row)
        txn.commit()
    db = engine.begin_read()
    rows = db.scan("data")
    dict_rows = rows_as_dicts(columns, rows)
    for _ in range(60):
        expr = random_filter(rng, columns, rows)
        spec = random_order(rng, columns)
        skip, take = rng.randrange(0, 20), rng.randrange(0, 40)
        r = req(
            "data",
            skip=skip,
            take=take,
            order_expression=render_order(spec),
            filter_expression=render_filter(expr),
        )
        want_page, want_total = oracle.run_query(expr, spec, dict_rows, skip, take)
        assert read_total(db, "data", r.filter_expression) == want_total
        got = read_table(db, r)
        assert list(got.row_ids) == [rid for rid, _ in want_page]
        assert got.total == want_total


# -- writes -------------------------------------------------------------------------


def test_create_item(full_engine):
    before = read_total(full_engine.begin_read(), "customer")
    row_id, epoch = create_item(full_engine, "customer", ["7", "Dana"])
    assert row_id == 4
    assert epoch == full_engine.begin_read().epoch
    assert read_total(full_engine.begin_read(), "customer") == before + 1


def test_create_item_arity_and_conversion(full_engine):
    with pytest.raises(ArityMismatch):
        create_item(full_engine, "customer", ["7"])
    with pytest.raises(ConversionError):
        create_item(full_engine, "customer", ["not-an-int", "Dana"])
    with pytest.raises(UnknownTable):
        create_item(full_engine, "ghost", [])


def test_update_and_delete_item(full_engine):
    update_item(full_engine, "customer", 1, ["1", "Alicia"])
    db = full_engine.begin_read()
    assert read_items(db, req("customer", filter_expression="id = 1"))[0][1] == "Alicia"
    delete_item(full_engine, "order", 4)
    assert read_total(full_engine.begin_read(), "order") == 3


def test_null_cells_round_trip(full_engine):
    row_id, _ = create_item(full_engine, "order", ["9", "1", None, None])
    db = full_engine.begin_read()
    got = read_items(db, req("order", filter_expression="id = 9"))
    assert got == [["9", "1", None, None]]


def test_relation_field_duality(full_engine):
    # every relation of t matches exactly one FK field descriptor in the
    # referencing table, pointing back at t
    db = full_engine.begin_read()
    for table in db.tables:
        for rel in read_relations(db, table):
            fields = read_fields(db, rel.fk_table)
            hits = [
                f
                for f in fields
                if f.name == rel.fk_field
                and f.constraint == "FOREIGN KEY"
                and f.pk_table == table
                and f.pk_field == rel.pk_field
            ]
            assert len(hits) == 1


def test_change_schema_live(full_engine):
    change_schema(
        full_engine,
        schema_change_from_json(
            {
                "kind": "add-column",
                "table": "order",
                "column": {"name": "memo", "data_type": "varchar", "max_length": -1},
            }
        ),
    )
    fields = read_fields(full_engine.begin_read(), "order")
    assert fields[-1].name == "memo" and fields[-1].max_length == -1
    # existing rows gained a null cell, visible in the very next read
    items = read_items(full_engine.begin_read(), req("order", take=1))
    assert items[0][4] is None
