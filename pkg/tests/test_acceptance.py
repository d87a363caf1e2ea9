"""Acceptance suite: one test per release criterion, each printing a
PASS line on success. Criteria 1-8 cover the server/library alone; the web
client has its own suite under frontend/.
"""

from __future__ import annotations

import json
import random
import signal
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

import oracle
from conftest import REFERENCE_SCHEMA, apply_reference_schema, seed_reference_rows
from generators import (
    random_columns,
    random_filter,
    random_order,
    random_rows,
    random_value,
    rows_as_dicts,
)
from injection_corpus import INJECTION_STRINGS
from dialogd.catalog import info_columns_joined, info_relations, info_tables
from dialogd.dialog import (
    ReadItemsRequest,
    read_fields,
    read_items,
    read_relations,
    read_table,
    read_table_headers,
    read_total,
)
from dialogd.errors import (
    DialogdError,
    ExprTypeError,
    LikeOnNonText,
    ParseError,
    UnknownField,
    UnknownTable,
)
from dialogd.expression import render_filter, render_order
from dialogd.model import NULL, DataType, Value
from dialogd.persistence import JOURNAL_FILE
from dialogd.schema import schema_change_from_json
from dialogd.server import ServerConfig, create_app
from dialogd.storage import Engine

GOLDEN = Path(__file__).parent / "golden"


def ok(n: int, name: str) -> None:
    print(f"ACCEPTANCE {n} {name}: PASS", flush=True)


def make_client(engine, **cfg) -> TestClient:
    return TestClient(
        create_app(engine, ServerConfig(data_dir=None, **cfg)), raise_server_exceptions=False
    )


# -- 1: live dynamic model -----------------------------------------------------


def test_1_live_dynamic_model():
    t0 = time.monotonic()
    engine = Engine(validate_commits=True)
    client = make_client(engine)

    def tables():
        return [t["TableName"] for t in client.get("/api/tables").json()]

    def field_names(table):
        r = client.get(f"/api/tables/{table}/fields")
        assert r.status_code == 200
        return [f["Name"] for f in r.json()]

    # three tables with an FK chain, created one request at a time; each is
    # visible on the immediately following request
    chain = [
        ("region", None),
        ("warehouse", "region"),
        ("shipment", "warehouse"),
    ]
    for name, parent in chain:
        columns = [{"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"}]
        if parent:
            columns.append({"name": f"{parent}_id", "data_type": "int", "is_nullable": False})
        assert client.post(
            "/api/schema", json={"kind": "create-table", "table": name, "columns": columns}
        ).status_code == 200
        assert name in tables()
        if parent:
            assert client.post(
                "/api/schema",
                json={
                    "kind": "add-foreign-key",
                    "table": name,
                    "column": f"{parent}_id",
                    "pk_table": parent,
                    "pk_column": "id",
                },
            ).status_code == 200
            fk = next(
                f
                for f in client.get(f"/api/tables/{name}/fields").json()
                if f["Name"] == f"{parent}_id"
            )
            assert fk["Constraint"] == "FOREIGN KEY" and fk["PK_TableName"] == parent

    # 50 rows across the chain
    for i in range(1, 11):
        assert client.post("/api/tables/region/items", json=[str(i)]).status_code == 200
    for i in range(1, 21):
        r = client.post("/api/tables/warehouse/items", json=[str(i), str(1 + i % 10)])
        assert r.status_code == 200
    for i in range(1, 21):
        r = client.post("/api/tables/shipment/items", json=[str(i), str(1 + i % 20)])
        assert r.status_code == 200
    assert client.get("/api/tables/region/total").json()["Total"] == 10
    assert client.get("/api/tables/warehouse/total").json()["Total"] == 20
    assert client.get("/api/tables/shipment/total").json()["Total"] == 20

    # add a column: reflected in the very next reads
    assert client.post(
        "/api/schema",
        json={
            "kind": "add-column",
            "table": "shipment",
            "column": {"name": "note", "data_type": "varchar", "max_length": -1},
        },
    ).status_code == 200
    assert field_names("shipment") == ["id", "warehouse_id", "note"]
    payload = client.get("/api/tables/shipment", params={"take": 5}).json()
    assert all(len(row) == 3 for row in payload["Items"])

    # drop a constraint: the FK disappears from field metadata immediately
    assert client.post(
        "/api/schema", json={"kind": "drop-constraint", "constraint": "fk_shipment_warehouse_id"}
    ).status_code == 200
    fk = next(f for f in client.get("/api/tables/shipment/fields").json() if f["Name"] == "warehouse_id")
    assert fk["Constraint"] is None and fk["PK_TableName"] is None
    assert client.get("/api/tables/warehouse/relations").json() == []

    elapsed = time.monotonic() - t0
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    ok(1, "live dynamic model, zero restarts")


# -- 2: catalog conformance -------------------------------------------------------


def test_2_catalog_conformance(ref_engine):
    db = ref_engine.begin_read()
    assert info_tables(db) == json.loads((GOLDEN / "info_tables.json").read_text())
    assert info_columns_joined(db, "customer") == json.loads(
        (GOLDEN / "info_columns_customer.json").read_text()
    )
    assert info_columns_joined(db, "order") == json.loads(
        (GOLDEN / "info_columns_order.json").read_text()
    )
    assert info_relations(db, "customer") == json.loads(
        (GOLDEN / "info_relations_customer.json").read_text()
    )
    # unlimited text reports -1
    note = next(r for r in info_columns_joined(db, "order") if r["column_name"] == "note")
    assert note["character_maximum_length"] == -1
    # the referenced-table component always equals the parameter
    for table in db.tables:
        for rel in read_relations(db, table):
            assert rel.pk_table == table
    ok(2, "catalog conformance golden match")


# -- 3: expression oracle equivalence ----------------------------------------------


def test_3_expression_oracle_equivalence():
    rng = random.Random(360)
    checked = 0
    for table_round in range(5):
        engine = Engine()
        columns_spec = random_columns(rng)
        with engine.begin_write() as txn:
            txn.apply_schema_change(
                schema_change_from_json(
                    {
                        "kind": "create-table",
                        "table": "t",
                        "columns": [
                            {"name": c.name, "data_type": c.data_type.value, "is_nullable": True}
                            | ({"max_length": c.max_length} if c.max_length is not None else {})
                            for c in columns_spec
                        ],
                    }
                )
            )
            txn.commit()
        columns = engine.begin_read().table("t").columns
        with engine.begin_write() as txn:
            for _, row in random_rows(rng, columns, 200):
                txn.insert("t", row)
            txn.commit()
        db = engine.begin_read()
        rows = db.scan("t")
        dict_rows = rows_as_dicts(columns, rows)
        for _ in range(200):
            expr = random_filter(rng, columns, rows)
            spec = random_order(rng, columns)
            skip = rng.randrange(0, 30)
            take = rng.randrange(0, 60)
            req = ReadItemsRequest(
                "t",
                skip=skip,
                take=take,
                order_expression=render_order(spec),
                filter_expression=render_filter(expr),
            )
            want_page, want_total = oracle.run_query(expr, spec, dict_rows, skip, take)
            payload = read_table(db, req)
            assert payload.total == want_total, render_filter(expr)
            assert list(payload.row_ids) == [rid for rid, _ in want_page], (
                render_filter(expr),
                render_order(spec),
            )
            checked += 1
    assert checked >= 1000
    ok(3, f"oracle equivalence on {checked} random queries")


# -- 4: aggregate consistency under contention ---------------------------------------


def test_4_aggregate_consistency_under_contention():
    t0 = time.monotonic()
    engine = Engine()
    apply_reference_schema(engine)
    seed_reference_rows(engine)

    stop = threading.Event()
    problems: list[str] = []
    payload_counts = [0] * 8

    def reader(slot: int):
        rng = random.Random(1000 + slot)
        while not stop.is_set():
            db = engine.begin_read()
            headers = read_table_headers(db)
            if not headers:
                continue
            table = rng.choice(headers).table_name
            try:
                payload = read_table(db, ReadItemsRequest(table, take=50))
            except UnknownTable:
                continue
            width = len(payload.fields)
            if any(len(row) != width for row in payload.items):
                problems.append(f"width mismatch on {table}")
            if payload.total < len(payload.items):
                problems.append(f"total < items on {table}")
            if len(payload.row_ids) != len(payload.items):
                problems.append(f"row_ids misaligned on {table}")
            payload_counts[slot] += 1

    threads = [threading.Thread(target=reader, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()

    rng = random.Random(77)
    committed = 0
    made_tables = 0
    added_cols = 0
    next_pk = 1000
    while committed < 200:
        try:
            with engine.begin_write() as txn:
                roll = rng.random()
                names = txn.table_names()
                if roll < 0.1 or len(names) < 2:
                    made_tables += 1
                    txn.apply_schema_change(
                        schema_change_from_json(
                            {
                                "kind": "create-table",
                                "table": f"t{made_tables}",
                                "columns": [
                                    {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
                                    {"name": "payload", "data_type": "varchar", "max_length": -1, "is_nullable": True},
                                ],
                            }
                        )
                    )
                elif roll < 0.2:
                    added_cols += 1
                    txn.apply_schema_change(
                        schema_change_from_json(
                            {
                                "kind": "add-column",
                                "table": rng.choice(names),
                                "column": {"name": f"col{added_cols}", "data_type": "real", "is_nullable": True},
                            }
                        )
                    )
                elif roll < 0.27:
                    victim = rng.choice(names)
                    txn.apply_schema_change(
                        schema_change_from_json({"kind": "drop-table", "table": victim})
                    )
                else:
                    table = rng.choice(names)
                    cols = txn.columns_of(table)
                    values = []
                    for c in cols:
                        if c.name == "id":
                            values.append(Value.of_int(next_pk))
                            next_pk += 1
                        else:
                            values.append(random_value(rng, c.data_type, null_rate=0.3))
                    txn.insert(table, values)
                committed_epoch = txn.commit()
                committed += 1
        except DialogdError:
            continue
    stop.set()
    for t in threads:
        t.join(timeout=10)

    elapsed = time.monotonic() - t0
    assert problems == []
    assert committed == 200
    assert sum(payload_counts) > 100
    assert all(not t.is_alive() for t in threads)
    assert elapsed < 30.0, f"took {elapsed:.2f}s"
    ok(4, f"{sum(payload_counts)} consistent payloads under 200-txn storm in {elapsed:.1f}s")


# -- 5: compositional equivalence ------------------------------------------------------


def test_5_compositional_equivalence():
    rng = random.Random(550)
    engine = Engine()
    columns_spec = random_columns(rng)
    with engine.begin_write() as txn:
        txn.apply_schema_change(
            schema_change_from_json(
                {
                    "kind": "create-table",
                    "table": "t",
                    "columns": [
                        {"name": c.name, "data_type": c.data_type.value, "is_nullable": True}
                        | ({"max_length": c.max_length} if c.max_length is not None else {})
                        for c in columns_spec
                    ],
                }
            )
        )
        txn.commit()
    columns = engine.begin_read().table("t").columns
    with engine.begin_write() as txn:
        for _, row in random_rows(rng, columns, 150):
            txn.insert("t", row)
        txn.commit()

    db = engine.begin_read()  # the one shared snapshot
    rows = db.scan("t")
    for _ in range(100):
        req = ReadItemsRequest(
            "t",
            skip=rng.randrange(0, 20),
            take=rng.randrange(0, 50),
            order_expression=render_order(random_order(rng, columns)),
            filter_expression=render_filter(random_filter(rng, columns, rows)),
        )
        payload = read_table(db, req)
        assert payload.fields == tuple(read_fields(db, "t"))
        assert payload.relations == tuple(read_relations(db, "t"))
        assert [list(r) for r in payload.items] == read_items(db, req)
        assert payload.total == read_total(db, "t", req.filter_expression)
    ok(5, "read_table equals its four components on one snapshot")


# -- 6: durability ---------------------------------------------------------------------


@pytest.mark.slow
def test_6_durability_hard_kill(tmp_path):
    data_dir = tmp_path / "data"
    dump_path = tmp_path / "pre_kill.dump"
    child = subprocess.Popen(
        [sys.executable, str(Path(__file__).parent / "_durability_child.py"), str(data_dir), str(dump_path), "424242"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = child.stdout.readline()
        assert line.strip() == "READY", (line, child.stderr.read() if child.poll() else "")
        child.kill()  # SIGKILL: no shutdown path runs
        child.wait(timeout=10)
    finally:
        if child.poll() is None:
            child.kill()
            child.wait(timeout=10)
    pre_kill = dump_path.read_bytes()
    recovered = Engine(data_dir)
    assert recovered.dump() == pre_kill

    def event_row(txn, pk):
        cols = txn.columns_of("event")
        return [Value.of_int(pk)] + [NULL] * (len(cols) - 1)

    # fault injection: a torn final record recovers to the last complete one
    with recovered.begin_write() as txn:
        txn.insert("event", event_row(txn, 999_999))
        txn.commit()
    intact = recovered.dump()
    with recovered.begin_write() as txn:
        txn.insert("event", event_row(txn, 999_998))
        txn.commit()
    journal = data_dir / JOURNAL_FILE
    journal.write_bytes(journal.read_bytes()[:-5])
    after_fault = Engine(data_dir)
    assert after_fault.dump() == intact
    ok(6, "hard-kill recovery byte-identical; torn journal tail dropped")


# -- 7: injection resistance --------------------------------------------------------------


def test_7_injection_resistance(full_engine):
    before = full_engine.dump()
    client = make_client(full_engine)
    parse_errors = 0
    harmless = 0
    for text in INJECTION_STRINGS:
        db = full_engine.begin_read()
        try:
            read_items(db, ReadItemsRequest("order", filter_expression=text))
            read_total(db, "order", text)
            harmless += 1
        except ParseError:
            parse_errors += 1
        except (UnknownField, ExprTypeError, LikeOnNonText):
            harmless += 1
        # the HTTP edge must never turn it into anything but 200/400
        r = client.get("/api/tables/order/items", params={"filter": text})
        assert r.status_code in (200, 400), (text, r.status_code)
    assert parse_errors + harmless == len(INJECTION_STRINGS) >= 50
    assert full_engine.dump() == before, "injection corpus changed engine state"
    ok(7, f"{len(INJECTION_STRINGS)} injection payloads neutralized ({parse_errors} parse errors)")


# -- 8: desk-scale performance ----------------------------------------------------------------


def test_8_desk_scale_performance():
    rng = random.Random(88)
    engine = Engine()
    with engine.begin_write() as txn:
        txn.apply_schema_change(
            schema_change_from_json(
                {
                    "kind": "create-table",
                    "table": "big",
                    "columns": [
                        {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
                        {"name": "amount", "data_type": "real", "is_nullable": True},
                        {"name": "label", "data_type": "varchar", "max_length": 64, "is_nullable": True},
                        {"name": "flag", "data_type": "bit", "is_nullable": True},
                    ],
                }
            )
        )
        txn.commit()
    with engine.begin_write() as txn:
        for i in range(10_000):
            txn.insert(
                "big",
                [
                    Value.of_int(i),
                    NULL if rng.random() < 0.05 else Value.of_real(rng.uniform(0, 1000)),
                    Value.of_varchar(f"item-{i:05d}-{'x' if rng.random() < 0.3 else 'y'}"),
                    Value.of_bit(rng.random() < 0.5),
                ],
            )
        txn.commit()
    client = make_client(engine)
    params = {"filter": "amount > 500 and label like '%x%'", "order": "amount desc", "take": 100}
    r = client.get("/api/tables/big", params=params)
    assert r.status_code == 200 and len(r.json()["Items"]) == 100  # warm-up + sanity
    best = min(
        _timed_get(client, params) for _ in range(3)
    )
    assert best < 0.100, f"aggregate GET took {best * 1e3:.1f} ms"
    ok(8, f"10k-row filtered+sorted aggregate GET in {best * 1e3:.1f} ms")


def _timed_get(client, params):
    t0 = time.perf_counter()
    r = client.get("/api/tables/big", params=params)
    assert r.status_code == 200
    return time.perf_counter() - t0
