"""Walkthrough: grow a data model at runtime and watch clients discover it.

Runs entirely in-process (no HTTP): an empty engine becomes a two-table
model with a foreign key, rows arrive, the schema changes again, and every
read between the steps reflects the latest committed state.

    python3 demos/01_model_discovery.py
"""

from dialogd import (
    Engine,
    ReadItemsRequest,
    Value,
    change_schema,
    create_item,
    read_fields,
    read_relations,
    read_table,
    read_table_headers,
    schema_change_from_json,
)


def show(title, obj):
    print(f"\n== {title}")
    print(obj)


engine = Engine()  # in-memory; pass a path to make it durable

show("fresh server: table list", [h.to_json() for h in read_table_headers(engine.begin_read())])

change_schema(engine, schema_change_from_json({
    "kind": "create-table",
    "table": "customer",
    "columns": [
        {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
        {"name": "name", "data_type": "varchar", "max_length": 100, "is_nullable": False},
    ],
}))
change_schema(engine, schema_change_from_json({
    "kind": "create-table",
    "table": "order",
    "columns": [
        {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
        {"name": "customer_id", "data_type": "int", "is_nullable": False},
        {"name": "amount", "data_type": "real", "is_nullable": True},
    ],
}))
change_schema(engine, schema_change_from_json({
    "kind": "add-foreign-key",
    "table": "order", "column": "customer_id",
    "pk_table": "customer", "pk_column": "id",
}))

show("table list after three schema changes",
     [h.to_json() for h in read_table_headers(engine.begin_read())])
show("order fields (note the FOREIGN KEY metadata the UI navigates with)",
     [f.to_json() for f in read_fields(engine.begin_read(), "order")])
show("who references customer?",
     [r.to_json() for r in read_relations(engine.begin_read(), "customer")])

# rows go in through the same string-typed surface the HTTP edge uses
create_item(engine, "customer", ["1", "Alice"])
create_item(engine, "customer", ["2", "Bob"])
for oid, cid, amount in [(1, 1, "120.5"), (2, 1, "80.0"), (3, 2, None)]:
    create_item(engine, "order", [str(oid), str(cid), amount])

payload = read_table(engine.begin_read(), ReadItemsRequest(
    "order", skip=0, take=10, order_expression="amount desc",
    filter_expression="amount > 50 or amount is null",
))
show("one aggregate read: fields + relations + items + total, one snapshot",
     payload.to_json())

# evolve the model while "running": the very next read sees the new column
change_schema(engine, schema_change_from_json({
    "kind": "add-column", "table": "order",
    "column": {"name": "note", "data_type": "varchar", "max_length": -1},
}))
show("order items right after add-column (new cells are null)",
     read_table(engine.begin_read(), ReadItemsRequest("order", take=3)).to_json()["Items"])

# the storage engine enforces the model: this violates the FK
try:
    create_item(engine, "order", ["9", "777", None, None])
except Exception as e:
    show("referential integrity still holds", f"{type(e).__name__}: {e}")
