"""dialogd: a self-contained dynamic-data-model server.

The relational schema is created and edited at runtime through a dialog
protocol; clients discover tables, fields, relations and items interactively
and render UIs from metadata alone, with no rebuild or restart on schema
change.
"""

from .dialog import (
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
from .errors import DialogdError
from .model import (
    NULL,
    DataType,
    FieldDescriptor,
    RelationDescriptor,
    TableHeader,
    TablePayload,
    Value,
    compare_values,
    string_to_value,
    value_to_string,
)
from .schema import schema_change_from_json, schema_change_to_json
from .storage import Database, Engine, WriteTxn

__version__ = "0.1.0"

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
    "Engine",
    "Database",
    "WriteTxn",
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
    "schema_change_from_json",
    "schema_change_to_json",
    "DialogdError",
    "__version__",
]
