"""HTTP/1.1 + JSON edge: routes the dialog operations, owns configuration
and lifecycle (recover, seed, serve, checkpoint on shutdown), and serves the
static UI bundle at / when one is configured.

Endpoint reference: docs/protocol.md.
"""

from __future__ import annotations

import json
import logging
import socket
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import dialog
from .errors import DialogdError, InvalidRequest, PortInUse, SeedSchemaInvalid
from .schema import schema_change_from_json
from .storage import Engine

logger = logging.getLogger(__name__)


@dataclass
class ServerConfig:
    data_dir: Path | None
    port: int = 8080
    host: str = "127.0.0.1"
    max_take: int = 1000
    checkpoint_every: int = 100
    seed_schema: Path | None = None
    static_dir: Path | None = None

    def __post_init__(self):
        if self.max_take < 1:
            raise ValueError("max_take must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


def create_app(engine: Engine, config: ServerConfig, *, own_engine: bool = False) -> FastAPI:
    """Build the API app. With ``own_engine`` the app closes (and therefore
    checkpoints) the engine during graceful shutdown — uvicorn re-raises
    termination signals after the lifespan exits, so this is the reliable
    shutdown hook."""

    @asynccontextmanager
    async def lifespan(_app):
        yield
        if own_engine:
            engine.close()

    app = FastAPI(title="dialogd", docs_url=None, redoc_url=None, lifespan=lifespan)
    max_take = config.max_take

    @app.exception_handler(DialogdError)
    async def dialogd_error(request: Request, exc: DialogdError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_json())

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"error": "InvalidRequest", "message": str(exc)}
        )

    async def body_json(request: Request):
        try:
            return json.loads(await request.body())
        except ValueError:
            raise InvalidRequest("request body is not valid JSON") from None

    def cells_from(doc) -> list[str | None]:
        if not isinstance(doc, list) or not all(
            cell is None or isinstance(cell, str) for cell in doc
        ):
            raise InvalidRequest("expected a JSON array of strings and nulls")
        return doc

    # -- reads (side-effect free, any number in parallel) --------------------

    @app.get("/api/tables")
    def get_tables():
        return [h.to_json() for h in dialog.read_table_headers(engine.begin_read())]

    @app.get("/api/tables/{table}/fields")
    def get_fields(table: str):
        return [f.to_json() for f in dialog.read_fields(engine.begin_read(), table)]

    @app.get("/api/tables/{table}/relations")
    def get_relations(table: str):
        return [r.to_json() for r in dialog.read_relations(engine.begin_read(), table)]

    @app.get("/api/tables/{table}/items")
    def get_items(
        table: str,
        skip: int = 0,
        take: int | None = None,
        order: str = "",
        filter_: str = Query("", alias="filter"),
    ):
        req = dialog.ReadItemsRequest(
            table, skip, max_take if take is None else take, order, filter_
        )
        return dialog.read_items(engine.begin_read(), req, max_take)

    @app.get("/api/tables/{table}/total")
    def get_total(table: str, filter_: str = Query("", alias="filter")):
        return {"Total": dialog.read_total(engine.begin_read(), table, filter_)}

    @app.get("/api/tables/{table}")
    def get_table(
        table: str,
        skip: int = 0,
        take: int | None = None,
        order: str = "",
        filter_: str = Query("", alias="filter"),
    ):
        req = dialog.ReadItemsRequest(
            table, skip, max_take if take is None else take, order, filter_
        )
        return dialog.read_table(engine.begin_read(), req, max_take).to_json()

    # -- writes (one transaction per message, committed before replying) -----

    @app.post("/api/tables/{table}/items")
    async def post_item(table: str, request: Request):
        cells = cells_from(await body_json(request))
        row_id, epoch = dialog.create_item(engine, table, cells)
        return {"RowId": row_id, "Epoch": epoch}

    @app.put("/api/tables/{table}/items/{row_id}")
    async def put_item(table: str, row_id: int, request: Request):
        cells = cells_from(await body_json(request))
        epoch = dialog.update_item(engine, table, row_id, cells)
        return {"Epoch": epoch}

    @app.delete("/api/tables/{table}/items/{row_id}")
    async def delete_item(table: str, row_id: int):
        epoch = dialog.delete_item(engine, table, row_id)
        return {"Epoch": epoch}

    @app.post("/api/schema")
    async def post_schema(request: Request):
        change = schema_change_from_json(await body_json(request))
        epoch = dialog.change_schema(engine, change)
        return {"Epoch": epoch}

    if config.static_dir is not None and config.static_dir.is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {"name": "dialogd", "api": "/api/tables"}

    return app


def seed_if_empty(engine: Engine, seed_path: Path) -> None:
    """Apply a seed file (JSON list of schema-change documents) in one
    transaction, but only when the database holds nothing yet."""
    state = engine.begin_read()
    if state.epoch != 0 or state.tables:
        return
    try:
        docs = json.loads(seed_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise SeedSchemaInvalid(f"cannot read seed schema {seed_path}: {e}") from None
    if not isinstance(docs, list):
        raise SeedSchemaInvalid("seed schema must be a JSON list of schema changes")
    try:
        changes = [schema_change_from_json(doc) for doc in docs]
        with engine.begin_write() as txn:
            for change in changes:
                txn.apply_schema_change(change)
            txn.commit()
    except DialogdError as e:
        raise SeedSchemaInvalid(f"seed schema failed to apply: {e.message}") from None
    logger.info("applied seed schema %s (%d changes)", seed_path, len(docs))


def check_port_free(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((host, port))
        except OSError as e:
            raise PortInUse(f"cannot bind {host}:{port}: {e}") from None


def start_engine(config: ServerConfig) -> Engine:
    """Recover (or initialize) the engine and apply the seed schema if the
    database is empty."""
    if config.data_dir is not None:
        try:
            config.data_dir.mkdir(parents=True, exist_ok=True)
            probe = config.data_dir / ".writable"
            probe.touch()
            probe.unlink()
        except OSError as e:
            raise ValueError(f"data_dir {config.data_dir} is not writable: {e}") from None
    engine = Engine(config.data_dir, checkpoint_every=config.checkpoint_every)
    if config.seed_schema is not None:
        seed_if_empty(engine, config.seed_schema)
    return engine


def serve(config: ServerConfig) -> None:
    """Run until shutdown signal; checkpoints on the way out."""
    import uvicorn

    check_port_free(config.host, config.port)
    engine = start_engine(config)
    try:
        app = create_app(engine, config, own_engine=True)
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        engine.close()
