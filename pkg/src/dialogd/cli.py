"""Command-line entry point: ``dialogd --port N --data-dir PATH ...``.

Every option can also come from the environment with a DIALOGD_ prefix
(DIALOGD_PORT, DIALOGD_DATA_DIR, ...); explicit flags win.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import DialogdError
from .server import ServerConfig, serve


@click.command(context_settings={"auto_envvar_prefix": "DIALOGD"})
@click.option("--port", type=int, default=8080, show_default=True, help="TCP port to listen on.")
@click.option(
    "--data-dir",
    type=click.Path(path_type=Path, file_okay=False),
    required=True,
    help="Directory for the snapshot and journal files.",
)
@click.option(
    "--seed",
    "seed_schema",
    type=click.Path(path_type=Path, exists=True, dir_okay=False),
    default=None,
    help="JSON list of schema changes applied once, when the database is empty.",
)
@click.option("--max-take", type=int, default=1000, show_default=True, help="Maximum page size.")
@click.option(
    "--checkpoint-every",
    type=int,
    default=100,
    show_default=True,
    help="Commits between automatic snapshot checkpoints.",
)
@click.option("--host", default="127.0.0.1", show_default=True, help="Interface to bind.")
@click.option(
    "--static-dir",
    type=click.Path(path_type=Path, file_okay=False),
    default=None,
    help="Directory with the web UI bundle to serve at / (frontend/dist).",
)
def main(port, data_dir, seed_schema, max_take, checkpoint_every, host, static_dir):
    """Self-contained dynamic-data-model server."""
    try:
        config = ServerConfig(
            data_dir=data_dir,
            port=port,
            host=host,
            max_take=max_take,
            checkpoint_every=checkpoint_every,
            seed_schema=seed_schema,
            static_dir=static_dir,
        )
        serve(config)
    except (DialogdError, ValueError) as e:
        click.echo(f"dialogd: {e}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
