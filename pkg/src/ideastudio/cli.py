"""Command line entry points: serve the API, export sessions, print config."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import uvicorn

from .config import SAMPLE_CONFIG, ConfigError, ServiceConfig, force_mock, load_config
from .store import SessionStore, StorageFailure, UnknownSession


@click.group()
def main() -> None:
    """Ideation service for environment concept design."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML config file; defaults to an all-mock setup.")
@click.option("--listen", default=None, help="host:port to bind (overrides config).")
@click.option("--mock", is_flag=True, help="Force all providers to their deterministic mocks.")
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None,
              help="Store root directory (overrides config).")
@click.option("--static", "static_dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Directory of built UI assets to serve at / (overrides config).")
def serve(config_path, listen, mock, store_dir, static_dir) -> None:
    """Run the HTTP service."""
    try:
        config = load_config(config_path) if config_path else ServiceConfig()
    except ConfigError as err:
        raise click.ClickException(str(err))
    updates = {}
    if listen:
        updates["listen"] = listen
    if store_dir:
        updates["store_root"] = Path(store_dir)
    if static_dir:
        updates["static_dir"] = Path(static_dir)
    if updates:
        config = config.model_copy(update=updates)
    if mock:
        config = force_mock(config)

    from .api import create_app

    app = create_app(config)
    click.echo(f"serving on http://{config.host}:{config.port} (store: {config.store_root})")
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


@main.command("example-config")
def example_config() -> None:
    """Print a commented sample configuration file."""
    click.echo(SAMPLE_CONFIG, nl=False)


@main.command()
@click.argument("session_id")
@click.option("--store", "store_dir", type=click.Path(file_okay=False, exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Archive path; defaults to <session-id>.tar.gz")
def export(session_id, store_dir, out_path) -> None:
    """Export one session (log plus referenced image blobs) as a tar.gz."""
    try:
        store = SessionStore(store_dir)
        out = Path(out_path) if out_path else Path(f"{session_id}.tar.gz")
        store.export_session(session_id, out)
    except UnknownSession:
        raise click.ClickException(f"no session {session_id!r} in {store_dir}")
    except StorageFailure as err:
        raise click.ClickException(str(err))
    click.echo(f"exported {session_id} -> {out}")


@main.command()
@click.option("--store", "store_dir", type=click.Path(file_okay=False, exists=True), required=True)
def sessions(store_dir) -> None:
    """List sessions in a store with their usage counters."""
    try:
        store = SessionStore(store_dir)
    except StorageFailure as err:
        raise click.ClickException(str(err))
    rows = store.list_sessions()
    if not rows:
        click.echo("no sessions")
        return
    for session in rows:
        c = session.counters
        click.echo(
            f"{session.id}  {session.name!r}  cycles={c.cycles} "
            f"ideas={c.ideas_generated} used={c.ideas_used}"
        )


if __name__ == "__main__":
    sys.exit(main())
