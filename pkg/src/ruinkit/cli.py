"""Thin command-line client.

Runs every command in-process by default: the config file is validated into
the same request schema the service uses and dispatched to the same handler.
With ``--server`` the config is POSTed to a running service instead.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import json
import sys

import click
import pydantic

from .commands import COMMANDS, render_csv
from .errors import ConfigError, NumericalError
from .schemas import (
    BoundsResponse,
    CurveResponse,
    RunConfig,
    SimulateResponse,
    TableResponse,
    TransformResponse,
)

_RESPONSE_TYPES = {
    "describe": TableResponse,
    "ruin": CurveResponse,
    "transform": TransformResponse,
    "bounds": BoundsResponse,
    "simulate": SimulateResponse,
}

CONFIG_EXIT = 2
NUMERICAL_EXIT = 3


def _load_config(path: str, seed: int | None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if seed is not None:
        raw.setdefault("command", {})["seed"] = seed
    try:
        return RunConfig.model_validate(raw)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        path_str = ".".join(str(p) for p in first["loc"])
        raise ConfigError(first["msg"], field=path_str) from exc


def _run_remote(server: str, command: str, cfg: RunConfig):
    import httpx

    url = server.rstrip("/") + "/" + command
    payload = json.loads(cfg.model_dump_json(by_alias=True))
    resp = httpx.post(url, json=payload, timeout=600.0)
    if resp.status_code == 422:
        detail = resp.json()
        raise ConfigError(str(detail.get("detail", detail)), field=detail.get("field"))
    if resp.status_code >= 500:
        raise NumericalError(str(resp.json().get("detail", resp.text)))
    resp.raise_for_status()
    return _RESPONSE_TYPES[command].model_validate(resp.json())


def _emit(command: str, response, out: str | None) -> int:
    csv = render_csv(command, response)
    if out:
        with open(out, "w") as fh:
            fh.write(csv)
    else:
        click.echo(csv, nl=False)
    if isinstance(response, CurveResponse) and response.error:
        click.echo(f"error: {response.error}", err=True)
        return NUMERICAL_EXIT
    return 0


def _run(command: str, config: str, out: str | None, seed: int | None, server: str | None) -> int:
    try:
        cfg = _load_config(config, seed)
        response = _run_remote(server, command, cfg) if server else COMMANDS[command](cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return CONFIG_EXIT
    except NumericalError as exc:
        click.echo(f"numerical failure: {type(exc).__name__}: {exc}", err=True)
        return NUMERICAL_EXIT
    return _emit(command, response, out)


def _command_options(fn):
    fn = click.option("--config", required=True, type=click.Path(), help="JSON run configuration")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="write CSV here instead of stdout")(fn)
    fn = click.option("--seed", type=int, default=None, help="override command.seed")(fn)
    fn = click.option("--server", default=None, help="POST to a running service instead of computing in-process")(fn)
    return fn


@click.group()
def main():
    """Ruin probabilities for risk processes with dependent phase-type claims."""


def _register(name: str, summary: str):
    @main.command(name=name, help=summary)
    @_command_options
    def _cmd(config, out, seed, server, _name=name):
        sys.exit(_run(_name, config, out, seed, server))


_register("describe", "Per-claim means, variances and correlations as CSV.")
_register("ruin", "Ruin-probability curve along a u-, c- or s-grid.")
_register("transform", "Joint ruin-time/deficit/claim-count transform value.")
_register("bounds", "Envelope parameters and ultimate-ruin bounds.")
_register("simulate", "Monte Carlo estimate of the transform.")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("ruinkit.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
