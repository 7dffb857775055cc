"""HTTP service exposing the ruin toolkit.

One POST endpoint per command, all taking the same :class:`RunConfig`
document.  Malformed configurations come back as 422 with the offending
field path; numerical failures as 500 with the failure kind.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .commands import cmd_bounds, cmd_describe, cmd_ruin, cmd_simulate, cmd_transform
from .errors import ConfigError, NumericalError
from .schemas import (
    BoundsResponse,
    CurveResponse,
    RunConfig,
    SimulateResponse,
    TableResponse,
    TransformResponse,
)

app = FastAPI(
    title="ruinkit",
    version="0.1.0",
    description="Ruin probabilities and first-passage transforms for risk processes "
                "with dependent phase-type claims.",
)


@app.exception_handler(ConfigError)
async def _config_error(_request: Request, exc: ConfigError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc), "field": exc.field})


@app.exception_handler(NumericalError)
async def _numerical_error(_request: Request, exc: NumericalError) -> JSONResponse:
    return JSONResponse(status_code=500, content={"detail": str(exc), "kind": type(exc).__name__})


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.post("/describe", response_model=TableResponse)
def describe(cfg: RunConfig) -> TableResponse:
    return cmd_describe(cfg)


@app.post("/ruin", response_model=CurveResponse)
def ruin(cfg: RunConfig) -> CurveResponse:
    return cmd_ruin(cfg)


@app.post("/transform", response_model=TransformResponse)
def transform(cfg: RunConfig) -> TransformResponse:
    return cmd_transform(cfg)


@app.post("/bounds", response_model=BoundsResponse)
def bounds(cfg: RunConfig) -> BoundsResponse:
    return cmd_bounds(cfg)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(cfg: RunConfig) -> SimulateResponse:
    return cmd_simulate(cfg)
