"""Implementations behind the service endpoints and CLI subcommands."""

from __future__ import annotations

import time

import numpy as np

from . import mph
from .bounds import bound_params, erlang_claims_ruin, exp_claims_ruin
from .embedding import PhArrivalProcess, PoissonProcess, build_fluid
from .errors import ConfigError, TruncationLimit
from .schemas import (
    BoundsResponse,
    CurveResponse,
    RunConfig,
    SimulateResponse,
    TableResponse,
    TransformResponse,
)
from .simulate import estimate_transform, generator_from_seed
from .solver import (
    RuinQuery,
    ruin_prob_by_claims,
    ruin_transform,
    transform_curve_in_s,
    transform_curve_in_u,
    ultimate_ruin,
)


def to_csv(columns: list[str], rows: list[list[float]]) -> str:
    """Render a deterministic CSV with a header row and 12 significant digits."""
    def cell(x):
        if isinstance(x, (int, np.integer)) or (isinstance(x, float) and x.is_integer() and abs(x) < 1e15):
            return str(int(x))
        return f"{x:.12g}"

    lines = [",".join(columns)]
    lines.extend(",".join(cell(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def cmd_describe(cfg: RunConfig) -> TableResponse:
    """Per-claim means, variances and neighbour correlations of the claim stream."""
    model = cfg.model.to_model()
    depth = cfg.command.depth
    columns = ["k", "mean", "variance", "corr_next"]
    if cfg.command.corr_matrix:
        columns += [f"corr_{j}" for j in range(1, depth + 1)]
    rows = []
    for k in range(1, depth + 1):
        row = [float(k), mph.marginal_mean(model, k), mph.marginal_variance(model, k),
               mph.correlation(model, k, k + 1)]
        if cfg.command.corr_matrix:
            row += [mph.correlation(model, k, j) for j in range(1, depth + 1)]
        rows.append(row)
    return TableResponse(columns=columns, rows=rows)


def cmd_ruin(cfg: RunConfig) -> CurveResponse:
    """Ruin-probability curve along a u-, c- or s-grid.

    With ``query.s`` set, each point is the probability of ruin within ``s``
    claims; without it, each point runs the ultimate-ruin doubling search.
    A truncation-cap failure ends the sweep and returns the partial curve
    with the error recorded.
    """
    proc_spec = cfg.require_process()
    if cfg.query.grid is None:
        raise ConfigError("the ruin command requires 'query.grid'", field="query.grid")
    grid = cfg.query.grid
    model = cfg.model.to_model()
    columns = [grid.param, "ruin_prob"]
    rows: list[list[float]] = []
    truncations: list[int] = []
    error = None

    def ultimate_or_fixed(blocks, u):
        if cfg.query.s is not None:
            return ruin_prob_by_claims(blocks, u, cfg.query.s), cfg.query.s
        value, s_used = ultimate_ruin(blocks, u, tol=cfg.query.tol, s_cap=cfg.query.s_cap)
        return value, s_used

    try:
        if grid.param == "u":
            blocks = build_fluid(model, proc_spec.to_process())
            us = grid.values()
            if cfg.query.s is not None:
                vals = transform_curve_in_u(blocks, 0.0, cfg.query.s, 0.0, us)
                for u, v in zip(us, vals):
                    rows.append([float(u), float(v)])
                    truncations.append(cfg.query.s)
            else:
                for u in us:
                    value, s_used = ultimate_or_fixed(blocks, float(u))
                    rows.append([float(u), value])
                    truncations.append(s_used)
        elif grid.param == "s":
            blocks = build_fluid(model, proc_spec.to_process())
            svals = grid.values()
            vals = transform_curve_in_s(blocks, 0.0, proc_spec.u, 0.0, svals)
            for s, v in zip(svals, vals):
                rows.append([float(s), float(v)])
                truncations.append(int(s))
        else:  # c-grid
            if not isinstance(proc_spec.to_process(), (PoissonProcess, PhArrivalProcess)):
                raise ConfigError("a c-grid needs a scalar premium rate", field="query.grid.param")
            for c in grid.values():
                spec_c = proc_spec.model_copy(update={"c": float(c)})
                blocks = build_fluid(model, spec_c.to_process())
                value, s_used = ultimate_or_fixed(blocks, proc_spec.u)
                rows.append([float(c), value])
                truncations.append(s_used)
    except TruncationLimit as exc:
        error = str(exc)
    return CurveResponse(columns=columns, rows=rows, truncations=truncations, error=error)


def cmd_transform(cfg: RunConfig) -> TransformResponse:
    """Single transform value with the truncation used and elapsed time."""
    proc_spec = cfg.require_process()
    if cfg.query.s is None:
        raise ConfigError("the transform command requires 'query.s'", field="query.s")
    model = cfg.model.to_model()
    blocks = build_fluid(model, proc_spec.to_process())
    query = RuinQuery(u=proc_spec.u, theta=cfg.query.theta, s=cfg.query.s, y=cfg.query.y)
    started = time.perf_counter()
    value = ruin_transform(blocks, query)
    elapsed = time.perf_counter() - started
    return TransformResponse(value=value, theta=query.theta, u=query.u, y=query.y,
                             s=query.s, elapsed_seconds=elapsed)


def cmd_bounds(cfg: RunConfig) -> BoundsResponse:
    """Envelope parameters and the lower/upper ultimate-ruin bounds."""
    proc_spec = cfg.require_process()
    process = proc_spec.to_process()
    if not isinstance(process, PoissonProcess):
        raise ConfigError("bounds are defined for poisson arrivals", field="process.kind")
    model = cfg.model.to_model()
    params = bound_params(model, k_max=cfg.command.k_max)
    lower = exp_claims_ruin(proc_spec.u, process.lam, process.c, params.nu)
    upper = erlang_claims_ruin(proc_spec.u, process.lam, process.c, params.p, params.sigma)
    return BoundsResponse(nu=params.nu, p=params.p, sigma=params.sigma,
                          lower=lower, upper=upper, ruin_certain=bool(lower >= 1.0 - 1e-12))


def cmd_simulate(cfg: RunConfig) -> SimulateResponse:
    """Monte Carlo estimate of the transform with the configured seed."""
    proc_spec = cfg.require_process()
    if cfg.query.s is None:
        raise ConfigError("the simulate command requires 'query.s'", field="query.s")
    model = cfg.model.to_model()
    query = RuinQuery(u=proc_spec.u, theta=cfg.query.theta, s=cfg.query.s, y=cfg.query.y)
    rng = generator_from_seed(cfg.command.seed)
    est = estimate_transform(model, proc_spec.to_process(), query, cfg.command.n_paths, rng)
    return SimulateResponse(value=est.value, std_error=est.std_error,
                            n_paths=est.n_paths, seed=cfg.command.seed)


def render_csv(command: str, response) -> str:
    """CSV text for any command response (single-row commands included)."""
    if isinstance(response, (TableResponse, CurveResponse)):
        return to_csv(response.columns, response.rows)
    if isinstance(response, TransformResponse):
        return to_csv(["value", "theta", "u", "y", "s", "elapsed_seconds"],
                      [[response.value, response.theta, response.u, response.y,
                        float(response.s), response.elapsed_seconds]])
    if isinstance(response, BoundsResponse):
        return to_csv(["nu", "p", "sigma", "lower", "upper", "ruin_certain"],
                      [[response.nu, float(response.p), response.sigma,
                        response.lower, response.upper, float(response.ruin_certain)]])
    if isinstance(response, SimulateResponse):
        return to_csv(["value", "std_error", "n_paths", "seed"],
                      [[response.value, response.std_error, float(response.n_paths),
                        float(response.seed)]])
    raise TypeError(f"no CSV rendering for {type(response)!r}")


COMMANDS = {
    "describe": cmd_describe,
    "ruin": cmd_ruin,
    "transform": cmd_transform,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
}
