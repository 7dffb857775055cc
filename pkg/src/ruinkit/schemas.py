"""Request and response schemas for the service and the CLI.

A run configuration is a single JSON document with ``model``, ``process``,
``query`` and ``command`` sections.  Unknown fields are rejected everywhere
so that typos surface as validation errors naming the offending path.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import mph, phasetype
from .embedding import EnvironmentProcess, PhArrivalProcess, PoissonProcess, Process
from .errors import ConfigError


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- building blocks -----------------------------------------------------------


class PHSpec(StrictModel):
    """A phase-type law: exactly one of ``exp``, ``erlang`` or ``alpha``/``matrix``."""

    exp: float | None = Field(default=None, gt=0, description="rate of an exponential law")
    erlang: tuple[int, float] | None = Field(default=None, description="(shape, rate)")
    alpha: list[float] | None = None
    matrix: list[list[float]] | None = None

    @model_validator(mode="after")
    def _one_of(self):
        explicit = self.alpha is not None or self.matrix is not None
        given = sum([self.exp is not None, self.erlang is not None, explicit])
        if given != 1:
            raise ValueError("specify exactly one of 'exp', 'erlang', or 'alpha' with 'matrix'")
        if explicit and (self.alpha is None or self.matrix is None):
            raise ValueError("'alpha' and 'matrix' must be given together")
        if self.erlang is not None and (self.erlang[0] < 1 or self.erlang[1] <= 0):
            raise ValueError("'erlang' needs shape >= 1 and rate > 0")
        return self

    def to_rep(self) -> phasetype.PhaseTypeRep:
        if self.exp is not None:
            return phasetype.exponential(self.exp)
        if self.erlang is not None:
            return phasetype.erlang(self.erlang[0], self.erlang[1])
        return phasetype.validate_ph(phasetype.PhaseTypeRep(self.alpha, self.matrix))


class RampSpec(StrictModel):
    """Index sequence ``f(k) = limit + coef / (k + 1)`` for ``k >= 1``."""

    limit: float
    coef: float

    def fn(self):
        return lambda k: self.limit + self.coef / (k + 1)


SequenceSpec = Union[float, list[float], RampSpec]


def _sequence_arg(spec: SequenceSpec):
    """Resolve a sequence spec to what the model builders accept."""
    if isinstance(spec, RampSpec):
        return spec.fn()
    return spec


# -- model section --------------------------------------------------------------


class IndependentModelSpec(StrictModel):
    kind: Literal["independent"]
    claims: list[PHSpec] = Field(min_length=1)

    def to_model(self) -> mph.MphModel:
        return mph.build_independent([c.to_rep() for c in self.claims])


class TwoRegimeModelSpec(StrictModel):
    """Regular/severe claims with contagion between consecutive claim types."""

    kind: Literal["two-regime"]
    regular: PHSpec
    severe: PHSpec
    r: float = Field(ge=0, le=1, description="probability the first claim is regular")
    p: SequenceSpec = Field(description="severe-to-severe persistence by block index")
    r_k: SequenceSpec = Field(description="regular-to-regular persistence by block index")

    def to_model(self) -> mph.MphModel:
        return mph.build_two_regime(
            self.regular.to_rep(), self.severe.to_rep(), self.r,
            _sequence_arg(self.r_k), _sequence_arg(self.p),
        )


class StageCascadeModelSpec(StrictModel):
    """Claims made of up to ``m`` exponential stages with forward spillover."""

    kind: Literal["stage-cascade"]
    m: int = Field(ge=2)
    mu: SequenceSpec
    p: SequenceSpec
    transition: list[list[float]] | None = Field(
        default=None, description="(m-1)x(m-1) stochastic matrix; default uniform-forward"
    )
    entry: list[float] | None = Field(default=None, description="re-entry vector; default first stage")
    alpha: list[float] | None = Field(default=None, description="initial vector; default first stage")

    def to_model(self) -> mph.MphModel:
        P = None if self.transition is None else np.asarray(self.transition, dtype=float)
        beta = None if self.entry is None else np.asarray(self.entry, dtype=float)
        alpha = None if self.alpha is None else np.asarray(self.alpha, dtype=float)
        return mph.build_stage_cascade(self.m, _sequence_arg(self.mu), _sequence_arg(self.p),
                                       P=P, beta_seq=beta, alpha=alpha)


class BlockPairSpec(StrictModel):
    sub_generator: list[list[float]]
    transfer: list[list[float]]


class StationaryModelSpec(StrictModel):
    kind: Literal["stationary"]
    alpha: list[float]
    sub_generator: list[list[float]]
    transfer: list[list[float]]

    def to_model(self) -> mph.MphModel:
        model = mph.MphModel.stationary(self.alpha, self.sub_generator, self.transfer)
        return mph.validate_mph(model)


class ExplicitModelSpec(StrictModel):
    kind: Literal["explicit"]
    alpha: list[float]
    blocks: list[BlockPairSpec] = Field(min_length=1)

    def to_model(self) -> mph.MphModel:
        pairs = [(np.asarray(b.sub_generator, float), np.asarray(b.transfer, float)) for b in self.blocks]
        model = mph.MphModel.from_blocks(self.alpha, pairs)
        return mph.validate_mph(model)


ModelSpec = Annotated[
    Union[IndependentModelSpec, TwoRegimeModelSpec, StageCascadeModelSpec,
          StationaryModelSpec, ExplicitModelSpec],
    Field(discriminator="kind"),
]


# -- process section -------------------------------------------------------------


class PoissonProcessSpec(StrictModel):
    kind: Literal["poisson"] = "poisson"
    lam: float = Field(gt=0, alias="lambda")
    c: float = Field(gt=0)
    u: float = Field(default=0.0, ge=0)
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def to_process(self) -> Process:
        return PoissonProcess(lam=self.lam, c=self.c)


class EnvironmentProcessSpec(StrictModel):
    kind: Literal["environment"]
    generator: list[list[float]]
    initial: list[float]
    lam: list[float] = Field(alias="lambda")
    c: list[float]
    u: float = Field(default=0.0, ge=0)
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def to_process(self) -> Process:
        return EnvironmentProcess(
            generator=np.asarray(self.generator, float),
            q=np.asarray(self.initial, float),
            lam=np.asarray(self.lam, float),
            c=np.asarray(self.c, float),
        )


class PhArrivalProcessSpec(StrictModel):
    kind: Literal["ph-arrival"]
    arrival: PHSpec
    c: float = Field(gt=0)
    u: float = Field(default=0.0, ge=0)

    def to_process(self) -> Process:
        return PhArrivalProcess(arrival=self.arrival.to_rep(), c=self.c)


ProcessSpec = Annotated[
    Union[PoissonProcessSpec, EnvironmentProcessSpec, PhArrivalProcessSpec],
    Field(discriminator="kind"),
]


# -- query & command sections -----------------------------------------------------


class GridSpec(StrictModel):
    """Inclusive linear grid over one parameter."""

    param: Literal["u", "c", "s"]
    start: float
    stop: float
    count: int = Field(ge=2)

    def values(self) -> np.ndarray:
        vals = np.linspace(self.start, self.stop, self.count)
        if self.param == "s":
            return np.unique(np.maximum(1, np.rint(vals).astype(int)))
        return vals


class QuerySpec(StrictModel):
    theta: float = Field(default=0.0, ge=0)
    s: int | None = Field(default=None, ge=1, description="claim-count cap; omit for ultimate ruin")
    y: float = Field(default=0.0, ge=0)
    tol: float = Field(default=1e-6, gt=0, description="ultimate-ruin doubling tolerance")
    s_cap: int = Field(default=2 ** 14, ge=2, description="truncation cap for the doubling search")
    grid: GridSpec | None = None


class CommandSpec(StrictModel):
    seed: int = 0
    n_paths: int = Field(default=100_000, ge=1)
    depth: int = Field(default=8, ge=1, description="number of claim indices in describe output")
    corr_matrix: bool = False
    k_max: int = Field(default=64, ge=1, description="scan depth for envelope parameters")


class RunConfig(StrictModel):
    """Top-level configuration document for every command."""

    model: ModelSpec
    process: ProcessSpec | None = None
    query: QuerySpec = QuerySpec()
    command: CommandSpec = CommandSpec()

    def require_process(self):
        if self.process is None:
            raise ConfigError("this command requires a 'process' section", field="process")
        return self.process


# -- response models ---------------------------------------------------------------


class TableResponse(StrictModel):
    columns: list[str]
    rows: list[list[float]]


class CurveResponse(StrictModel):
    columns: list[str]
    rows: list[list[float]]
    truncations: list[int] | None = None
    error: str | None = Field(default=None, description="set when the curve is partial")


class TransformResponse(StrictModel):
    value: float
    theta: float
    u: float
    y: float
    s: int
    elapsed_seconds: float


class BoundsResponse(StrictModel):
    nu: float
    p: int
    sigma: float
    lower: float
    upper: float
    ruin_certain: bool


class SimulateResponse(StrictModel):
    value: float
    std_error: float
    n_paths: int
    seed: int
