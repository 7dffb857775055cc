"""Ruin probabilities and first-passage transforms for risk processes with
dependent phase-type claims."""

import os as _os

# Cap worker parallelism before numpy configures its thread pools.
_threads = _os.environ.get("RUINKIT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .bounds import BoundParams, bound_params, erlang_claims_ruin, exp_claims_ruin, ruin_bounds
from .embedding import (
    EnvironmentProcess,
    FluidBlocks,
    PhArrivalProcess,
    PoissonProcess,
    build_environment,
    build_fluid,
    build_ph_arrival,
    build_poisson,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidSubgenerator,
    ModelError,
    NonConvergence,
    NonStochasticInitial,
    NumericalError,
    NumericalFailure,
    RuinkitError,
    SingularResolvent,
    SylvesterFailure,
    TruncationLimit,
)
from .mph import (
    MphModel,
    build_independent,
    build_stage_cascade,
    build_two_regime,
    correlation,
    covariance,
    joint_density,
    laplace,
    marginal_mean,
    marginal_rep,
    marginal_variance,
    mph_sample,
    validate_mph,
)
from .phasetype import (
    PhaseTypeRep,
    dominant_eigenvalue,
    erlang,
    exponential,
    max_exit_rate,
    ph_convolve,
    ph_density,
    ph_mean,
    ph_mixture,
    ph_moment,
    ph_sample,
    ph_survival,
    ph_variance,
    validate_ph,
)
from .simulate import Estimate, PathOutcome, estimate_transform, generator_from_seed, simulate_path
from .solver import (
    HomogeneousLadder,
    RuinQuery,
    SolverWorkspace,
    is_psi_stochastic,
    phi_blocks,
    psi_blocks_general,
    psi_blocks_poisson,
    riccati_psi_hat,
    ruin_prob_by_claims,
    ruin_transform,
    solve_workspace,
    stationary_transform,
    transform_curve_in_s,
    transform_curve_in_u,
    u_blocks,
    ultimate_ruin,
)

__version__ = "0.1.0"
