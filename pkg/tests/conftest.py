"""Shared fixtures: canonical models and randomized representation factories."""

import numpy as np
import pytest

from ruinkit import (
    MphModel,
    PhaseTypeRep,
    build_independent,
    build_stage_cascade,
    build_two_regime,
    erlang,
    exponential,
    marginal_rep,
    validate_ph,
)


def two_regime_reference() -> MphModel:
    """Mixed exponential/Erlang stream: mu=1, m=5, r=0.7, p=0.8, a=0.6."""
    return build_two_regime(
        exponential(1.0), erlang(5, 1.0), 0.7,
        lambda k: 0.6 + 0.4 * k / (k + 1), 0.8,
    )


def stage_cascade_reference() -> MphModel:
    """Ten-stage cascade with slowly changing stage rates and continuation."""
    return build_stage_cascade(
        10, lambda k: 1.0 + k / (k + 1.0), lambda k: 0.9 + k / (20.0 * (k + 1.0)),
    )


def stage_cascade_stationary(mu: float = 2.0, p: float = 0.95) -> MphModel:
    """Constant-parameter cascade; level-homogeneous."""
    return build_stage_cascade(10, mu, p)


def matched_independent(model: MphModel, depth: int) -> MphModel:
    """Independent claims with the same per-index marginals as ``model``."""
    return build_independent([marginal_rep(model, k) for k in range(1, depth + 1)])


def random_rep(seed: int, max_dim: int = 4) -> PhaseTypeRep:
    """Random valid representation; every phase has positive exit rate."""
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, max_dim + 1))
    off = rng.uniform(0.0, 1.0, (p, p))
    np.fill_diagonal(off, 0.0)
    exit_rates = rng.uniform(0.2, 1.5, p)
    A = off - np.diag(off.sum(axis=1) + exit_rates)
    alpha = rng.dirichlet(np.ones(p))
    return validate_ph(PhaseTypeRep(alpha, A))


def random_small_model(seed: int, max_dim: int = 4):
    """Random small claim model plus an arrival/premium pair with sane drift."""
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        rep = random_rep(seed * 7 + 1, max_dim)
        D = np.outer(rep.exit_rates, rep.alpha)
        model = MphModel.stationary(rep.alpha, rep.A, D)
    elif kind == 1:
        reps = [random_rep(seed * 11 + j, max_dim) for j in range(3)]
        model = build_independent(reps)
    else:
        r1 = random_rep(seed * 13 + 1, 2)
        r2 = random_rep(seed * 13 + 2, 2)
        model = build_two_regime(r1, r2, 0.5, lambda k: 0.5 + 0.3 * k / (k + 1), 0.7)
    from ruinkit import marginal_mean

    mean1 = marginal_mean(model, 1)
    lam = 1.0
    # keep the drift clearly away from critical so truncation searches converge
    factor = float(rng.uniform(0.55, 0.72)) if rng.random() < 0.4 else float(rng.uniform(1.25, 1.8))
    return model, lam, factor * lam * mean1


@pytest.fixture(scope="session")
def ex2_model():
    return two_regime_reference()


@pytest.fixture(scope="session")
def ex3_model():
    return stage_cascade_reference()


@pytest.fixture(scope="session")
def ex3_stationary():
    return stage_cascade_stationary()
