"""Stochastic-order envelopes and the resulting ultimate-ruin bounds.

Every claim in a sequential multivariate phase-type stream is squeezed, in
the usual stochastic order, between an exponential variable (rate at least
the largest per-phase exit rate) and an Erlang variable (stage count at least
the largest block dimension, rate at most the smallest dominant-eigenvalue
magnitude).  Replacing all claims accordingly gives computable lower and
upper bounds on the ultimate ruin probability; a lower bound of one proves
that ruin is certain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mph import MphModel
from .phasetype import dominant_eigenvalue, erlang, max_exit_rate
from .solver import stationary_transform


@dataclass(frozen=True)
class BoundParams:
    """Envelope parameters: stage count ``p``, exponential rate ``nu``,
    Erlang rate ``sigma`` (``sigma <= nu``)."""

    p: int
    nu: float
    sigma: float

    def __post_init__(self):
        if self.p < 1 or self.nu <= 0.0 or self.sigma <= 0.0:
            raise ValueError("need p >= 1, nu > 0, sigma > 0")
        if self.sigma > self.nu + 1e-12:
            raise ValueError("sigma must not exceed nu")


def bound_params(model: MphModel, k_max: int = 64) -> BoundParams:
    """Scan blocks ``k <= k_max`` for the envelope parameters.

    ``p`` is the largest block dimension, ``nu`` the largest per-phase exit
    rate, ``sigma`` the smallest dominant-eigenvalue magnitude.  Parametric
    families must have monotone or bounded parameter sequences for a finite
    scan to be conclusive; the stationary kind needs a single block.
    """
    depth = 1 if model.is_stationary else k_max
    p, nu, sigma = 1, 0.0, math.inf
    for k in range(1, depth + 1):
        A = model.blocks(k)[0]
        p = max(p, A.shape[0])
        nu = max(nu, max_exit_rate(A))
        sigma = min(sigma, -dominant_eigenvalue(A))
    return BoundParams(p=p, nu=nu, sigma=sigma)


def exp_claims_ruin(u: float, lam: float, c: float, nu: float) -> float:
    """Ultimate ruin with i.i.d. Exp(nu) claims under Poisson(lam) arrivals.

    ``min(1, lam/(c nu) exp(-(nu - lam/c) u))``; equals one whenever the
    expected claim inflow matches or exceeds the premium rate.
    """
    if nu <= 0.0 or lam <= 0.0 or c <= 0.0 or u < 0.0:
        raise ValueError("need positive rates and u >= 0")
    return min(1.0, (lam / (c * nu)) * math.exp(-(nu - lam / c) * u))


def erlang_claims_ruin(u: float, lam: float, c: float, p: int, sigma: float,
                       tol: float = 1e-10) -> float:
    """Ultimate ruin with i.i.d. Erlang(p, sigma) claims under Poisson arrivals.

    Computed through the level-homogeneous machinery: the claim stream is the
    independent stationary model with transfer block ``exit x entry``, whose
    infinite-horizon transform at ``theta = y = 0`` is the ruin probability.
    """
    rep = erlang(p, sigma)
    D = np.outer(rep.exit_rates, rep.alpha)
    return stationary_transform(rep.A, D, rep.alpha, lam, c, u, theta=0.0, y=0.0, tol=tol)


def ruin_bounds(model: MphModel, lam: float, c: float, u: float,
                k_max: int = 64) -> tuple[float, float]:
    """Lower and upper ultimate-ruin bounds from the claim-size envelope.

    The lower bound replaces every claim by Exp(nu), the upper bound by
    Erlang(p, sigma); ``lower <= upper`` always holds.
    """
    params = bound_params(model, k_max=k_max)
    lower = exp_claims_ruin(u, lam, c, params.nu)
    upper = erlang_claims_ruin(u, lam, c, params.p, params.sigma)
    return lower, upper
