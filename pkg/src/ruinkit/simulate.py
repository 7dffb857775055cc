"""Monte Carlo oracle for the risk process.

Paths are simulated exactly: inter-arrival times come from the configured
arrival mechanism, claim sizes from the underlying jump process of the claim
stream (the phase entering each block is drawn from the exit row of the
previous transfer block, never resampled independently), and ruin can only
happen at claim instants because claims are instantaneous drops.

The per-path transform contribution ``exp(-theta T) 1{ruined, deficit >= y}``
is an unbiased estimator of the exact finite-truncation transform at the same
claim-count cap, which makes the estimator a truncation-bias-free oracle for
the solver.  Paths are embarrassingly parallel; use independent generators
per worker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EnvironmentProcess, PhArrivalProcess, PoissonProcess, Process
from .mph import MphModel
from .phasetype import _absorb_batch
from .solver import RuinQuery


@dataclass(frozen=True)
class PathOutcome:
    """Outcome of one simulated path up to the claim-count cap.

    ``T`` (ruin time), ``deficit`` and ``claims`` are present iff ``ruined``.
    """

    ruined: bool
    T: float | None = None
    deficit: float | None = None
    claims: int | None = None


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    std_error: float
    n_paths: int


def generator_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator stream for a given seed (reproducible)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _draw_entry(alpha: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(alpha.shape[0], size=n, p=alpha / alpha.sum())


def _interarrival_poisson(proc: PoissonProcess, idx, rng):
    dt = rng.exponential(1.0 / proc.lam, idx.size)
    return dt, proc.c * dt


def _interarrival_ph(proc: PhArrivalProcess, idx, rng):
    entry = _draw_entry(proc.arrival.alpha, idx.size, rng)
    dt, _ = _absorb_batch(entry, proc.arrival.A, proc.arrival.exit_rates[:, None], rng)
    return dt, proc.c * dt


def _interarrival_env(proc: EnvironmentProcess, env: np.ndarray, idx, rng):
    """Environment-modulated wait: alternate environment jumps and arrivals.

    ``env`` holds the per-path environment state and is updated in place; the
    environment is frozen during claims, so it simply carries over.
    """
    Theta = np.asarray(proc.generator, dtype=float)
    lam = np.asarray(proc.lam, dtype=float)
    cs = np.asarray(proc.c, dtype=float)
    jump_rate = -np.diag(Theta)
    off = Theta - np.diag(np.diag(Theta))
    # conditional jump distribution given an environment transition
    with np.errstate(invalid="ignore", divide="ignore"):
        jump_cum = np.cumsum(np.where(jump_rate[:, None] > 0, off / jump_rate[:, None], 0.0), axis=1)
    dt = np.zeros(idx.size)
    premium = np.zeros(idx.size)
    waiting = np.ones(idx.size, dtype=bool)
    while waiting.any():
        jj = np.where(waiting)[0]
        e = env[idx[jj]]
        total = jump_rate[e] + lam[e]
        seg = rng.exponential(1.0 / total)
        dt[jj] += seg
        premium[jj] += cs[e] * seg
        arrived = rng.random(jj.size) < lam[e] / total
        movers = jj[~arrived]
        if movers.size:
            u = rng.random(movers.size)
            env[idx[movers]] = (u[:, None] > jump_cum[env[idx[movers]]]).sum(axis=1)
        waiting[jj[arrived]] = False
    return dt, premium


def _simulate_batch(model: MphModel, process: Process, u: float, s_cap: int,
                    n: int, rng: np.random.Generator):
    """Vectorized simulation of ``n`` paths; returns outcome arrays."""
    if s_cap < 1:
        raise ValueError("s_cap must be >= 1")
    reserve = np.full(n, float(u))
    time_at = np.zeros(n)
    ruined = np.zeros(n, dtype=bool)
    ruin_time = np.zeros(n)
    deficit = np.zeros(n)
    claims = np.zeros(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    phase = _draw_entry(model.alpha, n, rng)
    env = None
    if isinstance(process, EnvironmentProcess):
        env = _draw_entry(np.asarray(process.q, dtype=float), n, rng)
    for k in range(1, s_cap + 1):
        idx = np.where(alive)[0]
        if idx.size == 0:
            break
        if isinstance(process, PoissonProcess):
            dt, premium = _interarrival_poisson(process, idx, rng)
        elif isinstance(process, PhArrivalProcess):
            dt, premium = _interarrival_ph(process, idx, rng)
        else:
            dt, premium = _interarrival_env(process, env, idx, rng)
        time_at[idx] += dt
        reserve[idx] += premium
        A, D = model.blocks(k)
        sizes, phase_next = _absorb_batch(phase[idx], A, D, rng)
        reserve[idx] -= sizes
        phase[idx] = phase_next
        hit = reserve[idx] < 0.0
        ni = idx[hit]
        ruined[ni] = True
        ruin_time[ni] = time_at[ni]
        deficit[ni] = -reserve[ni]
        claims[ni] = k
        alive[ni] = False
    return ruined, ruin_time, deficit, claims


def simulate_path(model: MphModel, process: Process, u: float, s_cap: int,
                  rng: np.random.Generator) -> PathOutcome:
    """Simulate a single path up to ``s_cap`` claims.

    The claim phase is threaded through the transfer blocks exactly as the
    claim-stream generator prescribes.  Deterministic given the generator
    state.
    """
    ruined, T, deficit, claims = _simulate_batch(model, process, u, s_cap, 1, rng)
    if not ruined[0]:
        return PathOutcome(ruined=False)
    return PathOutcome(ruined=True, T=float(T[0]), deficit=float(deficit[0]), claims=int(claims[0]))


def estimate_transform(model: MphModel, process: Process, query: RuinQuery,
                       n_paths: int, rng: np.random.Generator) -> Estimate:
    """Unbiased Monte Carlo estimate of the ruin transform at the query point.

    Per-path contribution ``exp(-theta T)`` on the event that ruin happens
    within ``query.s`` claims with deficit at least ``query.y``, else zero.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    ruined, T, deficit, _ = _simulate_batch(model, process, query.u, query.s, n_paths, rng)
    contrib = np.zeros(n_paths)
    hit = ruined & (deficit >= query.y)
    contrib[hit] = np.exp(-query.theta * T[hit])
    value = float(contrib.mean())
    spread = float(contrib.std(ddof=1)) if n_paths > 1 else 0.0
    return Estimate(value=value, std_error=spread / np.sqrt(n_paths), n_paths=n_paths)
