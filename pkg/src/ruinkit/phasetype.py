"""Univariate phase-type distributions.

A phase-type law is the distribution of the absorption time of a finite-state
Markov jump process with transient part ``A`` (the sub-generator) and initial
distribution ``alpha`` over the transient states.  This module provides the
representation type plus density, survival, moments, closure operations
(convolution, mixture), spectral quantities and exact sampling.

All representations are immutable after construction and safe to share across
threads.  Sampling requires exclusive access to its random generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidSubgenerator, NonStochasticInitial, NumericalFailure

#: validation tolerance for sum-to-one and sign checks
VALIDATION_ATOL = 1e-12


def _clamped(x: np.ndarray) -> np.ndarray:
    # round-trip noise in (-1e-12, 0) is treated as an exact zero
    out = np.array(x, dtype=float)
    out[(out > -VALIDATION_ATOL) & (out < 0.0)] = 0.0
    return out


@dataclass(frozen=True)
class PhaseTypeRep:
    """Representation ``(alpha, A)`` of a phase-type distribution.

    Parameters
    ----------
    alpha : array_like, shape (p,)
        Initial probability vector over the transient states.
    A : array_like, shape (p, p)
        Sub-generator: strictly negative diagonal, nonnegative off-diagonal,
        nonpositive row sums, and invertible (every state transient).
    """

    alpha: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        alpha = _clamped(np.atleast_1d(np.asarray(self.alpha, dtype=float)))
        A = np.array(np.atleast_2d(np.asarray(self.A, dtype=float)))
        off = ~np.eye(A.shape[0], dtype=bool)
        A[off] = _clamped(A[off])
        alpha.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Per-phase absorption rates ``-A @ 1``."""
        return _clamped(-self.A.sum(axis=1))


def exponential(rate: float) -> PhaseTypeRep:
    """One-phase representation of Exp(rate)."""
    return PhaseTypeRep(np.array([1.0]), np.array([[-float(rate)]]))


def erlang(shape: int, rate: float) -> PhaseTypeRep:
    """Erlang(shape, rate) as a chain of identical exponential stages."""
    if shape < 1:
        raise ValueError("Erlang shape must be >= 1")
    A = np.diag([-float(rate)] * shape)
    for i in range(shape - 1):
        A[i, i + 1] = float(rate)
    alpha = np.zeros(shape)
    alpha[0] = 1.0
    return PhaseTypeRep(alpha, A)


def validate_ph(rep: PhaseTypeRep) -> PhaseTypeRep:
    """Check all representation invariants, raising on the first violation.

    Raises
    ------
    NonStochasticInitial
        If ``alpha`` has a negative entry or does not sum to one.
    InvalidSubgenerator
        If ``A`` has a nonnegative diagonal entry, a negative off-diagonal
        entry, a positive row sum, or is not invertible (non-transient state).
    """
    alpha, A = rep.alpha, rep.A
    if A.shape[0] != A.shape[1]:
        raise InvalidSubgenerator(f"sub-generator must be square, got shape {A.shape}")
    if alpha.shape[0] != A.shape[0]:
        raise InvalidSubgenerator(
            f"alpha has length {alpha.shape[0]} but A has dimension {A.shape[0]}"
        )
    neg = np.where(alpha < 0.0)[0]
    if neg.size:
        raise NonStochasticInitial(f"alpha[{neg[0]}] = {alpha[neg[0]]} is negative")
    total = alpha.sum()
    if abs(total - 1.0) > VALIDATION_ATOL:
        raise NonStochasticInitial(f"alpha sums to {total}, expected 1")
    diag = np.diag(A)
    bad = np.where(diag >= 0.0)[0]
    if bad.size:
        raise InvalidSubgenerator(f"diagonal entry A[{bad[0]},{bad[0]}] = {diag[bad[0]]} is not negative")
    off = A - np.diag(diag)
    i, j = np.unravel_index(np.argmin(off), off.shape)
    if off[i, j] < 0.0:
        raise InvalidSubgenerator(f"off-diagonal entry A[{i},{j}] = {A[i, j]} is negative")
    rows = A.sum(axis=1)
    bad = np.where(rows > VALIDATION_ATOL)[0]
    if bad.size:
        raise InvalidSubgenerator(f"row {bad[0]} of A sums to {rows[bad[0]]} > 0")
    # transience <=> dominant eigenvalue strictly in the left half plane
    if np.max(np.linalg.eigvals(A).real) >= -np.finfo(float).tiny:
        raise InvalidSubgenerator("A is not invertible: some state is recurrent")
    return rep


def ph_density(rep: PhaseTypeRep, t):
    """Density ``alpha @ expm(A t) @ a`` at ``t >= 0`` (scalar or array)."""
    a = rep.exit_rates
    if np.ndim(t) == 0:
        return float(rep.alpha @ expm(rep.A * float(t)) @ a)
    return np.array([float(rep.alpha @ expm(rep.A * ti) @ a) for ti in np.asarray(t, dtype=float)])


def ph_survival(rep: PhaseTypeRep, t):
    """Survival probability ``alpha @ expm(A t) @ 1`` at ``t >= 0``."""
    ones = np.ones(rep.dim)
    if np.ndim(t) == 0:
        return float(rep.alpha @ expm(rep.A * float(t)) @ ones)
    return np.array([float(rep.alpha @ expm(rep.A * ti) @ ones) for ti in np.asarray(t, dtype=float)])


def ph_moment(rep: PhaseTypeRep, k: int) -> float:
    """Raw moment of order ``k >= 1``: ``k! * alpha @ (-A)^{-k} @ 1``."""
    if k < 1:
        raise ValueError("moment order must be >= 1")
    v = np.ones(rep.dim)
    for _ in range(k):
        v = np.linalg.solve(-rep.A, v)
    return float(math.factorial(k) * (rep.alpha @ v))


def ph_mean(rep: PhaseTypeRep) -> float:
    return ph_moment(rep, 1)


def ph_variance(rep: PhaseTypeRep) -> float:
    m1 = ph_moment(rep, 1)
    return ph_moment(rep, 2) - m1 * m1


def ph_convolve(r1: PhaseTypeRep, r2: PhaseTypeRep) -> PhaseTypeRep:
    """Representation of the sum of two independent phase-type variables.

    The result uses the block upper-bidiagonal form: phases of ``r1`` first,
    absorption of ``r1`` feeding the initial vector of ``r2``.
    """
    p1, p2 = r1.dim, r2.dim
    A = np.zeros((p1 + p2, p1 + p2))
    A[:p1, :p1] = r1.A
    A[:p1, p1:] = np.outer(r1.exit_rates, r2.alpha)
    A[p1:, p1:] = r2.A
    alpha = np.concatenate([r1.alpha, np.zeros(p2)])
    return PhaseTypeRep(alpha, A)


def ph_mixture(p: float, r1: PhaseTypeRep, r2: PhaseTypeRep) -> PhaseTypeRep:
    """Mixture that follows ``r1`` with probability ``p`` and ``r2`` otherwise."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixture probability must lie in [0, 1]")
    p1, p2 = r1.dim, r2.dim
    A = np.zeros((p1 + p2, p1 + p2))
    A[:p1, :p1] = r1.A
    A[p1:, p1:] = r2.A
    alpha = np.concatenate([p * r1.alpha, (1.0 - p) * r2.alpha])
    return PhaseTypeRep(alpha, A)


def dominant_eigenvalue(A: np.ndarray) -> float:
    """Eigenvalue of largest real part of ``A``, as a real scalar.

    For a valid sub-generator this value is real and strictly negative; a
    dominant eigenvalue with imaginary part above 1e-8 signals an invalid
    input and raises :class:`NumericalFailure`.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    try:
        vals = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigensolver failure
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    lead = vals[np.argmax(vals.real)]
    if abs(lead.imag) > 1e-8:
        raise NumericalFailure(
            f"dominant eigenvalue {lead} has imaginary part above 1e-8; input is not a valid sub-generator"
        )
    return float(lead.real)


def max_exit_rate(A: np.ndarray) -> float:
    """Largest per-phase absorption rate, ``max(-A @ 1)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.max(_clamped(-A.sum(axis=1))))


def _jump_probabilities(A: np.ndarray, tail: np.ndarray):
    """Row-stochastic jump matrix [within-block | exit] and the per-phase rates."""
    rates = -np.diag(A)
    off = A - np.diag(np.diag(A))
    P = np.hstack([off, tail]) / rates[:, None]
    return np.cumsum(P, axis=1), rates


def _absorb_batch(entry: np.ndarray, A: np.ndarray, exit_cols: np.ndarray, rng: np.random.Generator):
    """Simulate the jump chain from per-path entry phases until it leaves ``A``.

    ``exit_cols`` holds the exit rates toward each destination column (an
    absorption column vector, or a transfer matrix into a next block).
    Returns ``(durations, exit_index)`` where ``exit_index`` is the column of
    ``exit_cols`` through which each path left.
    """
    p = A.shape[0]
    cum, rates = _jump_probabilities(A, exit_cols)
    cur = np.array(entry, dtype=np.intp)
    total = np.zeros(cur.shape[0])
    out = np.full(cur.shape[0], -1, dtype=np.intp)
    active = np.ones(cur.shape[0], dtype=bool)
    while active.any():
        idx = np.where(active)[0]
        total[idx] += rng.exponential(1.0 / rates[cur[idx]])
        u = rng.random(idx.size)
        nxt = (u[:, None] > cum[cur[idx]]).sum(axis=1)
        left = nxt >= p
        out[idx[left]] = nxt[left] - p
        cur[idx[~left]] = nxt[~left]
        active[idx[left]] = False
    return total, out


def ph_sample(rep: PhaseTypeRep, rng: np.random.Generator, size: int | None = None):
    """Draw absorption times by simulating the jump chain.

    Returns a float when ``size`` is None, else an array of ``size`` draws.
    """
    n = 1 if size is None else int(size)
    entry = rng.choice(rep.dim, size=n, p=rep.alpha / rep.alpha.sum())
    total, _ = _absorb_batch(entry, rep.A, rep.exit_rates[:, None], rng)
    return float(total[0]) if size is None else total
