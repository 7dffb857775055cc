"""Sequential multivariate phase-type claim models.

A claim stream is described by an initial vector ``alpha`` over the first
block and a family ``k -> (A_k, D_k)`` of matrices: ``A_k`` governs the jump
process while the k-th claim accrues, ``D_k`` carries the exit rates into the
(k+1)-th block.  Every exit from block k feeds block k+1, so a finite prefix
of n claims closes with the absorption rates ``D_n @ 1 = -A_n @ 1``.

The family is exposed through :meth:`MphModel.blocks` for arbitrary ``k >= 1``
in one of three kinds: ``stationary`` (a single pair), ``explicit`` (a list
whose last pair repeats forever), and ``parametric`` (a pure closure over k).
Models are immutable and reentrant after construction.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, InvalidSubgenerator, SingularResolvent
from .phasetype import (
    PhaseTypeRep,
    VALIDATION_ATOL,
    _absorb_batch,
    ph_mean,
    ph_variance,
    validate_ph,
)

#: tolerance for the row sums of the embedded jump matrices (-A_k)^{-1} D_k
EMBEDDING_ATOL = 1e-10


def _freeze(M: np.ndarray) -> np.ndarray:
    out = np.array(M, dtype=float)
    out.setflags(write=False)
    return out


class MphModel:
    """Sequential multivariate phase-type model ``(alpha, {(A_k, D_k)})``."""

    def __init__(self, alpha, block_fn: Callable[[int], tuple[np.ndarray, np.ndarray]], kind: str):
        self.alpha = _freeze(np.atleast_1d(alpha))
        self._block_fn = block_fn
        self.kind = kind
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._gammas: list[np.ndarray] = [self.alpha]

    # -- constructors ------------------------------------------------------

    @classmethod
    def stationary(cls, alpha, A, D) -> "MphModel":
        A, D = _freeze(A), _freeze(D)
        return cls(alpha, lambda k: (A, D), "stationary")

    @classmethod
    def from_blocks(cls, alpha, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> "MphModel":
        """Explicit list of block pairs; the last pair repeats as the tail rule."""
        if not pairs:
            raise ValueError("at least one (A, D) pair is required")
        frozen = [(_freeze(A), _freeze(D)) for A, D in pairs]
        if len(frozen) == 1:
            return cls.stationary(alpha, *frozen[0])

        def fn(k: int):
            return frozen[min(k, len(frozen)) - 1]

        return cls(alpha, fn, "explicit")

    @classmethod
    def parametric(cls, alpha, block_fn: Callable[[int], tuple[np.ndarray, np.ndarray]]) -> "MphModel":
        """Blocks generated by a pure function of the index ``k >= 1``."""
        return cls(alpha, block_fn, "parametric")

    # -- block access ------------------------------------------------------

    @property
    def is_stationary(self) -> bool:
        return self.kind == "stationary"

    def blocks(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A_k, D_k)`` for 1-based claim index ``k``."""
        if k < 1:
            raise ValueError("block index must be >= 1")
        if self.is_stationary:
            return self._block_fn(1)
        got = self._cache.get(k)
        if got is None:
            A, D = self._block_fn(k)
            got = (_freeze(A), _freeze(D))
            self._cache[k] = got
        return got

    def block_dim(self, k: int) -> int:
        return self.blocks(k)[0].shape[0]

    def marginal_vector(self, k: int) -> np.ndarray:
        """Entry distribution ``gamma_k`` into block k (``gamma_1 = alpha``)."""
        while len(self._gammas) < k:
            j = len(self._gammas)
            A, D = self.blocks(j)
            g = np.linalg.solve(-A.T, self._gammas[j - 1]) @ D
            self._gammas.append(_freeze(g))
        return self._gammas[k - 1]


def validate_mph(model: MphModel, depth: int = 4) -> MphModel:
    """Check the model invariants on blocks ``k <= depth``.

    Verifies that ``alpha`` is a probability vector, each ``A_k`` a valid
    sub-generator, ``D_k`` nonnegative with ``A_k @ 1 + D_k @ 1 = 0`` and
    consistent dimensions, and that each embedded jump matrix
    ``(-A_k)^{-1} D_k`` is row-stochastic.
    """
    validate_ph(PhaseTypeRep(model.alpha, model.blocks(1)[0]))
    for k in range(1, depth + 1):
        A, D = model.blocks(k)
        validate_ph(PhaseTypeRep(np.eye(1, A.shape[0])[0], A))
        if D.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"D_{k} has {D.shape[0]} rows but A_{k} has dimension {A.shape[0]}")
        if D.shape[1] != model.block_dim(k + 1):
            raise DimensionMismatch(
                f"D_{k} has {D.shape[1]} columns but block {k + 1} has dimension {model.block_dim(k + 1)}"
            )
        if D.min() < 0.0:
            i, j = np.unravel_index(np.argmin(D), D.shape)
            raise InvalidSubgenerator(f"D_{k}[{i},{j}] = {D[i, j]} is negative")
        closure = A.sum(axis=1) + D.sum(axis=1)
        if np.max(np.abs(closure)) > VALIDATION_ATOL:
            i = int(np.argmax(np.abs(closure)))
            raise InvalidSubgenerator(f"row {i} of A_{k} + D_{k} sums to {closure[i]}, expected 0")
        rows = np.linalg.solve(-A, D).sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > EMBEDDING_ATOL:
            raise InvalidSubgenerator(f"embedded jump matrix of block {k} is not stochastic")
    return model


# -- distributional quantities ----------------------------------------------


def marginal_rep(model: MphModel, k: int) -> PhaseTypeRep:
    """Phase-type representation ``(gamma_k, A_k)`` of the k-th claim size."""
    return PhaseTypeRep(model.marginal_vector(k), model.blocks(k)[0])


def joint_density(model: MphModel, y) -> float:
    """Joint density of the first n claim sizes at the point ``y`` (length n).

    Evaluates ``alpha expm(A_1 y_1) D_1 ... expm(A_n y_n) (-A_n @ 1)``; the
    final factor uses the absorbing closure of a length-n prefix.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size < 1:
        raise ValueError("need at least one coordinate")
    if np.any(y < 0.0):
        raise ValueError("claim sizes are nonnegative")
    v = model.alpha
    n = y.size
    for i in range(1, n + 1):
        A, D = model.blocks(i)
        v = v @ expm(A * y[i - 1])
        v = v @ D if i < n else v @ (-A.sum(axis=1))
    return float(v)


def marginal_mean(model: MphModel, k: int) -> float:
    return ph_mean(marginal_rep(model, k))


def marginal_variance(model: MphModel, k: int) -> float:
    return ph_variance(marginal_rep(model, k))


def covariance(model: MphModel, k: int, ell: int) -> float:
    """Covariance of the k-th and ell-th claim sizes, ``1 <= k < ell``.

    Uses the product formula
    ``gamma_k (-A_k)^{-2} D_k (-A_{k+1})^{-1} D_{k+1} ... (-A_ell)^{-1} 1``
    for the cross moment, evaluated right-to-left with direct solves.
    """
    if not 1 <= k < ell:
        raise ValueError("indices must satisfy 1 <= k < ell")
    A_l, _ = model.blocks(ell)
    v = np.linalg.solve(-A_l, np.ones(A_l.shape[0]))
    for j in range(ell - 1, k, -1):
        A_j, D_j = model.blocks(j)
        v = np.linalg.solve(-A_j, D_j @ v)
    A_k, D_k = model.blocks(k)
    v = np.linalg.solve(-A_k, np.linalg.solve(-A_k, D_k @ v))
    cross = float(model.marginal_vector(k) @ v)
    return cross - marginal_mean(model, k) * marginal_mean(model, ell)


def correlation(model: MphModel, k: int, ell: int) -> float:
    if k == ell:
        return 1.0
    lo, hi = min(k, ell), max(k, ell)
    return covariance(model, lo, hi) / np.sqrt(marginal_variance(model, lo) * marginal_variance(model, hi))


def laplace(model: MphModel, thetas) -> float:
    """Joint transform ``E[exp(-<theta, Y>)]`` of the first n claim sizes.

    ``alpha (theta_1 I - A_1)^{-1} D_1 ... (theta_n I - A_n)^{-1} (-A_n @ 1)``,
    evaluated with direct solves.  Equals 1 at ``theta = 0``.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    v = model.alpha
    n = thetas.size
    for i in range(1, n + 1):
        A, D = model.blocks(i)
        M = thetas[i - 1] * np.eye(A.shape[0]) - A
        try:
            v = np.linalg.solve(M.T, v)
        except np.linalg.LinAlgError as exc:
            raise SingularResolvent(f"resolvent at theta_{i} = {thetas[i - 1]} is singular") from exc
        v = v @ D if i < n else v @ (-A.sum(axis=1))
    return float(v)


# -- builders ----------------------------------------------------------------


def _as_sequence_fn(spec) -> Callable[[int], float]:
    """Turn a constant, an explicit list (tail repeats last), or a callable
    into a function of the 1-based block index."""
    if callable(spec):
        return spec
    if np.ndim(spec) == 0:
        value = float(spec)
        return lambda k: value
    values = [float(v) for v in np.asarray(spec, dtype=float)]
    if not values:
        raise ValueError("empty sequence")
    return lambda k: values[min(k, len(values)) - 1]


def build_independent(reps: Sequence[PhaseTypeRep]) -> MphModel:
    """Model with independent claims, the k-th distributed as ``reps[k-1]``.

    Transfer blocks are ``(-A_k @ 1) outer alpha_{k+1}``: the exit of one claim
    starts the next one afresh.  Claims beyond the list repeat the last entry.
    """
    if not reps:
        raise ValueError("at least one representation is required")
    for rep in reps:
        validate_ph(rep)
    pairs = []
    for i, rep in enumerate(reps):
        nxt = reps[i + 1] if i + 1 < len(reps) else reps[-1]
        pairs.append((rep.A, np.outer(rep.exit_rates, nxt.alpha)))
    model = MphModel.from_blocks(reps[0].alpha, pairs)
    return validate_mph(model)


def build_two_regime(regular: PhaseTypeRep, severe: PhaseTypeRep, r: float, r_seq, p_seq) -> MphModel:
    """Claims alternating between a regular and a severe distribution.

    The first claim is regular with probability ``r``.  After a regular claim
    the next is regular with probability ``r_seq(k)``; after a severe claim the
    next is severe with probability ``p_seq(k)``, where ``k`` is the index of
    the block being left.  Sequences may be constants, lists, or callables.
    """
    validate_ph(regular)
    validate_ph(severe)
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    rfn, pfn = _as_sequence_fn(r_seq), _as_sequence_fn(p_seq)
    pB, pG = regular.dim, severe.dim
    A = np.zeros((pB + pG, pB + pG))
    A[:pB, :pB] = regular.A
    A[pB:, pB:] = severe.A
    b, g = regular.exit_rates, severe.exit_rates
    beta, gamma = regular.alpha, severe.alpha

    def D_of(k: int):
        rk, pk = rfn(k), pfn(k)
        if not (0.0 <= rk <= 1.0 and 0.0 <= pk <= 1.0):
            raise ValueError(f"regime probabilities at index {k} must lie in [0, 1]")
        return np.block([
            [rk * np.outer(b, beta), (1.0 - rk) * np.outer(b, gamma)],
            [(1.0 - pk) * np.outer(g, beta), pk * np.outer(g, gamma)],
        ])

    alpha = np.concatenate([r * beta, (1.0 - r) * gamma])
    constant = np.ndim(r_seq) == 0 and not callable(r_seq) and np.ndim(p_seq) == 0 and not callable(p_seq)
    if constant:
        model = MphModel.stationary(alpha, A, D_of(1))
    else:
        model = MphModel.parametric(alpha, lambda k: (A, D_of(k)))
    return validate_mph(model)


def uniform_forward_matrix(m: int) -> np.ndarray:
    """(m-1)x(m-1) stochastic matrix, row j uniform over columns j..m-1."""
    P = np.zeros((m - 1, m - 1))
    for j in range(m - 1):
        P[j, j:] = 1.0 / (m - 1 - j)
    return P


def build_stage_cascade(m: int, mu_seq, p_seq, P: np.ndarray | None = None,
                        beta_seq=None, alpha=None) -> MphModel:
    """Claims built from up to ``m`` exponential stages of rate ``mu_k``.

    Within block k each stage lasts Exp(mu_k); from stage i < m the process
    advances with probability ``p_k`` or leaves for the next block, landing in
    a stage drawn from row i of ``P``; from stage m it leaves and lands by the
    entry vector ``beta_k``.  Defaults: ``P`` uniform-forward, ``beta_k`` and
    ``alpha`` concentrated on the first stage.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    mufn, pfn = _as_sequence_fn(mu_seq), _as_sequence_fn(p_seq)
    P = uniform_forward_matrix(m) if P is None else np.asarray(P, dtype=float)
    if P.shape != (m - 1, m - 1):
        raise DimensionMismatch(f"P must be {(m - 1, m - 1)}, got {P.shape}")
    if P.min() < 0.0 or np.max(np.abs(P.sum(axis=1) - 1.0)) > VALIDATION_ATOL:
        raise InvalidSubgenerator("P must be row-stochastic")
    e1 = np.zeros(m - 1)
    e1[0] = 1.0
    betafn = (lambda k: e1) if beta_seq is None else (
        beta_seq if callable(beta_seq) else (lambda k: np.asarray(beta_seq, dtype=float))
    )
    if alpha is None:
        alpha = np.zeros(m)
        alpha[0] = 1.0

    def pair(k: int):
        mu, p = mufn(k), pfn(k)
        if mu <= 0.0 or not 0.0 < p < 1.0:
            raise ValueError(f"need mu_{k} > 0 and p_{k} in (0, 1)")
        beta = np.asarray(betafn(k), dtype=float)
        if beta.shape != (m - 1,):
            raise DimensionMismatch(f"beta_{k} must have length {m - 1}")
        A = np.diag([-mu] * m)
        for i in range(m - 1):
            A[i, i + 1] = mu * p
        D = np.zeros((m, m))
        D[: m - 1, : m - 1] = mu * (1.0 - p) * P
        D[m - 1, : m - 1] = mu * beta
        return A, D

    constant = (
        np.ndim(mu_seq) == 0 and not callable(mu_seq)
        and np.ndim(p_seq) == 0 and not callable(p_seq)
        and beta_seq is None
    )
    if constant:
        model = MphModel.stationary(alpha, *pair(1))
    else:
        model = MphModel.parametric(alpha, pair)
    return validate_mph(model)


# -- sampling ----------------------------------------------------------------


def mph_sample(model: MphModel, n: int, rng: np.random.Generator, size: int | None = None):
    """Draw the first ``n`` claim sizes by simulating the underlying jump process.

    The phase entering block k+1 is drawn from the exit row of ``D_k``, so the
    dependence between consecutive claims is preserved exactly.  Returns a
    length-n vector, or a ``(size, n)`` array when ``size`` is given.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    npaths = 1 if size is None else int(size)
    out = np.zeros((npaths, n))
    alpha = model.alpha / model.alpha.sum()
    phase = rng.choice(model.block_dim(1), size=npaths, p=alpha)
    for k in range(1, n + 1):
        A, D = model.blocks(k)
        durations, phase = _absorb_batch(phase, A, D, rng)
        out[:, k - 1] = durations
    return out[0] if size is None else out
