"""Block pieces of the embedded fluid-flow generator.

The risk process is analysed through a two-sided fluid: ascending phases wait
for the next claim while the level rises at the premium rate, descending
phases replay the claim as a unit-rate linear decrease.  This module builds
the per-index generator blocks for three arrival mechanisms:

* ``poisson``      - Poisson arrivals at a single rate;
* ``environment``  - arrival rate and premium modulated by a background
  Markov environment (environment index varies slowest in every Kronecker
  product, uniformly across all blocks);
* ``ph-arrival``   - independent phase-type inter-arrival times (arrival
  index varies slowest).

Per index k the blocks are ``V_k`` (up to up), ``W_k`` (up to down), ``G_k``
(down to down), ``F_k`` (down into the next up block), and the diagonal
ascent-rate block ``C_k``.  Descent rates are fixed at -1, so claim sizes are
durations at unit rate.  Blocks are produced lazily by index; truncation is
the solver's concern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSubgenerator
from .mph import MphModel
from .phasetype import PhaseTypeRep, VALIDATION_ATOL, validate_ph


@dataclass(frozen=True)
class PoissonProcess:
    """Poisson claim arrivals at rate ``lam``, constant premium rate ``c``."""

    lam: float
    c: float


@dataclass(frozen=True)
class EnvironmentProcess:
    """Markov-modulated arrivals: per-state rates ``lam`` and premiums ``c``.

    ``generator`` is the environment generator, ``q`` its initial distribution.
    """

    generator: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class PhArrivalProcess:
    """Independent phase-type inter-arrival times, constant premium rate."""

    arrival: PhaseTypeRep
    c: float


Process = PoissonProcess | EnvironmentProcess | PhArrivalProcess


class FluidBlocks:
    """Lazy per-index view of the fluid generator blocks for one model/process."""

    def __init__(self, kind: str, model: MphModel, pi: np.ndarray, block_fn):
        self.kind = kind
        self.model = model
        self.pi = np.array(pi, dtype=float)
        self.pi.setflags(write=False)
        self._block_fn = block_fn
        self._cache: dict[int, tuple] = {}

    @property
    def stationary(self) -> bool:
        return self.model.is_stationary

    def at(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Blocks ``(V_k, W_k, F_k, G_k, C_k)`` for 1-based index ``k``."""
        if k < 1:
            raise ValueError("block index must be >= 1")
        key = 1 if self.stationary else k
        got = self._cache.get(key)
        if got is None:
            got = self._block_fn(key)
            self._cache[key] = got
        return got

    def up_dim(self, k: int) -> int:
        return self.at(k)[0].shape[0]

    def down_dim(self, k: int) -> int:
        return self.at(k)[3].shape[0]


def _check_closures(blocks: FluidBlocks, depth: int = 3) -> FluidBlocks:
    for k in range(1, depth + 1):
        V, W, F, G, C = blocks.at(k)
        up = V.sum(axis=1) + W.sum(axis=1)
        if np.max(np.abs(up)) > VALIDATION_ATOL:
            raise InvalidSubgenerator(f"ascending rows of block {k} do not close: max residual {np.max(np.abs(up))}")
        dn = G.sum(axis=1) + F.sum(axis=1)
        if np.max(np.abs(dn)) > VALIDATION_ATOL:
            raise InvalidSubgenerator(f"descending rows of block {k} do not close: max residual {np.max(np.abs(dn))}")
        if np.min(np.diag(C)) <= 0.0:
            raise InvalidSubgenerator(f"ascent rates of block {k} must be positive")
    return blocks


def build_poisson(model: MphModel, lam: float, c: float) -> FluidBlocks:
    """Fluid blocks for Poisson arrivals: the waiting phase simply remembers
    which phase the pending claim will start in."""
    if lam <= 0.0 or c <= 0.0:
        raise ValueError("need lam > 0 and c > 0")

    def fn(k: int):
        A, D = model.blocks(k)
        p = A.shape[0]
        eye = np.eye(p)
        return (-lam * eye, lam * eye, D, A, c * eye)

    return _check_closures(FluidBlocks("poisson", model, model.alpha, fn))


def build_environment(model: MphModel, Theta, q, lam_i, c_i) -> FluidBlocks:
    """Fluid blocks for a Markov-modulated environment.

    The environment index varies slowest in every Kronecker factor, so
    ``V_k = (Theta - L) (x) I``, ``W_k = L (x) I``, ``F_k = I (x) D_k``,
    ``G_k = I (x) A_k`` and ``C_k = diag(c_i) (x) I``.  The environment is
    frozen while a claim is replayed (claims are instantaneous in risk time).
    """
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    lam_i = np.atleast_1d(np.asarray(lam_i, dtype=float))
    c_i = np.atleast_1d(np.asarray(c_i, dtype=float))
    ne = Theta.shape[0]
    if Theta.shape != (ne, ne):
        raise DimensionMismatch("environment generator must be square")
    for name, v in (("q", q), ("lam", lam_i), ("c", c_i)):
        if v.shape != (ne,):
            raise DimensionMismatch(f"environment vector '{name}' must have length {ne}")
    if np.max(np.abs(Theta.sum(axis=1))) > VALIDATION_ATOL:
        raise InvalidSubgenerator("environment generator rows must sum to 0")
    if ne > 1 and np.min(Theta - np.diag(np.diag(Theta))) < 0.0:
        raise InvalidSubgenerator("environment generator off-diagonals must be nonnegative")
    if abs(q.sum() - 1.0) > VALIDATION_ATOL or q.min() < 0.0:
        raise InvalidSubgenerator("environment initial vector must be a probability vector")
    if lam_i.min() <= 0.0 or c_i.min() <= 0.0:
        raise ValueError("per-state rates and premiums must be positive")
    L = np.diag(lam_i)
    Ie = np.eye(ne)

    def fn(k: int):
        A, D = model.blocks(k)
        Ik = np.eye(A.shape[0])
        return (
            np.kron(Theta - L, Ik),
            np.kron(L, Ik),
            np.kron(Ie, D),
            np.kron(Ie, A),
            np.kron(np.diag(c_i), Ik),
        )

    pi = np.kron(q, model.alpha)
    return _check_closures(FluidBlocks("environment", model, pi, fn))


def build_ph_arrival(model: MphModel, arrival: PhaseTypeRep, c: float) -> FluidBlocks:
    """Fluid blocks for phase-type inter-arrival times.

    Ascending phases are pairs (arrival stage, pending claim phase) with the
    arrival index slowest; absorption of the arrival clock drops into the
    pending claim phase, and each claim exit restarts the clock afresh:
    ``V_k = U (x) I``, ``W_k = u (x) I``, ``F_k = gamma (x) D_k``, ``G_k = A_k``.
    """
    validate_ph(arrival)
    if c <= 0.0:
        raise ValueError("need c > 0")
    U = arrival.A
    uex = arrival.exit_rates.reshape(-1, 1)
    gamma = arrival.alpha.reshape(1, -1)

    def fn(k: int):
        A, D = model.blocks(k)
        Ik = np.eye(A.shape[0])
        return (
            np.kron(U, Ik),
            np.kron(uex, Ik),
            np.kron(gamma, D),
            A,
            c * np.eye(arrival.dim * A.shape[0]),
        )

    pi = np.kron(arrival.alpha, model.alpha)
    return _check_closures(FluidBlocks("ph-arrival", model, pi, fn))


def build_fluid(model: MphModel, process: Process) -> FluidBlocks:
    """Dispatch to the builder matching the arrival mechanism."""
    if isinstance(process, PoissonProcess):
        return build_poisson(model, process.lam, process.c)
    if isinstance(process, EnvironmentProcess):
        return build_environment(model, process.generator, process.q, process.lam, process.c)
    if isinstance(process, PhArrivalProcess):
        return build_ph_arrival(model, process.arrival, process.c)
    raise TypeError(f"unknown process type: {type(process)!r}")
