"""First-passage solver for the embedded fluid flow.

Computes the triangular arrays of first-return blocks (``psi``), the
downward-phase generator blocks (``U``) and their exponential (``phi``), and
from them the joint transform of the ruin time, the deficit at ruin and the
claim count:

    value(u, theta, s, y) = sum_{k=1..s} sum_{l=0..s-k}
        pi psi_theta(1, k) phi_theta(u; k, k+l) expm(G_{k+l} y) 1

The discount ``theta`` applies to ascending-phase time only, which is exactly
the time scale of the risk process (claims are instantaneous drops).

Two engines produce the psi blocks:

* a closed-form recursion for plain Poisson arrivals, where the diagonal
  block is a scaled resolvent and off-diagonal blocks accumulate products of
  lower-order blocks;
* a Sylvester-equation engine valid for any block shape (environment,
  phase-type arrivals), solved in increasing band order.

Both fill a :class:`SolverWorkspace`; their equality on Poisson input is a
test invariant.  For level-homogeneous models the blocks depend only on the
band index, the per-band sequence is computed by a quadratic-cost ladder, and
the infinite-horizon first-return matrix solves a Riccati equation whose
minimal nonnegative solution is found by a monotone fixed point.

Workspaces are written once and read-only afterwards; independent queries may
run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, get_lapack_funcs, lu_factor, lu_solve, schur
from scipy.sparse.linalg import expm_multiply

from .embedding import FluidBlocks
from .errors import (
    NonConvergence,
    NumericalFailure,
    SingularResolvent,
    SylvesterFailure,
    TruncationLimit,
)

#: largest dense dimension assembled for the downward-phase generator
MAX_DENSE_DIM = 8192


@dataclass(frozen=True)
class RuinQuery:
    """Parameters of the target transform.

    ``u``: initial reserve, ``theta``: discount argument, ``s``: claim-count
    cap (>= 1; ruin requires at least one claim), ``y``: deficit threshold.
    """

    u: float
    theta: float = 0.0
    s: int = 1
    y: float = 0.0

    def __post_init__(self):
        if self.u < 0.0:
            raise ValueError("initial reserve u must be >= 0")
        if self.theta < 0.0:
            raise ValueError("discount argument theta must be >= 0")
        if self.s < 1:
            raise ValueError("claim-count cap s must be >= 1")
        if self.y < 0.0:
            raise ValueError("deficit threshold y must be >= 0")


class _SylvesterSolver:
    """Repeated solves of ``M X + X G = Q`` with fixed coefficients.

    Caches the Schur factorizations; each solve is two small similarity
    transforms around a LAPACK triangular Sylvester solve.
    """

    def __init__(self, M: np.ndarray, G: np.ndarray):
        self._ra, self._qa = schur(M, output="real")
        self._rb, self._qb = schur(G.conj().T, output="real")
        self._trsyl = get_lapack_funcs("trsyl", (self._ra, self._rb))

    def solve(self, Q: np.ndarray) -> np.ndarray:
        f = self._qa.conj().T @ Q @ self._qb
        y, scale, info = self._trsyl(self._ra, self._rb, f, tranb="C")
        if info < 0:
            raise SylvesterFailure(f"illegal value in triangular Sylvester solve (info={info})")
        if info > 0:
            raise SylvesterFailure("coefficient spectra overlap numerically; the model is invalid")
        y = scale * y
        if not np.isfinite(y).all():
            raise SylvesterFailure("triangular Sylvester solve produced non-finite entries")
        return self._qa @ y @ self._qb.conj().T


def _ascent_coefficient(blocks: FluidBlocks, k: int, theta: float) -> np.ndarray:
    """Rate-scaled ascending coefficient ``C_k^{-1} (V_k - theta I)``."""
    V, _, _, _, C = blocks.at(k)
    return (V - theta * np.eye(V.shape[0])) / np.diag(C)[:, None]


class SolverWorkspace:
    """Triangular arrays of first-return and downward blocks at one (theta, s).

    Blocks are stored packed inside two dense matrices; accessors return
    1-based block views.  Invariants (checked by tests): every psi block is
    entrywise nonnegative, psi row sums at theta=0 stay below one, the
    diagonal ``U`` block equals ``G_k`` exactly and off-diagonal ``U`` blocks
    are nonnegative.
    """

    def __init__(self, blocks: FluidBlocks, theta: float, s: int):
        self.blocks = blocks
        self.theta = float(theta)
        self.s = int(s)
        self._uoff = np.cumsum([0] + [blocks.up_dim(k) for k in range(1, s + 1)])
        self._doff = np.cumsum([0] + [blocks.down_dim(k) for k in range(1, s + 1)])
        self.psi_big = np.zeros((self._uoff[-1], self._doff[-1]))
        # off-diagonal U blocks: t(k, l) = F_k psi(k+1, l)
        self.t_big = np.zeros((self._doff[-1], self._doff[-1]))
        self._big_u: np.ndarray | None = None
        self._w: np.ndarray | None = None

    # -- block accessors (1-based) ----------------------------------------

    def _uslice(self, k: int) -> slice:
        return slice(self._uoff[k - 1], self._uoff[k])

    def _dslice(self, k: int) -> slice:
        return slice(self._doff[k - 1], self._doff[k])

    def psi(self, k: int, ell: int) -> np.ndarray:
        """First-return block from ascending block k to descending block ell."""
        if not 1 <= k <= ell <= self.s:
            raise IndexError("psi blocks exist for 1 <= k <= ell <= s")
        return self.psi_big[self._uslice(k), self._dslice(ell)]

    def u_block(self, k: int, ell: int) -> np.ndarray:
        """Downward-phase generator block; ``G_k`` on the diagonal."""
        if not 1 <= k <= ell <= self.s:
            raise IndexError("U blocks exist for 1 <= k <= ell <= s")
        if k == ell:
            return self.blocks.at(k)[3]
        return self.t_big[self._dslice(k), self._dslice(ell)]

    # -- assembled quantities ----------------------------------------------

    def big_u(self) -> np.ndarray:
        """Dense downward generator assembled from the U blocks (cached)."""
        if self._big_u is None:
            n = self._doff[-1]
            if n > MAX_DENSE_DIM:
                raise NumericalFailure(
                    f"downward generator dimension {n} exceeds the dense limit {MAX_DENSE_DIM}; "
                    "reduce s or use the level-homogeneous transform"
                )
            U = self.t_big.copy()
            for k in range(1, self.s + 1):
                U[self._dslice(k), self._dslice(k)] = self.blocks.at(k)[3]
            self._big_u = U
        return self._big_u

    def entry_row(self) -> np.ndarray:
        """Stacked row vector ``pi psi(1, ell)`` for ell = 1..s (cached)."""
        if self._w is None:
            self._w = self.blocks.pi @ self.psi_big[self._uslice(1), :]
        return self._w

    def deficit_column(self, y: float) -> np.ndarray:
        """Stacked survival factors ``expm(G_ell y) 1`` for ell = 1..s."""
        if y == 0.0:
            return np.ones(self._doff[-1])
        parts = []
        for ell in range(1, self.s + 1):
            G = self.blocks.at(ell)[3]
            parts.append(expm(G * y) @ np.ones(G.shape[0]))
        return np.concatenate(parts)

    def value(self, u: float, y: float, s: int | None = None) -> float:
        """Transform value at reserve ``u`` and deficit threshold ``y``.

        ``s`` truncates the double sum to the leading blocks; by triangularity
        those blocks agree with the ones a smaller workspace would produce.
        """
        s = self.s if s is None else int(s)
        if not 1 <= s <= self.s:
            raise ValueError("partial truncation must satisfy 1 <= s <= workspace s")
        n = self._doff[s]
        w = self.entry_row()[:n]
        z = self.deficit_column(y)[:n]
        if u == 0.0:
            return float(w @ z)
        U = self.big_u()[:n, :n]
        return float(expm_multiply(U.T * u, w) @ z)


def _fill_diag_poisson(ws: SolverWorkspace, lam: float, c: float):
    theta = ws.theta
    kappa = lam + theta
    for k in range(1, ws.s + 1):
        A = ws.blocks.at(k)[3]
        M = np.eye(A.shape[0]) - (c / kappa) * A
        try:
            ws.psi_big[ws._uslice(k), ws._dslice(k)] = (lam / kappa) * np.linalg.solve(M, np.eye(A.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise SingularResolvent(f"ascending resolvent of block {k} is singular") from exc


def psi_blocks_poisson(blocks: FluidBlocks, theta: float, s: int) -> SolverWorkspace:
    """First-return blocks for Poisson arrivals via the closed recursion.

    The diagonal block is ``lam/(lam+theta) (I - c/(lam+theta) A_k)^{-1}``;
    band ``l-k`` blocks accumulate the products of lower bands and end with a
    right resolvent solve.  Blocks are filled in increasing band order.
    """
    if blocks.kind != "poisson":
        raise ValueError("closed-form recursion requires poisson blocks")
    if s < 1:
        raise ValueError("truncation s must be >= 1")
    # the arrival rate and premium rate are the diagonal entries of W and C
    lam = float(blocks.at(1)[1][0, 0])
    c = float(np.diag(blocks.at(1)[4])[0])
    ws = SolverWorkspace(blocks, theta, s)
    kappa = lam + theta
    _fill_diag_poisson(ws, lam, c)
    lus = {}
    for ell in range(2, s + 1):
        A_l = ws.blocks.at(ell)[3]
        lus[ell] = lu_factor((np.eye(A_l.shape[0]) - (c / kappa) * A_l).T)
    for ell in range(2, s + 1):
        col = ws._dslice(ell)
        for k in range(ell - 1, 0, -1):
            F_k = ws.blocks.at(k)[2]
            ws.t_big[ws._dslice(k), col] = F_k @ ws.psi_big[ws._uslice(k + 1), col]
            S = ws.psi_big[ws._uslice(k), ws._doff[k - 1]:ws._doff[ell - 1]] @ \
                ws.t_big[ws._doff[k - 1]:ws._doff[ell - 1], col]
            ws.psi_big[ws._uslice(k), col] = (c / kappa) * lu_solve(lus[ell], S.T).T
    return ws


def psi_blocks_general(blocks: FluidBlocks, theta: float, s: int) -> SolverWorkspace:
    """First-return blocks for arbitrary block shapes via Sylvester equations.

    The diagonal block solves the linear equation
    ``C_k^{-1}(V_k - theta I) X + X G_k + C_k^{-1} W_k = 0`` and band blocks
    solve the same left-hand side against the accumulated lower-band products.
    Valid for every arrival mechanism; agrees with the closed recursion on
    Poisson input.
    """
    if s < 1:
        raise ValueError("truncation s must be >= 1")
    ws = SolverWorkspace(blocks, theta, s)
    stationary = blocks.stationary
    solvers: dict[tuple[int, int], _SylvesterSolver] = {}

    def solver_for(k: int, ell: int) -> _SylvesterSolver:
        key = (1, 1) if stationary else (k, ell)
        got = solvers.get(key)
        if got is None:
            got = _SylvesterSolver(_ascent_coefficient(blocks, k, theta), blocks.at(ell)[3])
            solvers[key] = got
        return got

    for k in range(1, s + 1):
        _, W, _, _, C = blocks.at(k)
        Q = -(W / np.diag(C)[:, None])
        ws.psi_big[ws._uslice(k), ws._dslice(k)] = solver_for(k, k).solve(Q)
    for ell in range(2, s + 1):
        col = ws._dslice(ell)
        for k in range(ell - 1, 0, -1):
            F_k = ws.blocks.at(k)[2]
            ws.t_big[ws._dslice(k), col] = F_k @ ws.psi_big[ws._uslice(k + 1), col]
            S = ws.psi_big[ws._uslice(k), ws._doff[k - 1]:ws._doff[ell - 1]] @ \
                ws.t_big[ws._doff[k - 1]:ws._doff[ell - 1], col]
            ws.psi_big[ws._uslice(k), col] = solver_for(k, ell).solve(-S)
    return ws


def solve_workspace(blocks: FluidBlocks, theta: float, s: int) -> SolverWorkspace:
    """Dispatch to the closed recursion for Poisson blocks, else Sylvester."""
    if blocks.kind == "poisson":
        return psi_blocks_poisson(blocks, theta, s)
    return psi_blocks_general(blocks, theta, s)


def u_blocks(ws: SolverWorkspace) -> dict[tuple[int, int], np.ndarray]:
    """Triangular dict of downward generator blocks ``(k, ell) -> U(k, ell)``."""
    return {(k, ell): ws.u_block(k, ell) for k in range(1, ws.s + 1) for ell in range(k, ws.s + 1)}


def phi_blocks(ws: SolverWorkspace, u: float) -> dict[tuple[int, int], np.ndarray]:
    """Blocks of ``expm(U u)`` for the assembled downward generator.

    By block triangularity the leading blocks do not depend on the discarded
    tail, so enlarging ``s`` leaves the returned blocks unchanged.
    """
    if u < 0.0:
        raise ValueError("level u must be >= 0")
    E = expm(ws.big_u() * u)
    return {
        (k, ell): E[ws._dslice(k), ws._dslice(ell)]
        for k in range(1, ws.s + 1)
        for ell in range(k, ws.s + 1)
    }


# -- level-homogeneous ladder -------------------------------------------------


class HomogeneousLadder:
    """Band-indexed first-return blocks for level-homogeneous models.

    When every index uses the same blocks, psi and U depend only on the band
    ``h = ell - k``; the band sequence extends in quadratic total cost and the
    finite-truncation transform follows from cumulative sums.
    """

    def __init__(self, blocks: FluidBlocks, theta: float):
        if not blocks.stationary:
            raise ValueError("ladder requires a level-homogeneous model")
        self.blocks = blocks
        self.theta = float(theta)
        V, W, F, G, C = blocks.at(1)
        self.F, self.G = F, G
        self._mu, self._md = V.shape[0], G.shape[0]
        self._poisson = blocks.kind == "poisson"
        if self._poisson:
            lam = float(W[0, 0])
            c = float(np.diag(C)[0])
            self._kappa = lam + theta
            self._cfac = c / self._kappa
            M = np.eye(self._md) - self._cfac * G
            self._lu = lu_factor(M.T)
            psi0 = (lam / self._kappa) * lu_solve(self._lu, np.eye(self._md)).T
        else:
            self._sylv = _SylvesterSolver(_ascent_coefficient(blocks, 1, theta), G)
            psi0 = self._sylv.solve(-(W / np.diag(C)[:, None]))
        cap = 64
        self._psi = np.zeros((cap, self._mu, self._md))
        self._e = np.zeros((cap, self._md, self._md))
        self._psi[0] = psi0
        self._e[0] = F @ psi0
        self._n = 1
        self._cum = [np.array(blocks.pi @ psi0)]

    def _grow(self, n: int):
        if n <= self._psi.shape[0]:
            return
        cap = max(n, 2 * self._psi.shape[0])
        for name in ("_psi", "_e"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:])
            new[: old.shape[0]] = old
            setattr(self, name, new)

    def extend(self, s: int):
        """Ensure bands ``h = 0..s-1`` are available."""
        self._grow(s)
        while self._n < s:
            h = self._n
            S = np.einsum("hij,hjk->ik", self._psi[:h], self._e[h - 1 :: -1])
            if self._poisson:
                block = self._cfac * lu_solve(self._lu, S.T).T
            else:
                block = self._sylv.solve(-S)
            self._psi[h] = block
            self._e[h] = self.F @ block
            self._cum.append(self._cum[-1] + self.blocks.pi @ block)
            self._n += 1

    def band(self, h: int) -> np.ndarray:
        self.extend(h + 1)
        return self._psi[h]

    def value(self, u: float, y: float, s: int) -> float:
        """Transform value at truncation ``s`` (same double sum as the workspace)."""
        n = s * self._md
        if u > 0.0 and n > MAX_DENSE_DIM:
            raise NumericalFailure(
                f"downward generator dimension {n} exceeds the dense limit {MAX_DENSE_DIM}; "
                "use the infinite-horizon stationary transform for u > 0"
            )
        self.extend(s)
        z = np.ones(self._md) if y == 0.0 else expm(self.G * y) @ np.ones(self._md)
        if u == 0.0:
            return float(self._cum[s - 1] @ z)
        U = np.zeros((n, n))
        for k in range(s):
            row = slice(k * self._md, (k + 1) * self._md)
            U[row, row] = self.G
            for h in range(1, s - k):
                col = (k + h) * self._md
                U[row, col : col + self._md] = self._e[h - 1]
        w = np.concatenate([self.blocks.pi @ self._psi[h] for h in range(s)])
        v = expm_multiply(U.T * u, w)
        return float(v @ np.tile(z, s))


# -- top-level operations ------------------------------------------------------


def ruin_transform(blocks: FluidBlocks, query: RuinQuery) -> float:
    """Joint transform of ruin time, deficit and claim count at the query point.

    Nondecreasing in ``s``; nonincreasing in each of ``theta``, ``u``, ``y``.
    """
    if blocks.stationary:
        ladder = HomogeneousLadder(blocks, query.theta)
        return ladder.value(query.u, query.y, query.s)
    ws = solve_workspace(blocks, query.theta, query.s)
    return ws.value(query.u, query.y)


def ruin_prob_by_claims(blocks: FluidBlocks, u: float, s: int) -> float:
    """Probability of ruin within the first ``s`` claims."""
    return ruin_transform(blocks, RuinQuery(u=u, theta=0.0, s=s, y=0.0))


def ultimate_ruin(blocks: FluidBlocks, u: float, tol: float = 1e-6,
                  s_start: int = 64, s_cap: int = 2 ** 14) -> tuple[float, int]:
    """Ultimate ruin probability by doubling the claim-count truncation.

    Doubles ``s`` from ``s_start`` until one doubling changes the ruin
    probability by less than ``tol``; returns ``(value, s)``.  Raises
    :class:`TruncationLimit` (carrying the partial value) if ``s`` would
    exceed ``s_cap`` before converging.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    ladder = HomogeneousLadder(blocks, 0.0) if blocks.stationary else None

    def prob(s: int) -> float:
        if ladder is not None:
            return ladder.value(u, 0.0, s)
        return solve_workspace(blocks, 0.0, s).value(u, 0.0)

    s = s_start
    prev = prob(s)
    while 2 * s <= s_cap:
        s *= 2
        try:
            cur = prob(s)
        except NumericalFailure as exc:
            # the dense assembly limit acts as an effective truncation cap
            raise TruncationLimit(str(exc), value=prev, s=s // 2) from exc
        if abs(cur - prev) < tol:
            return cur, s
        prev = cur
    raise TruncationLimit(
        f"truncation cap {s_cap} reached with increment still >= {tol}", value=prev, s=s
    )


# -- level-homogeneous closed forms -------------------------------------------


def riccati_psi_hat(A: np.ndarray, D: np.ndarray, lam: float, c: float,
                    theta: float = 0.0, tol: float = 1e-10, max_iter: int = 10 ** 5) -> np.ndarray:
    """Minimal nonnegative solution of the first-return Riccati equation.

    Solves ``(lam/c) I + Z (A - (lam+theta)/c I) + Z D Z = 0`` by the monotone
    fixed point ``Z <- ((lam/c) I + Z D Z) ((lam+theta)/c I - A)^{-1}``
    starting from zero, stopping when successive iterates differ by less than
    ``tol`` in max norm.  The residual is checked against ``10 * tol``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = A.shape[0]
    K = ((lam + theta) / c) * np.eye(n) - A
    lu = lu_factor(K.T)
    base = (lam / c) * np.eye(n)
    Z = np.zeros((n, n))
    for _ in range(max_iter):
        Zn = lu_solve(lu, (base + Z @ D @ Z).T).T
        if np.max(np.abs(Zn - Z)) < tol:
            Z = Zn
            break
        Z = Zn
    else:
        raise NonConvergence(f"Riccati fixed point did not converge within {max_iter} iterations")
    residual = base + Z @ (A - ((lam + theta) / c) * np.eye(n)) + Z @ D @ Z
    if np.max(np.abs(residual)) >= 10.0 * tol:
        raise NonConvergence(f"Riccati residual {np.max(np.abs(residual)):.3e} exceeds {10 * tol:.1e}")
    return Z


def stationary_transform(A, D, alpha, lam: float, c: float, u: float,
                         theta: float = 0.0, y: float = 0.0, tol: float = 1e-10) -> float:
    """Infinite-horizon transform for level-homogeneous blocks.

    Evaluates ``alpha psihat expm(Uhat u) expm(A y) 1`` with
    ``Uhat = A + D psihat`` and ``psihat`` from the Riccati fixed point.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    psi_hat = riccati_psi_hat(A, D, lam, c, theta=theta, tol=tol)
    u_hat = A + D @ psi_hat
    v = alpha @ psi_hat
    if u > 0.0:
        v = v @ expm(u_hat * u)
    if y > 0.0:
        v = v @ expm(A * y)
    return float(v @ np.ones(A.shape[0]))


def is_psi_stochastic(psi_hat: np.ndarray, tol: float = 1e-8) -> bool:
    """True when every row of ``psi_hat`` sums to one within ``tol``.

    A stochastic first-return matrix means the fluid returns to its starting
    level almost surely, i.e. ultimate ruin is certain whatever the reserve.
    """
    rows = np.asarray(psi_hat, dtype=float).sum(axis=1)
    return bool(np.max(np.abs(rows - 1.0)) < tol)


# -- curve evaluation helpers --------------------------------------------------


def transform_curve_in_u(blocks: FluidBlocks, theta: float, s: int, y: float,
                         u_values: np.ndarray) -> np.ndarray:
    """Transform along an increasing reserve grid, one workspace for all points.

    Uniformly spaced grids use a single multi-point exponential action.
    """
    u_values = np.asarray(u_values, dtype=float)
    ws = solve_workspace(blocks, theta, s)
    w = ws.entry_row()
    z = ws.deficit_column(y)
    if u_values.size == 1:
        return np.array([ws.value(u_values[0], y)])
    steps = np.diff(u_values)
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=1e-12)
    UT = ws.big_u().T
    if uniform and u_values[0] == 0.0:
        X = expm_multiply(UT, w, start=u_values[0], stop=u_values[-1], num=u_values.size, endpoint=True)
        return X @ z
    out = np.empty(u_values.size)
    v = w if u_values[0] == 0.0 else expm_multiply(UT * u_values[0], w)
    out[0] = v @ z
    for i, du in enumerate(steps, start=1):
        v = expm_multiply(UT * du, v) if du > 0.0 else v
        out[i] = v @ z
    return out


def transform_curve_in_s(blocks: FluidBlocks, theta: float, u: float, y: float,
                         s_values) -> np.ndarray:
    """Transform along a grid of truncations, computed from one workspace.

    A single exponential action at ``u`` yields every partial sum because the
    assembled downward generator is block upper triangular.
    """
    s_values = [int(s) for s in s_values]
    smax = max(s_values)
    if blocks.stationary:
        ladder = HomogeneousLadder(blocks, theta)
        return np.array([ladder.value(u, y, s) for s in s_values])
    ws = solve_workspace(blocks, theta, smax)
    w = ws.entry_row()
    z = ws.deficit_column(y)
    v = w if u == 0.0 else expm_multiply(ws.big_u().T * u, w)
    return np.array([float(v[: ws._doff[s]] @ z[: ws._doff[s]]) for s in s_values])
