"""Finite-dimensional Hilbert-space kernel.

Uniform grids, weighted states, dense (or sparse) operators and a
deterministic Hermitian eigensolver. Everything is in atomic units
(hbar = m_e = e^2/4 pi eps0 = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    DimensionMismatchError,
    EigenConvergenceError,
    InvalidArgumentError,
    NotHermitianError,
    ZeroNormError,
)

HERMITIAN_TOL = 1e-12
RESIDUAL_TOL = 1e-10
# above this dimension eigh switches from LAPACK to Lanczos
DENSE_LIMIT = 6000


@dataclass(frozen=True)
class Grid1D:
    n: int
    x_min: float
    x_max: float

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def is_symmetric(self) -> bool:
        return abs(self.x_min + self.x_max) <= 1e-12 * max(abs(self.x_min), abs(self.x_max))


def make_uniform_grid(n: int, x_min: float, x_max: float) -> Grid1D:
    if int(n) != n or n < 3:
        raise InvalidArgumentError(f"grid needs at least 3 points, got n={n}")
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_min >= x_max:
        raise InvalidArgumentError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    return Grid1D(int(n), float(x_min), float(x_max))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes plus the quadrature weight of the inner product.

    ``weight`` is the grid spacing for a grid representation and 1 for an
    abstract orthonormal basis, so that ``norm**2 = weight * sum(|c|**2)``.
    """

    amplitudes: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("state amplitudes must be finite")
        if not (self.weight > 0 and np.isfinite(self.weight)):
            raise InvalidArgumentError(f"weight must be positive, got {self.weight}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.weight) * np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm
        if nrm == 0.0:
            raise ZeroNormError("cannot normalize a zero state")
        return StateVector(self.amplitudes / nrm, self.weight)

    def scaled(self, c: complex) -> "StateVector":
        return StateVector(c * self.amplitudes, self.weight)

    def __add__(self, other: "StateVector") -> "StateVector":
        _check_compatible(self, other)
        return StateVector(self.amplitudes + other.amplitudes, self.weight)

    def __sub__(self, other: "StateVector") -> "StateVector":
        _check_compatible(self, other)
        return StateVector(self.amplitudes - other.amplitudes, self.weight)


def basis_state(n: int, index: int, weight: float = 1.0) -> StateVector:
    """Unit vector ``e_index`` of an ``n``-dimensional space, normalized under ``weight``."""
    amps = np.zeros(n, dtype=complex)
    amps[index] = 1.0 / np.sqrt(weight)
    return StateVector(amps, weight)


def grid_state(grid: Grid1D, values) -> StateVector:
    return StateVector(np.asarray(values, dtype=complex), grid.h)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Matrix acting on the amplitudes of states with quadrature ``weight``.

    With a uniform weight a Hermitian matrix is self-adjoint for the weighted
    inner product as well, so eigenvectors only need rescaling by sqrt(weight).
    ``matrix`` may be a dense array or a scipy sparse matrix.
    """

    matrix: object
    hermitian: bool = True
    weight: float = 1.0

    def __post_init__(self):
        mat = self.matrix
        if scipy.sparse.issparse(mat):
            mat = scipy.sparse.csr_matrix(mat)
            data = mat.data
        else:
            mat = np.array(mat)
            if mat.dtype.kind not in "fc":
                mat = mat.astype(float)
            mat.flags.writeable = False
            data = mat
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError("operator entries must be finite")
        object.__setattr__(self, "matrix", mat)
        if self.hermitian:
            scale = _max_abs(mat)
            asym = _max_abs(mat - mat.conj().T)
            if asym > HERMITIAN_TOL * max(scale, np.finfo(float).tiny):
                raise NotHermitianError(
                    f"operator flagged Hermitian but max|M - M^H| = {asym:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def apply(self, state: StateVector) -> StateVector:
        if state.dim != self.dim:
            raise DimensionMismatchError(
                f"operator of dimension {self.dim} applied to state of dimension {state.dim}"
            )
        return StateVector(self.matrix @ state.amplitudes, state.weight)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        return self.matrix @ other

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        if other.dim != self.dim:
            raise DimensionMismatchError(f"cannot add operators of dimension {self.dim} and {other.dim}")
        return LinearOperator(self.matrix + other.matrix, self.hermitian and other.hermitian, self.weight)

    def shifted(self, c: float) -> "LinearOperator":
        """``A + c * 1``."""
        if self.is_sparse:
            mat = self.matrix + c * scipy.sparse.identity(self.dim, format="csr")
        else:
            mat = self.matrix + c * np.eye(self.dim)
        return LinearOperator(mat, self.hermitian, self.weight)


def _max_abs(mat) -> float:
    if scipy.sparse.issparse(mat):
        return float(abs(mat).max()) if mat.nnz else 0.0
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def _check_compatible(u: StateVector, v: StateVector):
    if u.dim != v.dim:
        raise DimensionMismatchError(f"state dimensions differ: {u.dim} vs {v.dim}")
    if u.weight != v.weight:
        raise DimensionMismatchError(f"state weights differ: {u.weight} vs {v.weight}")


def inner(u: StateVector, v: StateVector) -> complex:
    """Weighted inner product, conjugating the first argument."""
    _check_compatible(u, v)
    return complex(u.weight * np.vdot(u.amplitudes, v.amplitudes))


def build_kinetic(grid: Grid1D, mass: float) -> LinearOperator:
    """Second-difference kinetic operator -(1/2m) d^2/dx^2 with hard walls."""
    if not mass > 0:
        raise InvalidArgumentError(f"mass must be positive, got {mass}")
    h = grid.h
    diag = np.full(grid.n, 1.0 / (mass * h * h))
    off = np.full(grid.n - 1, -0.5 / (mass * h * h))
    mat = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return LinearOperator(mat, True, h)


def build_potential(grid: Grid1D, f: Callable[[np.ndarray], np.ndarray]) -> LinearOperator:
    x = grid.points
    values = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise InvalidArgumentError(f"potential is not finite at x = {x[bad[0]]}")
    return LinearOperator(np.diag(values), True, grid.h)


def soft_coulomb(x, center: float = 0.0, softening: float = 1.0, charge: float = 1.0):
    """Attractive soft-Coulomb well ``-charge / sqrt((x - center)^2 + s^2)``."""
    return -charge / np.sqrt((np.asarray(x) - center) ** 2 + softening**2)


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    # largest-magnitude component made real-positive; first index wins ties
    mags = np.abs(vec)
    idx = int(np.argmax(mags >= mags.max() * (1 - 1e-12)))
    if mags[idx] == 0:
        return vec
    return vec * (abs(vec[idx]) / vec[idx])


def _first_nonzero(vec: np.ndarray) -> int:
    mags = np.abs(vec)
    return int(np.argmax(mags > 1e-10 * mags.max()))


def _lowest(op: LinearOperator, k: int):
    n = op.dim
    if n <= DENSE_LIMIT or k > n // 2:
        try:
            return scipy.linalg.eigh(op.dense(), subset_by_index=[0, k - 1])
        except np.linalg.LinAlgError as exc:
            raise EigenConvergenceError(f"dense eigensolver failed: {exc}") from exc
    mat = op.matrix if op.is_sparse else scipy.sparse.csr_matrix(op.matrix)
    maxiter = 20 * n
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(mat, k=k, which="SA", tol=1e-13, maxiter=maxiter)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise EigenConvergenceError(
            f"Lanczos eigensolver did not converge within {maxiter} iterations",
            iterations=maxiter,
        ) from exc
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _canonical_basis(block: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(block) that depends only on the subspace.

    Row-reduce to echelon form (pivots in ascending index), then Gram-Schmidt
    in pivot order; vector j has its first nonzero component at pivot j.
    """
    rows = block.T.copy()
    m, n = rows.shape
    tol = 1e-8
    r = 0
    for col in range(n):
        if r == m:
            break
        piv = r + int(np.argmax(np.abs(rows[r:, col])))
        if abs(rows[piv, col]) <= tol:
            continue
        rows[[r, piv]] = rows[[piv, r]]
        rows[r] /= rows[r, col]
        for i in range(m):
            if i != r:
                rows[i] -= rows[i, col] * rows[r]
        r += 1
    q, _ = np.linalg.qr(rows.T)
    return q


def eigh(op: LinearOperator, k: int) -> list[tuple[float, StateVector]]:
    """Lowest ``k`` eigenpairs of a Hermitian operator, ascending.

    Output is deterministic: degenerate eigenvectors are ordered by the index of
    their first nonzero component and each vector carries the phase that makes
    its largest component real-positive.
    """
    if not op.hermitian:
        raise NotHermitianError("eigh requires an operator flagged Hermitian")
    n = op.dim
    if int(k) != k or not 1 <= k <= n:
        raise InvalidArgumentError(f"need 1 <= k <= {n}, got k={k}")
    k = int(k)

    scale = max(_max_abs(op.matrix), 1.0)
    tie = 1e-12 * scale
    # widen the request until no degenerate block straddles index k
    m = k
    while True:
        vals, vecs = _lowest(op, min(m + 1, n))
        if m >= n or vals[m] - vals[m - 1] > tie:
            break
        m = min(2 * m, n)
    vals, vecs = vals[:m], np.array(vecs[:, :m], dtype=complex)

    start = 0
    while start < m:
        stop = start + 1
        while stop < m and vals[stop] - vals[start] <= tie:
            stop += 1
        if stop - start > 1:
            vecs[:, start:stop] = _canonical_basis(vecs[:, start:stop])
        start = stop
    for j in range(m):
        vecs[:, j] = _canonical_phase(vecs[:, j])
    vals, vecs = vals[:k], vecs[:, :k]

    norm_a = _operator_norm(op)
    pairs = []
    sqrt_w = np.sqrt(op.weight)
    for j in range(k):
        v = vecs[:, j]
        resid = np.linalg.norm(op.matrix @ v - vals[j] * v)
        if resid > RESIDUAL_TOL * norm_a:
            raise EigenConvergenceError(
                f"eigenpair {j} residual {resid:.3e} exceeds {RESIDUAL_TOL:g}*||A||"
            )
        pairs.append((float(vals[j]), StateVector(v / sqrt_w, op.weight)))
    return pairs


def _operator_norm(op: LinearOperator) -> float:
    # cheap upper bound on the spectral norm: max absolute row sum
    mat = op.matrix
    if scipy.sparse.issparse(mat):
        return float(abs(mat).sum(axis=1).max()) if mat.nnz else 0.0
    return float(np.max(np.sum(np.abs(mat), axis=1))) if mat.size else 0.0


def ground_state(op: LinearOperator) -> tuple[float, StateVector]:
    return eigh(op, 1)[0]


def expectation(state: StateVector, op: LinearOperator) -> complex:
    """<state|op|state> / <state|state>."""
    nrm2 = inner(state, state).real
    if nrm2 == 0.0:
        raise ZeroNormError("expectation value of a zero state")
    return inner(state, op.apply(state)) / nrm2
