"""One-dimensional soft-Coulomb model of a one-electron diatomic ion.

Coordinates: electron position ``x`` (nuclei at +-r/2) and the internuclear
separation ``r`` (relative motion, reduced mass M/2). Four routes to the
ground state are provided:

* ``electron_hamiltonian`` / ``bo_curve``: clamped-nuclei electronic problem;
* ``nuclear_hamiltonian``: relative nuclear motion on the Born-Oppenheimer curve;
* ``scf_hartree``: product ansatz psi(x) phi(r), each factor moving in the
  expectation of the interaction over the other (mean-field fixed point);
* ``exact_two_coordinate``: the full linear Hamiltonian on the tensor grid.

Since the product state is a restricted ansatz on the same grids, the SCF
energy is bounded below by the exact one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .errors import DimensionMismatchError, DivergenceError, InvalidArgumentError, ZeroNormError
from .hilbert import (
    Grid1D,
    LinearOperator,
    StateVector,
    build_kinetic,
    eigh,
    make_uniform_grid,
)

log = logging.getLogger(__name__)

MAX_TENSOR_SIZE = 100_000


@dataclass(frozen=True)
class MoleculeParams:
    electron_grid: Grid1D = field(default_factory=lambda: make_uniform_grid(241, -24.0, 24.0))
    nuclear_grid: Grid1D = field(default_factory=lambda: make_uniform_grid(121, 0.4, 6.4))
    M: float = 100.0
    s_e: float = 1.0
    s_n: float = 1.0

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidArgumentError(f"nuclear mass M must be positive, got {self.M}")
        if not (self.s_e > 0 and self.s_n > 0):
            raise InvalidArgumentError("softening lengths must be positive")
        if not self.nuclear_grid.x_min > 0:
            raise InvalidArgumentError(
                f"nuclear grid must lie in r > 0, starts at {self.nuclear_grid.x_min}"
            )

    @property
    def reduced_mass(self) -> float:
        return 0.5 * self.M


def electron_nuclear(x, r, s_e: float):
    """Attraction of an electron at ``x`` to unit charges at +-r/2."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    return -1.0 / np.sqrt((x - 0.5 * r) ** 2 + s_e**2) - 1.0 / np.sqrt((x + 0.5 * r) ** 2 + s_e**2)


def nuclear_repulsion(r, s_n: float):
    return 1.0 / np.sqrt(np.asarray(r, dtype=float) ** 2 + s_n**2)


def interaction_matrix(p: MoleculeParams) -> np.ndarray:
    """V_int(x_i, r_j) on the electron x nuclear grid, shape (n_e, n_n)."""
    x = p.electron_grid.points[:, None]
    r = p.nuclear_grid.points[None, :]
    return electron_nuclear(x, r, p.s_e)


def _check_separation(p: MoleculeParams, r: float):
    g = p.electron_grid
    if not np.isfinite(r) or r < 0 or not (g.x_min < -0.5 * r and 0.5 * r < g.x_max):
        raise InvalidArgumentError(
            f"separation r={r} puts a nucleus outside the electron grid [{g.x_min}, {g.x_max}]"
        )


def electron_hamiltonian(p: MoleculeParams, r: float) -> LinearOperator:
    """Clamped-nuclei electronic Hamiltonian -1/2 d^2/dx^2 + V_int(x, r)."""
    _check_separation(p, r)
    grid = p.electron_grid
    kin = build_kinetic(grid, 1.0)
    return LinearOperator(kin.matrix + np.diag(electron_nuclear(grid.points, r, p.s_e)), True, grid.h)


def _ground(op: LinearOperator, potential: np.ndarray, grid: Grid1D) -> tuple[float, StateVector]:
    energy, state = eigh(op, 1)[0]
    if grid.is_symmetric and np.allclose(potential, potential[::-1], rtol=0, atol=1e-12):
        # even-parity ground state; guards against mixing with a near-degenerate odd partner
        amps = state.amplitudes
        even = StateVector(0.5 * (amps + amps[::-1]), state.weight)
        state = even.normalized()
        energy = float(np.vdot(state.amplitudes, op.matrix @ state.amplitudes).real * state.weight)
    return energy, state


def electron_ground_state(p: MoleculeParams, r: float) -> tuple[float, StateVector]:
    ham = electron_hamiltonian(p, r)
    return _ground(ham, electron_nuclear(p.electron_grid.points, r, p.s_e), p.electron_grid)


@dataclass(frozen=True, eq=False)
class BoCurve:
    separations: np.ndarray
    electronic_energy: np.ndarray
    total_curve: np.ndarray

    def local_minima(self) -> list[int]:
        e = self.total_curve
        return [i for i in range(1, e.size - 1) if e[i] < e[i - 1] and e[i] <= e[i + 1]]

    def minimum(self) -> float:
        """Separation of the lowest tabulated point, refined by a parabola through its neighbours."""
        e, r = self.total_curve, self.separations
        i = int(np.argmin(e))
        if i == 0 or i == e.size - 1:
            return float(r[i])
        x0, x1, x2 = r[i - 1: i + 2]
        y0, y1, y2 = e[i - 1: i + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
        if A <= 0:
            return float(r[i])
        return float(np.clip(-B / (2 * A), x0, x2))


def bo_curve(p: MoleculeParams, r_values) -> BoCurve:
    """Electronic ground energy at each separation; ``total_curve`` adds nuclear repulsion.

    Points are independent solves, so the result does not depend on the
    order in which ``r_values`` are given.
    """
    r = np.sort(np.asarray(r_values, dtype=float).reshape(-1))
    if r.size == 0:
        raise InvalidArgumentError("bo_curve needs at least one separation")
    if np.any(np.diff(r) <= 0):
        raise InvalidArgumentError("separations must be distinct")
    elec = np.array([electron_ground_state(p, ri)[0] for ri in r])
    if not np.all(np.isfinite(elec)):
        raise DivergenceError("non-finite electronic energy on the BO curve")
    return BoCurve(r, elec, elec + nuclear_repulsion(r, p.s_n))


def nuclear_hamiltonian(p: MoleculeParams, curve: BoCurve) -> LinearOperator:
    """-1/(2 mu) d^2/dr^2 + repulsion + V_elec(r), V_elec linearly interpolated from ``curve``."""
    g = p.nuclear_grid
    lo, hi = curve.separations[0], curve.separations[-1]
    tol = 1e-12 * max(1.0, abs(hi))
    if g.x_min < lo - tol or g.x_max > hi + tol:
        raise InvalidArgumentError(
            f"nuclear grid [{g.x_min}, {g.x_max}] exceeds tabulated range [{lo}, {hi}]"
        )
    r = g.points
    v = nuclear_repulsion(r, p.s_n) + np.interp(r, curve.separations, curve.electronic_energy)
    kin = build_kinetic(g, p.reduced_mass)
    return LinearOperator(kin.matrix + np.diag(v), True, g.h)


def expected_separation(phi: StateVector, grid: Grid1D) -> float:
    """<phi| r |phi> / <phi|phi> on the relative-coordinate grid."""
    if phi.dim != grid.n:
        raise DimensionMismatchError(f"state dimension {phi.dim} != grid size {grid.n}")
    dens = np.abs(phi.amplitudes) ** 2
    total = dens.sum()
    if total == 0:
        raise ZeroNormError("expected separation of a zero state")
    return float(np.dot(dens, grid.points) / total)


@dataclass(frozen=True, eq=False)
class ScfResult:
    R_expectation: float
    E_electron: float
    E_nuclear: float
    E_total: float
    iterations: int
    history: list  # (R, E_total, delta) per iteration
    converged: bool
    psi: StateVector
    phi: StateVector

    def table(self) -> tuple[list[str], np.ndarray]:
        rows = [(i + 1, R, E, d) for i, (R, E, d) in enumerate(self.history)]
        return ["iteration", "R", "E_total", "delta"], np.array(rows, dtype=float).reshape(-1, 4)


def hartree_energy(p: MoleculeParams, psi: StateVector, phi: StateVector, W=None) -> tuple[float, float]:
    """(E_electron, E_nuclear) of the product state psi(x) phi(r).

    E_electron = <psi|T_e|psi> + <psi phi|V_int|psi phi> and
    E_nuclear = <phi|T_n + V_nn|phi>; the interaction is counted once.
    """
    W = interaction_matrix(p) if W is None else W
    ge, gn = p.electron_grid, p.nuclear_grid
    psi_n, phi_n = psi.normalized(), phi.normalized()
    rho_e = ge.h * np.abs(psi_n.amplitudes) ** 2
    rho_n = gn.h * np.abs(phi_n.amplitudes) ** 2
    t_e = build_kinetic(ge, 1.0)
    t_n = build_kinetic(gn, p.reduced_mass)
    kin_e = ge.h * np.vdot(psi_n.amplitudes, t_e.matrix @ psi_n.amplitudes).real
    kin_n = gn.h * np.vdot(phi_n.amplitudes, t_n.matrix @ phi_n.amplitudes).real
    e_int = float(rho_e @ W @ rho_n)
    e_nn = float(rho_n @ nuclear_repulsion(gn.points, p.s_n))
    return kin_e + e_int, kin_n + e_nn


def scf_initial_state(p: MoleculeParams) -> tuple[StateVector, StateVector, BoCurve]:
    """psi0 = electron ground state at the BO minimum, phi0 = BO nuclear ground state."""
    curve = bo_curve(p, p.nuclear_grid.points)
    _, phi0 = eigh(nuclear_hamiltonian(p, curve), 1)[0]
    _, psi0 = electron_ground_state(p, curve.minimum())
    return psi0, phi0, curve


def scf_hartree(
    p: MoleculeParams,
    tol: float = 1e-8,
    max_iter: int = 100,
    mixing: float = 0.5,
) -> ScfResult:
    """Mean-field fixed point of the product ansatz with linear potential mixing.

    Each iteration solves the electron in v_e(x) = sum_r |phi(r)|^2 h V_int(x, r),
    then the nuclei in v_n(r) = V_nn(r) + sum_x |psi(x)|^2 h V_int(x, r). Damping is
    applied once per cycle: the new nuclear potential is blended into the old
    one with weight ``mixing``, the electron potential is taken as is. Stops when
    max(|dE_total|, |dR|) <= tol. Hitting ``max_iter`` is reported through
    ``converged=False``, not raised.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if not 0 < mixing <= 1:
        raise InvalidArgumentError(f"mixing must lie in (0, 1], got {mixing}")
    if int(max_iter) != max_iter or max_iter < 1:
        raise InvalidArgumentError(f"max_iter must be a positive integer, got {max_iter}")

    ge, gn = p.electron_grid, p.nuclear_grid
    W = interaction_matrix(p)
    t_e = build_kinetic(ge, 1.0).matrix
    t_n = build_kinetic(gn, p.reduced_mass).matrix
    v_nn = nuclear_repulsion(gn.points, p.s_n)

    psi, phi, _ = scf_initial_state(p)

    def density(state, grid):
        return grid.h * np.abs(state.amplitudes) ** 2

    v_e = W @ density(phi, gn)
    v_n = v_nn + W.T @ density(psi, ge)
    e_el, e_nuc = hartree_energy(p, psi, phi, W)
    E_prev, R_prev = e_el + e_nuc, expected_separation(phi, gn)

    history = []
    converged = False
    for it in range(1, int(max_iter) + 1):
        _, psi = _ground(LinearOperator(t_e + np.diag(v_e), True, ge.h), v_e, ge)
        v_n = (1 - mixing) * v_n + mixing * (v_nn + W.T @ density(psi, ge))
        _, phi = eigh(LinearOperator(t_n + np.diag(v_n), True, gn.h), 1)[0]
        v_e = W @ density(phi, gn)

        e_el, e_nuc = hartree_energy(p, psi, phi, W)
        E, R = e_el + e_nuc, expected_separation(phi, gn)
        if not (np.isfinite(E) and np.isfinite(R)):
            raise DivergenceError(f"SCF energy diverged at iteration {it}", step=it)
        delta = max(abs(E - E_prev), abs(R - R_prev))
        history.append((R, E, delta))
        log.debug("scf iter %d: R=%.12f E=%.14f delta=%.3e", it, R, E, delta)
        E_prev, R_prev = E, R
        if delta <= tol:
            converged = True
            break

    return ScfResult(R, e_el, e_nuc, E, len(history), history, converged, psi, phi)


@dataclass(frozen=True, eq=False)
class TwoCoordinateState:
    """Ground state of the full Hamiltonian as a (n_e, n_n) amplitude array."""

    state: StateVector
    shape: tuple

    @property
    def grid_amplitudes(self) -> np.ndarray:
        return self.state.amplitudes.reshape(self.shape)

    def nuclear_density(self, electron_h: float) -> np.ndarray:
        return electron_h * np.sum(np.abs(self.grid_amplitudes) ** 2, axis=0)

    def expected_separation(self, p: MoleculeParams) -> float:
        dens = np.sum(np.abs(self.grid_amplitudes) ** 2, axis=0)
        return float(dens @ p.nuclear_grid.points / dens.sum())


def total_hamiltonian(p: MoleculeParams, interaction: bool = True) -> LinearOperator:
    """Sparse H_tot = T_e x 1 + 1 x T_n + V_nn(r) + V_int(x, r) on the tensor grid.

    Flattened index is ``i_x * n_n + j_r``. ``interaction=False`` drops V_int,
    leaving a separable operator.
    """
    ge, gn = p.electron_grid, p.nuclear_grid
    size = ge.n * gn.n
    if size > MAX_TENSOR_SIZE:
        raise InvalidArgumentError(
            f"tensor grid {ge.n}x{gn.n} = {size} exceeds the {MAX_TENSOR_SIZE} point limit"
        )
    t_e = scipy.sparse.csr_matrix(build_kinetic(ge, 1.0).matrix)
    t_n = scipy.sparse.csr_matrix(build_kinetic(gn, p.reduced_mass).matrix)
    pot = np.broadcast_to(nuclear_repulsion(gn.points, p.s_n), (ge.n, gn.n)).copy()
    if interaction:
        pot += interaction_matrix(p)
    mat = (
        scipy.sparse.kron(t_e, scipy.sparse.identity(gn.n))
        + scipy.sparse.kron(scipy.sparse.identity(ge.n), t_n)
        + scipy.sparse.diags(pot.reshape(-1))
    )
    return LinearOperator(mat.tocsr(), True, ge.h * gn.h)


def exact_two_coordinate(p: MoleculeParams, interaction: bool = True) -> tuple[float, TwoCoordinateState]:
    ham = total_hamiltonian(p, interaction)
    energy, state = eigh(ham, 1)[0]
    return energy, TwoCoordinateState(state, (p.electron_grid.n, p.nuclear_grid.n))
