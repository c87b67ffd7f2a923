"""Time evolution: linear Schrodinger propagation and the coupled S/M system.

The coupled system works in the interaction picture,

    i dpsi/dt = V(phi, t) psi,     i dphi/dt = L(psi, t) phi,

with no kinetic term of its own; fold free evolution into the coupling maps
if it is wanted. Everything is integrated with fixed-step classic RK4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, InvalidArgumentError, NotHermitianError
from .hilbert import LinearOperator, StateVector

DIVERGENCE_LIMIT = 1e12
SUPERPOSITION_EPS = 1e-300

COUPLING_KINDS = ("expectation-bilinear", "pointwise-product", "custom")


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(f, y0: np.ndarray, dt: float, steps: int, t0: float = 0.0) -> np.ndarray:
    """Fixed-step RK4; returns the (steps + 1, len(y0)) array of states.

    Aborts with ``DivergenceError`` as soon as an entry is non-finite or
    exceeds ``DIVERGENCE_LIMIT`` in magnitude.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if int(steps) != steps or steps < 0:
        raise InvalidArgumentError(f"steps must be a non-negative integer, got {steps}")
    steps = int(steps)
    y = np.array(y0, dtype=complex)
    out = np.empty((steps + 1, y.size), dtype=complex)
    out[0] = y
    for j in range(steps):
        y = rk4_step(f, t0 + j * dt, y, dt)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"state diverged at step {j + 1} (t = {t0 + (j + 1) * dt:.6g})", step=j + 1
            )
        out[j + 1] = y
    return out


def _coef(g, t: float):
    return g(t) if callable(g) else g


def _apply(op, v: np.ndarray) -> np.ndarray:
    # coupling maps may return a full matrix or just its diagonal
    return op * v if op.ndim == 1 else op @ v


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)
    norms: np.ndarray
    dt: float
    weight: float = 1.0
    integrator: str = "rk4"

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def state(self, i: int) -> StateVector:
        return StateVector(self.states[i], self.weight)

    @property
    def final(self) -> StateVector:
        return self.state(-1)


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    times: np.ndarray
    states_S: np.ndarray
    states_M: np.ndarray
    norms_S: np.ndarray
    norms_M: np.ndarray
    dt: float
    weight_S: float = 1.0
    weight_M: float = 1.0
    integrator: str = "rk4"

    @property
    def final_S(self) -> StateVector:
        return StateVector(self.states_S[-1], self.weight_S)

    @property
    def final_M(self) -> StateVector:
        return StateVector(self.states_M[-1], self.weight_M)

    def table(self, amplitudes: bool = True) -> tuple[list[str], np.ndarray]:
        """Header and rows for CSV output: t, norms, then Re/Im of every amplitude."""
        header = ["t", "norm_S", "norm_M"]
        cols = [self.times, self.norms_S, self.norms_M]
        if amplitudes:
            for name, states in (("psi", self.states_S), ("phi", self.states_M)):
                for k in range(states.shape[1]):
                    header += [f"re_{name}_{k}", f"im_{name}_{k}"]
                    cols += [states[:, k].real, states[:, k].imag]
        return header, np.column_stack(cols)


def _weighted_norms(states: np.ndarray, weight: float) -> np.ndarray:
    return np.sqrt(weight) * np.linalg.norm(states, axis=1)


def propagate_linear(H: LinearOperator, psi0: StateVector, dt: float, steps: int) -> Trajectory:
    """Integrate i dpsi/dt = H psi (hbar = 1) with RK4."""
    if not H.hermitian:
        raise NotHermitianError("propagate_linear needs a Hermitian Hamiltonian")
    if psi0.dim != H.dim:
        raise DimensionMismatchError(f"state dimension {psi0.dim} != operator dimension {H.dim}")
    gen = -1j * H.matrix

    def rhs(t, y):
        return gen @ y

    states = rk4_integrate(rhs, psi0.amplitudes, dt, steps)
    times = dt * np.arange(states.shape[0])
    return Trajectory(times, states, _weighted_norms(states, psi0.weight), float(dt), psi0.weight)


def norm_drift_bound(H: LinearOperator, dt: float, steps: int) -> float:
    """Upper bound C*dt^4*steps on RK4 norm drift for a Hermitian generator.

    Per step |R(i*theta)|^2 = 1 - theta^6/72 + O(theta^8) with theta = ||H|| dt, so
    C = ||H||^6 * dt^2 / 72 (clamped to theta <= 1) covers the leading term.
    """
    hn = float(np.linalg.norm(H.dense(), 2))
    theta = hn * dt
    if theta > 1.0:
        return float("inf")
    return (hn**6 * dt**2 / 72.0 + 1e-15) * dt**4 * steps + 1e-13


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    """Two state spaces linked by state-dependent interaction operators.

    ``coupling_SM(phi, t)`` returns the operator acting on S built from the
    M-amplitudes; ``coupling_MS(psi, t)`` the operator acting on M built from
    the S-amplitudes. Either may return a 2-D matrix or a 1-D diagonal.
    ``hermitian`` declares whether the returned operators are Hermitian.
    """

    dim_S: int
    dim_M: int
    coupling_SM: Callable[[np.ndarray, float], np.ndarray]
    coupling_MS: Callable[[np.ndarray, float], np.ndarray]
    kind: str = "custom"
    hermitian: bool = False
    weight_S: float = 1.0
    weight_M: float = 1.0

    def __post_init__(self):
        if self.kind not in COUPLING_KINDS:
            raise InvalidArgumentError(f"unknown coupling kind {self.kind!r}; expected one of {COUPLING_KINDS}")
        if self.dim_S < 1 or self.dim_M < 1:
            raise InvalidArgumentError("state spaces need dimension >= 1")

    def operator_SM(self, phi: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self._checked(self.coupling_SM(phi, t), self.dim_S, "coupling_SM")

    def operator_MS(self, psi: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self._checked(self.coupling_MS(psi, t), self.dim_M, "coupling_MS")

    @staticmethod
    def _checked(op, dim: int, name: str) -> np.ndarray:
        op = np.asarray(op)
        if op.ndim == 0:
            op = op.reshape(1)
        ok = op.shape == (dim,) if op.ndim == 1 else op.shape == (dim, dim)
        if not ok:
            raise DimensionMismatchError(f"{name} returned shape {op.shape}, expected ({dim},) or ({dim}, {dim})")
        return op


def expectation_coupling(
    sm_terms,
    ms_terms,
    dim_S: int,
    dim_M: int,
    weight_S: float = 1.0,
    weight_M: float = 1.0,
) -> CoupledSystem:
    """Expectation-bilinear coupling.

    V(phi) = sum_k g_k(t) A_k <phi|B_k|phi> and L(psi) = sum_k g_k(t) A_k <psi|B_k|psi>,
    each term given as a ``(g, A, B)`` triple. ``g`` is a number or a function of t.
    The returned operators are Hermitian when every A_k, B_k is Hermitian and g_k real.
    """
    sm = [(g, np.asarray(A), np.asarray(B)) for g, A, B in sm_terms]
    ms = [(g, np.asarray(A), np.asarray(B)) for g, A, B in ms_terms]
    for label, terms, d_op, d_exp in (("S<-M", sm, dim_S, dim_M), ("M<-S", ms, dim_M, dim_S)):
        for _, A, B in terms:
            if A.shape != (d_op, d_op) or B.shape != (d_exp, d_exp):
                raise DimensionMismatchError(f"{label} term has A{A.shape}, B{B.shape}")

    def herm(M):
        return np.allclose(M, M.conj().T, atol=1e-12, rtol=0)

    hermitian = all(
        herm(A) and herm(B) and (callable(g) or np.isreal(g)) for g, A, B in sm + ms
    )

    def build(terms, dim, weight):
        def coupling(state, t):
            op = np.zeros((dim, dim), dtype=complex)
            for g, A, B in terms:
                op = op + _coef(g, t) * A * (weight * np.vdot(state, B @ state))
            return op

        return coupling

    return CoupledSystem(
        dim_S,
        dim_M,
        build(sm, dim_S, weight_M),
        build(ms, dim_M, weight_S),
        kind="expectation-bilinear",
        hermitian=hermitian,
        weight_S=weight_S,
        weight_M=weight_M,
    )


def pointwise_coupling(a, b, dim: int = 1, weight: float = 1.0) -> CoupledSystem:
    """Pointwise-product coupling on a shared grid: V(phi) = a(t) phi, L(psi) = b(t) psi.

    With ``dim = 1`` this is the scalar toy model i psi' = a phi psi, i phi' = b psi phi.
    """

    def sm(phi, t):
        return _coef(a, t) * phi

    def ms(psi, t):
        return _coef(b, t) * psi

    return CoupledSystem(dim, dim, sm, ms, kind="pointwise-product", hermitian=False,
                         weight_S=weight, weight_M=weight)


def propagate_coupled(
    sys: CoupledSystem, psi0: StateVector, phi0: StateVector, dt: float, steps: int
) -> CoupledTrajectory:
    """RK4 on the concatenated (psi, phi) state; couplings re-evaluated at every stage."""
    if psi0.dim != sys.dim_S or phi0.dim != sys.dim_M:
        raise DimensionMismatchError(
            f"states have dimensions ({psi0.dim}, {phi0.dim}), system expects ({sys.dim_S}, {sys.dim_M})"
        )
    n = sys.dim_S

    def rhs(t, y):
        psi, phi = y[:n], y[n:]
        return np.concatenate(
            (-1j * _apply(sys.operator_SM(phi, t), psi), -1j * _apply(sys.operator_MS(psi, t), phi))
        )

    y0 = np.concatenate((psi0.amplitudes, phi0.amplitudes))
    states = rk4_integrate(rhs, y0, dt, steps)
    times = dt * np.arange(states.shape[0])
    s, m = states[:, :n], states[:, n:]
    return CoupledTrajectory(
        times, s, m,
        _weighted_norms(s, sys.weight_S), _weighted_norms(m, sys.weight_M),
        float(dt), sys.weight_S, sys.weight_M,
    )


def superposition_violation(
    sys: CoupledSystem,
    psi1: StateVector,
    psi2: StateVector,
    phi0: StateVector,
    dt: float,
    steps: int,
) -> float:
    """||U(psi1 + psi2) - U psi1 - U psi2|| / (||U psi1|| + ||U psi2||) for the S-component.

    All three runs start from the same ``phi0``; zero for a linear flow.
    """
    end_sum = propagate_coupled(sys, psi1 + psi2, phi0, dt, steps).final_S
    end_1 = propagate_coupled(sys, psi1, phi0, dt, steps).final_S
    end_2 = propagate_coupled(sys, psi2, phi0, dt, steps).final_S
    defect = (end_sum - end_1 - end_2).norm
    return defect / max(end_1.norm + end_2.norm, SUPERPOSITION_EPS)


def rescaling_inhomogeneity(
    sys: CoupledSystem, psi0: StateVector, phi0: StateVector, c: complex, dt: float, steps: int
) -> float:
    """||U(c psi0) - c U(psi0)|| for the S-component, same ``phi0`` in both runs."""
    if c == 0:
        raise InvalidArgumentError("rescaling factor must be nonzero")
    scaled = propagate_coupled(sys, psi0.scaled(c), phi0, dt, steps).final_S
    plain = propagate_coupled(sys, psi0, phi0, dt, steps).final_S
    return (scaled - plain.scaled(c)).norm
