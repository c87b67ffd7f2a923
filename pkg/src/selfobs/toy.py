"""Scalar toy model of a mutually observing pair.

    i psi' = a(t) phi psi,     i phi' = b psi phi        (hbar = 1)

For b = 0, phi is frozen and psi(t) = exp(-i t a phi0) psi0 (constant a). For
a, b != 0, phi follows from psi alone, phi = (i / a) d/dt ln psi, and psi obeys
the second-order condition

    i [psi psi'' - psi'^2 - (a'/a) psi psi'] = b psi^2 psi'.

Derivatives in the reconstruction and the residual are taken by finite
differences of the integrated series, so both act as independent checks on
the integrator rather than restating it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .dynamics import rk4_integrate
from .errors import InvalidArgumentError, SingularReconstructionError

Coefficient = Union[complex, float, Callable[[float], complex]]

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class ToyParams:
    a: Coefficient
    b: complex
    psi0: complex
    phi0: complex
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {self.steps}")


@dataclass(frozen=True, eq=False)
class ToyTrajectory:
    times: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    residual: np.ndarray  # integrability residual on interior points; empty if too short

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def table(self) -> tuple[list[str], np.ndarray]:
        """Columns t, Re psi, Im psi, Re phi, Im phi, |residual| (NaN at the two ends)."""
        res = np.full(self.times.size, np.nan)
        if self.residual.size:
            res[1:-1] = np.abs(self.residual)
        header = ["t", "re_psi", "im_psi", "re_phi", "im_phi", "abs_residual"]
        return header, np.column_stack(
            (self.times, self.psi.real, self.psi.imag, self.phi.real, self.phi.imag, res)
        )


def _a_values(a: Coefficient, times: np.ndarray) -> np.ndarray:
    if callable(a):
        return np.array([a(t) for t in times], dtype=complex)
    return np.full(times.size, complex(a))


def closed_form_b0(a: complex, phi0: complex, psi0: complex, t: float) -> complex:
    """psi(t) = exp(-i t a phi0) psi0, the exact solution when phi is frozen."""
    return complex(np.exp(-1j * t * a * phi0) * psi0)


def toy_propagate(p: ToyParams) -> ToyTrajectory:
    a, b = p.a, complex(p.b)

    def rhs(t, y):
        psi, phi = y
        at = a(t) if callable(a) else a
        return np.array((-1j * at * phi * psi, -1j * b * psi * phi))

    states = rk4_integrate(rhs, np.array((p.psi0, p.phi0), dtype=complex), p.dt, p.steps)
    times = p.dt * np.arange(states.shape[0])
    psi, phi = states[:, 0].copy(), states[:, 1].copy()
    if times.size >= 5:
        residual = _residual(times, psi, a, b)
    else:
        residual = np.empty(0, dtype=complex)
    return ToyTrajectory(times, psi, phi, residual)


def reconstruct_phi(traj: ToyTrajectory, a: Coefficient) -> np.ndarray:
    """phi(t) = (i / a(t)) psi'(t) / psi(t), psi' by second-order finite differences."""
    psi = traj.psi
    a_vals = _a_values(a, traj.times)
    small_psi = np.flatnonzero(np.abs(psi) <= SINGULAR_TOL)
    if small_psi.size:
        i = int(small_psi[0])
        raise SingularReconstructionError(f"|psi| = {abs(psi[i]):.3e} at index {i}", index=i)
    small_a = np.flatnonzero(np.abs(a_vals) <= SINGULAR_TOL)
    if small_a.size:
        i = int(small_a[0])
        raise SingularReconstructionError(f"|a| = {abs(a_vals[i]):.3e} at index {i}", index=i)
    dpsi = np.gradient(psi, traj.dt, edge_order=2)
    return 1j * dpsi / (a_vals * psi)


def _terms(times, psi, a, b):
    dt = times[1] - times[0]
    mid = psi[1:-1]
    d1 = (psi[2:] - psi[:-2]) / (2 * dt)
    d2 = (psi[2:] - 2 * mid + psi[:-2]) / dt**2
    if callable(a):
        a_vals = _a_values(a, times)
        da = (a_vals[2:] - a_vals[:-2]) / (2 * dt)
        log_da = da / a_vals[1:-1]
    else:
        log_da = 0.0
    lhs = 1j * (mid * d2 - d1**2 - log_da * mid * d1)
    rhs = b * mid**2 * d1
    return lhs, rhs


def _residual(times, psi, a, b):
    lhs, rhs = _terms(times, psi, a, b)
    return lhs - rhs


def integrability_terms(traj: ToyTrajectory, a: Coefficient, b: complex) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the second-order condition at interior points.

    lhs = i [psi psi'' - psi'^2 - (a'/a) psi psi'],  rhs = b psi^2 psi'.
    Under psi -> c psi the left side scales as c^2 and the right as c^3.
    """
    if traj.times.size < 5:
        raise InvalidArgumentError(f"need at least 5 samples, got {traj.times.size}")
    return _terms(traj.times, traj.psi, a, complex(b))


def integrability_residual(traj: ToyTrajectory, a: Coefficient, b: complex) -> np.ndarray:
    """LHS - RHS of the second-order condition at interior points (central differences).

    For constant ``a`` the a'/a term is exactly zero.
    """
    lhs, rhs = integrability_terms(traj, a, b)
    return lhs - rhs


def with_psi(traj: ToyTrajectory, psi: np.ndarray) -> ToyTrajectory:
    """Copy of ``traj`` with its psi series replaced (residual not recomputed)."""
    return ToyTrajectory(traj.times, np.asarray(psi, dtype=complex), traj.phi, np.empty(0, dtype=complex))
