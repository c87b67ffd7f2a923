"""Projective measurement: spectral decomposition, Born rule, collapse, sampling.

Outcomes are drawn with numpy's ``Generator`` (PCG64 by default via
``np.random.default_rng(seed)``), which is reproducible for a given seed on a
given platform and numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ImpossibleOutcomeError,
    InvalidArgumentError,
    NotHermitianError,
    ZeroNormError,
)
from .hilbert import LinearOperator, StateVector, _canonical_phase

DEFAULT_GROUP_TOL = 1e-8
COLLAPSE_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class Observable:
    operator: LinearOperator
    eigenvalues: np.ndarray  # one per grouped outcome, ascending
    projectors: tuple  # matrices, aligned with eigenvalues
    group_tol: float = DEFAULT_GROUP_TOL

    @property
    def ranks(self) -> list[int]:
        return [int(round(np.trace(p).real)) for p in self.projectors]

    def outcome_index(self, outcome: float) -> int:
        diffs = np.abs(self.eigenvalues - outcome)
        idx = int(np.argmin(diffs))
        if diffs[idx] > self.group_tol:
            raise InvalidArgumentError(
                f"{outcome!r} is not an eigenvalue of the observable "
                f"(outcomes: {self.eigenvalues.tolist()})"
            )
        return idx


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    outcome: float
    probability: float
    post_state: StateVector
    rng_seed: int | None

    def __eq__(self, other):
        if not isinstance(other, MeasurementRecord):
            return NotImplemented
        return (
            self.outcome == other.outcome
            and self.probability == other.probability
            and self.rng_seed == other.rng_seed
            and self.post_state.weight == other.post_state.weight
            and self.post_state.amplitudes.tobytes() == other.post_state.amplitudes.tobytes()
        )


def make_observable(op: LinearOperator, group_tol: float = DEFAULT_GROUP_TOL) -> Observable:
    """Spectrally decompose ``op``; eigenvalues closer than ``group_tol`` share one outcome.

    Grouping is by consecutive gaps, so distinct outcomes are always more than
    ``group_tol`` apart. A group's outcome value is the mean of its eigenvalues.
    """
    if not op.hermitian:
        raise NotHermitianError("observables must be Hermitian")
    if not group_tol > 0:
        raise InvalidArgumentError(f"group_tol must be positive, got {group_tol}")
    vals, vecs = scipy.linalg.eigh(op.dense())
    groups = [[0]]
    for j in range(1, len(vals)):
        if vals[j] - vals[j - 1] <= group_tol:
            groups[-1].append(j)
        else:
            groups.append([j])
    eigenvalues = np.array([vals[g].mean() for g in groups])
    projectors = []
    for g in groups:
        v = vecs[:, g]
        proj = v @ v.conj().T
        proj.flags.writeable = False
        projectors.append(proj)
    eigenvalues.flags.writeable = False
    return Observable(op, eigenvalues, tuple(projectors), float(group_tol))


def _projected_weights(state: StateVector, obs: Observable) -> np.ndarray:
    if state.dim != obs.operator.dim:
        raise InvalidArgumentError(
            f"state dimension {state.dim} does not match observable dimension {obs.operator.dim}"
        )
    psi = state.amplitudes
    nrm2 = np.vdot(psi, psi).real
    if nrm2 == 0.0:
        raise ZeroNormError("Born probabilities of a zero state")
    w = np.array([np.vdot(psi, p @ psi).real for p in obs.projectors]) / nrm2
    return np.clip(w, 0.0, 1.0)


def born_probabilities(state: StateVector, obs: Observable) -> list[tuple[float, float]]:
    """(outcome, <psi|P_n|psi>/<psi|psi>) for every grouped outcome, ascending."""
    probs = _projected_weights(state, obs)
    return [(float(a), float(p)) for a, p in zip(obs.eigenvalues, probs)]


def collapse(state: StateVector, obs: Observable, outcome: float) -> StateVector:
    """Normalized projection of ``state`` onto the eigenspace of ``outcome``.

    The global phase is fixed so the largest-magnitude amplitude is real-positive.
    """
    idx = obs.outcome_index(outcome)
    prob = _projected_weights(state, obs)[idx]
    if prob <= COLLAPSE_FLOOR:
        raise ImpossibleOutcomeError(
            f"outcome {outcome!r} has probability {prob:.3e} <= {COLLAPSE_FLOOR:g}"
        )
    projected = obs.projectors[idx] @ state.amplitudes
    projected = _canonical_phase(projected)
    return StateVector(projected, state.weight).normalized()


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool):
        if rng < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {rng}")
        return np.random.default_rng(int(rng)), int(rng)
    raise InvalidArgumentError("rng must be a numpy Generator or an integer seed")


def _draw_index(cdf: np.ndarray, u) -> np.ndarray:
    # inverse CDF over outcomes in ascending eigenvalue order
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def sample_measurement(state: StateVector, obs: Observable, rng) -> MeasurementRecord:
    """Draw one outcome by the Born rule and collapse onto it.

    ``rng`` is either a ``numpy.random.Generator`` (advanced in place, seed
    recorded as ``None``) or an integer seed.
    """
    gen, seed = _as_generator(rng)
    probs = _projected_weights(state, obs)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = int(_draw_index(cdf, gen.random()))
    outcome = float(obs.eigenvalues[idx])
    return MeasurementRecord(outcome, float(probs[idx]), collapse(state, obs, outcome), seed)


def sample_outcomes(state: StateVector, obs: Observable, rng, draws: int) -> np.ndarray:
    """Outcome indices of ``draws`` independent measurements on copies of ``state``.

    Consumes the generator exactly as ``draws`` calls of ``sample_measurement`` would.
    """
    if int(draws) != draws or draws < 0:
        raise InvalidArgumentError(f"draws must be a non-negative integer, got {draws}")
    gen, _ = _as_generator(rng)
    probs = _projected_weights(state, obs)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return _draw_index(cdf, gen.random(int(draws)))
