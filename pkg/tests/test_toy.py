import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import toy_exact
from selfobs.errors import InvalidArgumentError, SingularReconstructionError
from selfobs.toy import (
    ToyParams,
    closed_form_b0,
    integrability_residual,
    integrability_terms,
    reconstruct_phi,
    toy_propagate,
    with_psi,
)


def run(a=1.0, b=1.0, psi0=1.0, phi0=1.0, dt=1e-3, t=1.0):
    return toy_propagate(ToyParams(a, b, psi0, phi0, dt, int(round(t / dt))))


def test_closed_form_examples():
    assert closed_form_b0(0.7, 1.3, 2 - 1j, 0.0) == 2 - 1j
    assert closed_form_b0(1.0, 1.0, 1.0, np.pi) == pytest.approx(-1, abs=1e-15)
    for t in np.linspace(0, 10, 7):
        assert abs(closed_form_b0(0.4, 2.5, 0.3 + 0.4j, t)) == pytest.approx(0.5, abs=1e-15)


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        ToyParams(1.0, 1.0, 1.0, 1.0, 0.0, 10)
    with pytest.raises(InvalidArgumentError):
        ToyParams(1.0, 1.0, 1.0, 1.0, 0.1, 0)


def test_b0_matches_closed_form():
    traj = run(a=1.0, b=0.0, phi0=2.0, dt=1e-4)
    assert abs(traj.psi[-1] - np.exp(-2j)) < 1e-8
    assert np.all(traj.phi == 2.0)


def test_uncoupled_is_constant():
    traj = run(a=0.0, b=0.0, psi0=0.3j, phi0=-2.0, dt=0.1)
    assert np.all(traj.psi == 0.3j) and np.all(traj.phi == -2.0)


def test_coupled_endpoint_richardson_and_exact():
    coarse = run(dt=0.01)
    fine = run(dt=0.01 / 16)
    assert abs(coarse.psi[-1] - fine.psi[-1]) <= 1e-7
    assert abs(coarse.phi[-1] - fine.phi[-1]) <= 1e-7
    psi_t, phi_t = toy_exact(1.0, 1.0, 1.0, 1.0, 1.0)
    assert abs(fine.psi[-1] - psi_t) <= 1e-12 and abs(fine.phi[-1] - phi_t) <= 1e-12


@pytest.mark.parametrize("a,b,psi0,phi0", [(1.0, 1.0, 0.5, 1.0), (0.5, -2.0, 1j, 0.3), (2.0, 0.7 + 0.2j, 1.0, 1.0)])
def test_trajectory_matches_closed_form(a, b, psi0, phi0):
    traj = run(a, b, psi0, phi0, dt=1e-3)
    psi_t, phi_t = toy_exact(a, b, psi0, phi0, traj.times)
    assert np.max(np.abs(traj.psi - psi_t)) < 1e-10
    assert np.max(np.abs(traj.phi - phi_t)) < 1e-10


def test_closed_form_error_is_fourth_order():
    def err(dt):
        traj = run(a=1.0, b=0.0, phi0=2.0, dt=dt)
        return abs(traj.psi[-1] - closed_form_b0(1.0, 2.0, 1.0, 1.0))

    ratio = err(0.1) / err(0.05)
    assert 16 * 0.7 <= ratio <= 16 * 1.3


def test_reconstruct_b0_gives_constant_phi():
    traj = run(a=1.0, b=0.0, phi0=2.0, dt=1e-3)
    rec = reconstruct_phi(traj, 1.0)
    assert np.max(np.abs(rec - 2.0)) <= 2.0**3 * 1e-6 + 1e-8


def test_reconstruct_matches_propagated_phi():
    traj = run(dt=1e-3)
    rec = reconstruct_phi(traj, 1.0)
    assert np.max(np.abs(rec - traj.phi)) <= max(5e-6, traj.dt**2)


def test_reconstruct_with_time_dependent_a():
    a = lambda t: 1.0 + 0.5 * np.sin(t)  # noqa: E731
    traj = run(a=a, b=0.8, psi0=1.0, phi0=0.5, dt=1e-3)
    rec = reconstruct_phi(traj, a)
    assert np.max(np.abs(rec - traj.phi)) <= 5e-6


def test_reconstruct_guards():
    traj = run(dt=0.01)
    psi = traj.psi.copy()
    psi[7] = 1e-15
    with pytest.raises(SingularReconstructionError) as info:
        reconstruct_phi(with_psi(traj, psi), 1.0)
    assert info.value.index == 7
    with pytest.raises(SingularReconstructionError):
        reconstruct_phi(traj, lambda t: 0.0)


def max_residual(dt, a=1.0, b=1.0):
    traj = run(a=a, b=b, dt=dt)
    return np.max(np.abs(integrability_residual(traj, a, b)))


def test_residual_second_order():
    r1, r2, r3 = max_residual(0.02), max_residual(0.01), max_residual(0.005)
    assert r2 < r1 and r3 < r2
    assert 4 * 0.8 <= r1 / r2 <= 4 * 1.2
    assert 4 * 0.8 <= r2 / r3 <= 4 * 1.2


def test_residual_detects_corruption():
    traj = run(dt=1e-3)
    clean = np.max(np.abs(integrability_residual(traj, 1.0, 1.0)))
    bad = with_psi(traj, traj.psi * (1 + 0.01 * traj.times))
    dirty = np.max(np.abs(integrability_residual(bad, 1.0, 1.0)))
    assert dirty > 100 * clean


def test_residual_constant_a_has_no_log_derivative_term():
    traj = run(dt=0.01)
    const = integrability_residual(traj, 1.0, 1.0)
    as_function = integrability_residual(traj, lambda t: 1.0, 1.0)
    assert np.array_equal(const, as_function)


def test_residual_time_dependent_a_needs_log_derivative_term():
    a = lambda t: 1.0 + 0.5 * np.sin(t)  # noqa: E731
    traj = run(a=a, b=0.8, phi0=0.5, dt=1e-3)
    with_term = np.max(np.abs(integrability_residual(traj, a, 0.8)))
    without = np.max(np.abs(integrability_residual(traj, 1.0, 0.8)))
    assert with_term < 1e-5
    assert without > 100 * with_term


def test_residual_stored_on_trajectory():
    traj = run(dt=0.01)
    assert np.array_equal(traj.residual, integrability_residual(traj, 1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        integrability_residual(run(dt=0.5, t=1.5), 1.0, 1.0)


@pytest.mark.parametrize("a,b,psi0,phi0", [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 0.4j, 1.0), (1.5, -0.5, 1.0, 0.2 + 0.1j)])
def test_consistency_triangle(a, b, psi0, phi0):
    traj = run(a, b, psi0, phi0, dt=1e-3)
    residual_ok = np.max(np.abs(integrability_residual(traj, a, b))) < 1e-4
    reconstruct_ok = np.max(np.abs(reconstruct_phi(traj, a) - traj.phi)) < 1e-4
    assert residual_ok and reconstruct_ok

    bad = with_psi(traj, traj.psi * (1 + 0.01 * traj.times))
    residual_bad = np.max(np.abs(integrability_residual(bad, a, b))) > 1e-3
    reconstruct_bad = np.max(np.abs(reconstruct_phi(bad, a) - traj.phi)) > 1e-3
    assert residual_bad and reconstruct_bad


finite_c = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(finite_c)
def test_b0_linearity_in_psi0(c):
    base = run(a=1.3, b=0.0, psi0=0.6 - 0.2j, phi0=0.9, dt=0.01)
    scaled = run(a=1.3, b=0.0, psi0=c * (0.6 - 0.2j), phi0=0.9, dt=0.01)
    assert np.max(np.abs(scaled.psi - c * base.psi)) <= 1e-10 * max(1.0, abs(c))


def test_coupled_rescaling_breaks_linearity():
    base = run(psi0=1.0, dt=1e-3)
    scaled = run(psi0=2.0, dt=1e-3)
    assert abs(scaled.psi[-1] - 2 * base.psi[-1]) > 1e-3


@pytest.mark.parametrize("c", [2.0, 0.5j, -1.5 + 0.5j])
def test_residual_non_homogeneous_under_rescaling(c):
    traj = run(dt=1e-3)
    lhs, rhs = integrability_terms(traj, 1.0, 1.0)
    lhs_c, rhs_c = integrability_terms(with_psi(traj, c * traj.psi), 1.0, 1.0)
    assert np.allclose(lhs_c, c**2 * lhs, rtol=1e-9, atol=1e-12)
    assert np.allclose(rhs_c, c**3 * rhs, rtol=1e-9, atol=1e-12)
    clean = np.max(np.abs(lhs - rhs))
    scaled = np.max(np.abs(lhs_c - rhs_c))
    assert scaled > 1e3 * clean


def test_table_columns():
    header, rows = run(dt=0.1).table()
    assert header == ["t", "re_psi", "im_psi", "re_phi", "im_phi", "abs_residual"]
    assert np.isnan(rows[0, 5]) and np.isnan(rows[-1, 5])
    assert np.all(np.isfinite(rows[1:-1, 5]))
