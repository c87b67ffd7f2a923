import numpy as np
import pytest
import scipy.linalg

from selfobs.errors import DimensionMismatchError, InvalidArgumentError, ZeroNormError
from selfobs.hilbert import LinearOperator, StateVector, build_kinetic, eigh, make_uniform_grid, soft_coulomb
from selfobs.molecule import (
    BoCurve,
    MoleculeParams,
    bo_curve,
    electron_ground_state,
    electron_hamiltonian,
    exact_two_coordinate,
    expected_separation,
    nuclear_hamiltonian,
    nuclear_repulsion,
    scf_hartree,
    total_hamiltonian,
)

# regression anchors, recorded on first computation with default parameters
SCF_ENERGY = -0.785751424386778
SCF_SEPARATION = 2.306030035121231
SCF_ITERATIONS = 40
# 64x64 tensor grid, electron [-12, 12], nuclear [0.4, 6]
EXACT_64 = -0.7923951377818129
GAP_64 = 0.006111340024149814


def wide_params():
    return MoleculeParams(electron_grid=make_uniform_grid(600, -30, 30))


def single_well_energy(grid):
    well = LinearOperator(np.diag(soft_coulomb(grid.points)), True, grid.h)
    e, _ = eigh(build_kinetic(grid, 1.0) + well, 1)[0]
    return e


@pytest.fixture(scope="module")
def default_params():
    return MoleculeParams()


@pytest.fixture(scope="module")
def default_curve(default_params):
    return bo_curve(default_params, default_params.nuclear_grid.points)


@pytest.fixture(scope="module")
def default_scf(default_params):
    return scf_hartree(default_params, tol=1e-8, max_iter=100, mixing=0.5)


@pytest.fixture(scope="module")
def params64():
    return MoleculeParams(make_uniform_grid(64, -12, 12), make_uniform_grid(64, 0.4, 6.0))


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        MoleculeParams(M=0.0)
    with pytest.raises(InvalidArgumentError):
        MoleculeParams(s_e=0.0)
    with pytest.raises(InvalidArgumentError):
        MoleculeParams(nuclear_grid=make_uniform_grid(10, 0.0, 5.0))
    assert MoleculeParams(M=10.0).reduced_mass == 5.0


def test_zero_separation_is_doubled_well():
    p = MoleculeParams(electron_grid=make_uniform_grid(101, -10, 10))
    g = p.electron_grid
    H = electron_hamiltonian(p, 0.0)
    expected = build_kinetic(g, 1.0).matrix + np.diag(-2 / np.sqrt(g.points**2 + 1))
    assert np.allclose(H.matrix, expected, atol=1e-15)
    assert H.hermitian


def test_large_separation_energy():
    # the other nucleus still attracts the electron at about -1/r, so the
    # electronic energy approaches the single well minus that tail
    p = wide_params()
    r = 20.0
    e_single = single_well_energy(p.electron_grid)
    e20, _ = electron_ground_state(p, r)
    assert abs(e20 - (e_single - 1 / np.sqrt(r**2 + 1))) <= 2e-4
    assert abs(e20 + nuclear_repulsion(r, 1.0) - e_single) <= 2e-4


@pytest.mark.parametrize("r", [0.0, 1.0, 2.5, 7.0])
def test_ground_state_even(r):
    p = MoleculeParams()
    _, psi = electron_ground_state(p, r)
    dens = np.abs(psi.amplitudes) ** 2
    assert abs(dens @ p.electron_grid.points / dens.sum()) <= 1e-10


def test_separation_out_of_range():
    p = MoleculeParams(electron_grid=make_uniform_grid(51, -5, 5))
    with pytest.raises(InvalidArgumentError):
        electron_hamiltonian(p, 10.0)
    with pytest.raises(InvalidArgumentError):
        electron_hamiltonian(p, -1.0)


def test_bo_curve_binding(default_curve):
    minima = default_curve.local_minima()
    assert len(minima) == 1
    r_star = default_curve.minimum()
    assert 0 < r_star < 10
    assert default_curve.separations[0] < r_star < default_curve.separations[-1]


def test_bo_electronic_energy_monotone(default_curve):
    assert np.all(np.diff(default_curve.electronic_energy) > 0)
    zero = bo_curve(MoleculeParams(), [0.0, 0.2, 0.4])
    assert np.all(np.diff(zero.electronic_energy) > 0)


def test_bo_tail_approaches_isolated_atom():
    p = wide_params()
    curve = bo_curve(p, [25.0])
    assert abs(curve.total_curve[0] - single_well_energy(p.electron_grid)) <= 2e-3


def test_bo_curve_order_independent():
    p = MoleculeParams()
    r = [3.0, 0.5, 2.0, 1.2]
    a = bo_curve(p, r)
    b = bo_curve(p, r[::-1])
    assert a.separations.tolist() == sorted(r)
    assert a.electronic_energy.tobytes() == b.electronic_energy.tobytes()
    with pytest.raises(InvalidArgumentError):
        bo_curve(p, [1.0, 1.0])


def test_nuclear_constant_curve_is_shift():
    p = MoleculeParams(nuclear_grid=make_uniform_grid(40, 0.5, 5.0))
    g = p.nuclear_grid
    const = -0.37
    curve = BoCurve(g.points.copy(), np.full(g.n, const), np.full(g.n, const))
    shifted = scipy.linalg.eigvalsh(nuclear_hamiltonian(p, curve).matrix)
    bare = build_kinetic(g, p.reduced_mass).matrix + np.diag(nuclear_repulsion(g.points, p.s_n))
    assert np.allclose(shifted, scipy.linalg.eigvalsh(bare) + const, atol=1e-12)


def test_nuclear_grid_must_lie_in_curve():
    p = MoleculeParams()
    curve = bo_curve(p, [1.0, 2.0, 3.0])
    with pytest.raises(InvalidArgumentError):
        nuclear_hamiltonian(p, curve)


def test_nuclear_ground_state_near_minimum(default_params, default_curve):
    _, phi = eigh(nuclear_hamiltonian(default_params, default_curve), 1)[0]
    R = expected_separation(phi, default_params.nuclear_grid)
    assert abs(R - default_curve.minimum()) <= 0.5


def test_heavier_nuclei_localize(default_curve):
    spreads = []
    for M in (50.0, 200.0):
        p = MoleculeParams(M=M)
        _, phi = eigh(nuclear_hamiltonian(p, default_curve), 1)[0]
        dens = np.abs(phi.amplitudes) ** 2
        dens /= dens.sum()
        r = p.nuclear_grid.points
        spreads.append(dens @ r**2 - (dens @ r) ** 2)
    assert spreads[1] < spreads[0]


def test_expected_separation_examples():
    g = make_uniform_grid(61, 0.5, 6.5)
    i1, i2, i3 = (int(np.argmin(np.abs(g.points - r))) for r in (1.0, 2.0, 3.0))
    delta = np.zeros(g.n)
    delta[i2] = 1.0
    assert expected_separation(StateVector(delta, g.h), g) == pytest.approx(2.0, abs=1e-12)
    two = np.zeros(g.n)
    two[[i1, i3]] = 1.0
    assert expected_separation(StateVector(two, g.h), g) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ZeroNormError):
        expected_separation(StateVector(np.zeros(g.n), g.h), g)
    with pytest.raises(DimensionMismatchError):
        expected_separation(StateVector(np.ones(3)), g)


def test_scf_default_converges(default_params, default_scf):
    r = default_scf
    assert r.converged and r.iterations <= 50
    assert r.history[-1][2] <= 1e-8
    assert default_params.nuclear_grid.x_min < r.R_expectation < default_params.nuclear_grid.x_max
    assert r.E_total == pytest.approx(r.E_electron + r.E_nuclear, abs=1e-14)


def test_scf_regression(default_scf):
    assert default_scf.iterations == SCF_ITERATIONS
    assert default_scf.E_total == pytest.approx(SCF_ENERGY, abs=1e-9)
    assert default_scf.R_expectation == pytest.approx(SCF_SEPARATION, abs=1e-6)


def test_scf_deterministic(default_params, default_scf):
    again = scf_hartree(default_params)
    assert again.history == default_scf.history


def test_scf_monotone_tail(default_scf):
    E = np.array([h[1] for h in default_scf.history])
    dE = np.abs(np.diff(E))[-5:]
    # the energy is stationary at the fixed point and reaches round-off first
    floor = 64 * np.finfo(float).eps * abs(E[-1])
    assert np.all(np.diff(dE) <= floor)
    deltas = [h[2] for h in default_scf.history][-5:]
    assert np.all(np.diff(deltas) < 0)


def test_scf_mixing_independent(params64):
    a = scf_hartree(params64, mixing=1.0)
    b = scf_hartree(params64, mixing=0.3)
    assert a.converged and b.converged
    assert abs(a.E_total - b.E_total) <= 10 * 1e-8
    assert abs(a.R_expectation - b.R_expectation) <= 10 * 1e-8


def test_scf_non_convergence_is_data(default_params):
    r = scf_hartree(default_params, tol=1e-20, max_iter=3)
    assert not r.converged
    assert r.iterations == 3 and len(r.history) == 3
    header, rows = r.table()
    assert header == ["iteration", "R", "E_total", "delta"] and rows.shape == (3, 4)


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"mixing": 0.0}, {"mixing": 1.5}, {"max_iter": 0}])
def test_scf_rejects_bad_arguments(kwargs):
    with pytest.raises(InvalidArgumentError):
        scf_hartree(MoleculeParams(), **kwargs)


def test_scf_heavy_nuclei_follow_bo_minimum():
    p = MoleculeParams(M=400.0)
    r = scf_hartree(p)
    r_star = bo_curve(p, p.nuclear_grid.points).minimum()
    assert r.converged
    assert abs(r.R_expectation - r_star) <= 0.2


def test_scf_grid_convergence(default_scf):
    fine = MoleculeParams(electron_grid=make_uniform_grid(481, -24.0, 24.0))
    assert abs(scf_hartree(fine).E_total - default_scf.E_total) < 1e-3


def test_exact_separable_without_interaction():
    p = MoleculeParams(make_uniform_grid(30, -8, 8), make_uniform_grid(20, 0.5, 5.0))
    e_exact, _ = exact_two_coordinate(p, interaction=False)
    e_free = scipy.linalg.eigvalsh(build_kinetic(p.electron_grid, 1.0).matrix)[0]
    g = p.nuclear_grid
    e_rep = scipy.linalg.eigvalsh(
        build_kinetic(g, p.reduced_mass).matrix + np.diag(nuclear_repulsion(g.points, p.s_n))
    )[0]
    assert abs(e_exact - (e_free + e_rep)) <= 1e-10


def test_exact_below_scf_on_64_grid(params64):
    e_exact, state = exact_two_coordinate(params64)
    scf = scf_hartree(params64)
    assert np.isfinite(e_exact)
    assert e_exact < scf.E_total
    assert e_exact == pytest.approx(EXACT_64, abs=1e-9)
    assert scf.E_total - e_exact == pytest.approx(GAP_64, abs=1e-8)
    assert state.grid_amplitudes.shape == (64, 64)
    assert 0.4 < state.expected_separation(params64) < 6.0


def test_total_hamiltonian_is_linear(params64):
    H = total_hamiltonian(params64).matrix
    rng = np.random.default_rng(11)
    n = 64 * 64
    psi1 = rng.normal(size=n) + 1j * rng.normal(size=n)
    psi2 = rng.normal(size=n) + 1j * rng.normal(size=n)
    defect = H @ (psi1 + psi2) - H @ psi1 - H @ psi2
    scale = abs(H).max() * (np.abs(psi1).max() + np.abs(psi2).max())
    assert np.max(np.abs(defect)) <= 16 * np.finfo(float).eps * scale


def test_total_hamiltonian_size_bound():
    p = MoleculeParams(make_uniform_grid(400, -20, 20), make_uniform_grid(300, 0.4, 6.4))
    with pytest.raises(InvalidArgumentError):
        total_hamiltonian(p)
