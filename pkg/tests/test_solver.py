import numpy as np
import pytest
from numpy.testing import assert_allclose

from cellhom.core import Grid, Lattice, VecField, cell_average, to_mandel
from cellhom.discrete import mass_operator, stiffness_operator
from cellhom.material import MaterialMap, Phase, isotropic_tensor, laminate_map, random_two_phase
from cellhom.solver import SolverError, cell_energy, deflated_pcg, default_max_iter, solve_cell_problem


@pytest.fixture
def two_phase(rng):
    g = Grid.cube(6)
    return random_two_phase(g, Phase.isotropic(1, 1), Phase.isotropic(10, 10), 0.5, rng)


def test_default_max_iter():
    assert default_max_iter(10) == 1000
    assert default_max_iter(10**12) == 100000


def test_homogeneous_is_exact(rng):
    g = Grid.cube(4, Lattice(((1, 0.2, 0), (0, 1, 0), (0, 0, 1.3))))
    c = isotropic_tensor(2.0, 0.5)
    m = MaterialMap.homogeneous(g, Phase(c))
    A = rng.standard_normal(6)
    sol = solve_cell_problem(m, A)
    assert sol.iterations <= 1
    assert np.abs(sol.phi.values).max() == 0.0
    assert_allclose(sol.e.values, np.broadcast_to(A, sol.e.values.shape), atol=1e-14)
    assert_allclose(cell_average(sol.sigma), c @ A, rtol=1e-13)


def test_laminate_layer_strains():
    # normal e1, A = e1 (x) e1: layer strains follow from continuity of sigma_11 with
    # zero tangential strain. Frozen for (lambda, mu) = (1, 1) / (10, 10), theta = 1/2:
    # M = lambda + 2 mu = 3 / 30, H = 1 / (0.5/3 + 0.5/30) = 60/11, e11 = H / M.
    g = Grid.cube(8)
    m = laminate_map(g, Phase.isotropic(1, 1), Phase.isotropic(10, 10), 0.5, axis=0)
    sol = solve_cell_problem(m, to_mandel(np.diag([1.0, 0, 0])), tol=1e-12)
    e = sol.e.values
    expect = np.zeros(e.shape)
    expect[:4, ..., 0] = 20.0 / 11.0
    expect[4:, ..., 0] = 2.0 / 11.0
    assert_allclose(e, expect, atol=1e-8)


def test_average_strain_and_zero_mean(two_phase, rng):
    M = mass_operator(two_phase.grid)
    one = np.zeros((two_phase.grid.node_count, 3))
    for _ in range(10):
        A = rng.standard_normal(6)
        sol = solve_cell_problem(two_phase, A, tol=1e-10)
        assert_allclose(cell_average(sol.e), A, atol=1e-12)
        assert np.abs(sol.phi.mean()).max() <= 1e-12
        # W-mass orthogonality to each constant translation
        for k in range(3):
            t = one.copy()
            t[:, k] = 1.0
            phi = sol.phi.flat
            assert abs(phi @ M(t.ravel())) <= 1e-12 * np.sqrt(phi @ M(phi)) * np.sqrt(two_phase.grid.volume)


def test_linearity(two_phase, rng):
    A1, A2 = rng.standard_normal(6), rng.standard_normal(6)
    a, b = 0.7, -1.9
    s1 = cell_average(solve_cell_problem(two_phase, A1, tol=1e-11).sigma)
    s2 = cell_average(solve_cell_problem(two_phase, A2, tol=1e-11).sigma)
    s = cell_average(solve_cell_problem(two_phase, a * A1 + b * A2, tol=1e-11).sigma)
    assert_allclose(s, a * s1 + b * s2, rtol=1e-8, atol=1e-9 * np.abs(s).max())


def test_energy_minimality(two_phase, rng):
    A = rng.standard_normal(6)
    sol = solve_cell_problem(two_phase, A, tol=1e-10)
    e0 = cell_energy(two_phase, A, sol.phi)
    for _ in range(10):
        d = VecField(two_phase.grid, 1e-2 * rng.standard_normal(sol.phi.values.shape)).centered()
        assert cell_energy(two_phase, A, sol.phi + d) >= e0 - 1e-8 * e0


def test_energy_decreases_along_iterations(two_phase, rng):
    sol = solve_cell_problem(two_phase, rng.standard_normal(6), tol=1e-10)
    en = np.array(sol.energy_history)
    assert len(en) == sol.iterations + 1
    assert (np.diff(en) <= 1e-12 * np.abs(en).max()).all()


def test_non_symmetric_macro_strain_warns(two_phase):
    A = np.array([[1.0, 2.0, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.warns(UserWarning, match="symmetric part"):
        sol = solve_cell_problem(two_phase, A)
    assert_allclose(sol.A, to_mandel(0.5 * (A + A.T)))


def test_non_convergence_reports_residual(two_phase, rng):
    with pytest.raises(SolverError) as info:
        solve_cell_problem(two_phase, rng.standard_normal(6), tol=1e-12, max_iter=2)
    assert info.value.iterations == 2
    assert info.value.residual > 1e-12


def test_invalid_tolerance(two_phase):
    with pytest.raises(ValueError):
        solve_cell_problem(two_phase, np.ones(6), tol=0.0)


def test_deflated_pcg_on_explicit_system(rng):
    g = Grid.cube(3)
    K = stiffness_operator(MaterialMap.homogeneous(g, Phase.isotropic(1, 1)))
    x = rng.standard_normal(3 * g.node_count)
    x = (x.reshape(-1, 3) - x.reshape(-1, 3).mean(axis=0)).ravel()
    res = deflated_pcg(K, K(x), tol=1e-13)
    assert_allclose(res.x, x, atol=1e-10)
    assert res.residual <= 1e-12
