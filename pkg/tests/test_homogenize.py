import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from cellhom.core import Grid, Lattice, cell_average
from cellhom.material import MaterialMap, Phase, isotropic_tensor, laminate_map, random_two_phase
from cellhom.homogenize import homogenized_tensor, laminate_normal, laminate_oracle
from cellhom.solver import SolverError, solve_cell_problem

SOFT = Phase.isotropic(1, 1)
STIFF = Phase.isotropic(10, 10)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_homogeneous_tensor_is_recovered():
    g = Grid.cube(4, Lattice(((1.0, 0.3, 0.0), (0.0, 0.9, 0.1), (0.0, 0.0, 1.2))))
    c = isotropic_tensor(3.0, 1.5)
    rep = homogenized_tensor(MaterialMap.homogeneous(g, Phase(c)))
    assert rel(rep.CH, c) <= 1e-12
    assert max(rep.iterations) <= 1
    assert rep.passed


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_laminate_matches_oracle(axis):
    g = Grid.cube(4)
    m = laminate_map(g, SOFT, STIFF, 0.5, axis=axis)
    rep = homogenized_tensor(m)
    oracle = laminate_oracle(SOFT.stiffness, STIFF.stiffness, 0.5, axis)
    assert rel(rep.CH, oracle) <= 1e-8


def test_laminate_on_sheared_lattice():
    # interfaces are the planes spanned by g2, g3; normal is their cross product
    lat = Lattice(((1.0, 0.0, 0.0), (0.4, 1.0, 0.0), (0.2, -0.3, 1.1)))
    g = Grid((4, 3, 3), lat)
    m = laminate_map(g, SOFT, STIFF, 0.5, axis=0)
    rep = homogenized_tensor(m)
    oracle = laminate_oracle(SOFT.stiffness, STIFF.stiffness, 0.5, laminate_normal(lat, 0))
    assert rel(rep.CH, oracle) <= 1e-8


def test_oracle_limits_and_equal_phases(rng):
    c1, c2 = SOFT.stiffness, STIFF.stiffness
    n = rng.standard_normal(3)
    assert_allclose(laminate_oracle(c1, c2, 0.0, n), c2, atol=1e-12)
    assert_allclose(laminate_oracle(c1, c2, 1.0, n), c1, atol=1e-12)
    near = laminate_oracle(c1, c2, 1e-9, n)
    assert rel(near, c2) <= 1e-7
    for theta in (0.1, 0.5, 0.77):
        assert_allclose(laminate_oracle(c2, c2, theta, n), c2, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0.05, 0.95), m1=st.floats(0.1, 10), m2=st.floats(0.1, 10))
def test_oracle_antiplane_shear_is_harmonic_mean(theta, m1, m2):
    c = laminate_oracle(isotropic_tensor(1.0, m1), isotropic_tensor(2.0, m2), theta, 0)
    harmonic = 1.0 / (theta / m1 + (1 - theta) / m2)
    # Mandel shear entries carry 2 mu
    assert_allclose(c[5, 5], 2 * harmonic, rtol=1e-12)
    assert_allclose(c[4, 4], 2 * harmonic, rtol=1e-12)
    assert_allclose(c, c.T, atol=1e-12)


def test_oracle_rejects_bad_fraction():
    with pytest.raises(ValueError):
        laminate_oracle(SOFT.stiffness, STIFF.stiffness, 1.5, 0)


@pytest.fixture(scope="module")
def random_report():
    g = Grid.cube(6)
    m = random_two_phase(g, SOFT, STIFF, 0.4, np.random.default_rng(7))
    return m, homogenized_tensor(m)


def test_routes_agree_and_symmetric(random_report):
    _, rep = random_report
    assert rep.symmetry_error() <= 1e-10
    assert rep.route_error() <= 1e-10
    assert_allclose(rep.CH_energy, rep.CH_stress.T, rtol=0, atol=1e-10 * rep.scale)
    lo, hi = rep.bound_slack()
    assert lo >= -1e-8 and hi >= -1e-8
    assert rep.passed


def test_positive_definite_above_reuss(random_report):
    _, rep = random_report
    lam = np.linalg.eigvalsh(0.5 * (rep.CH + rep.CH.T))[0]
    assert lam >= (1 - 1e-6) * np.linalg.eigvalsh(rep.reuss)[0]


def test_macroscopic_map_is_linear(random_report, rng):
    m, rep = random_report
    A = rng.standard_normal(6)
    s = cell_average(solve_cell_problem(m, A, tol=1e-12).sigma)
    assert_allclose(s, rep.CH @ A, atol=1e-9 * rep.scale * np.linalg.norm(A))


def test_report_serialises(random_report):
    _, rep = random_report
    d = rep.to_dict()
    assert len(d["load_cases"]) == 6
    assert set(d["checks"]) == {"symmetry", "stress_vs_energy", "reuss_bound", "voigt_bound"}


def test_refinement_does_not_stiffen(rng):
    coarse = random_two_phase(Grid.cube(3), SOFT, STIFF, 0.5, rng)
    ids = np.repeat(np.repeat(np.repeat(coarse.phase_ids, 2, 0), 2, 1), 2, 2)
    fine = MaterialMap(Grid.cube(6), ids, coarse.phases)
    c4 = homogenized_tensor(coarse).CH_energy
    c8 = homogenized_tensor(fine).CH_energy
    d = np.linalg.eigvalsh(0.5 * ((c4 - c8) + (c4 - c8).T))
    assert d[0] >= -1e-8 * np.linalg.norm(c4, 2)


def test_solver_failure_names_load_case():
    m = random_two_phase(Grid.cube(4), SOFT, STIFF, 0.5, np.random.default_rng(1))
    with pytest.raises(SolverError, match="load case 0"):
        homogenized_tensor(m, max_iter=1)


def test_threads_give_identical_tensor(random_report):
    m, rep = random_report
    assert np.array_equal(homogenized_tensor(m, threads=3).CH, rep.CH)
