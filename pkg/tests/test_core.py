import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from cellhom.core import (
    Grid,
    GridMismatchError,
    Lattice,
    LPField,
    SymField,
    VecField,
    cell_average,
    eval_lp,
    from_mandel,
    inner,
    mandel66,
    mandel_dot,
    mandel_rotation,
    tensor4,
    to_mandel,
)
from cellhom.discrete import gauss_points

finite = st.floats(-1e3, 1e3, allow_nan=False)


def qp_positions(grid):
    """Physical coordinates of every Gauss point, shape (n1, n2, n3, 8, 3)."""
    idx = np.moveaxis(np.indices(grid.shape), 0, -1)[..., None, :]
    yhat = (idx + gauss_points()) / np.array(grid.shape)
    return grid.lattice.to_physical(yhat)


@given(arrays(float, (3, 3), elements=finite))
def test_mandel_isometry(m):
    s = 0.5 * (m + m.T)
    v = to_mandel(s)
    assert_allclose(v @ v, np.sum(s * s), rtol=1e-12, atol=1e-9)
    assert_allclose(from_mandel(v), s, rtol=1e-13, atol=1e-12)


def test_mandel_isometry_batch(rng):
    m = rng.standard_normal((1000, 3, 3))
    s = m + np.swapaxes(m, 1, 2)
    v = to_mandel(s)
    assert_allclose(np.sum(v * v, axis=1), np.sum(s * s, axis=(1, 2)), rtol=1e-13)


def test_mandel66_matches_contraction(rng):
    c = rng.standard_normal((6, 6))
    c = c + c.T
    c4 = tensor4(c)
    e = from_mandel(rng.standard_normal(6))
    assert_allclose(to_mandel(np.einsum("ijkl,kl->ij", c4, e)), c @ to_mandel(e), atol=1e-12)
    assert_allclose(mandel66(c4), c, atol=1e-13)


@given(arrays(float, 3, elements=st.floats(-3, 3)))
def test_mandel_rotation_orthogonal(angles):
    from scipy.spatial.transform import Rotation

    q = Rotation.from_rotvec(angles).as_matrix()
    R = mandel_rotation(q)
    assert_allclose(R @ R.T, np.eye(6), atol=1e-12)
    e = from_mandel(np.arange(1.0, 7.0))
    assert_allclose(R @ to_mandel(e), to_mandel(q @ e @ q.T), atol=1e-12)


def test_lattice_rejects_dependent_vectors():
    with pytest.raises(ValueError):
        Lattice(((1, 2, 3), (2, 4, 6), (0, 0, 1)))


def test_grid_wrap_and_counts():
    g = Grid((3, 4, 5))
    assert g.node_count == g.element_count == 60
    assert g.wrap(3, 4, 5) == (0, 0, 0)
    assert g.node_id(-1, 0, 0) == g.node_id(2, 0, 0)
    with pytest.raises(ValueError):
        Grid((1, 4, 4))


def test_weights_sum_to_volume():
    g = Grid((4, 5, 6), Lattice(((2, 0.3, 0), (0, 1, 0), (0.1, 0, 0.5))))
    assert_allclose(SymField.zeros(g).weights.sum(), g.volume, rtol=1e-14)


def test_cell_average_constant():
    g = Grid.cube(4)
    s = np.array([1.0, -2, 3, 0.5, 0.25, -1])
    assert_allclose(cell_average(SymField.constant(g, s)), s, rtol=1e-14)


def test_cell_average_trig():
    g = Grid.cube(16)
    y1 = qp_positions(g)[..., 0]
    vals = np.zeros(g.shape + (8, 6))
    vals[..., 0] = np.sin(2 * np.pi * y1)
    assert np.abs(cell_average(SymField(g, vals))[0]) < 1e-15
    vals[..., 0] = np.sin(2 * np.pi * y1) ** 2
    # frozen: the 2x2x2 Gauss sum of sin^2 over whole periods is exactly 1/2
    assert abs(cell_average(SymField(g, vals))[0] - 0.5) <= 1e-12


def test_inner_examples():
    g = Grid.cube(16, Lattice(((2, 0, 0), (0, 1, 0), (0, 0, 1))))
    eye = to_mandel(np.eye(3))
    assert_allclose(inner(SymField.constant(g, eye), SymField.constant(g, eye)), 3 * g.volume, rtol=1e-13)
    a, s = np.arange(6.0), np.ones(6)
    assert_allclose(inner(SymField.constant(g, a), SymField.constant(g, s)), g.volume * a.sum(), rtol=1e-13)

    g = Grid.cube(16)
    vals = np.zeros(g.shape + (8, 6))
    vals[..., 0] = np.sin(2 * np.pi * qp_positions(g)[..., 0])
    f = SymField(g, vals)
    assert_allclose(inner(f, f), 0.5, rtol=1e-12)


def test_inner_grid_mismatch():
    with pytest.raises(GridMismatchError):
        inner(SymField.zeros(Grid.cube(4)), SymField.zeros(Grid.cube(5)))


def test_average_is_adjoint_of_constant_embedding(rng):
    g = Grid((4, 5, 3), Lattice(((1, 0.2, 0), (0, 1.5, 0), (0, 0.3, 0.7))))
    s = SymField(g, rng.standard_normal(g.shape + (8, 6)))
    A = rng.standard_normal(6)
    assert_allclose(inner(SymField.constant(g, A), s), g.volume * mandel_dot(A, cell_average(s)), rtol=1e-12)


def test_eval_lp_examples(rng):
    g = Grid.cube(4)
    zero = LPField.affine(np.zeros(6), g)
    assert_allclose(eval_lp(zero, rng.random((5, 3))), 0.0)
    u = LPField.affine(to_mandel(np.diag([1.0, 0, 0])), g)
    assert_allclose(eval_lp(u, np.array([1.0, 0, 0])), [1.0, 0, 0])


def test_lp_jump_and_periodicity(rng):
    lat = Lattice(((1, 0.4, 0), (0, 1, 0.1), (0, 0, 0.9)))
    g = Grid((5, 4, 6), lat)
    phi = VecField(g, rng.standard_normal(g.shape + (3,)))
    A = rng.standard_normal(6)
    u = LPField(A, phi)
    y = lat.to_physical(rng.random((50, 3)))
    for k in range(3):
        gk = lat.vector(k)
        assert_allclose(phi.interpolate(y + gk), phi.interpolate(y), atol=1e-12)
        assert_allclose(eval_lp(u, y + gk) - eval_lp(u, y), np.tile(from_mandel(A) @ gk, (50, 1)), atol=1e-11)


def test_fields_are_immutable():
    v = VecField.zeros(Grid.cube(3))
    with pytest.raises(ValueError):
        v.values[0, 0, 0, 0] = 1.0
