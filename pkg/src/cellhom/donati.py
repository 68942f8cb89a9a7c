"""Periodic Donati projections, the product-of-averages identity, and compatibility residuals.

Discrete divergence-free fields are the W-orthogonal complement of the
periodic symmetric gradients, so every split below is an exact orthogonal
decomposition up to the inner CG tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LPField, SymField, VecField, cell_average, inner, mandel_dot, from_mandel
from .discrete import divergence_defect, make_divfree, reference_operator, sym_gradient
from .solver import deflated_pcg


class PreconditionError(ValueError):
    """An input violates a stated precondition (e.g. a stress that is not divergence-free)."""


@dataclass(frozen=True, eq=False)
class DonatiSplit:
    v: LPField
    grad_part: SymField
    residual: SymField
    ortho_defect: float

    @property
    def A(self) -> np.ndarray:
        return self.v.A


def donati_project_periodic(e: SymField, tol: float = 1e-12, max_iter=None):
    """Least-squares zero-mean v with G v closest to e; residual e - G v is divergence-free.

    Returns ``(v, residual)``. When e is orthogonal to every discrete
    divergence-free field (constants included) the residual vanishes and
    e = G v with v unique.
    """
    op = reference_operator(e.grid)
    ops = op.ops
    fe = ops.strain_transpose(e.values)
    res = deflated_pcg(op, ops.scatter(fe), tol=tol, max_iter=max_iter, scale=fe)
    v = VecField(e.grid, res.x.reshape(e.grid.shape + (3,)))
    return v, e - sym_gradient(v)


def donati_project_lp(e: SymField, tol: float = 1e-12, max_iter=None) -> DonatiSplit:
    """Split e = (A + G v~) + residual with A the cell average and residual in T_h(0)."""
    A = cell_average(e)
    vt, _ = donati_project_periodic(e - A, tol=tol, max_iter=max_iter)
    v = LPField(A, vt)
    grad = sym_gradient(v)
    residual = e - grad
    fluct = grad - A
    return DonatiSplit(v, grad, residual, abs(inner(fluct, residual)))


def hill_mandel(v, sigma: SymField, div_tol: float = 1e-8):
    """(lhs, rhs) = (average of <grad_s v, sigma>, <average grad_s v, average sigma>).

    ``sigma`` must be discretely divergence-free: its relative divergence
    defect (see ``divergence_defect``) has to be below ``div_tol``.
    """
    defect = divergence_defect(sigma)
    if defect > div_tol:
        raise PreconditionError(f"stress is not divergence-free: relative weak divergence {defect:.3e} > {div_tol:.1e}")
    e = sym_gradient(v)
    vol = sigma.grid.volume
    lhs = inner(e, sigma) / vol
    rhs = mandel_dot(cell_average(e), cell_average(sigma))
    return lhs, rhs


def product_average_defect(e: SymField, s: SymField) -> float:
    """average <e, s> - <average e, average s>; zero for compatible e and divergence-free s."""
    return inner(e, s) / e.grid.volume - mandel_dot(cell_average(e), cell_average(s))


def random_symfield(grid, rng) -> SymField:
    return SymField(grid, rng.standard_normal(grid.shape + (8, 6)))


def random_vecfield(grid, rng, zero_mean: bool = True) -> VecField:
    v = VecField(grid, rng.standard_normal(grid.shape + (3,)))
    return v.centered() if zero_mean else v


def divergence_free_batch(grid, rng, count: int = 64, tol: float = 1e-12) -> list:
    """Test stresses: the six constant Mandel basis fields plus ``count`` projected random fields."""
    out = [SymField.constant(grid, np.eye(6)[k]) for k in range(6)]
    out += [make_divfree(random_symfield(grid, rng), tol=tol) for _ in range(count)]
    return out


# --------------------------------------------------------------------------
# Classical compatibility operators on smooth nodal samples
# --------------------------------------------------------------------------

LEVI_CIVITA = np.zeros((3, 3, 3))
LEVI_CIVITA[0, 1, 2] = LEVI_CIVITA[1, 2, 0] = LEVI_CIVITA[2, 0, 1] = 1.0
LEVI_CIVITA[0, 2, 1] = LEVI_CIVITA[2, 1, 0] = LEVI_CIVITA[1, 0, 2] = -1.0


def _as_tensor_samples(e, grid) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.shape == grid.shape + (6,):
        return from_mandel(e)
    if e.shape == grid.shape + (3, 3):
        return e
    raise ValueError(f"expected nodal samples of shape {grid.shape + (6,)} or {grid.shape + (3, 3)}, got {e.shape}")


def _check_stencil(grid):
    if min(grid.shape) < 4:
        raise ValueError(f"grid {grid.shape} too small for the periodic difference stencils (need n >= 4)")


def _ref_diff(f, d, n):
    return (np.roll(f, -1, axis=d) - np.roll(f, 1, axis=d)) * (0.5 * n)


def periodic_gradient(f, grid) -> np.ndarray:
    """Central-difference physical gradient of nodal samples; appends one axis of length 3."""
    ginv = grid.lattice.inverse
    ref = np.stack([_ref_diff(f, d, grid.shape[d]) for d in range(3)], axis=-1)
    return ref @ ginv


def periodic_hessian(f, grid) -> np.ndarray:
    """Second derivatives of nodal samples; appends two axes (3, 3).

    Pure second derivatives along a lattice direction use the compact
    three-point stencil, mixed ones the product of central differences.
    """
    ginv = grid.lattice.inverse
    ref = np.empty(f.shape + (3, 3))
    for a in range(3):
        na = grid.shape[a]
        ref[..., a, a] = (np.roll(f, -1, axis=a) - 2 * f + np.roll(f, 1, axis=a)) * na * na
        for b in range(a + 1, 3):
            ref[..., a, b] = ref[..., b, a] = _ref_diff(_ref_diff(f, a, na), b, grid.shape[b])
    return np.einsum("...ab,al,bj->...lj", ref, ginv, ginv)


def saint_venant_residual(e, grid) -> np.ndarray:
    """R_ijkl = d_lj e_ik + d_ki e_jl - d_li e_jk - d_kj e_il on nodal samples.

    Returns shape (n1, n2, n3, 3, 3, 3, 3).
    """
    _check_stencil(grid)
    e = _as_tensor_samples(e, grid)
    H = periodic_hessian(e, grid)  # H[..., i, k, l, j] = d_l d_j e_ik
    return (
        np.einsum("...iklj->...ijkl", H)
        + np.einsum("...jlki->...ijkl", H)
        - np.einsum("...jkli->...ijkl", H)
        - np.einsum("...ilkj->...ijkl", H)
    )


def matrix_curl(m, grid) -> np.ndarray:
    """(CURL m)_ij = eps_ilk d_l m_jk, row-wise curl with periodic central differences."""
    grad = periodic_gradient(m, grid)  # grad[..., j, k, l] = d_l m_jk
    return np.einsum("ilk,...jkl->...ij", LEVI_CIVITA, grad)


def curl_curl(e, grid) -> np.ndarray:
    """CURL CURL e on nodal samples, shape (n1, n2, n3, 3, 3)."""
    _check_stencil(grid)
    e = _as_tensor_samples(e, grid)
    return matrix_curl(matrix_curl(e, grid), grid)


def compatibility_residuals(field, grid) -> tuple:
    """(max |R|, max |CURL CURL e|, roundoff floor) for a smooth strain callable ``field(y) -> (..., 3, 3)``.

    The floor estimates the roundoff of the difference stencils: residuals
    below it are indistinguishable from zero.
    """
    e = field(grid.node_positions())
    floor = 1e-11 * float(np.abs(e).max()) * max(grid.shape) ** 2
    return (float(np.abs(saint_venant_residual(e, grid)).max()),
            float(np.abs(curl_curl(e, grid)).max()), floor)


def _observed_order(r, floor, steps):
    if r[-1] <= floor[-1]:
        return float("inf")
    return float(np.log2(r[-2] / r[-1]) / steps[-1])


def classify_compatibility(field, sizes=(16, 32), lattice=None, near_zero_ratio: float = 0.5) -> dict:
    """Residual decay of a sampled strain under grid doubling.

    A compatible field has residuals that are pure truncation error and
    shrink like h^2 (or sit at roundoff when the stencils happen to be
    exact); an incompatible one converges to a nonzero limit. A criterion
    calls the field compatible when its residual is at roundoff or shrinks
    by more than ``near_zero_ratio`` at the last refinement.
    """
    from .core import Grid, Lattice

    lattice = lattice or Lattice()
    res = [compatibility_residuals(field, Grid.cube(n, lattice)) for n in sizes]
    sv, cc, floor = (np.array(col) for col in zip(*res))
    steps = np.log2(np.array(sizes[1:]) / np.array(sizes[:-1]))

    def near_zero(r):
        return bool(r[-1] <= floor[-1] or r[-1] < near_zero_ratio * r[-2])

    return {
        "sizes": list(sizes),
        "saint_venant": sv.tolist(),
        "curl_curl": cc.tolist(),
        "floor": floor.tolist(),
        "order_saint_venant": _observed_order(sv, floor, steps),
        "order_curl_curl": _observed_order(cc, floor, steps),
        "saint_venant_zero": near_zero(sv),
        "curl_curl_zero": near_zero(cc),
    }


def compatibility_battery(rng, count: int = 10, sizes=(16, 32), kmax: int = 1) -> list:
    """Classify ``count`` compatible (symmetric gradients of smooth fields) and ``count`` generic strains.

    Each entry carries ``compatible`` (ground truth) next to the decay
    summary of ``classify_compatibility``.
    """
    from .samples import TrigSymField, TrigVectorField

    out = []
    for _ in range(count):
        v = TrigVectorField.random(rng, kmax=kmax)
        out.append({"compatible": True, **classify_compatibility(v.sym_gradient, sizes)})
    for _ in range(count):
        e = TrigSymField.random(rng, kmax=kmax)
        out.append({"compatible": False, **classify_compatibility(e, sizes)})
    return out
