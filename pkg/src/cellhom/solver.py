"""Deflated preconditioned CG and the cellular problem in displacement form."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import LPField, SymField, VecField, as_mandel_strain, inner
from .discrete import apply_material, operators, stiffness_operator, sym_gradient

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


class SolverError(RuntimeError):
    """CG did not reach the requested tolerance."""

    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(f"{msg} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


def default_max_iter(n_unknowns: int) -> int:
    return max(1000, int(round(10 * np.cbrt(n_unknowns), 9)))


def deflate(x) -> np.ndarray:
    """Remove the three constant translations (per-component nodal mean)."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    return (x - x.mean(axis=0)).reshape(-1)


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    residual: float  # true relative residual ||b - K x|| / ||b||
    history: list = field(default_factory=list)  # recurrence residual norms
    energy: list = field(default_factory=list)  # 1/2 x.Kx - b.x along the iterates


def deflated_pcg(op, b, tol=DEFAULT_TOL, max_iter=None, x0=None, deflated=True,
                 jacobi=True, scale=None, raise_on_fail=True) -> PCGResult:
    """Preconditioned CG for a symmetric operator, optionally on the zero-mean subspace.

    With ``deflated`` the iterates, residuals and preconditioned residuals are
    projected off the constant translations, which keeps the singular
    periodic operators SPD on the working subspace.

    ``scale`` (unassembled element contributions of b) lets an exactly
    balanced right-hand side, zero up to roundoff, be recognised: the
    solve then returns x = 0 after zero iterations.
    """
    proj = deflate if deflated else (lambda v: np.asarray(v, dtype=float).reshape(-1))
    b = proj(b)
    n = b.size
    max_iter = default_max_iter(n) if max_iter is None else int(max_iter)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n) if x0 is None else proj(x0)

    if scale is not None and bnorm <= 1e-14 * float(np.linalg.norm(scale)):
        return PCGResult(np.zeros(n), 0, 0.0, [bnorm], [0.0])
    if bnorm == 0.0:
        return PCGResult(np.zeros(n), 0, 0.0, [0.0], [0.0])

    dinv = 1.0 / op.diagonal() if jacobi else None

    def precondition(r):
        return proj(dinv * r) if jacobi else r.copy()

    r = proj(b - op(x)) if x0 is not None else b.copy()
    z = precondition(r)
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r))]
    energy = [-0.5 * float(x @ (b + r))]
    it = 0
    while history[-1] > tol * bnorm and it < max_iter:
        kp = proj(op(p))
        pkp = float(p @ kp)
        if pkp <= 0.0:
            raise SolverError("operator not positive definite on the search direction",
                              history[-1] / bnorm, it)
        alpha = rz / pkp
        x += alpha * p
        r -= alpha * kp
        z = precondition(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        history.append(float(np.linalg.norm(r)))
        energy.append(-0.5 * float(x @ (b + r)))

    x = proj(x)
    true_res = float(np.linalg.norm(proj(b - op(x)))) / bnorm
    log.debug("pcg: %d iterations, relative residual %.3e", it, true_res)
    if history[-1] > tol * bnorm and raise_on_fail:
        raise SolverError("CG did not converge", true_res, it)
    return PCGResult(x, it, true_res, history, energy)


@dataclass(frozen=True, eq=False)
class CellSolution:
    A: np.ndarray
    phi: VecField
    e: SymField
    sigma: SymField
    residual: float
    iterations: int
    history: tuple = ()
    energy_history: tuple = ()

    @property
    def u(self) -> LPField:
        return LPField(self.A, self.phi)


def solve_cell_problem(material, A, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> CellSolution:
    """Find phi zero-mean periodic with G^T W C (A + G phi) = 0.

    ``A`` is a Mandel 6-vector or a symmetric 3x3 matrix; a non-symmetric
    matrix is symmetrised with a warning.
    """
    a = np.asarray(A, dtype=float)
    if a.shape == (3, 3) and not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
        warnings.warn("macroscopic strain is not symmetric; using its symmetric part", stacklevel=2)
    a = as_mandel_strain(a)
    if tol <= 0:
        raise ValueError("tol must be positive")

    grid = material.grid
    ops = operators(grid)
    K = stiffness_operator(material)
    # element forces of the affine part: w * sum_q B_q^T C A, one per phase
    bsum = ops.w * ops.B.sum(axis=0)  # (6, 24)
    per_phase = np.stack([-(p.stiffness @ a) @ bsum for p in material.phases])
    fe = per_phase[material.phase_ids.reshape(-1)]
    b = ops.scatter(fe)
    res = deflated_pcg(K, b, tol=tol, max_iter=max_iter, scale=fe)

    phi = VecField(grid, res.x.reshape(grid.shape + (3,)))
    e = sym_gradient(LPField(a, phi))
    sigma = apply_material(material, e)
    return CellSolution(a, phi, e, sigma, res.residual, res.iterations,
                        tuple(res.history), tuple(res.energy))


def cell_energy(material, A, phi: VecField) -> float:
    """inner(C (A + G phi), A + G phi)."""
    e = sym_gradient(LPField(A, phi))
    return inner(apply_material(material, e), e)
