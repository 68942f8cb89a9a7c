"""Homogenized stiffness from six cell solves, its self-checks, and the laminate oracle."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import cell_average, inner, mandel_rotation
from .material import compliance, voigt_reuss
from .solver import SolverError, solve_cell_problem

BASIS = np.eye(6)

SYMMETRY_TOL = 1e-10
ROUTE_TOL = 1e-10
BOUND_SLACK = 1e-8


@dataclass
class HomReport:
    CH_stress: np.ndarray
    CH_energy: np.ndarray
    voigt: np.ndarray
    reuss: np.ndarray
    residuals: list
    iterations: list
    grid: tuple
    lattice: tuple
    material: dict = field(default_factory=dict)
    solutions: list = field(default_factory=list, repr=False)

    @property
    def CH(self) -> np.ndarray:
        return self.CH_stress

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.CH_stress, 2))

    def symmetry_error(self) -> float:
        return float(np.abs(self.CH_stress - self.CH_stress.T).max() / np.abs(self.CH_stress).max())

    def route_error(self) -> float:
        """Stress-average vs energy-product definitions, relative (Frobenius)."""
        return float(np.linalg.norm(self.CH_stress - self.CH_energy) / np.linalg.norm(self.CH_stress))

    def bound_slack(self) -> tuple:
        """Smallest eigenvalues of CH - Reuss and Voigt - CH, relative to ||CH||_2."""
        ch = 0.5 * (self.CH_stress + self.CH_stress.T)
        lo = np.linalg.eigvalsh(ch - self.reuss)[0] / self.scale
        hi = np.linalg.eigvalsh(self.voigt - ch)[0] / self.scale
        return float(lo), float(hi)

    def checks(self) -> dict:
        lo, hi = self.bound_slack()
        return {
            "symmetry": {"value": self.symmetry_error(), "tol": SYMMETRY_TOL,
                         "passed": self.symmetry_error() <= SYMMETRY_TOL},
            "stress_vs_energy": {"value": self.route_error(), "tol": ROUTE_TOL,
                                 "passed": self.route_error() <= ROUTE_TOL},
            "reuss_bound": {"value": lo, "tol": -BOUND_SLACK, "passed": lo >= -BOUND_SLACK},
            "voigt_bound": {"value": hi, "tol": -BOUND_SLACK, "passed": hi >= -BOUND_SLACK},
        }

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks().values())

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "lattice": [list(r) for r in self.lattice],
            "material": self.material,
            "CH_stress": self.CH_stress.tolist(),
            "CH_energy": self.CH_energy.tolist(),
            "voigt": self.voigt.tolist(),
            "reuss": self.reuss.tolist(),
            "load_cases": [{"basis": k, "residual": r, "iterations": n}
                           for k, (r, n) in enumerate(zip(self.residuals, self.iterations))],
            "checks": self.checks(),
        }


def homogenized_tensor(material, tol: float = 1e-12, max_iter=None, threads: int = 1) -> HomReport:
    """Solve the six Mandel basis load cases and assemble CH both ways.

    Column k of ``CH_stress`` is the average stress for basis strain k;
    ``CH_energy[j, k]`` is the averaged energy product of solutions k and j.
    """
    def run(k):
        try:
            return solve_cell_problem(material, BASIS[k], tol=tol, max_iter=max_iter)
        except SolverError as exc:
            raise SolverError(f"load case {k}: {exc}", exc.residual, exc.iterations) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(run, range(6)))
    else:
        sols = [run(k) for k in range(6)]

    vol = material.grid.volume
    ch_stress = np.column_stack([cell_average(s.sigma) for s in sols])
    ch_energy = np.empty((6, 6))
    for j in range(6):
        for k in range(6):
            ch_energy[j, k] = inner(sols[k].sigma, sols[j].e) / vol
    voigt, reuss = voigt_reuss(material)
    return HomReport(
        CH_stress=ch_stress,
        CH_energy=ch_energy,
        voigt=voigt,
        reuss=reuss,
        residuals=[s.residual for s in sols],
        iterations=[s.iterations for s in sols],
        grid=material.grid.shape,
        lattice=material.grid.lattice.G,
        material=material.describe(),
        solutions=sols,
    )


# --------------------------------------------------------------------------
# Rank-one laminate, closed form
# --------------------------------------------------------------------------

# Mandel components carrying the normal traction when the normal is e1 (11, 12, 13)
_NORMAL = [0, 5, 4]
_TANGENT = [1, 2, 3]


def _frame_to_e1(n):
    """Orthogonal Q with Q n = e1."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    helper = np.eye(3)[np.argmin(np.abs(n))]
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.vstack([n, t1, t2])


def laminate_normal(lattice, axis: int) -> np.ndarray:
    """Unit normal of the planes spanned by the two lattice vectors other than ``axis``."""
    g = np.asarray(lattice.G if hasattr(lattice, "G") else lattice, dtype=float)
    i, j = [d for d in range(3) if d != axis]
    n = np.cross(g[:, i], g[:, j])
    return n / np.linalg.norm(n)


def laminate_oracle(c1, c2, fraction: float, normal) -> np.ndarray:
    """Effective Mandel stiffness of a rank-one laminate (volume fraction ``fraction`` of c1).

    In a frame where the normal is e1, the tangential strains and normal
    tractions are continuous across the layers; eliminating the normal
    strain block from each phase and averaging gives the effective tensor.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if np.ndim(normal) == 0:
        normal = np.eye(3)[int(normal)]
    R = mandel_rotation(_frame_to_e1(normal))
    fr = (fraction, 1.0 - fraction)
    parts = [R @ c @ R.T for c in (c1, c2)]

    inv_nn = []
    for c in parts:
        nn = c[np.ix_(_NORMAL, _NORMAL)]
        # compliance() checks positive definiteness of the full phase, not just the block
        compliance(c)
        inv_nn.append(np.linalg.inv(nn))
    avg_inv_nn = sum(f * m for f, m in zip(fr, inv_nn))
    H = np.linalg.inv(avg_inv_nn)
    P = sum(f * m @ c[np.ix_(_NORMAL, _TANGENT)] for f, m, c in zip(fr, inv_nn, parts))
    schur = sum(
        f * (c[np.ix_(_TANGENT, _TANGENT)] - c[np.ix_(_TANGENT, _NORMAL)] @ m @ c[np.ix_(_NORMAL, _TANGENT)])
        for f, m, c in zip(fr, inv_nn, parts)
    )
    eff = np.empty((6, 6))
    eff[np.ix_(_NORMAL, _NORMAL)] = H
    eff[np.ix_(_NORMAL, _TANGENT)] = H @ P
    eff[np.ix_(_TANGENT, _NORMAL)] = (H @ P).T
    eff[np.ix_(_TANGENT, _TANGENT)] = P.T @ H @ P + schur
    eff = R.T @ eff @ R
    return 0.5 * (eff + eff.T)
