"""Matrix-free periodic operators on trilinear hexahedra.

The symmetric gradient G maps nodal fields to Gauss-point Mandel strains;
the weak divergence is -G^T W, so the discrete Green identity

    inner(mu, G v) + pair(weak_divergence(mu), v) = 0

holds by construction for every Gauss-point field mu and nodal field v.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import Grid, GridMismatchError, LPField, SymField, VecField, to_mandel

GAUSS_1D = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
# local node / Gauss point a = a0 + 2*a1 + 4*a2 sits at offset (a0, a1, a2)
LOCAL = np.array([(a % 2, (a // 2) % 2, a // 4) for a in range(8)])


def shape_values(xi) -> np.ndarray:
    """Trilinear shape functions at reference points xi (..., 3) -> (..., 8)."""
    xi = np.asarray(xi, dtype=float)
    f = np.where(LOCAL == 1, xi[..., None, :], 1.0 - xi[..., None, :])
    return f.prod(axis=-1)


def shape_gradients(xi) -> np.ndarray:
    """d N_a / d xi_d at reference points (..., 3) -> (..., 8, 3)."""
    xi = np.asarray(xi, dtype=float)
    f = np.where(LOCAL == 1, xi[..., None, :], 1.0 - xi[..., None, :])
    df = np.where(LOCAL == 1, 1.0, -1.0) * np.ones_like(f)
    out = np.empty(f.shape)
    for d in range(3):
        others = [e for e in range(3) if e != d]
        out[..., d] = df[..., d] * f[..., others[0]] * f[..., others[1]]
    return out


def gauss_points() -> np.ndarray:
    return GAUSS_1D[LOCAL]


class Operators:
    """Element tables and gather/scatter maps for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n1, n2, n3 = grid.shape
        self.n_nodes = grid.node_count
        self.n_elem = grid.element_count
        self.n_dof = 3 * self.n_nodes
        self.w = grid.qp_weight

        i, j, k = np.meshgrid(np.arange(n1), np.arange(n2), np.arange(n3), indexing="ij")
        base = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
        conn = np.empty((self.n_elem, 8), dtype=np.int64)
        for a, (o1, o2, o3) in enumerate(LOCAL):
            conn[:, a] = grid.node_id(base[:, 0] + o1, base[:, 1] + o2, base[:, 2] + o3)
        self.conn = conn
        self.dof = (3 * conn[:, :, None] + np.arange(3)).reshape(self.n_elem, 24)

        xq = gauss_points()
        self.N = shape_values(xq)  # (8q, 8a)
        # physical gradients: d/dx_m = sum_d Ginv[d, m] * n_d * d/dxi_d
        scale = np.array(grid.shape, dtype=float)
        self.D = np.einsum("qad,d,dm->qam", shape_gradients(xq), scale, grid.lattice.inverse)

        # B[q, s, a*3+i]: Mandel strain component s from unit displacement of node a along i
        B = np.zeros((8, 6, 8, 3))
        for a in range(8):
            for comp in range(3):
                g = np.zeros((8, 3, 3))
                g[:, comp, :] = self.D[:, a, :]
                B[:, :, a, comp] = to_mandel(g)
        self.B = B.reshape(8, 6, 24)

    # -- gather / scatter ------------------------------------------------
    def gather(self, x) -> np.ndarray:
        return np.asarray(x).reshape(-1)[self.dof]

    def scatter(self, fe) -> np.ndarray:
        return np.bincount(self.dof.ravel(), weights=np.asarray(fe).ravel(), minlength=self.n_dof)

    # -- element matrices -------------------------------------------------
    def element_stiffness(self, c66) -> np.ndarray:
        return self.w * np.einsum("qsk,st,qtl->kl", self.B, c66, self.B)

    def element_mass(self) -> np.ndarray:
        m8 = self.w * np.einsum("qa,qb->ab", self.N, self.N)
        return np.kron(m8, np.eye(3))

    def element_gradient_gram(self) -> np.ndarray:
        """Element matrix of the full-gradient form sum_q w grad u : grad v."""
        l8 = self.w * np.einsum("qam,qbm->ab", self.D, self.D)
        return np.kron(l8, np.eye(3))

    # -- field maps ---------------------------------------------------------
    def strain(self, x) -> np.ndarray:
        """Mandel symmetric gradient at Gauss points, shape (n_elem, 8, 6)."""
        return np.einsum("qsk,ek->eqs", self.B, self.gather(x))

    def strain_transpose(self, sig) -> np.ndarray:
        """G^T W sigma as element contributions, shape (n_elem, 24)."""
        return self.w * np.einsum("qsk,eqs->ek", self.B, sig.reshape(self.n_elem, 8, 6))

    def gradient(self, x) -> np.ndarray:
        """Full displacement gradient grad u[i, m] at Gauss points, shape (n_elem, 8, 3, 3)."""
        ue = self.gather(x).reshape(self.n_elem, 8, 3)
        return np.einsum("qam,eai->eqim", self.D, ue)

    def values_at_qp(self, x) -> np.ndarray:
        ue = self.gather(x).reshape(self.n_elem, 8, 3)
        return np.einsum("qa,eai->eqi", self.N, ue)


@lru_cache(maxsize=16)
def operators(grid: Grid) -> Operators:
    return Operators(grid)


class ElementOperator:
    """Assembled-on-the-fly symmetric operator x -> sum_e P_e^T K_{phase(e)} P_e x."""

    def __init__(self, ops: Operators, matrices, phase_ids=None):
        self.ops = ops
        self.matrices = [np.asarray(m) for m in matrices]
        if phase_ids is None:
            self.groups = [slice(None)]
        else:
            flat = np.asarray(phase_ids).reshape(-1)
            self.groups = [np.flatnonzero(flat == p) for p in range(len(self.matrices))]

    @property
    def shape(self):
        return (self.ops.n_dof, self.ops.n_dof)

    def element_forces(self, x) -> np.ndarray:
        ue = self.ops.gather(x)
        fe = np.empty_like(ue)
        for km, idx in zip(self.matrices, self.groups):
            fe[idx] = ue[idx] @ km
        return fe

    def __call__(self, x) -> np.ndarray:
        return self.ops.scatter(self.element_forces(x))

    def diagonal(self) -> np.ndarray:
        de = np.empty((self.ops.n_elem, 24))
        for km, idx in zip(self.matrices, self.groups):
            de[idx] = np.diag(km)
        return self.ops.scatter(de)


def stiffness_operator(material) -> ElementOperator:
    """K = G^T W C G for a MaterialMap (one 24x24 element matrix per phase)."""
    ops = operators(material.grid)
    mats = [ops.element_stiffness(p.stiffness) for p in material.phases]
    return ElementOperator(ops, mats, material.phase_ids)


def reference_operator(grid: Grid, c_ref=None) -> ElementOperator:
    ops = operators(grid)
    c = np.eye(6) if c_ref is None else np.asarray(c_ref, dtype=float)
    return ElementOperator(ops, [ops.element_stiffness(c)])


def mass_operator(grid: Grid) -> ElementOperator:
    ops = operators(grid)
    return ElementOperator(ops, [ops.element_mass()])


def gradient_gram_operator(grid: Grid) -> ElementOperator:
    ops = operators(grid)
    return ElementOperator(ops, [ops.element_gradient_gram()])


# --------------------------------------------------------------------------
# Public field-level operations
# --------------------------------------------------------------------------

def _as_lp(u) -> LPField:
    if isinstance(u, LPField):
        return u
    if isinstance(u, VecField):
        return LPField.periodic(u)
    raise TypeError(f"expected LPField or VecField, got {type(u).__name__}")


def sym_gradient(u) -> SymField:
    """A + symmetric gradient of phi at every Gauss point."""
    u = _as_lp(u)
    ops = operators(u.grid)
    eps = ops.strain(u.phi.values) + u.A
    return SymField(u.grid, eps.reshape(u.grid.shape + (8, 6)))


def weak_divergence(sigma: SymField) -> np.ndarray:
    """Nodal covector r = -G^T W sigma, shape (n1, n2, n3, 3)."""
    ops = operators(sigma.grid)
    r = -ops.scatter(ops.strain_transpose(sigma.values))
    return r.reshape(sigma.grid.shape + (3,))


def divergence_defect(sigma: SymField) -> float:
    """||G^T W sigma|| relative to the norm of its unassembled element contributions.

    Dimensionless: O(1) for a generic field, roundoff-level for members of
    the discrete divergence-free space.
    """
    ops = operators(sigma.grid)
    fe = ops.strain_transpose(sigma.values)
    scale = np.linalg.norm(fe)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(ops.scatter(fe)) / scale)


def apply_stiffness(material, v: VecField) -> np.ndarray:
    """K v = G^T W C G v as a nodal covector (n1, n2, n3, 3)."""
    material.grid.check_same(v.grid)
    return stiffness_operator(material)(v.values).reshape(v.grid.shape + (3,))


def apply_material(material, e: SymField) -> SymField:
    """Pointwise sigma = C e with the voxelwise stiffness."""
    material.grid.check_same(e.grid)
    table = material.stiffness_table
    sig = np.einsum("...st,...qt->...qs", table[material.phase_ids], e.values)
    return SymField(e.grid, sig)


def full_gradient(v: VecField) -> np.ndarray:
    """grad v at Gauss points, shape (n1, n2, n3, 8, 3, 3)."""
    ops = operators(v.grid)
    return ops.gradient(v.values).reshape(v.grid.shape + (8, 3, 3))


def l2_norm(v: VecField) -> float:
    """L2 norm of the trilinear interpolant (consistent mass)."""
    ops = operators(v.grid)
    vals = ops.values_at_qp(v.values)
    return float(np.sqrt(ops.w * np.sum(vals * vals)))


def gradient_norm(v: VecField) -> float:
    g = full_gradient(v)
    return float(np.sqrt(v.grid.qp_weight * np.sum(g * g)))


def make_divfree(tau: SymField, c_ref=None, tol: float = 1e-12, max_iter: int | None = None) -> SymField:
    """Project tau onto the discrete divergence-free fields: sigma = tau - C_ref G z.

    z solves (G^T W C_ref G) z = G^T W tau with the deflated CG; the cell
    average of tau is preserved. With C_ref = identity (default) this is the
    W-orthogonal projection onto the complement of the periodic gradients.
    """
    from .solver import deflated_pcg

    c = np.eye(6) if c_ref is None else np.asarray(c_ref, dtype=float)
    op = reference_operator(tau.grid, c)
    ops = op.ops
    b = ops.scatter(ops.strain_transpose(tau.values))
    res = deflated_pcg(op, b, tol=tol, max_iter=max_iter, scale=ops.strain_transpose(tau.values))
    corr = ops.strain(res.x) @ c.T
    return SymField(tau.grid, tau.values - corr.reshape(tau.values.shape))


def check_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid.shape} vs {b.grid.shape}")
