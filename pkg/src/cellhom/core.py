"""Lattice geometry, periodic grids, Mandel tensors and discrete periodic fields.

Nodes are stored once per periodic class (no duplicated boundary layer), so
every nodal field is periodic by construction. Strain/stress fields live at
the 2x2x2 Gauss points of the trilinear hexahedra, in Mandel notation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SQRT2 = np.sqrt(2.0)

# Mandel ordering: 11, 22, 33, 23, 13, 12
MANDEL_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
MANDEL_FACTORS = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


# --------------------------------------------------------------------------
# Mandel notation
# --------------------------------------------------------------------------

def to_mandel(t):
    """Symmetric (..., 3, 3) tensor -> (..., 6) Mandel vector.

    Only the symmetric part of ``t`` is kept.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape[:-2] + (6,))
    for m, (i, j) in enumerate(MANDEL_PAIRS):
        if i == j:
            out[..., m] = t[..., i, i]
        else:
            out[..., m] = SQRT2 * 0.5 * (t[..., i, j] + t[..., j, i])
    return out


def from_mandel(v):
    """(..., 6) Mandel vector -> symmetric (..., 3, 3) tensor."""
    v = np.asarray(v, dtype=float)
    out = np.empty(v.shape[:-1] + (3, 3))
    for m, (i, j) in enumerate(MANDEL_PAIRS):
        val = v[..., m] / MANDEL_FACTORS[m]
        out[..., i, j] = val
        out[..., j, i] = val
    return out


def mandel66(c4):
    """Fourth-order tensor (3,3,3,3) with minor symmetries -> 6x6 Mandel matrix."""
    c4 = np.asarray(c4, dtype=float)
    out = np.empty((6, 6))
    for m, (i, j) in enumerate(MANDEL_PAIRS):
        for n, (k, l) in enumerate(MANDEL_PAIRS):
            out[m, n] = MANDEL_FACTORS[m] * MANDEL_FACTORS[n] * c4[i, j, k, l]
    return out


def tensor4(m66):
    """6x6 Mandel matrix -> fourth-order tensor with minor symmetries."""
    m66 = np.asarray(m66, dtype=float)
    out = np.empty((3, 3, 3, 3))
    for m, (i, j) in enumerate(MANDEL_PAIRS):
        for n, (k, l) in enumerate(MANDEL_PAIRS):
            val = m66[m, n] / (MANDEL_FACTORS[m] * MANDEL_FACTORS[n])
            out[i, j, k, l] = out[j, i, k, l] = out[i, j, l, k] = out[j, i, l, k] = val
    return out


def mandel_rotation(q):
    """6x6 orthogonal matrix R with to_mandel(q e q^T) = R @ to_mandel(e)."""
    q = np.asarray(q, dtype=float)
    basis = from_mandel(np.eye(6))
    return to_mandel(np.einsum("ia,nab,jb->nij", q, basis, q)).T


def as_mandel_strain(a):
    """Accept a 6-vector or a 3x3 matrix (symmetrised) and return a Mandel 6-vector."""
    a = np.asarray(a, dtype=float)
    if a.shape == (6,):
        return a.copy()
    if a.shape == (3, 3):
        return to_mandel(a)
    raise ValueError(f"expected a Mandel 6-vector or a 3x3 matrix, got shape {a.shape}")


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    """Periodicity lattice spanned by the columns g1, g2, g3 of ``G``."""

    G: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        g = np.asarray(self.G, dtype=float)
        if g.shape != (3, 3):
            raise ValueError(f"lattice matrix must be 3x3, got {g.shape}")
        if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) <= 1e-14 * max(1.0, np.abs(g).max()) ** 3:
            raise ValueError("lattice vectors are linearly dependent")
        object.__setattr__(self, "G", tuple(tuple(float(x) for x in row) for row in g))

    @classmethod
    def from_vectors(cls, g1, g2, g3) -> "Lattice":
        return cls(tuple(map(tuple, np.column_stack([g1, g2, g3]))))

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array(self.G)
        m.flags.writeable = False
        return m

    @cached_property
    def inverse(self) -> np.ndarray:
        m = np.linalg.inv(self.matrix)
        m.flags.writeable = False
        return m

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.matrix)))

    def vector(self, k: int) -> np.ndarray:
        return self.matrix[:, k].copy()

    def to_physical(self, yhat):
        """Reference coordinates (unit cube) -> physical coordinates."""
        return np.asarray(yhat, dtype=float) @ self.matrix.T

    def to_reference(self, y):
        return np.asarray(y, dtype=float) @ self.inverse.T


@dataclass(frozen=True)
class Grid:
    """Periodic node/element indexing of the cell: n1*n2*n3 nodes and as many hexahedra."""

    shape: tuple
    lattice: Lattice = field(default_factory=Lattice)

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or min(shape) < 2:
            raise ValueError(f"grid needs three node counts >= 2, got {self.shape}")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def cube(cls, n: int, lattice: Lattice | None = None) -> "Grid":
        return cls((n, n, n), lattice or Lattice())

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def element_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return self.lattice.volume

    @property
    def qp_weight(self) -> float:
        """Weight of one Gauss point: |Y| / (8 * element_count)."""
        return self.volume / (8 * self.element_count)

    def wrap(self, i, j, k):
        n1, n2, n3 = self.shape
        return i % n1, j % n2, k % n3

    def node_id(self, i, j, k):
        i, j, k = self.wrap(i, j, k)
        n1, n2, n3 = self.shape
        return (i * n2 + j) * n3 + k

    def node_positions(self) -> np.ndarray:
        """Physical positions of the nodes, shape (n1, n2, n3, 3)."""
        axes = [np.arange(n) / n for n in self.shape]
        yhat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return self.lattice.to_physical(yhat)

    def check_same(self, other: "Grid") -> None:
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self.shape} vs {other.shape}")


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------

def _frozen(a, shape) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.shape != shape:
        raise GridMismatchError(f"field values have shape {a.shape}, expected {shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class VecField:
    """Periodic nodal vector field; ``values[i, j, k]`` is the value at node (i, j, k)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape + (3,)))

    @classmethod
    def zeros(cls, grid: Grid) -> "VecField":
        return cls(grid, np.zeros(grid.shape + (3,)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "VecField":
        """Nodal samples of ``fn(y) -> (..., 3)`` with y physical positions."""
        return cls(grid, fn(grid.node_positions()))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __add__(self, other):
        self.grid.check_same(other.grid)
        return VecField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self.grid.check_same(other.grid)
        return VecField(self.grid, self.values - other.values)

    def __mul__(self, a):
        return VecField(self.grid, a * self.values)

    __rmul__ = __mul__

    def mean(self) -> np.ndarray:
        return self.values.reshape(-1, 3).mean(axis=0)

    def centered(self) -> "VecField":
        return VecField(self.grid, self.values - self.mean())

    def interpolate(self, y) -> np.ndarray:
        """Trilinear interpolation at physical points ``y`` (..., 3), wrapped into the cell."""
        y = np.asarray(y, dtype=float)
        s = np.mod(self.grid.lattice.to_reference(y), 1.0) * np.array(self.grid.shape)
        base = np.floor(s).astype(int)
        t = s - base
        out = np.zeros(y.shape[:-1] + (3,))
        for a in (0, 1):
            for b in (0, 1):
                for c in (0, 1):
                    w = ((t[..., 0] if a else 1 - t[..., 0])
                         * (t[..., 1] if b else 1 - t[..., 1])
                         * (t[..., 2] if c else 1 - t[..., 2]))
                    i, j, k = self.grid.wrap(base[..., 0] + a, base[..., 1] + b, base[..., 2] + c)
                    out += w[..., None] * self.values[i, j, k]
        return out


@dataclass(frozen=True, eq=False)
class LPField:
    """Linear-plus-periodic displacement u(y) = A y + phi(y), A symmetric (Mandel)."""

    A: np.ndarray
    phi: VecField

    def __post_init__(self):
        a = as_mandel_strain(self.A)
        a.flags.writeable = False
        object.__setattr__(self, "A", a)

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @classmethod
    def affine(cls, A, grid: Grid) -> "LPField":
        return cls(A, VecField.zeros(grid))

    @classmethod
    def periodic(cls, phi: VecField) -> "LPField":
        return cls(np.zeros(6), phi)


@dataclass(frozen=True, eq=False)
class SymField:
    """Symmetric-tensor field at the 8 Gauss points of every element.

    ``values`` has shape (n1, n2, n3, 8, 6) in Mandel notation; all Gauss
    points carry the same weight ``grid.qp_weight``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape + (8, 6)))

    @classmethod
    def constant(cls, grid: Grid, S) -> "SymField":
        s = as_mandel_strain(S)
        return cls(grid, np.broadcast_to(s, grid.shape + (8, 6)))

    @classmethod
    def zeros(cls, grid: Grid) -> "SymField":
        return cls(grid, np.zeros(grid.shape + (8, 6)))

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.grid.shape + (8,), self.grid.qp_weight)

    def __add__(self, other):
        if isinstance(other, SymField):
            self.grid.check_same(other.grid)
            return SymField(self.grid, self.values + other.values)
        return SymField(self.grid, self.values + as_mandel_strain(other))

    def __sub__(self, other):
        if isinstance(other, SymField):
            self.grid.check_same(other.grid)
            return SymField(self.grid, self.values - other.values)
        return SymField(self.grid, self.values - as_mandel_strain(other))

    def __mul__(self, a):
        return SymField(self.grid, a * self.values)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))


# --------------------------------------------------------------------------
# Averages and pairings
# --------------------------------------------------------------------------

def cell_average(f):
    """Cell average of a SymField (Mandel 6-vector) or VecField (3-vector).

    For a VecField the average of its trilinear interpolant equals the mean
    of the nodal values, since every periodic hat function has the same
    integral.
    """
    if isinstance(f, SymField):
        return f.values.reshape(-1, 6).sum(axis=0) * f.grid.qp_weight / f.grid.volume
    if isinstance(f, VecField):
        return f.mean()
    raise TypeError(f"cannot average {type(f).__name__}")


def inner(e: SymField, s: SymField) -> float:
    """Weighted L2 pairing sum_q w_q <e(q), s(q)>."""
    e.grid.check_same(s.grid)
    return float(np.dot(e.values.reshape(-1), s.values.reshape(-1)) * e.grid.qp_weight)


def pair(r, v) -> float:
    """Duality pairing of a nodal covector with a nodal vector field."""
    r = r.values if isinstance(r, VecField) else np.asarray(r)
    v = v.values if isinstance(v, VecField) else np.asarray(v)
    if r.shape != v.shape:
        raise GridMismatchError(f"covector shape {r.shape} != field shape {v.shape}")
    return float(np.dot(r.reshape(-1), v.reshape(-1)))


def mandel_dot(a, b) -> float:
    return float(np.dot(as_mandel_strain(a), as_mandel_strain(b)))


def eval_lp(u: LPField, y) -> np.ndarray:
    """u(y) = A y + phi(y); only the periodic part is wrapped."""
    y = np.asarray(y, dtype=float)
    return y @ from_mandel(u.A).T + u.phi.interpolate(y)
