"""Korn-constant estimates, face trace audits, and oscillating-sequence demonstrations."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh

from .core import Grid, LPField, SymField, VecField, cell_average, from_mandel
from .discrete import (
    LOCAL,
    divergence_defect,
    gradient_gram_operator,
    gradient_norm,
    mass_operator,
    operators,
    reference_operator,
    shape_gradients,
    sym_gradient,
)
from .donati import PreconditionError
from .solver import deflate

# --------------------------------------------------------------------------
# Korn constants
# --------------------------------------------------------------------------

# relative Rayleigh-quotient change accepted as converged
EIG_TOL = 1e-12


class EigenStagnationError(RuntimeError):
    """The eigen-iteration stopped before the Rayleigh quotient settled."""

    def __init__(self, msg, rayleigh=float("nan")):
        super().__init__(f"{msg} (last Rayleigh quotient {rayleigh:.10g})")
        self.rayleigh = rayleigh


def _top_eigenvalue(a, b, n, maxiter, seed, precondition=None, tol=EIG_TOL, patience=3):
    """Largest eigenvalue of a x = lam b x by a single-vector locally optimal block CG.

    Each step maximises the Rayleigh quotient over span{x, r, p} (current
    iterate, preconditioned residual, previous step). Convergence is declared
    once the Rayleigh quotient changes by at most ``tol`` (relative) for
    ``patience`` consecutive steps. Only products with a and b are needed.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    ax, bx = a(x), b(x)
    nx = np.sqrt(x @ bx)
    x, ax, bx = x / nx, ax / nx, bx / nx
    rho = float(x @ ax)
    p = ap = bp = None
    calm = 0
    for it in range(maxiter):
        r = ax - rho * bx
        w = precondition(r) if precondition is not None else r
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return rho, x
        w = w / wn
        cols, acols, bcols = [x, w], [ax, a(w)], [bx, b(w)]
        if p is not None:
            cols.append(p)
            acols.append(ap)
            bcols.append(bp)
        X, AX, BX = np.column_stack(cols), np.column_stack(acols), np.column_stack(bcols)
        ga = 0.5 * (X.T @ AX + AX.T @ X)
        gb = 0.5 * (X.T @ BX + BX.T @ X)
        try:
            vals, vecs = eigh(ga, gb)
        except LinAlgError:
            # basis nearly dependent: restart without the previous direction
            vals, vecs = eigh(ga[:2, :2], gb[:2, :2])
            X, AX, BX = X[:, :2], AX[:, :2], BX[:, :2]
        c = vecs[:, -1]
        new_rho = float(vals[-1])
        p, ap, bp = X[:, 1:] @ c[1:], AX[:, 1:] @ c[1:], BX[:, 1:] @ c[1:]
        x, ax, bx = X @ c, AX @ c, BX @ c
        nx = np.sqrt(x @ bx)
        x, ax, bx = x / nx, ax / nx, bx / nx
        calm = calm + 1 if abs(new_rho - rho) <= tol * abs(new_rho) else 0
        rho = new_rho
        if calm >= patience:
            return rho, x
    raise EigenStagnationError(f"eigen-iteration did not settle in {maxiter} steps", rho)


def _mean_part(x):
    return x - deflate(x)


def _zero_mean_form(grid):
    """b = S + (I - P): the symmetric-gradient form on zero-mean fields, identity on constants."""
    S = reference_operator(grid)

    def b(x):
        return S(x) + _mean_part(x)

    return S.ops.n_dof, b


def gradient_ratio(v) -> float:
    """||grad v||^2 / ||grad_s v||^2 for a nodal field (periodic part only)."""
    if isinstance(v, LPField):
        v = v.phi
    num = gradient_norm(v) ** 2
    den = sym_gradient(v).norm() ** 2
    return float(num / den)


def lambda_grad(grid: Grid, iters: int = 2000, seed: int = 0, tol: float = EIG_TOL) -> float:
    """sup ||grad v||^2 / ||grad_s v||^2 over zero-mean periodic nodal fields."""
    L = gradient_gram_operator(grid)
    n, b = _zero_mean_form(grid)
    lam, _ = _top_eigenvalue(lambda x: deflate(L(x)), b, n, iters, seed, tol=tol)
    return lam


def korn_constant(grid: Grid, iters: int = 3000, seed: int = 0, tol: float = 1e-8) -> float:
    """C with ||v||_H1 <= C (||v|| + ||grad_s v||) for every periodic nodal field.

    Computed as sqrt of the top eigenvalue of (M + L) x = lam (M + S) x, i.e.
    the sup of ||v||_H1 / sqrt(||v||^2 + ||grad_s v||^2). Since the square
    root of a sum of squares never exceeds the sum, the inequality holds
    with this constant. The top of this spectrum is a dense cluster, so
    the default tolerance is looser than for ``lambda_grad``.
    """
    M = mass_operator(grid)
    L = gradient_gram_operator(grid)
    S = reference_operator(grid)
    lam, _ = _top_eigenvalue(lambda x: M(x) + L(x), lambda x: M(x) + S(x), S.ops.n_dof, iters, seed, tol=tol)
    return float(np.sqrt(lam))


def isomorphism_constant(grid: Grid, iters: int = 3000, seed: int = 0, tol: float = 1e-8) -> float:
    """sup ||v||_H1 / ||grad_s v|| over zero-mean periodic nodal fields."""
    M = mass_operator(grid)
    L = gradient_gram_operator(grid)
    n, b = _zero_mean_form(grid)

    def a(x):
        y = deflate(x)
        return deflate(M(y) + L(y))

    lam, _ = _top_eigenvalue(a, b, n, iters, seed, tol=tol)
    return float(np.sqrt(lam))


def korn_ratios(grid: Grid, iters: int = 3000, seed: int = 0):
    """(lambda_grad, C_korn) on ``grid``; see ``lambda_grad`` and ``korn_constant``."""
    if min(grid.shape) < 8:
        warnings.warn(f"grid {grid.shape} is coarser than 8^3; spectra are not representative", stacklevel=2)
    return lambda_grad(grid, iters, seed), korn_constant(grid, iters, seed)


def h1_norm(v: VecField) -> float:
    from .discrete import l2_norm
    return float(np.hypot(l2_norm(v), gradient_norm(v)))


# --------------------------------------------------------------------------
# Trace audits
# --------------------------------------------------------------------------

@dataclass
class TraceReport:
    """Mismatch between identically indexed samples on the two faces normal to one lattice direction.

    ``mismatch`` has shape (m_i, m_j, 3) over the face lattice; ``max_mismatch``
    is the largest Euclidean norm in it.
    """

    pair: int
    kind: str
    max_mismatch: float
    mismatch: np.ndarray = field(repr=False)
    note: str = ""

    @property
    def jump(self) -> np.ndarray:
        """Face-averaged mismatch vector."""
        return self.mismatch.reshape(-1, 3).mean(axis=0)

    def rows(self):
        """CSV rows: pair, kind, a, b, component values and norm for every face sample."""
        m = self.mismatch
        for a in range(m.shape[0]):
            for b in range(m.shape[1]):
                d = m[a, b]
                yield (self.pair, self.kind, a, b, d[0], d[1], d[2], float(np.linalg.norm(d)))


def unwrapped_values(u) -> np.ndarray:
    """u at node indices 0..n_k inclusive in every direction, shape (n1+1, n2+1, n3+1, 3).

    The periodic part is read through the index wrap; the affine part is
    evaluated at the true (unwrapped) positions.
    """
    if isinstance(u, VecField):
        u = LPField.periodic(u)
    grid = u.grid
    n1, n2, n3 = grid.shape
    idx = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), np.arange(n3 + 1), indexing="ij")
    vals = u.phi.values[grid.wrap(*idx)]
    if np.any(u.A):
        yhat = np.stack([i / n for i, n in zip(idx, grid.shape)], axis=-1)
        y = grid.lattice.to_physical(yhat)
        vals = vals + y @ from_mandel(u.A).T
    return vals


def audit_unwrapped(values) -> list:
    """Face-pair mismatches of an explicit (n1+1, n2+1, n3+1, 3) nodal array."""
    values = np.asarray(values, dtype=float)
    out = []
    for k in range(3):
        hi = np.take(values, -1, axis=k)
        lo = np.take(values, 0, axis=k)
        d = hi - lo
        out.append(TraceReport(k, "h1", float(np.linalg.norm(d, axis=-1).max()), d))
    return out


def trace_audit_h1(u) -> list:
    """Value traces on opposite faces for each lattice direction.

    For the periodic part the two faces read the same stored node, so the
    mismatch is zero exactly; an affine part A shows up as the jump A g_k.
    """
    return audit_unwrapped(unwrapped_values(u))


def face_flux(ops, fe, axis: int, layer: int, offset: int) -> np.ndarray:
    """Assembled flux functionals of one element layer on the face nodes it touches.

    ``fe`` are element contributions (n_elem, 24) of G^T W sigma; only the
    local nodes with ``offset`` along ``axis`` are collected. Returns
    (m_i, m_j, 3) over the face node lattice of the other two axes.
    """
    grid = ops.grid
    fe = np.asarray(fe).reshape(grid.shape + (8, 3))
    slab = np.take(fe, layer, axis=axis)  # (m_i, m_j, 8, 3)
    others = [d for d in range(3) if d != axis]
    out = np.zeros(slab.shape[:2] + (3,))
    for a in range(8):
        if LOCAL[a, axis] != offset:
            continue
        shift = (int(LOCAL[a, others[0]]), int(LOCAL[a, others[1]]))
        out += np.roll(slab[:, :, a, :], shift, axis=(0, 1))
    return out


def _face_area_per_node(grid, axis):
    g = grid.lattice.matrix
    i, j = [d for d in range(3) if d != axis]
    area = float(np.linalg.norm(np.cross(g[:, i], g[:, j])))
    return area / (grid.shape[i] * grid.shape[j])


def trace_audit_hdiv(sigma: SymField, k: int, warn_tol: float = 1e-6) -> TraceReport:
    """Normal-flux functionals on the two faces normal to direction k.

    The flux on the far face comes from the last element layer, the flux on
    the near face from the first layer (outer normal reversed). Their sum
    per face node, divided by the face area per node, is the mismatch; it
    vanishes for discretely divergence-free periodic fields.
    """
    grid = sigma.grid
    ops = operators(grid)
    fe = ops.strain_transpose(sigma.values)
    n = grid.shape[k]
    t_plus = face_flux(ops, fe, k, n - 1, 1)
    t_minus = face_flux(ops, fe, k, 0, 0)
    mism = (t_plus + t_minus) / _face_area_per_node(grid, k)

    # interior divergence: assembled residual away from the audited face
    r = np.take(ops.scatter(fe).reshape(grid.shape + (3,)), np.arange(1, n), axis=k)
    scale = np.linalg.norm(fe)
    rel = float(np.linalg.norm(r) / scale) if scale > 0 else 0.0
    note = ""
    if rel > warn_tol:
        note = f"interior weak divergence {rel:.3e} (relative) exceeds {warn_tol:.0e}; normal trace not well defined"
        warnings.warn(note, stacklevel=2)
    return TraceReport(k, "hdiv", float(np.linalg.norm(mism, axis=-1).max()), mism, note)


# --------------------------------------------------------------------------
# Half-cell joins
# --------------------------------------------------------------------------

@dataclass
class JoinResult:
    joined: object
    valid: bool
    interface_mismatch: float
    periodic_mismatch: float
    defect: float
    defect_nodes: np.ndarray = field(repr=False, default=None)


def split_h1(u: VecField, axis: int, split: int):
    """Restrictions of a periodic nodal field to the node layers 0..split and split..n."""
    n = u.grid.shape[axis]
    if not 0 < split < n:
        raise ValueError(f"split {split} must lie strictly inside 0..{n}")
    layers = np.arange(n + 1) % n
    full = np.take(u.values, layers, axis=axis)
    return np.take(full, np.arange(split + 1), axis=axis), np.take(full, np.arange(split, n + 1), axis=axis)


def split_hdiv(sigma: SymField, axis: int, split: int):
    """Gauss-point values of the element layers 0..split-1 and split..n-1."""
    n = sigma.grid.shape[axis]
    if not 0 < split < n:
        raise ValueError(f"split {split} must lie strictly inside 0..{n}")
    return (np.take(sigma.values, np.arange(split), axis=axis),
            np.take(sigma.values, np.arange(split, n), axis=axis))


def _split_of(grid, axis, first, second, elem):
    n = grid.shape[axis]
    a, b = first.shape[axis], second.shape[axis]
    split = a if elem else a - 1
    if (elem and a + b != n) or (not elem and a + b != n + 2) or not 0 < split < n:
        raise ValueError(f"halves with {a} and {b} layers along axis {axis} do not split a grid of {n}")
    return split


def join_h1(grid: Grid, u1, u2, axis: int = 0, tol: float = 1e-12, seed: int = 0, samples: int = 4) -> JoinResult:
    """Join two half-cell nodal fields and test them against the global Green identity.

    ``u1`` holds node layers 0..split, ``u2`` layers split..n along ``axis``
    (layer n is the periodic image of layer 0). Elements of each half use
    their own half's values, so traces that disagree on the interface or on
    the periodic face leave a Green-identity defect carried by those nodes.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    split = _split_of(grid, axis, u1, u2, elem=False)
    n = grid.shape[axis]
    gamma = np.take(u2, 0, axis=axis) - np.take(u1, -1, axis=axis)
    face = np.take(u2, -1, axis=axis) - np.take(u1, 0, axis=axis)

    ops = operators(grid)
    joined = VecField(grid, np.concatenate([np.take(u1, np.arange(split), axis=axis),
                                            np.take(u2, np.arange(n - split), axis=axis)], axis=axis))

    # each half embedded in an unwrapped array of node layers 0..n
    ext_shape = list(grid.shape) + [3]
    ext_shape[axis] = n + 1
    ext1, ext2 = np.zeros(ext_shape), np.zeros(ext_shape)
    sl1, sl2 = [slice(None)] * 4, [slice(None)] * 4
    sl1[axis], sl2[axis] = slice(0, split + 1), slice(split, n + 1)
    ext1[tuple(sl1)] = u1
    ext2[tuple(sl2)] = u2

    el = np.moveaxis(np.indices(grid.shape), 0, -1).reshape(-1, 3)
    first = (el[:, axis] < split)[:, None]
    ue = np.empty((ops.n_elem, 8, 3))
    for a, off in enumerate(LOCAL):
        idx = el + off
        sel = [idx[:, d] if d == axis else idx[:, d] % grid.shape[d] for d in range(3)]
        ue[:, a] = np.where(first, ext1[tuple(sel)], ext2[tuple(sel)])
    ue = ue.reshape(ops.n_elem, 24)

    # Green identity with the broken gradient: sum_e fe . (u_e - joined_e) must vanish
    rng = np.random.default_rng(seed)
    broken = np.einsum("qsk,ek->eqs", ops.B, ue)
    diff = ue - ops.gather(joined.flat)
    unorm = np.sqrt(ops.w * np.sum(broken * broken)) + np.linalg.norm(joined.flat) / np.sqrt(ops.n_nodes)
    defect = 0.0
    nodes = np.zeros(ops.n_dof)
    for _ in range(samples):
        mu = rng.standard_normal((ops.n_elem, 8, 6))
        fe = ops.strain_transpose(mu)
        mu_norm = np.sqrt(ops.w * np.sum(mu * mu))
        defect = max(defect, abs(float(np.sum(fe * diff))) / (mu_norm * unorm))
        nodes += np.abs(ops.scatter(fe * diff))
    mism_gamma = float(np.linalg.norm(gamma, axis=-1).max())
    mism_face = float(np.linalg.norm(face, axis=-1).max())
    valid = max(mism_gamma, mism_face) <= tol and defect <= tol
    return JoinResult(joined, valid, mism_gamma, mism_face, defect,
                      nodes.reshape(grid.shape + (3,)).sum(axis=-1))


def join_hdiv(grid: Grid, s1, s2, axis: int = 0, tol: float = 1e-9) -> JoinResult:
    """Join two half-cell stress fields and check normal-flux continuity.

    Flux functionals of the two sides are summed on the interface nodes and
    on the periodic face (outer normals opposite, so matching fluxes cancel).
    """
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    split = _split_of(grid, axis, s1, s2, elem=True)
    n = grid.shape[axis]
    joined = SymField(grid, np.concatenate([s1, s2], axis=axis))
    ops = operators(grid)
    fe = ops.strain_transpose(joined.values)
    area = _face_area_per_node(grid, axis)
    gamma = (face_flux(ops, fe, axis, split - 1, 1) + face_flux(ops, fe, axis, split, 0)) / area
    face = (face_flux(ops, fe, axis, n - 1, 1) + face_flux(ops, fe, axis, 0, 0)) / area
    mism_gamma = float(np.linalg.norm(gamma, axis=-1).max())
    mism_face = float(np.linalg.norm(face, axis=-1).max())
    defect = divergence_defect(joined)
    valid = max(mism_gamma, mism_face) <= tol
    return JoinResult(joined, valid, mism_gamma, mism_face, defect)


def interface_join_check(first, second, grid: Grid, axis: int = 0, kind: str = "h1", tol=None) -> JoinResult:
    """Dispatch to ``join_h1`` (nodal halves) or ``join_hdiv`` (Gauss-point halves)."""
    if kind == "h1":
        return join_h1(grid, first, second, axis, tol=1e-12 if tol is None else tol)
    if kind == "hdiv":
        return join_hdiv(grid, first, second, axis, tol=1e-9 if tol is None else tol)
    raise ValueError(f"unknown join kind {kind!r}")


# --------------------------------------------------------------------------
# Oscillating sequences
# --------------------------------------------------------------------------

@dataclass
class OscillationRecord:
    n: int
    integral: float
    target: float
    error: float


def _composite_gauss(cells: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts = (np.arange(cells)[:, None] + x[None, :]) / cells
    return pts.ravel(), np.tile(w / cells, cells)


def _separable(phi):
    """Normalise a test function to a list of separable terms (f1, f2, f3)."""
    if callable(phi):
        raise TypeError("test function must be separable: a tuple (f1, f2, f3) or a list of such tuples")
    if len(phi) == 3 and all(callable(p) for p in phi):
        return [tuple(phi)]
    return [tuple(t) for t in phi]


def _averaged_1d(fn, y, n):
    """(1/n) sum_c fn((y + c) / n), c = 0..n-1."""
    c = np.arange(n)
    arg = (y[:, None] + c[None, :]) / n
    return np.mean(np.broadcast_to(fn(arg), arg.shape), axis=1)


def _phi_integral(terms, x, w):
    return sum(np.prod([w @ np.broadcast_to(f(x), x.shape) for f in t]) for t in terms)


def averaged_test_function(phi, n: int, pts):
    """Phi_n(y) = n^-3 sum over cells c of phi((y + c) / n) at per-axis points ``pts`` (3 arrays).

    Returns an array (len(p1), len(p2), len(p3)). ``int_Omega f(n x) phi(x) dx``
    equals ``int_Y f Phi_n`` for Y-periodic f.
    """
    terms = _separable(phi)
    out = 0.0
    for t in terms:
        a, b, c = (np.broadcast_to(_averaged_1d(f, p, n), p.shape) for f, p in zip(t, pts))
        out = out + a[:, None, None] * b[None, :, None] * c[None, None, :]
    return out


def oscillation_demo(f, n_schedule, phi, cells: int = 8, order: int = 6) -> list:
    """Records of int_Omega f(n x) phi(x) dx against (mean f) * int_Omega phi, Omega = unit cube.

    ``f(y1, y2, y3)`` must be 1-periodic in each argument and broadcast over
    arrays; ``phi`` is separable (see ``averaged_test_function``).
    """
    x, w = _composite_gauss(cells, order)
    Y1, Y2, Y3 = np.meshgrid(x, x, x, indexing="ij")
    fw = f(Y1, Y2, Y3) * (w[:, None, None] * w[None, :, None] * w[None, None, :])
    mean_f = float(fw.sum())
    int_phi = _phi_integral(_separable(phi), x, w)
    target = mean_f * int_phi
    out = []
    for n in n_schedule:
        integral = float(np.sum(fw * averaged_test_function(phi, int(n), (x, x, x))))
        out.append(OscillationRecord(int(n), integral, target, integral - target))
    return out


def decay_exponent(records, floor: float = 0.0) -> float:
    """Least-squares slope of log|error| against log n (records with |error| <= floor skipped)."""
    n = np.array([r.n for r in records], dtype=float)
    e = np.abs(np.array([r.error for r in records]))
    keep = e > floor
    if keep.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(n[keep]), np.log(e[keep]), 1)[0])


def _gauss_lagrange(t):
    """1-D Lagrange basis through the two Gauss abscissae, evaluated at t -> (len(t), 2)."""
    from .discrete import GAUSS_1D
    g0, g1 = GAUSS_1D
    return np.stack([(t - g1) / (g0 - g1), (t - g0) / (g1 - g0)], axis=-1)


def div_curl_demo(sigma: SymField, v, row: int, n_schedule, phi, order: int = 3,
                  div_tol: float = 1e-8) -> list:
    """Records of int_Omega a(n x) . b(n x) phi(x) dx against <avg a, avg b> int_Omega phi.

    a is row ``row`` of sigma (the trilinear interpolant of its Gauss values
    in every element) and b is row ``row`` of grad v. The cell must be the
    unit cube so that Omega tiles by whole cells.
    """
    grid = sigma.grid
    if not np.allclose(grid.lattice.matrix, np.eye(3)):
        raise ValueError("div_curl_demo needs the unit-cube lattice")
    defect = divergence_defect(sigma)
    if defect > div_tol:
        raise PreconditionError(f"stress is not divergence-free: relative weak divergence {defect:.3e} > {div_tol:.1e}")
    if isinstance(v, VecField):
        v = LPField.periodic(v)

    ops = operators(grid)
    t, wt = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    # local points p = (p0, p1, p2) with p0 fastest, matching LOCAL's ordering style
    P = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    WP = np.einsum("i,j,k->ijk", wt, wt, wt).reshape(-1)

    lag = _gauss_lagrange(P)  # (p, 3, 2)
    Lq = np.prod(lag[:, np.arange(3)[None, :], LOCAL], axis=-1)  # (p, 8 gauss points)
    sig = from_mandel(np.einsum("pq,eqs->eps", Lq, sigma.values.reshape(ops.n_elem, 8, 6)))
    a = sig[:, :, row, :]  # (e, p, 3)

    scale = np.array(grid.shape, dtype=float)
    Dp = np.einsum("pad,d,dm->pam", shape_gradients(P), scale, grid.lattice.inverse)
    ue = ops.gather(v.phi.values).reshape(ops.n_elem, 8, 3)
    b = np.einsum("pam,ea->epm", Dp, ue[:, :, row]) + from_mandel(v.A)[row]

    o = len(t)
    ab = np.sum(a * b, axis=-1) * WP * (grid.volume / ops.n_elem)
    abw = ab.reshape(grid.shape + (o, o, o))
    # 1-D point coordinates along each axis: (i + t) / n_d
    axes_pts = [((np.arange(nd)[:, None] + t[None, :]) / nd).ravel() for nd in grid.shape]

    avg_a = from_mandel(cell_average(sigma))[row]
    avg_b = from_mandel(v.A)[row]
    terms = _separable(phi)
    xg, wg = _composite_gauss(8, 6)
    int_phi = _phi_integral(terms, xg, wg)
    target = float(avg_a @ avg_b) * int_phi

    out = []
    for n in n_schedule:
        n = int(n)
        integral = 0.0
        for term in terms:
            f1, f2, f3 = (_averaged_1d(fd, x, n).reshape(nd, o) for fd, x, nd in zip(term, axes_pts, grid.shape))
            integral += float(np.einsum("ijkabc,ia,jb,kc->", abw, f1, f2, f3))
        out.append(OscillationRecord(n, integral, target, integral - target))
    return out
