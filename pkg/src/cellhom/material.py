"""Voxelwise elasticity tensors, microstructure ingestion and Voigt/Reuss averages."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid

MAGIC = b"CHOM"
HEADER = struct.Struct("<4sIII")

# unit hydrostatic direction in Mandel space
_HYDRO = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]) / np.sqrt(3.0)


class MaterialError(ValueError):
    """Invalid elastic moduli (not symmetric positive definite, singular, ...)."""


class MicrostructureFormatError(MaterialError):
    """Malformed microstructure or phase-table file."""


def isotropic_tensor(lam: float, mu: float) -> np.ndarray:
    """Isotropic stiffness 3*kappa*P_hydro + 2*mu*P_dev as a Mandel 6x6 matrix."""
    if not (mu > 0 and 3 * lam + 2 * mu > 0):
        raise MaterialError(f"isotropic moduli not positive definite: lambda={lam}, mu={mu}")
    p_hydro = np.outer(_HYDRO, _HYDRO)
    return (3 * lam + 2 * mu) * p_hydro + 2 * mu * (np.eye(6) - p_hydro)


def check_spd(c, what="stiffness") -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (6, 6) or not np.all(np.isfinite(c)):
        raise MaterialError(f"{what} must be a finite 6x6 matrix")
    scale = max(np.abs(c).max(), 1e-300)
    if np.abs(c - c.T).max() > 1e-12 * scale:
        raise MaterialError(f"{what} is not symmetric")
    lo = np.linalg.eigvalsh(0.5 * (c + c.T))[0]
    if lo <= 1e-12 * scale:
        raise MaterialError(f"{what} is not positive definite (smallest eigenvalue {lo:.3e})")
    return 0.5 * (c + c.T)


def compliance(c) -> np.ndarray:
    """B = C^-1 for a symmetric positive definite Mandel matrix."""
    try:
        c = check_spd(c)
    except MaterialError as exc:
        raise MaterialError(f"cannot invert: {exc}") from None
    b = np.linalg.inv(c)
    return 0.5 * (b + b.T)


@dataclass(frozen=True, eq=False)
class Phase:
    """One constituent, stored as its Mandel stiffness matrix."""

    stiffness: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = check_spd(self.stiffness, f"phase {self.name!r}" if self.name else "phase")
        c.flags.writeable = False
        object.__setattr__(self, "stiffness", c)

    @classmethod
    def isotropic(cls, lam: float, mu: float, name: str = "") -> "Phase":
        return cls(isotropic_tensor(lam, mu), name)

    @classmethod
    def from_upper(cls, upper, name: str = "") -> "Phase":
        """Build from the 21 upper-triangle entries of the Mandel matrix, row by row."""
        upper = np.asarray(upper, dtype=float)
        if upper.shape != (21,):
            raise MicrostructureFormatError(f"phase {name!r}: expected 21 upper-triangle entries, got {upper.size}")
        c = np.zeros((6, 6))
        c[np.triu_indices(6)] = upper
        c = c + np.triu(c, 1).T
        return cls(c, name)

    def to_dict(self) -> dict:
        return {"name": self.name, "mandel_upper": self.stiffness[np.triu_indices(6)].tolist()}


@dataclass(frozen=True, eq=False)
class MaterialMap:
    """One phase per element (voxel); ``phase_ids[i, j, k]`` indexes ``phases``."""

    grid: Grid
    phase_ids: np.ndarray
    phases: tuple

    def __post_init__(self):
        ids = np.array(self.phase_ids, dtype=np.int64)
        if ids.shape != self.grid.shape:
            raise MaterialError(f"phase map shape {ids.shape} does not match grid {self.grid.shape}")
        phases = tuple(self.phases)
        if not phases:
            raise MaterialError("material map needs at least one phase")
        bad = np.argwhere((ids < 0) | (ids >= len(phases)))
        if len(bad):
            i, j, k = bad[0]
            raise MaterialError(f"voxel ({i}, {j}, {k}) refers to unknown phase {ids[i, j, k]}")
        ids.flags.writeable = False
        object.__setattr__(self, "phase_ids", ids)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def homogeneous(cls, grid: Grid, phase: Phase) -> "MaterialMap":
        return cls(grid, np.zeros(grid.shape, dtype=np.int64), (phase,))

    @property
    def stiffness_table(self) -> np.ndarray:
        return np.stack([p.stiffness for p in self.phases])

    def volume_fractions(self) -> np.ndarray:
        return np.bincount(self.phase_ids.reshape(-1), minlength=len(self.phases)) / self.grid.element_count

    def min_eigenvalue(self) -> float:
        return min(np.linalg.eigvalsh(p.stiffness)[0] for p in self.phases)

    def describe(self) -> dict:
        return {
            "phases": [p.to_dict() for p in self.phases],
            "volume_fractions": self.volume_fractions().tolist(),
        }


def laminate_map(grid: Grid, phase1: Phase, phase2: Phase, fraction: float, axis: int = 0) -> MaterialMap:
    """Rank-one laminate: the first ``fraction`` of element layers along ``axis`` are phase1.

    Interfaces sit on element faces only when fraction * n_axis is an integer.
    """
    n = grid.shape[axis]
    layers = fraction * n
    if not 0 < fraction < 1:
        raise MaterialError(f"laminate fraction must be in (0, 1), got {fraction}")
    if abs(layers - round(layers)) > 1e-9:
        raise MaterialError(
            f"fraction {fraction} does not put the interface on element faces for n={n} along axis {axis}"
        )
    idx = np.arange(n) >= int(round(layers))
    shape = [1, 1, 1]
    shape[axis] = n
    ids = np.broadcast_to(idx.reshape(shape), grid.shape).astype(np.int64)
    return MaterialMap(grid, ids, (phase1, phase2))


def random_two_phase(grid: Grid, phase1: Phase, phase2: Phase, fraction: float, rng) -> MaterialMap:
    """Each voxel independently phase2 with probability ``fraction``."""
    ids = (rng.random(grid.shape) < fraction).astype(np.int64)
    return MaterialMap(grid, ids, (phase1, phase2))


def voigt_reuss(m: MaterialMap):
    """Arithmetic mean of C and inverse of the arithmetic mean of B over voxels."""
    frac = m.volume_fractions()
    table = m.stiffness_table
    voigt = np.einsum("p,pij->ij", frac, table)
    comp = np.einsum("p,pij->ij", frac, np.stack([compliance(c) for c in table]))
    reuss = compliance(comp)
    return 0.5 * (voigt + voigt.T), reuss


# --------------------------------------------------------------------------
# Files
# --------------------------------------------------------------------------

def read_header(buf: bytes, path="<buffer>"):
    if len(buf) < HEADER.size:
        raise MicrostructureFormatError(f"{path}: file has {len(buf)} bytes, header needs {HEADER.size}")
    magic, n1, n2, n3 = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise MicrostructureFormatError(f"{path}: bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if min(n1, n2, n3) < 2:
        raise MicrostructureFormatError(f"{path}: header dimensions ({n1}, {n2}, {n3}) must all be >= 2")
    return n1, n2, n3


def write_microstructure(path, phase_ids) -> None:
    ids = np.asarray(phase_ids)
    if ids.ndim != 3:
        raise ValueError("phase map must be three-dimensional")
    if ids.min() < 0 or ids.max() > 255:
        raise ValueError("phase ids must fit in an unsigned byte")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, *ids.shape))
        # i fastest
        fh.write(ids.astype("<u1").ravel(order="F").tobytes())


def read_microstructure(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    n1, n2, n3 = read_header(buf, path)
    expected = n1 * n2 * n3
    got = len(buf) - HEADER.size
    if got != expected:
        raise MicrostructureFormatError(
            f"{path}: voxel count mismatch: header says {n1}x{n2}x{n3} = {expected} voxels, file holds {got}"
        )
    raw = np.frombuffer(buf, dtype="<u1", offset=HEADER.size)
    return raw.reshape((n1, n2, n3), order="F").astype(np.int64)


def load_phase_table(path) -> list:
    """Read a JSON phase table ``{"phases": {"0": {"lambda": .., "mu": ..}, "1": {"mandel_upper": [...]}}}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MicrostructureFormatError(f"{path}: invalid JSON: {exc}") from None
    return phases_from_dict(doc.get("phases", doc) if isinstance(doc, dict) else doc, source=str(path))


def phases_from_dict(table, source="phase table") -> list:
    if isinstance(table, list):
        items = list(enumerate(table))
    elif isinstance(table, dict):
        try:
            items = sorted((int(k), v) for k, v in table.items())
        except ValueError:
            raise MicrostructureFormatError(f"{source}: phase ids must be integers") from None
    else:
        raise MicrostructureFormatError(f"{source}: expected a mapping of phase id -> moduli")
    ids = [i for i, _ in items]
    if ids != list(range(len(ids))):
        raise MicrostructureFormatError(f"{source}: phase ids must be 0..{len(ids) - 1}, got {ids}")
    phases = []
    for i, entry in items:
        name = str(entry.get("name", i))
        if "mandel_upper" in entry:
            phases.append(Phase.from_upper(entry["mandel_upper"], name))
        elif "lambda" in entry and "mu" in entry:
            phases.append(Phase.isotropic(float(entry["lambda"]), float(entry["mu"]), name))
        else:
            raise MicrostructureFormatError(f"{source}: phase {i} needs lambda/mu or mandel_upper")
    return phases


def load_microstructure(path, grid: Grid, phase_table) -> MaterialMap:
    """Read a binary voxel file and attach phases (a list of Phase or a phase-table path)."""
    ids = read_microstructure(path)
    if ids.shape != grid.shape:
        raise MicrostructureFormatError(f"{path}: file dimensions {ids.shape} do not match grid {grid.shape}")
    phases = phase_table if isinstance(phase_table, (list, tuple)) else load_phase_table(phase_table)
    bad = np.argwhere(ids >= len(phases))
    if len(bad):
        i, j, k = bad[0]
        offset = HEADER.size + i + grid.shape[0] * (j + grid.shape[1] * k)
        raise MicrostructureFormatError(
            f"{path}: voxel ({i}, {j}, {k}) at byte {offset} has phase id {ids[i, j, k]}, "
            f"but only {len(phases)} phases are defined"
        )
    return MaterialMap(grid, ids, tuple(phases))
