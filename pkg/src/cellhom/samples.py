"""Smooth periodic trigonometric fields with analytic derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class TrigVectorField:
    """v(y) = sum_m a_m cos(2 pi k_m . yhat) + b_m sin(2 pi k_m . yhat), yhat = G^-1 y."""

    k: np.ndarray  # (modes, 3) integer wave vectors in lattice coordinates
    a: np.ndarray  # (modes, 3)
    b: np.ndarray  # (modes, 3)
    ginv: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def random(cls, rng, modes: int = 3, kmax: int = 2, lattice=None) -> "TrigVectorField":
        k = rng.integers(-kmax, kmax + 1, size=(modes, 3))
        k[np.all(k == 0, axis=1)] = [1, 0, 0]
        ginv = np.eye(3) if lattice is None else np.asarray(lattice.inverse)
        return cls(k, rng.standard_normal((modes, 3)), rng.standard_normal((modes, 3)), ginv)

    def _phase(self, y):
        yhat = np.asarray(y, dtype=float) @ self.ginv.T
        return TWO_PI * yhat @ self.k.T  # (..., modes)

    def __call__(self, y) -> np.ndarray:
        t = self._phase(y)
        return np.cos(t) @ self.a + np.sin(t) @ self.b

    def gradient(self, y) -> np.ndarray:
        """grad v[..., i, m] = d v_i / d y_m."""
        t = self._phase(y)
        kx = TWO_PI * self.k @ self.ginv  # physical wave vectors (modes, 3)
        return (np.einsum("...p,pi,pm->...im", -np.sin(t), self.a, kx)
                + np.einsum("...p,pi,pm->...im", np.cos(t), self.b, kx))

    def sym_gradient(self, y) -> np.ndarray:
        g = self.gradient(y)
        return 0.5 * (g + np.swapaxes(g, -1, -2))


@dataclass(frozen=True, eq=False)
class TrigSymField:
    """e(y) = sum_m S_m cos(2 pi k_m . yhat) with symmetric amplitudes S_m; generically incompatible."""

    k: np.ndarray
    S: np.ndarray  # (modes, 3, 3) symmetric
    ginv: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def random(cls, rng, modes: int = 2, kmax: int = 2, lattice=None) -> "TrigSymField":
        k = rng.integers(-kmax, kmax + 1, size=(modes, 3))
        k[np.all(k == 0, axis=1)] = [0, 1, 0]
        s = rng.standard_normal((modes, 3, 3))
        ginv = np.eye(3) if lattice is None else np.asarray(lattice.inverse)
        return cls(k, 0.5 * (s + np.swapaxes(s, 1, 2)), ginv)

    @classmethod
    def single(cls, i: int, j: int, k) -> "TrigSymField":
        s = np.zeros((1, 3, 3))
        s[0, i, j] = s[0, j, i] = 1.0
        return cls(np.atleast_2d(np.asarray(k)), s)

    def __call__(self, y) -> np.ndarray:
        yhat = np.asarray(y, dtype=float) @ self.ginv.T
        t = TWO_PI * yhat @ self.k.T
        return np.einsum("...p,pij->...ij", np.cos(t), self.S)
