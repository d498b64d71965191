"""Sine-basis spectral tools on the unit box (0,1)^d.

Modes are the Dirichlet Laplacian eigenfunctions

    phi_m(x) = prod_i sqrt(2) sin(k_i pi x_i),   m = (k_1..k_d), 1 <= k_i <= N,

normalised to unit L^2 norm, so for a coefficient vector a:

    |u|^2      = sum a_m^2
    |grad u|^2 = sum mu_m a_m^2,    mu_m = pi^2 sum_i k_i^2

Every differential operator is diagonal here, which makes the energy
functionals exact coefficient sums. Grid transforms are type-I sine
transforms evaluated as dense matrix products; at desk resolutions that is
cheaper than being clever. All field operations accept a leading batch
dimension, so ensembles evolve as one array.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import (EpsilonProfile, NonlinearitySpec, eval_epsilon, eval_g,
                    eval_g_value)


@dataclass(frozen=True)
class Basis:
    """Fixed enumeration of sine modes: lexicographic in the multi-index."""

    dim: int
    modes_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.modes_per_dim < 1:
            raise ValueError("need at least one mode per dimension")

    @cached_property
    def multi_indices(self) -> np.ndarray:
        ks = list(itertools.product(range(1, self.modes_per_dim + 1), repeat=self.dim))
        return np.asarray(ks, dtype=int)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.pi ** 2 * np.sum(self.multi_indices.astype(float) ** 2, axis=1)

    @property
    def n_modes(self) -> int:
        return self.modes_per_dim ** self.dim

    @property
    def lambda1(self) -> float:
        return float(self.dim * np.pi ** 2)

    def mode_labels(self) -> list[str]:
        return ["-".join(str(k) for k in m) for m in self.multi_indices]


@dataclass(frozen=True)
class ModalState:
    """Galerkin coefficients of (u, u_t) at one time instant."""

    u: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape:
            raise ValueError("u and v must share a shape")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


def zero_state(basis: Basis, t: float = 0.0) -> ModalState:
    return ModalState(np.zeros(basis.n_modes), np.zeros(basis.n_modes), t)


def norm_sq(f: np.ndarray) -> np.ndarray | float:
    out = np.sum(np.asarray(f, dtype=float) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def grad_norm_sq(basis: Basis, f: np.ndarray) -> np.ndarray | float:
    out = np.sum(basis.eigenvalues * np.asarray(f, dtype=float) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def inner(f: np.ndarray, g: np.ndarray) -> np.ndarray | float:
    out = np.sum(np.asarray(f, dtype=float) * np.asarray(g, dtype=float), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def xt_norm_sq(basis: Basis, state: ModalState, eps: EpsilonProfile) -> float:
    """Squared phase-space norm |grad u|^2 + eps(t) |v|^2 at the state's time."""
    e, _ = eval_epsilon(eps, state.t)
    return float(grad_norm_sq(basis, state.u) + e * norm_sq(state.v))


def apply_neg_laplacian(basis: Basis, f: np.ndarray) -> np.ndarray:
    return basis.eigenvalues * np.asarray(f, dtype=float)


def apply_inv_neg_laplacian(basis: Basis, f: np.ndarray) -> np.ndarray:
    return np.asarray(f, dtype=float) / basis.eigenvalues


def apply_inv_sqrt_neg_laplacian(basis: Basis, f: np.ndarray) -> np.ndarray:
    return np.asarray(f, dtype=float) / np.sqrt(basis.eigenvalues)


def dual_norm_sq(basis: Basis, f: np.ndarray) -> np.ndarray | float:
    """Squared H^{-1} norm: |(-Lap)^{-1/2} f|^2."""
    out = np.sum(np.asarray(f, dtype=float) ** 2 / basis.eigenvalues, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


class AliasingError(ValueError):
    pass


def _dst_matrix(n_modes: int, grid_pts: int) -> np.ndarray:
    """sqrt(2) sin(pi k j / M) for k = 1..n, j = 1..M-1 (modes x nodes)."""
    k = np.arange(1, n_modes + 1)[:, None]
    j = np.arange(1, grid_pts)[None, :]
    return np.sqrt(2.0) * np.sin(np.pi * k * j / grid_pts)


_DST_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _dst(n_modes: int, grid_pts: int) -> np.ndarray:
    key = (n_modes, grid_pts)
    if key not in _DST_CACHE:
        _DST_CACHE[key] = _dst_matrix(n_modes, grid_pts)
    return _DST_CACHE[key]


def to_grid(basis: Basis, f: np.ndarray, grid_pts: int) -> np.ndarray:
    """Nodal values at the interior collocation nodes j/M, j = 1..M-1, per dim.

    Output shape is f.shape[:-1] + (M-1,)*dim.
    """
    if grid_pts < basis.modes_per_dim + 1:
        raise AliasingError("need grid_pts >= modes_per_dim + 1")
    f = np.asarray(f, dtype=float)
    lead = f.shape[:-1]
    n = basis.modes_per_dim
    vals = f.reshape(lead + (n,) * basis.dim)
    T = _dst(n, grid_pts)
    for axis in range(basis.dim):
        vals = np.moveaxis(np.tensordot(vals, T, axes=([len(lead) + axis], [0])),
                           -1, len(lead) + axis)
    return vals


def from_grid(basis: Basis, values: np.ndarray, grid_pts: int) -> np.ndarray:
    """Project nodal values back onto the retained band (inverse of to_grid
    for band-limited fields)."""
    if grid_pts < basis.modes_per_dim + 1:
        raise AliasingError("need grid_pts >= modes_per_dim + 1")
    values = np.asarray(values, dtype=float)
    n = basis.modes_per_dim
    lead = values.shape[: values.ndim - basis.dim]
    T = _dst(n, grid_pts) / grid_pts  # orthogonality: T @ T'^T = I on the band
    out = values
    for axis in range(basis.dim):
        out = np.moveaxis(np.tensordot(out, T, axes=([len(lead) + axis], [1])),
                          -1, len(lead) + axis)
    return out.reshape(lead + (basis.n_modes,))


def integrate_grid(values: np.ndarray, grid_pts: int, dim: int) -> np.ndarray | float:
    """Integral over the unit box of a nodal function vanishing on the
    boundary (trapezoid rule; spectrally accurate for the odd extension)."""
    axes = tuple(range(-dim, 0))
    out = np.sum(values, axis=axes) / grid_pts ** dim
    return float(out) if np.ndim(out) == 0 else out


def eval_nonlinearity_modal(spec: NonlinearitySpec, basis: Basis, f: np.ndarray) -> np.ndarray:
    """Collocation evaluation of g(u) projected on the basis (M = 2N nodes)."""
    if spec.kind == "zero":
        return np.zeros_like(np.asarray(f, dtype=float))
    M = 2 * basis.modes_per_dim
    vals = to_grid(basis, f, M)
    return from_grid(basis, eval_g_value(spec, vals), M)


def integral_of_G(spec: NonlinearitySpec, basis: Basis, f: np.ndarray) -> np.ndarray | float:
    """(G(u), 1) by collocation quadrature on the doubled grid."""
    if spec.kind == "zero":
        out = np.zeros(np.asarray(f).shape[:-1])
        return float(out) if np.ndim(out) == 0 else out
    M = 2 * basis.modes_per_dim
    vals = to_grid(basis, f, M)
    _, _, G_vals = eval_g(spec, vals)
    return integrate_grid(G_vals, M, basis.dim)
