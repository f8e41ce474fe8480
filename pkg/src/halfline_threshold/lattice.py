"""Sequences and kernels on a finite window 1..N of the half-line.

Sites are 1-based everywhere in the public API: ``x[1]`` is the first site
and ``x[0]`` (the Dirichlet boundary value) is never stored.  The backing
numpy arrays are 0-based, so ``x.values[k]`` is site ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

TOL_HERM = 1e-12


def sites(n_lat: int) -> np.ndarray:
    """Site labels 1..n_lat as an integer array."""
    return np.arange(1, n_lat + 1)


def weights(n_lat: int, s: float) -> np.ndarray:
    """(1 + n^2)^(-s/2) for n = 1..n_lat."""
    n = sites(n_lat).astype(float)
    return (1.0 + n * n) ** (-0.5 * s)


@dataclass(frozen=True)
class LatticeVector:
    """A sequence x[1..N] on the window.

    ``tail`` optionally records an exact affine continuation: for every
    site n >= ``tail_start`` (including sites beyond the window)
    x[n] = tail[0] * n + tail[1].
    """

    values: np.ndarray
    tail: Optional[Tuple[complex, complex]] = None
    tail_start: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("LatticeVector needs a non-empty 1-d array")

    @property
    def n_lat(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, n: int) -> complex:
        if not 1 <= n <= self.n_lat:
            if self.tail is not None and n >= (self.tail_start or 1):
                return self.tail[0] * n + self.tail[1]
            raise IndexError(f"site {n} outside window 1..{self.n_lat}")
        return self.values[n - 1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def norm_1s(self, s: float) -> float:
        return norm_1s(self.values, s)

    def norm_inf_neg_s(self, s: float) -> float:
        return norm_inf_neg_s(self.values, s)


@dataclass(frozen=True)
class LatticeKernel:
    """An operator kernel K[n, m] with n, m in 1..N."""

    values: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"kernel must be square, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def n_lat(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, nm: Tuple[int, int]):
        n, m = nm
        if not (1 <= n <= self.n_lat and 1 <= m <= self.n_lat):
            raise IndexError(f"({n}, {m}) outside window 1..{self.n_lat}")
        return self.values[n - 1, m - 1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def apply(self, x) -> LatticeVector:
        return LatticeVector(self.values @ np.asarray(x, dtype=complex))

    def is_hermitian(self, tol: float = TOL_HERM) -> bool:
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        return bool(np.abs(self.values - self.values.conj().T).max(initial=0.0) <= tol * scale)


def make_n_seq(n_lat: int) -> LatticeVector:
    """The generalized eigenfunction n[m] = m of the Dirichlet Laplacian."""
    if n_lat < 1:
        raise ValueError("n_lat must be >= 1")
    return LatticeVector(sites(n_lat).astype(complex), tail=(1.0, 0.0), tail_start=1)


def make_one_seq(n_lat: int) -> LatticeVector:
    """The constant sequence 1[m] = 1."""
    if n_lat < 1:
        raise ValueError("n_lat must be >= 1")
    return LatticeVector(np.ones(n_lat, dtype=complex), tail=(0.0, 1.0), tail_start=1)


def unit_vector(n: int, n_lat: int) -> LatticeVector:
    e = np.zeros(n_lat, dtype=complex)
    e[n - 1] = 1.0
    return LatticeVector(e)


def norm_1s(x, s: float) -> float:
    x = np.asarray(x)
    return float(np.sum(np.abs(x) / weights(x.size, s)))


def norm_inf_neg_s(x, s: float) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x) * weights(x.size, s), initial=0.0))


def weighted_op_norm(K, s: float) -> float:
    """Norm of K as a map from l^{1,s} to l^{inf,-s} on the window.

    The unit ball of l^{1,s} is the convex hull of the weighted unit vectors,
    so the norm is the weighted max-entry of the kernel.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    K = np.asarray(K)
    w = weights(K.shape[0], s)
    return float(np.max(np.abs(K) * w[:, None] * w[None, :], initial=0.0))


def h0_matrix(n_lat: int) -> np.ndarray:
    """Dirichlet Laplacian truncated to the window (x[n_lat + 1] = 0)."""
    H = 2.0 * np.eye(n_lat)
    idx = np.arange(n_lat - 1)
    H[idx, idx + 1] = -1.0
    H[idx + 1, idx] = -1.0
    return H


def apply_H0(x) -> LatticeVector:
    """Second-difference stencil with x[0] = 0 and x[n_lat + 1] = 0."""
    x = np.asarray(x, dtype=complex)
    padded = np.concatenate([[0.0], x, [0.0]])
    return LatticeVector(2.0 * x - padded[2:] - padded[:-2])


def inner(x, y) -> complex:
    """<x, y>, conjugate-linear in the first slot."""
    return complex(np.vdot(np.asarray(x), np.asarray(y)))
