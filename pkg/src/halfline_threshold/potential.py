"""Finite-rank self-adjoint perturbations V = v U v*.

``v`` is stored compactly as an ``(r_supp, dim_K)`` array whose row k is
site k + 1; rows beyond ``r_supp`` are zero.  Windows of any size are
produced on demand, so a potential is independent of the truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .lattice import TOL_HERM, LatticeKernel, sites

TOL_RANK = 1e-10


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class FactoredPotential:
    v: np.ndarray
    U: np.ndarray
    beta: int = 10
    # exact site values of a multiplication operator, so V is rebuilt without sqrt round-off
    local_values: Optional[Tuple[Tuple[int, float], ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.v, dtype=complex))
        U = np.atleast_2d(np.asarray(self.U, dtype=complex))
        if v.size == 0:
            v = np.zeros((0, 0), dtype=complex)
            U = np.zeros((0, 0), dtype=complex)
        object.__setattr__(self, "v", _trim(v))
        object.__setattr__(self, "U", U)
        if self.beta < 1:
            raise PotentialError("beta must be >= 1")

    @property
    def dim_K(self) -> int:
        return self.v.shape[1]

    @property
    def r_supp(self) -> int:
        """Largest site where some column of v is nonzero (0 for V = 0)."""
        return self.v.shape[0]

    @property
    def support_sites(self) -> np.ndarray:
        return sites(self.r_supp)

    def v_window(self, n_lat: int) -> np.ndarray:
        if n_lat < self.r_supp:
            raise ValueError(f"window {n_lat} shorter than support radius {self.r_supp}")
        out = np.zeros((n_lat, self.dim_K), dtype=complex)
        out[: self.r_supp] = self.v
        return out

    def V_block(self) -> np.ndarray:
        """V on sites 1..r_supp (V vanishes elsewhere)."""
        if self.local_values is not None:
            out = np.zeros((self.r_supp, self.r_supp), dtype=complex)
            for n, val in self.local_values:
                out[n - 1, n - 1] = val
            return out
        return self.v @ self.U @ self.v.conj().T

    def V_matrix(self, n_lat: int) -> LatticeKernel:
        out = np.zeros((n_lat, n_lat), dtype=complex)
        r = self.r_supp
        out[:r, :r] = self.V_block()
        return LatticeKernel(out, label="V")

    def v_star_n(self) -> np.ndarray:
        """v* n, computed exactly over the support."""
        return self.v.conj().T @ self.support_sites.astype(complex)

    def V_n(self) -> np.ndarray:
        """V n on sites 1..r_supp."""
        return self.v @ (self.U @ self.v_star_n())

    def is_local(self, tol: float = TOL_HERM) -> bool:
        B = self.V_block()
        off = B - np.diag(np.diag(B))
        return bool(np.abs(off).max(initial=0.0) <= tol * max(1.0, np.abs(B).max(initial=0.0)))

    def validate(self, tol_herm: float = TOL_HERM, tol_rank: float = TOL_RANK) -> "FactoredPotential":
        k = self.dim_K
        if self.U.shape != (k, k):
            raise PotentialError(f"U has shape {self.U.shape}, expected {(k, k)}")
        if k == 0:
            return self
        herm = np.abs(self.U - self.U.conj().T).max()
        if herm > tol_herm:
            raise PotentialError(f"U is not self-adjoint: max|U - U*| = {herm:.3e}")
        unit = np.abs(self.U @ self.U - np.eye(k)).max()
        if unit > tol_herm:
            raise PotentialError(f"U is not unitary: max|U^2 - I| = {unit:.3e}")
        sv = np.linalg.svd(self.v, compute_uv=False)
        if sv.size < k or sv[-1] <= tol_rank * max(1.0, sv[0]):
            smallest = sv[-1] if sv.size == k else 0.0
            raise PotentialError(f"v is not injective: smallest singular value {smallest:.3e}")
        B = self.V_block()
        vh = np.abs(B - B.conj().T).max()
        if vh > tol_herm * max(1.0, np.abs(B).max()):
            raise PotentialError(f"V is not self-adjoint: max|V - V*| = {vh:.3e}")
        return self


def _trim(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.any(v != 0, axis=1)) if v.size else np.array([], dtype=int)
    if not v.shape[1]:
        return np.zeros((0, 0), dtype=complex)
    # an all-zero v keeps one row so validate() can report it
    r = int(nz[-1]) + 1 if nz.size else 1
    return v[:r]


def empty_potential(beta: int = 10) -> FactoredPotential:
    return FactoredPotential(np.zeros((0, 0)), np.zeros((0, 0)), beta)


def local_potential(values: Iterable[Tuple[int, float]], beta: int = 10) -> FactoredPotential:
    """Multiplication operator with V[n] at the listed sites."""
    values = [(int(n), float(val)) for n, val in values]
    if not values:
        return empty_potential(beta)
    sites_ = [n for n, _ in values]
    if len(set(sites_)) != len(sites_):
        raise PotentialError("sites must be distinct")
    if min(sites_) < 1:
        raise PotentialError("sites are 1-based")
    if any(val == 0.0 for _, val in values):
        raise PotentialError("zero values break injectivity of v; drop them")
    r = max(sites_)
    v = np.zeros((r, len(values)))
    for k, (n, val) in enumerate(values):
        v[n - 1, k] = np.sqrt(abs(val))
    U = np.diag([np.sign(val) for _, val in values])
    return FactoredPotential(v, U, beta, tuple(values)).validate()


def boundary_condition_potential(alpha: float, beta: int = 10) -> FactoredPotential:
    """V_alpha = -alpha |e1><e1|, turning H0 into the Laplacian with x[0] = alpha x[1]."""
    if alpha == 0:
        return empty_potential(beta)
    return FactoredPotential([[np.sqrt(abs(alpha))]], [[-np.sign(alpha)]], beta, ((1, -float(alpha)),)).validate()


def rank_k_potential(v_cols: Sequence, U, beta: int = 10) -> FactoredPotential:
    """General constructor; each column lists values at sites 1, 2, ..."""
    cols = [np.asarray(c, dtype=complex).ravel() for c in v_cols]
    if not cols:
        return empty_potential(beta)
    r = max(c.size for c in cols)
    v = np.zeros((r, len(cols)), dtype=complex)
    for k, c in enumerate(cols):
        v[: c.size, k] = c
    return FactoredPotential(v, np.asarray(U, dtype=complex), beta).validate()


def factor_hermitian(B: np.ndarray, beta: int = 10, tol: float = TOL_RANK) -> FactoredPotential:
    """Spectral factorization of a Hermitian block V on sites 1..r."""
    B = np.asarray(B, dtype=complex)
    if B.size == 0:
        return empty_potential(beta)
    lam, W = np.linalg.eigh(0.5 * (B + B.conj().T))
    keep = np.abs(lam) > tol * max(1.0, np.abs(lam).max())
    if not keep.any():
        return empty_potential(beta)
    v = W[:, keep] * np.sqrt(np.abs(lam[keep]))
    return FactoredPotential(v, np.diag(np.sign(lam[keep])), beta).validate()


def sum_potentials(p1: FactoredPotential, p2: FactoredPotential) -> FactoredPotential:
    """Direct-sum factorization, re-factored spectrally if the joint v is not injective."""
    beta = min(p1.beta, p2.beta)
    if p2.dim_K == 0:
        return FactoredPotential(p1.v, p1.U, beta, p1.local_values)
    if p1.dim_K == 0:
        return FactoredPotential(p2.v, p2.U, beta, p2.local_values)
    r = max(p1.r_supp, p2.r_supp)
    v = np.hstack([p1.v_window(r), p2.v_window(r)])
    k1, k2 = p1.dim_K, p2.dim_K
    U = np.zeros((k1 + k2, k1 + k2), dtype=complex)
    U[:k1, :k1] = p1.U
    U[k1:, k1:] = p2.U
    sv = np.linalg.svd(v, compute_uv=False)
    if sv.size == k1 + k2 and sv[-1] > TOL_RANK * max(1.0, sv[0]):
        return FactoredPotential(v, U, beta).validate()
    return factor_hermitian(v @ U @ v.conj().T, beta)
