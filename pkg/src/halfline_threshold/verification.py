"""Brute-force oracles and convergence-order fits.

``dense_resolvent`` solves (H + kappa^2) X = I on a long truncation.  By
default the last site carries the exact outgoing boundary condition
x[N+1] = zeta x[N] with zeta = exp(-2 asinh(kappa/2)), which makes the
truncation exact for potentials supported inside the window; a pure
Dirichlet cut-off is available for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .expansion import ExpansionResult
from .free import validate_kappa
from .lattice import LatticeKernel, LatticeVector, sites, weighted_op_norm
from .potential import FactoredPotential
from .threshold import compute_M_series

R2_MIN = 0.98


class OracleRetryWarning(UserWarning):
    pass


def outgoing_ratio(kappa) -> complex:
    """zeta with zeta + 1/zeta = 2 + kappa^2 and |zeta| < 1."""
    k = validate_kappa(kappa)
    return complex(np.exp(-2.0 * np.arcsinh(k / 2.0)))


def _banded_system(p: FactoredPotential, kappa: complex, N: int, boundary: str):
    r = p.r_supp
    bw = max(1, r - 1)
    ab = np.zeros((2 * bw + 1, N), dtype=complex)
    ab[bw] = 2.0 + kappa * kappa
    ab[bw - 1, 1:] = -1.0
    ab[bw + 1, :-1] = -1.0
    if boundary == "transparent":
        ab[bw, N - 1] -= outgoing_ratio(kappa)
    elif boundary != "dirichlet":
        raise ValueError("boundary must be 'transparent' or 'dirichlet'")
    if r:
        B = p.V_block()
        for i in range(r):
            for j in range(r):
                ab[bw + i - j, j] += B[i, j]
    return ab, bw


def dense_resolvent(p: FactoredPotential, kappa, N_oracle: int, n_lat: Optional[int] = None,
                    boundary: str = "transparent") -> LatticeKernel:
    """R(kappa) = (H + kappa^2)^{-1} restricted to the leading n_lat x n_lat block."""
    k = validate_kappa(kappa)
    n_lat = n_lat or N_oracle
    if N_oracle < max(4 * p.r_supp, n_lat, 2):
        raise ValueError("N_oracle must be >= max(4 r_supp, n_lat)")
    rhs = np.eye(N_oracle, n_lat, dtype=complex)
    for attempt in range(3):
        ab, bw = _banded_system(p, k, N_oracle, boundary)
        try:
            X = scipy.linalg.solve_banded((bw, bw), ab, rhs, check_finite=False)
            break
        except np.linalg.LinAlgError:
            k = k * (1 + 1e-7)
            warnings.warn(f"singular oracle system; retrying at kappa={k}", OracleRetryWarning)
    else:
        raise np.linalg.LinAlgError("oracle system stayed singular after perturbing kappa")
    return LatticeKernel(X[:n_lat], label=f"R({k})")


def M_inverse_from_resolvent(p: FactoredPotential, R: np.ndarray) -> np.ndarray:
    """U - U v* R v U, which equals M(kappa)^{-1}."""
    r = p.r_supp
    v = p.v
    return p.U - p.U @ v.conj().T @ R[:r, :r] @ v @ p.U


def M_direct(p: FactoredPotential, kappa) -> np.ndarray:
    """M(kappa) = U + v* R0(kappa) v evaluated from the free kernel."""
    from .free import free_resolvent_block

    s = p.support_sites
    return p.U + p.v.conj().T @ free_resolvent_block(kappa, s, s) @ p.v


def second_resolvent_residual(p: FactoredPotential, kappa, n_lat: int) -> float:
    """max |R - (R0 - R0 v M^{-1} v* R0)| on the window, relative to max(1, max|R|)."""
    from .free import free_resolvent_block

    n = sites(n_lat)
    R = dense_resolvent(p, kappa, 4 * n_lat, n_lat).values
    R0 = free_resolvent_block(kappa, n, n)
    scale = max(1.0, float(np.abs(R).max()))
    if p.dim_K == 0:
        return float(np.abs(R - R0).max()) / scale
    r = p.r_supp
    L = R0[:, :r] @ p.v
    # v* R0 = (R0 v)^T since R0 is complex symmetric
    right = (R0[:, :r] @ p.v.conj()).T
    Rhs = R0 - L @ np.linalg.solve(M_direct(p, kappa), right)
    return float(np.abs(R - Rhs).max()) / scale


def null_space_search(p: FactoredPotential, N_oracle: int, tol: float = 1e-10) -> List[LatticeVector]:
    """Orthonormal basis of decaying solutions of H psi = 0.

    Beyond the support of V a solution is exactly affine, so it decays only
    if it vanishes at two consecutive sites past the support.  The search
    solves the stencil on sites 1..r+1 with psi[r+1] = psi[r+2] = 0.
    """
    r = p.r_supp
    R = r + 2
    if N_oracle < R:
        raise ValueError("N_oracle must exceed the support radius by 2")
    H = 2.0 * np.eye(R, dtype=complex) - np.eye(R, k=1) - np.eye(R, k=-1)
    if r:
        H[:r, :r] += p.V_block()
    A = np.zeros((R + 1, R), dtype=complex)
    A[: R - 1] = H[: R - 1]
    A[R - 1, R - 2] = 1.0
    A[R, R - 1] = 1.0
    _, sv, Vh = np.linalg.svd(A)
    scale = max(1.0, sv[0])
    null = Vh.conj().T[:, sv <= tol * scale] if sv.size == R else Vh.conj().T[:, sv.size:]
    out = []
    for col in null.T:
        x = np.zeros(N_oracle, dtype=complex)
        x[:R] = col
        out.append(LatticeVector(x, tail=(0.0, 0.0), tail_start=R))
    return out


def principal_angles(A: Sequence, B: Sequence) -> np.ndarray:
    """Principal angles between spans of two lists of vectors (radians)."""
    if len(A) == 0 or len(B) == 0:
        return np.zeros(0) if len(A) == len(B) else np.array([np.pi / 2])
    n = min(min(np.asarray(a).size for a in A), min(np.asarray(b).size for b in B))
    X = np.column_stack([np.asarray(a)[:n] for a in A])
    Y = np.column_stack([np.asarray(b)[:n] for b in B])
    ang = scipy.linalg.subspace_angles(X, Y)
    if X.shape[1] != Y.shape[1]:
        ang = np.append(ang, np.pi / 2)
    return ang


@dataclass(frozen=True)
class SlopeFit:
    kappa_grid: List[float]
    errors: List[float]
    slope: float
    intercept: float
    r_squared: float

    def passes(self, lo: float, hi: float = np.inf) -> bool:
        return self.r_squared >= R2_MIN and lo <= self.slope <= hi


def fit_error_order(errors: Sequence[float], kappa_grid: Sequence[float]) -> SlopeFit:
    kap = np.asarray(kappa_grid, dtype=float)
    err = np.asarray(errors, dtype=float)
    if kap.size != err.size:
        raise ValueError("errors and kappa_grid differ in length")
    if kap.size < 5:
        raise ValueError("need at least 5 grid points")
    if np.any(kap <= 0) or np.any(err <= 0):
        raise ValueError("kappa and errors must be positive")
    if np.log10(kap.max() / kap.min()) < 1.5 - 1e-12:
        raise ValueError("grid must span at least 1.5 decades")
    fit = stats.linregress(np.log(kap), np.log(err))
    return SlopeFit(kap.tolist(), err.tolist(), float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def kappa_grid(kmin: float = 1e-3, kmax: float = 10**-1.5, points: int = 8) -> np.ndarray:
    """Decreasing geometric grid."""
    return np.geomspace(kmax, kmin, points)


def error_curve(exact: Callable[[float], np.ndarray], approx: Callable[[float], np.ndarray],
                kappas: Sequence[float], s: float) -> List[float]:
    return [weighted_op_norm(exact(k) - approx(k), s) for k in kappas]


def free_remainder_fit(N: int, window: int = 20, kappas: Optional[Sequence[float]] = None,
                       s: Optional[float] = None) -> SlopeFit:
    """Order of R0(kappa) - sum_{j<=N} kappa^j G0_j on a fixed window."""
    from .free import free_coeff, free_resolvent_kernel

    kappas = kappa_grid(1e-3, 1e-1) if kappas is None else kappas
    s = N + 2 if s is None else s
    G = [free_coeff(j, window).values for j in range(N + 1)]
    errs = error_curve(lambda k: free_resolvent_kernel(k, window).values,
                       lambda k: sum(k**j * G[j] for j in range(N + 1)), kappas, s)
    return fit_error_order(errs, kappas)


def default_oracle_grid(depth: int) -> np.ndarray:
    """kappa window for remainder fits.  When R ~ kappa^-2 the double-precision
    solve loses about kappa^-4 * eps, so the window moves up a half decade."""
    return kappa_grid(1e-3, 10**-1.5) if depth < 2 else kappa_grid(10**-2.5, 1e-1)


def expansion_remainder_fit(p: FactoredPotential, result: ExpansionResult, upto: int,
                            window: int = 10, kappas: Optional[Sequence[float]] = None,
                            s: float = 2.0, N_oracle: int = 1600) -> SlopeFit:
    """Order of R(kappa) - sum_{j<=upto} kappa^j G_j against the dense oracle."""
    kappas = default_oracle_grid(-result.j_min) if kappas is None else kappas
    errs = error_curve(lambda k: dense_resolvent(p, k, N_oracle, window).values,
                       lambda k: result.evaluate(k, upto, window), kappas, s)
    return fit_error_order(errs, kappas)


def oracle_self_consistency(p: FactoredPotential, kappa, n_lat: int, boundary: str = "transparent") -> float:
    """Relative change of the window block when the truncation grows from 4N to 6N."""
    a = dense_resolvent(p, kappa, 4 * n_lat, n_lat, boundary).values
    b = dense_resolvent(p, kappa, 6 * n_lat, n_lat, boundary).values
    return float(np.abs(a - b).max()) / max(1.0, float(np.abs(a).max()))


def M_inverse_residual(p: FactoredPotential, kappa, n_oracle: int = 400) -> float:
    """|M(kappa)^{-1} - (U - U v* R v U)| from independent evaluations,
    relative to max(1, max|M^{-1}|)."""
    R = dense_resolvent(p, kappa, n_oracle, max(p.r_supp, 1)).values
    Minv = np.linalg.inv(M_direct(p, kappa))
    return float(np.abs(Minv - M_inverse_from_resolvent(p, R)).max()) / max(1.0, float(np.abs(Minv).max()))


def M_series_residual(p: FactoredPotential, J: int, kappa) -> float:
    M = compute_M_series(p, J)
    return float(np.abs(M_direct(p, kappa) - M.evaluate(kappa)).max())
