"""Threshold classification, eigenspaces and the canonical resonance.

Everything is driven by the finite matrices M_j = v* G_{0,j} v (plus U for
j = 0) on the auxiliary space K.  The classification follows the chain of
reductions M -> m -> q: Q projects onto Ker M_0, T onto the kernel of m_0
inside QK.  Eigenfunctions are produced by the map z from K to sequences,
whose values beyond the support of v are exactly affine.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .free import free_coeff_series, g00_row_formula
from .lattice import LatticeKernel, LatticeVector, inner, make_n_seq, sites
from .potential import FactoredPotential, boundary_condition_potential, local_potential, rank_k_potential
from .series import (
    TOL_KERNEL,
    JNReduction,
    KernelAmbiguityWarning,
    MatrixSeries,
    jn_reduce,
    pseudo_inverse,
    series_scale,
)

DEFAULT_N_LAT = 400
TOL_EIG = 1e-9
CLASSIFY_ORDER = 4


class ThresholdKind(str, enum.Enum):
    REGULAR = "Regular"
    FIRST = "FirstKind"
    SECOND = "SecondKind"
    THIRD = "ThirdKind"

    @classmethod
    def parse(cls, name: str) -> "ThresholdKind":
        key = name.strip().lower().replace("_", "").replace("-", "")
        for k in cls:
            if key in (k.value.lower(), k.name.lower(), k.value.lower().replace("kind", "")):
                return k
        raise ValueError(f"unknown threshold kind {name!r}")

    @property
    def depth(self) -> int:
        """Number of kernel reductions needed to invert M(kappa)."""
        return {"Regular": 0, "FirstKind": 1, "SecondKind": 2, "ThirdKind": 2}[self.value]

    @property
    def j_min(self) -> int:
        return -self.depth


class NoResonance(ValueError):
    pass


@dataclass(frozen=True)
class IntermediateOperators:
    """M_j on K, and the reduced m_j, q_j embedded back into K."""

    M_coeffs: List[np.ndarray]
    Q: np.ndarray
    Q_basis: np.ndarray
    M0_dagger: np.ndarray
    m_coeffs: List[np.ndarray]
    T: np.ndarray
    T_basis: np.ndarray
    q_coeffs: List[np.ndarray]
    v_star_n: np.ndarray


@dataclass(frozen=True)
class ThresholdReport:
    kind: ThresholdKind
    dim_E_tilde_mod_E: int
    dim_E_mod_Esf: int
    dim_Esf: int
    intermediates: IntermediateOperators
    E_tilde_basis: List[LatticeVector] = field(default_factory=list)
    E_basis: List[LatticeVector] = field(default_factory=list)
    Esf_basis: List[LatticeVector] = field(default_factory=list)
    Psi_c: Optional[LatticeVector] = None
    P0: Optional[LatticeKernel] = None
    n_lat: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.warnings)


def compute_M_series(p: FactoredPotential, J: int) -> MatrixSeries:
    """M(kappa) = U + v* R0(kappa) v up to kappa**J.

    Pairings run over the support of v only, so each M_j is exact.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    k = p.dim_K
    if k == 0:
        return MatrixSeries([np.zeros((0, 0))] * (J + 1), 0, J)
    s = p.support_sites
    G = free_coeff_series(J, s, s)
    vh = p.v.conj().T
    coeffs = [vh @ G[j] @ p.v for j in range(J + 1)]
    coeffs[0] = coeffs[0] + p.U
    return MatrixSeries(coeffs, 0, J)


def _kernel_tol(A: np.ndarray, tol_kernel: float, scale: float, notes: List[str], what: str) -> float:
    """tol_kernel, enlarged when the spectrum near zero is ambiguous so the
    borderline eigenvalue joins the kernel (the more singular reading)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelAmbiguityWarning)
        res = pseudo_inverse(A, tol_kernel, scale)
    if not res.ambiguous:
        return tol_kernel
    lam = np.sort(np.abs(np.linalg.eigvalsh(0.5 * (A + A.conj().T))))
    top = max(lam.max(), scale)
    kept = lam[lam > tol_kernel * top]
    notes.append(f"{what}: rank_gap={res.rank_gap:.3g}; resolved toward the more singular class")
    warnings.warn(notes[-1], KernelAmbiguityWarning, stacklevel=3)
    return float(kept.min() / top) * (1 + 1e-9)


def _intermediates(p: FactoredPotential, tol_kernel: float, notes: List[str]):
    M = compute_M_series(p, CLASSIFY_ORDER)
    k = p.dim_K
    u = p.v_star_n()
    empty = np.zeros((k, 0), dtype=complex)
    zero = np.zeros((k, k), dtype=complex)
    diag = {}
    if k == 0:
        io = IntermediateOperators(M.coeffs, zero, empty, zero, [], zero, empty, [], u)
        return io, 0, 0, diag
    tol1 = _kernel_tol(M[0], tol_kernel, series_scale(M), notes, "M0")
    pinv = pseudo_inverse(M[0], tol1, series_scale(M))
    diag["rank_gap_M0"] = pinv.rank_gap
    if pinv.kernel_dim == 0:
        io = IntermediateOperators(M.coeffs, zero, empty, pinv.dagger, [], zero, empty, [], u)
        return io, 0, 0, diag
    red1: JNReduction = jn_reduce(M, tol1)
    E = red1.basis
    m = red1.a
    diag["two_form_residual_m"] = red1.two_form_residual
    m_emb = [E @ m[j] @ E.conj().T for j in m.indices()]
    tol2 = _kernel_tol(m[0], tol_kernel, series_scale(m), notes, "m0")
    pm = pseudo_inverse(m[0], tol2, series_scale(m))
    diag["rank_gap_m0"] = pm.rank_gap
    q_dim = E.shape[1]
    t_dim = pm.kernel_dim
    if t_dim == 0:
        io = IntermediateOperators(M.coeffs, red1.Q, E, red1.A0_dagger, m_emb, zero, empty, [], u)
        return io, q_dim, 0, diag
    red2 = jn_reduce(m, tol2)
    ET = E @ red2.basis
    qs = red2.a
    diag["two_form_residual_q"] = red2.two_form_residual
    q_emb = [ET @ qs[j] @ ET.conj().T for j in qs.indices()]
    pq = pseudo_inverse(qs[0], tol_kernel, series_scale(qs))
    diag["rank_gap_q0"] = pq.rank_gap
    if pq.kernel_dim:
        notes.append(f"q0 is singular on TK (kernel dim {pq.kernel_dim})")
    io = IntermediateOperators(M.coeffs, red1.Q, E, red1.A0_dagger, m_emb, ET @ ET.conj().T, ET, q_emb, u)
    return io, q_dim, t_dim, diag


def classify(p: FactoredPotential, tol_kernel: float = TOL_KERNEL) -> ThresholdReport:
    """Decide the threshold type from the invertibility of M_0 and m_0."""
    notes: List[str] = []
    io, q_dim, t_dim, diag = _intermediates(p, tol_kernel, notes)
    u = io.v_star_n
    Qu = io.Q @ u if q_dim else np.zeros_like(u)
    diag["norm_v_star_n"] = float(np.linalg.norm(u))
    diag["norm_Q_v_star_n"] = float(np.linalg.norm(Qu))
    if q_dim == 0:
        kind, dims = ThresholdKind.REGULAR, (1, 0, 0)
    elif t_dim == 0:
        kind, dims = ThresholdKind.FIRST, (0, 1, 0)
    elif t_dim == q_dim:
        kind, dims = ThresholdKind.SECOND, (1, 0, t_dim)
    else:
        kind, dims = ThresholdKind.THIRD, (0, 1, t_dim)
    # m_0 = -|Qv*n><Qv*n| has rank <= 1, so only these patterns are possible
    if q_dim and t_dim not in (q_dim, q_dim - 1):
        notes.append(f"m0 has rank {q_dim - t_dim} > 1; the rank-one structure is violated")
    return ThresholdReport(kind, *dims, intermediates=io, diagnostics=diag, warnings=notes)


# -- eigenspaces ---------------------------------------------------------------


def z_map(p: FactoredPotential, Phi: np.ndarray, n_lat: int) -> LatticeVector:
    """z Phi = |v*n|^{dagger 2} <M0 v*n, Phi> n - G00 v Phi, with its affine tail."""
    Phi = np.asarray(Phi, dtype=complex)
    u = p.v_star_n()
    M0 = compute_M_series(p, 0)[0]
    nu2 = float(np.vdot(u, u).real)
    inv2 = 1.0 / nu2 if nu2 > TOL_KERNEL * max(1.0, np.abs(p.v).max(initial=0.0) ** 2) else 0.0
    c_n = inv2 * np.vdot(u, M0 @ Phi)
    g = g00_row_formula(p.v_window(n_lat) @ Phi)
    vals = c_n * sites(n_lat) - g.values
    c_1 = -np.vdot(u, Phi)
    return LatticeVector(vals, tail=(complex(c_n), complex(c_1)), tail_start=max(p.r_supp, 1))


def w_map(p: FactoredPotential, x: LatticeVector) -> np.ndarray:
    """w = U v*, exact because v is finitely supported."""
    r = p.r_supp
    return p.U @ (p.v.conj().T @ np.asarray(x)[:r])


def apply_H(p: FactoredPotential, x: LatticeVector) -> np.ndarray:
    """(H0 + V) x on sites 1..N; x[N+1] comes from the tail when one is stored."""
    vals = np.asarray(x, dtype=complex)
    N = vals.size
    nxt = x[N + 1] if x.tail is not None and N + 1 >= (x.tail_start or 1) else 0.0
    padded = np.concatenate([[0.0], vals, [nxt]])
    out = 2.0 * vals - padded[2:] - padded[:-2]
    r = p.r_supp
    if r:
        out[:r] += p.V_block() @ vals[:r]
    return out


def _orthonormal(vectors: List[LatticeVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0), dtype=complex)
    X = np.column_stack([np.asarray(x) for x in vectors])
    Qm, R = np.linalg.qr(X)
    return Qm


def eigenspace_bases(p: FactoredPotential, report: Optional[ThresholdReport] = None,
                     n_lat: int = DEFAULT_N_LAT, tol_kernel: float = TOL_KERNEL) -> ThresholdReport:
    """Fill in bases of E~ (generalized), E (resonances + eigenfunctions), Esf
    (eigenfunctions), the projection P0 onto Esf and the canonical resonance."""
    if report is None:
        report = classify(p, tol_kernel)
    if n_lat < p.r_supp + 2:
        raise ValueError("window must extend at least two sites past the support")
    io = report.intermediates
    u = io.v_star_n
    k = p.dim_K
    M0 = io.M_coeffs[0] if k else np.zeros((0, 0))
    Qu = io.Q @ u if k else u
    u_zero = np.linalg.norm(u) <= TOL_KERNEL * max(1.0, np.abs(p.v).max(initial=0.0))
    Qu_zero = np.linalg.norm(Qu) ** 2 <= TOL_KERNEL * max(1.0, np.linalg.norm(u) ** 2)

    # Ker S M0 = Ker M0 (+) span{M0^dagger v*n} when Q v*n = 0 and v*n != 0
    ker_SM0 = [io.Q_basis[:, i] for i in range(io.Q_basis.shape[1])]
    if not u_zero and Qu_zero:
        ker_SM0.append(io.M0_dagger @ u)
    E_tilde = [z_map(p, Phi, n_lat) for Phi in ker_SM0]
    if u_zero:
        E_tilde.append(make_n_seq(n_lat))
    E = [z_map(p, io.Q_basis[:, i], n_lat) for i in range(io.Q_basis.shape[1])]
    Esf = [z_map(p, io.T_basis[:, i], n_lat) for i in range(io.T_basis.shape[1])]
    if report.kind == ThresholdKind.SECOND:
        Esf = list(E)

    B = _orthonormal(Esf)
    P0 = LatticeKernel(B @ B.conj().T if B.size else np.zeros((n_lat, n_lat), dtype=complex), label="P0")

    diag = dict(report.diagnostics)
    diag["eig_residual"] = max((float(np.abs(apply_H(p, x)).max()) for x in E_tilde + E), default=0.0)
    if k:
        diag["wz_residual"] = max(
            (float(np.abs(w_map(p, z_map(p, Phi, n_lat)) - Phi).max()) for Phi in ker_SM0), default=0.0
        )
    notes = list(report.warnings)
    if diag["eig_residual"] > TOL_EIG:
        notes.append(f"eigen-residual {diag['eig_residual']:.3e} above {TOL_EIG}")

    out = replace(report, E_tilde_basis=E_tilde, E_basis=E, Esf_basis=Esf, P0=P0, n_lat=n_lat,
                  diagnostics=diag, warnings=notes)
    if report.kind in (ThresholdKind.FIRST, ThresholdKind.THIRD):
        psi = canonical_resonance(p, out, n_lat)
        diag["psi_c_normalization"] = complex(inner(_Vn_window(p, n_lat), psi))
        diag["psi_c_orthogonality"] = max((abs(inner(x, psi)) for x in Esf), default=0.0)
        out = replace(out, Psi_c=psi)
    return out


def _Vn_window(p: FactoredPotential, n_lat: int) -> np.ndarray:
    out = np.zeros(n_lat, dtype=complex)
    out[: p.r_supp] = p.V_n()
    return out


def analyze(p: FactoredPotential, n_lat: int = DEFAULT_N_LAT, tol_kernel: float = TOL_KERNEL) -> ThresholdReport:
    return eigenspace_bases(p, classify(p, tol_kernel), n_lat, tol_kernel)


def canonical_resonance(p: FactoredPotential, report: Optional[ThresholdReport] = None,
                        n_lat: int = DEFAULT_N_LAT) -> LatticeVector:
    """The resonance normalized by <Vn, Psi_c> = -1 and orthogonal to Esf."""
    if report is None:
        report = classify(p)
    if report.kind not in (ThresholdKind.FIRST, ThresholdKind.THIRD):
        raise NoResonance(f"no resonance exists at a threshold of type {report.kind.value}")
    io = report.intermediates
    Qu = io.Q @ io.v_star_n
    nq2 = float(np.vdot(Qu, Qu).real)
    if report.kind == ThresholdKind.FIRST:
        Phi = Qu / nq2  # Psi_c = -G00 v Phi_c with Phi_c = -Qu / |Qu|^2
    else:
        q0_dag = pseudo_inverse(io.q_coeffs[0]).dagger
        Phi = (Qu - q0_dag @ (io.M_coeffs[2] @ Qu)) / nq2
    g = g00_row_formula(p.v_window(n_lat) @ Phi)
    return LatticeVector(g.values, tail=(0.0, complex(np.vdot(io.v_star_n, Phi))),
                         tail_start=max(p.r_supp, 1))


# -- fixtures ----------------------------------------------------------------


def _second_kind_column(k: int, l: int) -> np.ndarray:
    """x e_k + y e_l with <v, n> = 0 and <v, G00 v> = 1."""
    x = 1.0 / np.sqrt(k * (1.0 - k / l))
    col = np.zeros(l)
    col[k - 1] = x
    col[l - 1] = -k * x / l
    return col


def _site_pair(seed: int):
    if seed == 0:
        return 1, 2
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    l = k + int(rng.integers(1, 5))
    return k, l


def generate_fixture(kind, seed: int = 0, beta: int = 10) -> FactoredPotential:
    """A potential whose threshold is of the requested type, confirmed by classify."""
    kind = ThresholdKind.parse(kind) if isinstance(kind, str) else ThresholdKind(kind)
    rng = np.random.default_rng(seed)
    if kind == ThresholdKind.REGULAR:
        if seed == 0:
            p = boundary_condition_potential(0.5, beta)
        elif seed % 2:
            alpha = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 3.0))
            alpha = alpha if abs(alpha - 1.0) > 0.1 else alpha + 0.5
            p = boundary_condition_potential(alpha, beta)
        else:
            n_sites = int(rng.integers(1, 5))
            idx = rng.choice(np.arange(1, 9), size=n_sites, replace=False)
            p = local_potential([(int(i), float(rng.uniform(0.2, 3.0))) for i in idx], beta)
    elif kind == ThresholdKind.FIRST:
        if seed == 0:
            p = boundary_condition_potential(1.0, beta)
        else:
            site = 1 + seed % 6
            p = local_potential([(site, -1.0 / site)], beta)
    elif kind == ThresholdKind.SECOND:
        k, l = _site_pair(seed)
        p = rank_k_potential([_second_kind_column(k, l)], [[-1.0]], beta)
    else:
        k, l = _site_pair(seed)
        j = l + int(rng.integers(0, 3)) if seed else l
        col2 = np.zeros(j)
        col2[j - 1] = 1.0 / np.sqrt(j)
        p = rank_k_potential([_second_kind_column(k, l), col2], -np.eye(2), beta)
    got = classify(p).kind
    if got != kind:
        raise RuntimeError(f"fixture for {kind.value} (seed {seed}) classified as {got.value}")
    return p
