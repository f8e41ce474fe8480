"""Laurent coefficients G_j of the perturbed resolvent at kappa = 0.

Two independent routes:

* ``expand_resolvent``: invert the series M(kappa) (Neumann series or
  kernel reductions) and compose with the free coefficients,
  G_j = G0_j - sum G0_{j1} v C_{j2} v* G0_{j3};
* ``closed_form_G``: explicit formulas in terms of M0^dagger, the
  canonical resonance and P0.

``reconcile`` compares them, ``verify_HG_identities`` checks H G_j relations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .free import free_coeff_series
from .lattice import LatticeKernel, sites, weighted_op_norm
from .potential import FactoredPotential
from .series import TOL_KERNEL, MatrixSeries, jn_invert_detailed, series_invert_regular
from .threshold import DEFAULT_N_LAT, ThresholdKind, ThresholdReport, analyze, compute_M_series

# the last coefficient index certified for a given beta, by kind
_BETA_OFFSET = {ThresholdKind.REGULAR: 2, ThresholdKind.FIRST: 4,
                ThresholdKind.SECOND: 6, ThresholdKind.THIRD: 6}
# weighted-space index of the remainder estimate, relative to beta
_SPACE_OFFSET = {ThresholdKind.REGULAR: 2, ThresholdKind.FIRST: 1,
                 ThresholdKind.SECOND: 2, ThresholdKind.THIRD: 2}


class OrderDowngradeWarning(UserWarning):
    pass


class NoClosedForm(ValueError):
    pass


@dataclass(frozen=True)
class OrderCertificate:
    beta_used: int
    remainder_exponent: int
    s: int


@dataclass
class ExpansionResult:
    kind: ThresholdKind
    coeffs: Dict[int, LatticeKernel]
    j_min: int
    j_max: int
    order_certificate: OrderCertificate
    M_inverse: MatrixSeries
    closed_form_residuals: Dict[int, float] = field(default_factory=dict)
    requested_order: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def n_lat(self) -> int:
        return next(iter(self.coeffs.values())).n_lat

    def __getitem__(self, j: int) -> np.ndarray:
        return self.coeffs[j].values

    def evaluate(self, kappa, upto: Optional[int] = None, window: Optional[int] = None) -> np.ndarray:
        """sum_j kappa**j G_j for j <= upto, on the leading window x window block."""
        k = complex(kappa)
        top = self.j_max if upto is None else upto
        w = window or self.n_lat
        return sum(k**j * self.coeffs[j].values[:w, :w] for j in range(self.j_min, top + 1))


def certified_order(kind: ThresholdKind, beta: int) -> int:
    return beta - _BETA_OFFSET[kind]


def expand_resolvent(p: FactoredPotential, order: int = 1, n_lat: int = DEFAULT_N_LAT,
                     report: Optional[ThresholdReport] = None,
                     tol_kernel: float = TOL_KERNEL) -> ExpansionResult:
    """G_j for j = j_min..order through the second resolvent identity."""
    if report is None:
        report = analyze(p, n_lat, tol_kernel)
    kind = report.kind
    notes: List[str] = []
    cap = certified_order(kind, p.beta)
    K = order
    if K > cap:
        notes.append(f"order {order} exceeds what beta={p.beta} certifies for {kind.value}; using {cap}")
        warnings.warn(notes[-1], OrderDowngradeWarning, stacklevel=2)
        K = cap
    depth = kind.depth
    if K < -depth:
        raise ValueError(f"beta={p.beta} is too small for a {kind.value} expansion")
    J = K + 2 * depth
    cert = OrderCertificate(K + _BETA_OFFSET[kind], K + 1, K + _BETA_OFFSET[kind] - _SPACE_OFFSET[kind])

    n = sites(n_lat)
    G0 = free_coeff_series(K + depth, n, n)
    coeffs: Dict[int, LatticeKernel] = {}
    if p.dim_K == 0:
        C = MatrixSeries([np.zeros((0, 0))], 0, K)
        for j in range(0, K + 1):
            coeffs[j] = LatticeKernel(G0[j].astype(complex), label=f"G{j}")
        return ExpansionResult(kind, coeffs, 0, K, cert, C, requested_order=order, warnings=notes)

    M = compute_M_series(p, J)
    if depth == 0:
        C = series_invert_regular(M, tol_kernel)
    else:
        C, levels = jn_invert_detailed(M, max_depth=2, tol_kernel=tol_kernel)
        if len(levels) - 1 != depth:
            notes.append(f"series inversion used {len(levels) - 1} reductions, classification says {depth}")
    r = p.r_supp
    L = [G0[j][:, :r] @ p.v for j in range(K + depth + 1)]
    for j in range(-depth, K + 1):
        acc = G0[j].astype(complex) if j >= 0 else np.zeros((n_lat, n_lat), dtype=complex)
        for j2 in range(-depth, j + 1):
            Cj = C[j2]
            rest = j - j2
            for j1 in range(rest + 1):
                acc = acc - L[j1] @ Cj @ L[rest - j1].conj().T
        coeffs[j] = LatticeKernel(acc, label=f"G{j}")
    return ExpansionResult(kind, coeffs, -depth, K, cert, C, requested_order=order, warnings=notes)


# -- closed forms --------------------------------------------------------------


CLOSED_FORM_INDICES = {
    ThresholdKind.REGULAR: (0, 1),
    ThresholdKind.FIRST: (-1, 0),
    ThresholdKind.SECOND: (-2, -1, 0, 1),
    ThresholdKind.THIRD: (-2, -1),
}


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.outer(a, b.conj())


def closed_form_G(p: FactoredPotential, report: ThresholdReport, j: int,
                  n_lat: Optional[int] = None) -> LatticeKernel:
    kind = report.kind
    if j not in CLOSED_FORM_INDICES[kind]:
        raise NoClosedForm(f"no closed form for G_{j} at a {kind.value} threshold")
    n_lat = n_lat or report.n_lat
    if report.n_lat != n_lat:
        raise ValueError("report was built on a different window")
    io = report.intermediates
    nn = sites(n_lat).astype(complex)
    G00 = np.minimum.outer(nn.real, nn.real).astype(complex)
    r = p.r_supp
    Gv = G00[:, :r] @ p.v if r else np.zeros((n_lat, 0))
    u = io.v_star_n
    Md = io.M0_dagger
    P0 = report.P0.values
    I = np.eye(n_lat)

    if kind == ThresholdKind.REGULAR:
        if j == 0:
            out = G00 - Gv @ Md @ Gv.conj().T
        else:
            psi = nn - Gv @ (Md @ u) if r else nn
            out = -_outer(psi, psi)
    elif kind == ThresholdKind.FIRST:
        psi = report.Psi_c.values
        if j == -1:
            out = _outer(psi, psi)
        else:
            Lm = Gv - np.outer(psi, u.conj())
            d = psi[:r] - 1.0
            c = float(np.vdot(d, d).real + 2.0 * np.sum(d).real - 0.5)
            out = (G00 - Lm @ Md @ Lm.conj().T - c * _outer(psi, psi)
                   - _outer(psi, nn) - _outer(nn, psi))
    elif kind == ThresholdKind.SECOND:
        if j == -2:
            out = P0.copy()
        elif j == -1:
            out = np.zeros((n_lat, n_lat), dtype=complex)
        elif j == 0:
            out = (I - P0) @ (G00 - Gv @ Md @ Gv.conj().T) @ (I - P0)
        else:
            a = (I - P0) @ (nn - Gv @ (Md @ u))
            b = P0 @ (Gv @ (Md @ u))
            out = -_outer(a, a) + _outer(b, b)
    else:
        if j == -2:
            out = P0.copy()
        else:
            psi = report.Psi_c.values
            out = _outer(psi, psi)
    return LatticeKernel(out, label=f"G{j}~closed")


def reconcile(p: FactoredPotential, report: ThresholdReport, result: ExpansionResult) -> Dict[int, float]:
    """Entrywise distance between pipeline and closed-form kernels."""
    out = {}
    for j in CLOSED_FORM_INDICES[report.kind]:
        if result.j_min <= j <= result.j_max:
            cf = closed_form_G(p, report, j, result.n_lat).values
            out[j] = float(np.abs(result[j] - cf).max())
    result.closed_form_residuals = out
    return out


# -- H G_j identities ----------------------------------------------------------


def _apply_H_rows(p: FactoredPotential, G: np.ndarray) -> np.ndarray:
    """(H G) on rows 1..N-1 (row N would need G[N+1, :])."""
    N = G.shape[0]
    pad = np.vstack([np.zeros((1, N)), G, np.zeros((1, N))])
    HG = 2.0 * G - pad[2:] - pad[:-2]
    r = p.r_supp
    if r:
        HG[:r] += p.V_block() @ G[:r]
    return HG[: N - 1]


@dataclass(frozen=True)
class IdentityResidual:
    j: int
    side: str
    residual: float
    weighted: float
    s: int


def coefficient_space_index(j: int) -> int:
    """Weight that keeps G_j bounded: entries grow like (nm)^{(j+1)/2}."""
    return max(0, j + 1)


def verify_HG_identities(p: FactoredPotential, result: ExpansionResult,
                         P0: Optional[np.ndarray] = None) -> List[IdentityResidual]:
    """Residuals of H G_j = G_j H = 0 (j < 0), = I - P0 (j = 0), = -G_{j-2} (j >= 1).

    ``residual`` is the raw max over interior entries; ``weighted`` divides
    row n and column m by (1 + n^2)^{s/2} (1 + m^2)^{s/2}.
    """
    N = result.n_lat
    if P0 is None:
        P0 = np.zeros((N, N))
    out = []
    for j in range(result.j_min, result.j_max + 1):
        G = result[j]
        if j < 0:
            target = np.zeros((N, N))
        elif j == 0:
            target = np.eye(N) - P0
        else:
            target = -result[j - 2] if j - 2 >= result.j_min else np.zeros((N, N))
        s = coefficient_space_index(j - 2)
        left = _apply_H_rows(p, G) - target[: N - 1]
        right = _apply_H_rows(p, G.conj().T).conj().T - target[:, : N - 1]
        for side, R in (("HG", left), ("GH", right)):
            sq = np.zeros((N, N), dtype=complex)
            sq[: R.shape[0], : R.shape[1]] = R
            out.append(IdentityResidual(j, side, float(np.abs(R).max()), weighted_op_norm(sq, s), s))
    return out
