"""Truncated matrix-valued Laurent series in kappa and their inversion.

A :class:`MatrixSeries` stores coefficients A_j for j = j_min..j_min+len-1
together with a validity ``order``: terms up to kappa**order are exact and
anything beyond is O(kappa**(order+1)).  Coefficients between the stored ones
and ``order`` are zero.  Inversion with a singular leading coefficient reduces the series onto
the kernel of that coefficient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

TOL_KERNEL = 1e-8
RANK_GAP_WARN = 10.0
TWO_FORM_TOL = 1e-9


class KernelAmbiguityWarning(UserWarning):
    """The spectrum near zero is not clearly separated (rank_gap < 10)."""


class SingularLeadingCoefficient(ArithmeticError):
    """The leading coefficient is not invertible; use jn_invert."""


class DepthExhausted(ArithmeticError):
    pass


class TwoFormMismatch(ArithmeticError):
    pass


@dataclass(frozen=True)
class PseudoInverseResult:
    dagger: np.ndarray
    kernel_projection: np.ndarray
    kernel_basis: np.ndarray
    rank_gap: float

    @property
    def ambiguous(self) -> bool:
        return self.rank_gap < RANK_GAP_WARN

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]


def pseudo_inverse(A, tol_kernel: float = TOL_KERNEL, scale: float = 0.0) -> PseudoInverseResult:
    """Pseudo-inverse of a self-adjoint matrix by spectral calculus.

    Eigenvalues with |lam| <= tol_kernel * max(max|lam|, scale) count as zero.
    ``scale`` lets callers judge a small matrix against a larger context,
    e.g. a leading coefficient against the rest of its series.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    d = A.shape[0]
    if d == 0:
        z = np.zeros((0, 0), dtype=complex)
        return PseudoInverseResult(z, z, np.zeros((0, 0), dtype=complex), np.inf)
    lam, W = np.linalg.eigh(0.5 * (A + A.conj().T))
    mags = np.abs(lam)
    top = max(mags.max(), scale)
    zero = mags <= tol_kernel * top if top > 0 else np.ones(d, dtype=bool)
    inv = np.zeros(d)
    inv[~zero] = 1.0 / lam[~zero]
    dagger = (W * inv) @ W.conj().T
    K = W[:, zero]
    Q = K @ K.conj().T
    if zero.any() and (~zero).any() and mags[zero].max() > 0:
        gap = mags[~zero].min() / mags[zero].max()
    else:
        gap = np.inf
    if gap < RANK_GAP_WARN:
        warnings.warn(f"kernel ambiguity: rank_gap={gap:.3g}", KernelAmbiguityWarning, stacklevel=2)
    return PseudoInverseResult(dagger, Q, K, float(gap))


@dataclass(frozen=True)
class MatrixSeries:
    coeffs: List[np.ndarray]
    j_min: int = 0
    order: Optional[int] = None
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in self.coeffs]
        if not cs:
            raise ValueError("MatrixSeries needs at least one coefficient")
        d = cs[0].shape
        if any(c.shape != d for c in cs) or d[0] != d[1]:
            raise ValueError("coefficients must be square and share one dimension")
        object.__setattr__(self, "coeffs", cs)
        last = self.j_min + len(cs) - 1
        if self.order is None:
            object.__setattr__(self, "order", last)
        elif self.order < last:
            object.__setattr__(self, "coeffs", cs[: self.order - self.j_min + 1])
            if self.order < self.j_min:
                raise ValueError("order below j_min")

    @property
    def dim(self) -> int:
        return self.coeffs[0].shape[0]

    def __getitem__(self, j: int) -> np.ndarray:
        if j > self.order:
            raise IndexError(f"coefficient {j} beyond validity order {self.order}")
        k = j - self.j_min
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return np.zeros((self.dim, self.dim), dtype=complex)

    def indices(self) -> range:
        return range(self.j_min, self.order + 1)

    @classmethod
    def identity(cls, d: int, order: int) -> "MatrixSeries":
        return cls([np.eye(d)], 0, order)

    @classmethod
    def constant(cls, A, order: int) -> "MatrixSeries":
        return cls([A], 0, order)

    def truncate(self, order: int) -> "MatrixSeries":
        return MatrixSeries(self.coeffs, self.j_min, min(order, self.order))

    def shift(self, p: int) -> "MatrixSeries":
        """Multiply by kappa**p."""
        return MatrixSeries(self.coeffs, self.j_min + p, self.order + p)

    def __add__(self, other: "MatrixSeries") -> "MatrixSeries":
        lo = min(self.j_min, other.j_min)
        order = min(self.order, other.order)
        if order < lo:
            raise ValueError("sum has no valid coefficients")
        return MatrixSeries([self[j] + other[j] for j in range(lo, order + 1)], lo, order)

    def __neg__(self) -> "MatrixSeries":
        return MatrixSeries([-c for c in self.coeffs], self.j_min, self.order)

    def __sub__(self, other: "MatrixSeries") -> "MatrixSeries":
        return self + (-other)

    def __matmul__(self, other: "MatrixSeries") -> "MatrixSeries":
        lo = self.j_min + other.j_min
        order = min(self.order + other.j_min, other.order + self.j_min)
        out = []
        for j in range(lo, order + 1):
            acc = np.zeros((self.dim, other.dim), dtype=complex)
            for i in range(self.j_min, j - other.j_min + 1):
                acc = acc + self[i] @ other[j - i]
            out.append(acc)
        return MatrixSeries(out, lo, order)

    def sandwich(self, left: np.ndarray, right: np.ndarray) -> "MatrixSeries":
        """Coefficient-wise left @ A_j @ right (for basis changes)."""
        return MatrixSeries([left @ c @ right for c in self.coeffs], self.j_min, self.order)

    def adjoint(self) -> "MatrixSeries":
        return MatrixSeries([c.conj().T for c in self.coeffs], self.j_min, self.order)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return all(np.abs(c - c.conj().T).max(initial=0.0) <= tol * max(1.0, np.abs(c).max(initial=0.0))
                   for c in self.coeffs)

    def evaluate(self, kappa) -> np.ndarray:
        k = complex(kappa)
        return sum(k**j * self[j] for j in range(self.j_min, self.j_min + len(self.coeffs)))


def series_scale(A: MatrixSeries) -> float:
    """Size of the three lowest coefficients; kernels of A_0 are judged against it."""
    return max(float(np.abs(A[j]).max(initial=0.0)) for j in range(A.j_min, min(A.j_min + 2, A.order) + 1))


def series_invert_regular(A: MatrixSeries, tol_kernel: float = TOL_KERNEL) -> MatrixSeries:
    """Neumann-series inverse when the leading coefficient is invertible."""
    lead = A[A.j_min]
    pinv = pseudo_inverse(lead, tol_kernel, series_scale(A))
    if pinv.kernel_dim:
        raise SingularLeadingCoefficient(
            f"leading coefficient has a {pinv.kernel_dim}-dimensional kernel; use jn_invert"
        )
    inv0 = np.linalg.inv(lead)
    n_terms = A.order - A.j_min + 1
    X = [inv0]
    for k in range(1, n_terms):
        acc = sum(A[A.j_min + i] @ X[k - i] for i in range(1, k + 1))
        X.append(-inv0 @ acc)
    return MatrixSeries(X, -A.j_min, A.order - 2 * A.j_min)


@dataclass(frozen=True)
class JNReduction:
    """One kernel-reduction step: kernel projector Q of A_0, its orthonormal
    basis, B = (A + Q)^{-1}, and the reduced series a(kappa) on QK written in
    that basis."""

    Q: np.ndarray
    basis: np.ndarray
    a: MatrixSeries
    B: MatrixSeries
    A0_dagger: np.ndarray
    rank_gap: float
    two_form_residual: float


def jn_reduce(A: MatrixSeries, tol_kernel: float = TOL_KERNEL) -> JNReduction:
    if A.j_min != 0:
        raise ValueError("jn_reduce needs a Taylor series (j_min = 0)")
    pinv = pseudo_inverse(A[0], tol_kernel, series_scale(A))
    Q, E = pinv.kernel_projection, pinv.kernel_basis
    if E.shape[1] == 0:
        raise ValueError("A_0 is invertible; nothing to reduce")
    B = series_invert_regular(A + MatrixSeries.constant(Q, A.order), tol_kernel)

    # a = (1/kappa) (I - E* B E)
    EBE = B.sandwich(E.conj().T, E)
    q = E.shape[1]
    lhs = MatrixSeries([np.eye(q)], 0, B.order) - EBE
    if lhs.order < 1:
        raise ValueError("series too short to reduce")
    a_quot = MatrixSeries([lhs[j] for j in range(1, lhs.order + 1)], 0, lhs.order - 1)

    # explicit sum: sum_j (-kappa)^j E* A1t [(A0^dag + Q) A1t]^j E
    A1t = MatrixSeries([A[j] for j in range(1, A.order + 1)], 0, A.order - 1)
    X = A1t.sandwich(pinv.dagger + Q, np.eye(A.dim)).shift(1)  # kappa (A0^dag + Q) A1t
    term = A1t
    total = A1t
    for _ in range(A1t.order):
        term = -(term @ X)
        if term.j_min > total.order:
            break
        total = total + term
    a_sum = total.sandwich(E.conj().T, E)
    resid = max(np.abs(a_quot[j] - a_sum[j]).max() for j in a_quot.indices())
    scale = max(1.0, max(np.abs(a_sum[j]).max() for j in a_sum.indices()))
    if resid > TWO_FORM_TOL * scale:
        raise TwoFormMismatch(f"the two forms of a(kappa) disagree by {resid:.3e}")
    return JNReduction(Q, E, a_sum, B, pinv.dagger, pinv.rank_gap, float(resid))


@dataclass(frozen=True)
class JNLevel:
    depth: int
    reduction: Optional[JNReduction]
    leading_rank_gap: float


def jn_invert_detailed(A: MatrixSeries, max_depth: int = 2, tol_kernel: float = TOL_KERNEL,
                       _depth: int = 0):
    """Invert a self-adjoint series, recursing through kernel reductions.

    Returns ``(inverse, levels)`` where ``levels[i]`` describes the i-th
    reduction (M -> m -> q in the resolvent setting).
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if A.j_min != 0:
        raise ValueError("jn_invert needs a Taylor series (j_min = 0)")
    pinv = pseudo_inverse(A[0], tol_kernel, series_scale(A))
    if pinv.kernel_dim == 0:
        inv = series_invert_regular(A, tol_kernel)
        return inv, [JNLevel(_depth, None, pinv.rank_gap)]
    if max_depth == 0:
        raise DepthExhausted(
            f"leading coefficient still singular (kernel dim {pinv.kernel_dim}) at depth {_depth}"
        )
    red = jn_reduce(A, tol_kernel)
    a_inv, deeper = jn_invert_detailed(red.a, max_depth - 1, tol_kernel, _depth + 1)
    E = red.basis
    lifted = a_inv.sandwich(E, E.conj().T).shift(-1)  # kappa^{-1} E a^{-1} E*
    inv = red.B + red.B @ lifted @ red.B
    return inv, [JNLevel(_depth, red, pinv.rank_gap)] + deeper


def jn_invert(A: MatrixSeries, max_depth: int = 2, tol_kernel: float = TOL_KERNEL) -> MatrixSeries:
    return jn_invert_detailed(A, max_depth, tol_kernel)[0]


def product_residual(A: MatrixSeries, Ainv: MatrixSeries) -> float:
    """max_j |(A Ainv)_j - delta_{j0} I| over the valid coefficients."""
    P = A @ Ainv
    eye = np.eye(A.dim)
    return max(np.abs(P[j] - (eye if j == 0 else 0)).max() for j in P.indices())


def random_self_adjoint(d: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (X + X.conj().T)


def random_singular_series(d: int, depth: int, n_terms: int, rng: np.random.Generator,
                           kernel_dim: Optional[int] = None) -> MatrixSeries:
    """Random self-adjoint Taylor series whose inverse needs ``depth`` reductions.

    depth 0: invertible A_0.  depth 1: A_0 has a kernel on which A_1 is
    invertible.  depth 2: A_1 compressed to ker A_0 is itself singular there.
    """
    W, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    q = kernel_dim if kernel_dim is not None else (0 if depth == 0 else min(d - 1, 1 + depth))
    lam = rng.uniform(0.5, 2.0, size=d) * rng.choice([-1.0, 1.0], size=d)
    lam[:q] = 0.0
    A0 = (W * lam) @ W.conj().T
    coeffs = [A0] + [random_self_adjoint(d, rng) for _ in range(n_terms - 1)]
    if depth >= 1 and q >= 1:
        # reset the spectrum of E* A1 E on ker A0 to magnitudes in [0.5, 2],
        # with a one-dimensional kernel when a second reduction is wanted
        E = W[:, :q]
        core = E.conj().T @ coeffs[1] @ E
        mu, Y = np.linalg.eigh(core)
        target = rng.uniform(0.5, 2.0, size=q) * rng.choice([-1.0, 1.0], size=q)
        if depth == 2 and q >= 2:
            target[0] = 0.0
        EY = E @ Y
        coeffs[1] = coeffs[1] + (EY * (target - mu)) @ EY.conj().T
        if depth == 2 and q >= 2 and n_terms > 2:
            # shift A2 along the surviving kernel vector so q0 is well away from 0
            f = EY[:, :1]
            A = MatrixSeries(coeffs, 0, n_terms - 1)
            q0 = float(np.real(jn_reduce(jn_reduce(A).a).a[0][0, 0]))
            want = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
            coeffs[2] = coeffs[2] + (want - q0) * (f @ f.conj().T)
    return MatrixSeries(coeffs, 0, n_terms - 1)


def evaluate_inverse_error(A: MatrixSeries, Ainv: MatrixSeries, kappa: float) -> float:
    """Relative error between the series inverse and a dense inverse at kappa."""
    exact = np.linalg.inv(A.evaluate(kappa))
    approx = Ainv.evaluate(kappa)
    return float(np.linalg.norm(exact - approx, 2) / np.linalg.norm(exact, 2))


def as_series(coeffs: Sequence, order: Optional[int] = None) -> MatrixSeries:
    return MatrixSeries(list(coeffs), 0, order)
