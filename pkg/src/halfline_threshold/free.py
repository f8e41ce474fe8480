"""Free Dirichlet resolvent R0(kappa) and its Taylor coefficients at kappa = 0.

The spectral parameter is z = -kappa**2 with Re kappa > 0.  Three routes to
the coefficients G_{0,j} are provided and cross-checked in the tests:

* ``free_coeff``: closed-form kernels for j <= 3;
* ``free_coeff_series``: Taylor-mode power-series arithmetic, exact to
  rounding for any j;
* ``numeric_free_coeff``: least-squares fits of kappa -> R0(kappa)[n, m].
"""

from __future__ import annotations

import cmath
import warnings
from functools import lru_cache
from math import comb, factorial
from typing import Optional, Sequence

import numpy as np

from .lattice import LatticeKernel, LatticeVector, sites

FIT_COND_LIMIT = 1e10


class IllConditionedFitWarning(UserWarning):
    pass


def validate_kappa(kappa) -> complex:
    k = complex(kappa)
    if k == 0 or k.real <= 0:
        raise ValueError(f"kappa must satisfy Re kappa > 0, got {kappa!r}")
    return k


def phi_of_kappa(kappa) -> complex:
    """Solve 4 sin^2(phi/2) = -kappa^2 with Im phi > 0."""
    k = validate_kappa(kappa)
    z = -k * k
    phi = 2.0 * cmath.asin(cmath.sqrt(z) / 2.0)
    if phi.imag < 0:
        phi = -phi
    return phi


def _kernel_from_phi(phi: complex, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    a = np.abs(rows[:, None] - cols[None, :])
    b = rows[:, None] + cols[None, :]
    # e^{i phi a} - e^{i phi b} = -e^{i phi a} expm1(i phi (b - a)); avoids cancellation
    num = -np.exp(1j * phi * a) * np.expm1(1j * phi * (b - a))
    return (1j / (2.0 * np.sin(phi))) * num


def free_resolvent_kernel(kappa, n_lat: int) -> LatticeKernel:
    """R0(kappa)[n, m] = i/(2 sin phi) (e^{i phi|n-m|} - e^{i phi(n+m)})."""
    k = validate_kappa(kappa)
    if abs(k) >= 2:
        raise ValueError("free_resolvent_kernel is restricted to |kappa| < 2")
    n = sites(n_lat)
    return LatticeKernel(_kernel_from_phi(phi_of_kappa(k), n, n), label=f"R0({k})")


def free_resolvent_block(kappa, rows, cols) -> np.ndarray:
    """R0(kappa) restricted to the given 1-based rows and columns."""
    k = validate_kappa(kappa)
    return _kernel_from_phi(phi_of_kappa(k), np.asarray(rows), np.asarray(cols))


def _closed_form(j: int, n: np.ndarray, m: np.ndarray) -> np.ndarray:
    n = n.astype(float)
    m = m.astype(float)
    lo, hi = np.minimum(n, m), np.maximum(n, m)
    if j == 0:
        return lo
    if j == 1:
        return -n * m
    if j == 2:
        return -lo / 6.0 + lo**3 / 6.0 + 0.5 * n * m * hi
    if j == 3:
        return 5.0 / 24.0 * n * m - n**3 * m / 6.0 - n * m**3 / 6.0
    raise ValueError(f"closed forms exist for 0 <= j <= 3 only, got j={j}")


def free_coeff(j: int, n_lat: int) -> LatticeKernel:
    """Closed-form kernel of G_{0,j} for j in 0..3."""
    if not 0 <= j <= 3:
        raise ValueError(f"closed forms exist for 0 <= j <= 3 only, got j={j}; use free_coeff_series")
    n = sites(n_lat)
    return LatticeKernel(_closed_form(j, n[:, None], n[None, :]), label=f"G0{j}")


def free_coeff_block(j: int, rows, cols) -> np.ndarray:
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    return _closed_form(j, rows[:, None], cols[None, :])


# -- Taylor-mode coefficients -------------------------------------------------
#
# With zeta = exp(-mu), mu = 2 asinh(kappa/2), the kernel reads
#     R0[n, m] = (zeta^|n-m| - zeta^(n+m)) / (kappa * sqrt(4 + kappa^2)),
# and every factor has an elementary power series in kappa.


@lru_cache(maxsize=None)
def _mu_series(order: int) -> np.ndarray:
    c = np.zeros(order + 1)
    for k in range(order // 2 + 1):
        p = 2 * k + 1
        if p > order:
            break
        c[p] = 2.0 * (-1) ** k * factorial(2 * k) / (4**k * factorial(k) ** 2 * p) / 2.0**p
    return c


@lru_cache(maxsize=None)
def _inv_sqrt_series(order: int) -> np.ndarray:
    # 1/sqrt(4 + k^2) = (1/2) (1 + k^2/4)^(-1/2)
    w = np.zeros(order + 1)
    for i in range(order // 2 + 1):
        w[2 * i] = 0.5 * comb(2 * i, i) * (-1) ** i / 16.0**i
    return w


def _zeta_power_series(max_d: int, order: int) -> np.ndarray:
    """Coefficients of zeta(kappa)^d for d = 0..max_d, shape (max_d+1, order+1)."""
    g = -np.arange(max_d + 1, dtype=float)[:, None] * _mu_series(order)[None, :]
    f = np.zeros_like(g)
    f[:, 0] = 1.0
    # f = exp(g), g(0) = 0:  k f_k = sum_i i g_i f_{k-i}
    for k in range(1, order + 1):
        i = np.arange(1, k + 1)
        f[:, k] = (g[:, i] * i * f[:, k - i]).sum(axis=1) / k
    return f


def free_coeff_series(order: int, rows, cols) -> np.ndarray:
    """G_{0,j}[rows, cols] for j = 0..order via power-series arithmetic.

    Returns a real array of shape (order + 1, len(rows), len(cols)).
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    out = np.zeros((order + 1, rows.size, cols.size))
    if rows.size == 0 or cols.size == 0:
        return out
    a = np.abs(rows[:, None] - cols[None, :])
    b = rows[:, None] + cols[None, :]
    E = _zeta_power_series(int(b.max()), order + 1)
    F = E[:, 1:]  # (zeta^d - 1) / kappa
    w = _inv_sqrt_series(order)
    P = F[a] - F[b]
    for j in range(order + 1):
        for k in range(j + 1):
            if w[j - k] != 0.0:
                out[j] += P[..., k] * w[j - k]
    return out


# -- fitted coefficients ------------------------------------------------------


def default_arc(points: int = 32, half_angle: float = 0.45 * np.pi) -> np.ndarray:
    """Unit-radius nodes on an arc inside the right half-plane."""
    return np.exp(1j * np.linspace(-half_angle, half_angle, points))


def _fit_coefficient(j: int, kappas: np.ndarray, values: np.ndarray, degree: int, scale: float):
    V = np.vander(kappas / scale, degree + 1, increasing=True)
    # real coefficients: fit real and imaginary parts jointly
    A = np.vstack([V.real, V.imag])
    B = np.vstack([values.real, values.imag])
    cond = np.linalg.cond(A)
    coef, *_ = np.linalg.lstsq(A, B, rcond=None)
    return coef[j] / scale**j, cond


def numeric_free_coeff(
    j: int,
    n_lat: int,
    kappa_grid: Optional[Sequence[complex]] = None,
    degree: Optional[int] = None,
    radius: float = 0.8,
) -> LatticeKernel:
    """Extract G_{0,j} entrywise by polynomial fits of kappa -> R0(kappa)[n, m].

    Without ``kappa_grid`` each anti-diagonal n + m = const is fitted on its
    own arc of radius ``radius / (n + m)`` (32 nodes, degree 14), matching the
    natural kappa-scale of that entry.  With an explicit grid all entries share
    it and ``degree`` defaults to j + 2.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    n = sites(n_lat)
    out = np.zeros((n_lat, n_lat))
    worst = 0.0
    if kappa_grid is None:
        deg = 14 if degree is None else degree
        arc = default_arc()
        if deg + 1 > 2 * arc.size:
            raise ValueError("degree too high for the default arc")
        S = n[:, None] + n[None, :]
        for s in range(2, 2 * n_lat + 1):
            mask = S == s
            r = radius / s
            vals = np.array([_kernel_from_phi(phi_of_kappa(r * t), n, n)[mask] for t in arc])
            out[mask], cond = _fit_coefficient(j, r * arc, vals, deg, r)
            worst = max(worst, cond)
    else:
        kap = np.array([validate_kappa(k) for k in kappa_grid])
        if np.unique(kap).size < j + 2:
            raise ValueError(f"need at least {j + 2} distinct kappa nodes")
        deg = j + 2 if degree is None else degree
        if deg < j:
            raise ValueError("degree must be >= j")
        vals = np.array([_kernel_from_phi(phi_of_kappa(k), n, n).ravel() for k in kap])
        scale = float(np.abs(kap).max())
        c, worst = _fit_coefficient(j, kap, vals, deg, scale)
        out = c.reshape(n_lat, n_lat)
    if worst > FIT_COND_LIMIT:
        warnings.warn(f"fit for G0{j} is ill-conditioned (cond={worst:.2e})", IllConditionedFitWarning)
    return LatticeKernel(out, label=f"G0{j}~fit")


def g00_row_formula(x) -> LatticeVector:
    """(G00 x)[n] = <n, x> - sum_{m >= n} (m - n) x[m], for x supported in the window."""
    x = np.asarray(x, dtype=complex)
    n = sites(x.size)
    s0 = np.cumsum(x[::-1])[::-1]  # sum_{m>=n} x[m]
    s1 = np.cumsum((n * x)[::-1])[::-1]  # sum_{m>=n} m x[m]
    pair_n = s1[0]
    out = pair_n - (s1 - n * s0)
    return LatticeVector(out, tail=(0.0, pair_n), tail_start=x.size)
