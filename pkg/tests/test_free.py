import warnings

import numpy as np
import pytest

from halfline_threshold.free import (
    IllConditionedFitWarning,
    free_coeff,
    free_coeff_block,
    free_coeff_series,
    free_resolvent_kernel,
    g00_row_formula,
    numeric_free_coeff,
    phi_of_kappa,
)
from halfline_threshold.lattice import apply_H0, h0_matrix, sites, weighted_op_norm
from halfline_threshold.verification import free_remainder_fit


def test_phi_branch():
    for k in (0.1, 0.5 + 0.3j, 1.5):
        phi = phi_of_kappa(k)
        assert phi.imag > 0
        assert abs(4 * np.sin(phi / 2) ** 2 + k * k) < 1e-12


def test_kappa_validation():
    for bad in (0, -0.1, 1j):
        with pytest.raises(ValueError):
            free_resolvent_kernel(bad, 5)
    with pytest.raises(ValueError):
        free_resolvent_kernel(2.5, 5)


def test_resolvent_tends_to_G00():
    vals = [free_resolvent_kernel(k, 3)[1, 1] for k in (1e-2, 1e-4, 1e-6)]
    assert abs(vals[-1] - 1) < 1e-5
    assert abs(vals[0] - 1) > abs(vals[1] - 1) > abs(vals[2] - 1)


def test_resolvent_symmetry():
    R = free_resolvent_kernel(0.1, 8)
    assert R[2, 5] == pytest.approx(R[5, 2], abs=1e-15)


def test_resolvent_inverts_shifted_laplacian():
    N, k = 60, 0.05
    R = free_resolvent_kernel(k, N).values
    out = (h0_matrix(N) + k * k * np.eye(N)) @ R
    # the last row misses R[N+1, m]; drop it
    assert np.abs(out[: N - 1] - np.eye(N)[: N - 1]).max() < 1e-10


def test_closed_form_examples():
    assert free_coeff(0, 5)[2, 5] == 2
    assert free_coeff(2, 3)[1, 2] == pytest.approx(2.0)
    assert free_coeff(3, 2)[1, 1] == pytest.approx(-1 / 8)
    with pytest.raises(ValueError):
        free_coeff(4, 5)


def test_G01_is_minus_n_outer_n():
    n = sites(30).astype(float)
    assert np.array_equal(free_coeff(1, 30).values, -np.outer(n, n))


def test_series_matches_closed_forms_large_window():
    n = sites(400)
    S = free_coeff_series(3, n, n)
    for j in range(4):
        C = free_coeff(j, 400).values
        assert np.max(np.abs(S[j] - C) / np.maximum(1, np.abs(C))) < 1e-14


def test_series_blocks_consistent():
    rows, cols = np.array([2, 5]), np.array([1, 7, 3])
    S = free_coeff_series(3, rows, cols)
    for j in range(4):
        assert np.allclose(S[j], free_coeff_block(j, rows, cols))


def test_numeric_fit_examples():
    G1 = numeric_free_coeff(1, 5)
    assert abs(G1[2, 3] + 6) < 1e-8
    G0 = numeric_free_coeff(0, 10)
    assert np.abs(G0.values - free_coeff(0, 10).values).max() < 1e-10


def test_numeric_fit_j4_against_richardson():
    fit = numeric_free_coeff(4, 3)[2, 3]
    exact = free_coeff_series(4, [2], [3])[4, 0, 0]
    assert abs(exact) > 1
    assert fit == pytest.approx(exact, rel=1e-6)

    # independent route: Richardson extrapolation of the scaled remainder
    def rem(k):
        part = sum(k**j * free_coeff(j, 3)[2, 3] for j in range(4))
        return ((free_resolvent_kernel(k, 3)[2, 3] - part) / k**4).real

    h = 0.01
    rich = 2 * rem(h / 2) - rem(h)
    assert rich == pytest.approx(fit, rel=1e-3)


def test_numeric_fit_explicit_grid_and_warning():
    grid = 0.1 * 2.0 ** -np.arange(8)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        G = numeric_free_coeff(0, 4, kappa_grid=grid)
    # the short real grid is much less accurate than the default arcs
    assert np.abs(G.values - free_coeff(0, 4).values).max() < 1e-2
    with pytest.warns(IllConditionedFitWarning):
        numeric_free_coeff(2, 4, kappa_grid=0.1 * 2.0 ** -np.arange(16), degree=15)
    with pytest.raises(ValueError):
        numeric_free_coeff(3, 4, kappa_grid=[0.1, 0.05])


def test_g00_row_formula_examples():
    e1 = np.zeros(6)
    e1[0] = 1
    g = g00_row_formula(e1)
    assert np.allclose(g.values, 1) and g[50] == 1
    x = np.zeros(6)
    x[1], x[0] = 1, -2
    g = g00_row_formula(x)
    assert np.allclose(g.values[1:], 0) and g[40] == 0


def test_g00_row_formula_matches_matrix(rng):
    for _ in range(10):
        x = np.zeros(30)
        x[:10] = rng.normal(size=10)
        assert np.allclose(g00_row_formula(x).values, free_coeff(0, 30).values @ x)


def test_g00_output_decays_iff_n_orthogonal(rng):
    x = np.zeros(25)
    x[:6] = rng.normal(size=6)
    x[:6] -= np.dot(np.arange(1, 7), x[:6]) / 91.0 * np.arange(1, 7)
    g = g00_row_formula(x)
    assert np.abs(g.values[6:]).max() < 1e-12
    x[2] += 1
    assert abs(g00_row_formula(x).values[-1]) > 0.5


def test_identity_relations():
    N = 40
    x = np.zeros(N)
    x[:5] = [1.0, -0.5, 2.0, 0.0, 0.3]
    inner_rows = slice(0, 20)
    G = [free_coeff(j, N).values for j in range(4)]
    assert np.abs(apply_H0(G[0] @ x).values[inner_rows] - x[inner_rows]).max() < 1e-9
    assert np.abs(apply_H0(G[1] @ x).values[inner_rows]).max() < 1e-9
    for j in (2, 3):
        lhs = apply_H0(G[j] @ x).values[inner_rows]
        assert np.abs(lhs + (G[j - 2] @ x)[inner_rows]).max() < 1e-9


@pytest.mark.parametrize("N", [0, 1, 2, 3])
def test_free_expansion_order(N):
    fit = free_remainder_fit(N)
    assert N + 0.9 <= fit.slope <= N + 1.1
    assert fit.r_squared >= 0.98


@pytest.mark.parametrize("j", range(4))
def test_free_coefficients_bounded_on_growing_windows(j):
    s = j + 1 if j % 2 == 0 else j
    norms = [weighted_op_norm(free_coeff(j, N).values, s) for N in (50, 100, 200, 400)]
    # the supremum is approached from below, so growth must stall
    assert max(norms) <= 1.01 * norms[0]
    d = np.diff(norms)
    assert np.all(d[1:] <= 0.5 * d[:-1] + 1e-15)
