import numpy as np
import pytest

from halfline_threshold.expansion import expand_resolvent
from halfline_threshold.free import free_resolvent_kernel
from halfline_threshold.potential import boundary_condition_potential, empty_potential, local_potential
from halfline_threshold.threshold import analyze, generate_fixture
from halfline_threshold.verification import (
    M_inverse_residual,
    dense_resolvent,
    expansion_remainder_fit,
    fit_error_order,
    free_remainder_fit,
    kappa_grid,
    null_space_search,
    oracle_self_consistency,
    outgoing_ratio,
    principal_angles,
    second_resolvent_residual,
)


def test_outgoing_ratio_solves_characteristic_equation():
    for k in (1e-3, 0.1, 1.0):
        z = outgoing_ratio(k)
        assert abs(z + 1 / z - 2 - k * k) < 1e-12 and abs(z) < 1


def test_free_oracle_matches_closed_form():
    for k in (1e-3, 1e-2, 0.3):
        R = dense_resolvent(empty_potential(), k, 1600, 20).values
        R0 = free_resolvent_kernel(k, 20).values
        assert np.abs(R - R0).max() < 1e-8


def test_dirichlet_truncation_converges_for_large_kappa():
    R = dense_resolvent(empty_potential(), 0.5, 400, 10, boundary="dirichlet").values
    assert np.abs(R - free_resolvent_kernel(0.5, 10).values).max() < 1e-12


def test_oracle_hermitian_and_self_consistent(third_kind):
    R = dense_resolvent(third_kind, 0.05, 400, 30).values
    assert np.abs(R - R.conj().T).max() < 1e-10 * np.abs(R).max()
    assert oracle_self_consistency(third_kind, 0.05, 50) < 1e-12


def test_first_kind_kappa_R_tends_to_one(alpha_one):
    ks = kappa_grid(1e-3, 10**-1.5)
    errs = [np.abs(k * dense_resolvent(alpha_one, k, 1600, 5).values - 1).max() for k in ks]
    fit = fit_error_order(errs, ks)
    assert fit.passes(0.9, 1.1)


def test_null_space_search_examples(second_kind):
    assert null_space_search(boundary_condition_potential(1.0), 50) == []
    found = null_space_search(second_kind, 50)
    assert len(found) == 1
    e1 = np.zeros(50)
    e1[0] = 1
    assert principal_angles(found, [e1]).max() < 1e-12


@pytest.mark.parametrize("kind", ["ThirdKind", "SecondKind"])
def test_null_space_search_matches_eigenspace(kind):
    for seed in range(3):
        p = generate_fixture(kind, seed)
        r = analyze(p, 60)
        found = null_space_search(p, 60)
        assert len(found) == r.dim_Esf
        assert principal_angles(found, r.Esf_basis).max() < 1e-7


def test_principal_angles_dimension_mismatch():
    a = [np.array([1.0, 0, 0])]
    b = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0])]
    assert principal_angles(a, b).max() == pytest.approx(np.pi / 2)
    assert principal_angles([], []).size == 0


def test_slope_fit_exact_power():
    ks = kappa_grid(1e-3, 10**-1.5)
    fit = fit_error_order(3.0 * ks**2, ks)
    assert fit.slope == pytest.approx(2.0) and fit.r_squared == pytest.approx(1.0)
    assert fit.passes(1.9, 2.1) and not fit.passes(2.5)


def test_slope_fit_rejects_degenerate_grids():
    with pytest.raises(ValueError):
        fit_error_order([1, 2, 3, 4], [1, 2, 3, 4])
    with pytest.raises(ValueError):
        fit_error_order(np.ones(6), np.geomspace(1e-2, 1e-1, 6))
    with pytest.raises(ValueError):
        fit_error_order([1, 2, 0, 4, 5], kappa_grid(points=5))


def test_slope_fit_noisy_low_r2():
    rng = np.random.default_rng(0)
    ks = kappa_grid(points=10)
    fit = fit_error_order(np.exp(rng.normal(0, 3, 10)), ks)
    assert not fit.passes(-np.inf)


def test_free_remainder_orders():
    for N in range(3):
        assert free_remainder_fit(N).passes(N + 0.9, N + 1.1)


def test_expansion_remainder_regular(alpha_half):
    res = expand_resolvent(alpha_half, 1, 20)
    assert expansion_remainder_fit(alpha_half, res, 1).passes(1.9, 2.1)


def test_identity_residuals_small(third_kind):
    assert M_inverse_residual(third_kind, 1e-2) < 1e-8
    assert second_resolvent_residual(third_kind, 1e-2, 40) < 1e-9
    p = local_potential([(2, 0.7), (4, -1.3)])
    assert second_resolvent_residual(p, 0.1, 30) < 1e-12
