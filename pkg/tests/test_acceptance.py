"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line (see conftest)."""

import warnings

import numpy as np

from conftest import record
from halfline_threshold.expansion import closed_form_G, expand_resolvent, verify_HG_identities
from halfline_threshold.free import free_coeff, g00_row_formula, numeric_free_coeff
from halfline_threshold.lattice import inner
from halfline_threshold.potential import boundary_condition_potential, local_potential, rank_k_potential
from halfline_threshold.series import (
    evaluate_inverse_error,
    jn_invert_detailed,
    product_residual,
    random_singular_series,
)
from halfline_threshold.threshold import ThresholdKind, analyze, classify, generate_fixture
from halfline_threshold.verification import (
    dense_resolvent,
    expansion_remainder_fit,
    fit_error_order,
    free_remainder_fit,
    kappa_grid,
    null_space_search,
    principal_angles,
)

N_LAT = 400
N_ORACLE = 1600


def grid(N):
    n = np.arange(1, N + 1, dtype=float)
    return n[:, None], n[None, :]


def test_criterion_1_free_kernel():
    fit_err = 0.0
    for j in range(4):
        G = free_coeff(j, 20).values
        F = numeric_free_coeff(j, 20).values
        fit_err = max(fit_err, float((np.abs(G - F) / np.maximum(1.0, np.abs(G))).max()))
    fits = [free_remainder_fit(N) for N in range(4)]
    ok = fit_err < 1e-7 and all(f.passes(N + 0.9, N + 1.1) for N, f in enumerate(fits))
    slopes = ", ".join(f"{f.slope:.3f}" for f in fits)
    record(1, ok, f"fit error {fit_err:.1e}; remainder slopes N=0..3: {slopes}; "
                  f"min r2 {min(f.r_squared for f in fits):.4f}")
    assert ok


def test_criterion_2_boundary_family():
    kinds = {}
    worst = 0.0
    for alpha in (-2.0, -0.5, 0.5, 2.0, 1.0):
        p = boundary_condition_potential(alpha)
        kinds[alpha] = classify(p).kind
        r = analyze(p, N_LAT)
        n = np.arange(1, N_LAT + 1, dtype=float)
        worst = max(worst, principal_angles(r.E_tilde_basis, [(1 - alpha) * n + alpha]).max())
    ok = (all(kinds[a] == ThresholdKind.REGULAR for a in (-2.0, -0.5, 0.5, 2.0))
          and kinds[1.0] == ThresholdKind.FIRST and worst < 1e-9)
    record(2, ok, f"kinds {[k.value for k in kinds.values()]}; max angle {worst:.1e}")
    assert ok


def test_criterion_3_regular(alpha_half):
    p = alpha_half
    report = analyze(p, N_LAT)
    res = expand_resolvent(p, 1, N_LAT, report)
    n, m = grid(N_LAT)
    G0, G1 = np.minimum(n, m) + 1, -(n + 1) * (m + 1)
    cf0 = np.abs(closed_form_G(p, report, 0).values - G0).max()
    cf1 = np.abs(closed_form_G(p, report, 1).values - G1).max()
    pipe = max(np.abs(res[0] - G0).max(), np.abs(res[1] - G1).max())
    fit = expansion_remainder_fit(p, res, 1, N_oracle=N_ORACLE)
    ok = cf0 == 0 and cf1 == 0 and pipe < 1e-8 and fit.passes(1.9, 2.1)
    record(3, ok, f"closed form exact ({cf0:.0e}, {cf1:.0e}); pipeline {pipe:.1e}; "
                  f"slope {fit.slope:.3f} r2 {fit.r_squared:.4f}")
    assert ok


def test_criterion_4_first_kind(alpha_one):
    p = alpha_one
    report = analyze(p, N_LAT)
    res = expand_resolvent(p, 0, N_LAT, report)
    n, m = grid(N_LAT)
    Gm1, G0 = np.ones((N_LAT, N_LAT)), np.minimum(n, m) + 0.5 - n - m
    cf = max(np.abs(closed_form_G(p, report, -1).values - Gm1).max(),
             np.abs(closed_form_G(p, report, 0).values - G0).max())
    pipe = max(np.abs(res[-1] - Gm1).max(), np.abs(res[0] - G0).max())
    ks = kappa_grid()
    errs = [np.abs(k * dense_resolvent(p, k, N_ORACLE, 10).values - 1).max() for k in ks]
    fit = fit_error_order(errs, ks)
    ok = cf < 1e-12 and pipe < 1e-7 and fit.passes(0.9, 1.1)
    record(4, ok, f"closed form {cf:.1e}; pipeline {pipe:.1e}; kappa R -> 1 slope {fit.slope:.3f}")
    assert ok


def test_criterion_5_second_kind():
    p = rank_k_potential([[np.sqrt(2.0), -1.0 / np.sqrt(2.0)]], [[-1.0]])
    report = analyze(p, N_LAT)
    res = expand_resolvent(p, 0, N_LAT, report)
    e1 = np.zeros((N_LAT, N_LAT))
    e1[0, 0] = 1.0
    g2 = np.abs(res[-2] - e1).max()
    g1 = np.abs(res[-1]).max()
    hg = max(r.residual for r in verify_HG_identities(p, res, report.P0.values) if r.j == 0)
    ok = report.kind == ThresholdKind.SECOND and g2 < 1e-8 and g1 < 1e-8 and hg < 1e-8
    record(5, ok, f"{report.kind.value}; |G-2 - e1e1*| {g2:.1e}; |G-1| {g1:.1e}; HG0 residual {hg:.1e}")
    assert ok


def test_criterion_6_third_kind(third_kind):
    p = third_kind
    report = analyze(p, N_LAT)
    res = expand_resolvent(p, 0, N_LAT, report)
    G2 = res[-2]
    proj = max(np.abs(G2 @ G2 - G2).max(), np.abs(G2 - report.P0.values).max())
    sv = np.linalg.svd(res[-1], compute_uv=False)
    Vn = np.zeros(N_LAT, dtype=complex)
    Vn[: p.r_supp] = p.V_n()
    norm = abs(inner(Vn, report.Psi_c) + 1)
    psi = report.Psi_c.values
    match = np.abs(res[-1] - np.outer(psi, psi.conj())).max()
    ok = (report.kind == ThresholdKind.THIRD and proj < 1e-7 and sv[1] < 1e-9 * sv[0]
          and norm < 1e-8 and match < 1e-7)
    record(6, ok, f"{report.kind.value}; projection {proj:.1e}; sigma2/sigma1 {sv[1] / sv[0]:.1e}; "
                  f"|<Vn,Psi_c>+1| {norm:.1e}")
    assert ok


def test_criterion_7_series_inversion():
    rng = np.random.default_rng(7)
    worst, slope_err, count = 0.0, 0.0, 0
    for depth in (1, 2):
        for _ in range(20):
            d = int(rng.integers(3, 7))
            A = random_singular_series(d, depth, 5, rng)
            inv, levels = jn_invert_detailed(A)
            worst = max(worst, product_residual(A, inv))
            if len(levels) - 1 != depth:
                count += 1
            expected = inv.order + 1 - inv.j_min
            ks = kappa_grid(1e-3, 10**-1.5, 6)
            errs = [evaluate_inverse_error(A, inv, k) for k in ks]
            fit = fit_error_order(errs, ks)
            slope_err = max(slope_err, abs(fit.slope - expected))
    ok = worst < 1e-9 and slope_err < 0.1 and count == 0
    record(7, ok, f"40 series: product residual {worst:.1e}; max slope deviation {slope_err:.2f}; "
                  f"depth mismatches {count}")
    assert ok


def test_criterion_8_HG_identities():
    worst, n_checks = 0.0, 0
    for kind in ThresholdKind:
        for seed in range(3):
            p = generate_fixture(kind, seed)
            report = analyze(p, N_LAT)
            res = expand_resolvent(p, 2, N_LAT, report)
            for r in verify_HG_identities(p, res, report.P0.values):
                worst = max(worst, r.weighted)
                n_checks += 1
    ok = worst < 1e-8
    record(8, ok, f"{n_checks} identities over 12 fixtures; max weighted interior residual {worst:.1e}")
    assert ok


def test_criterion_9_quadratic_identity():
    rng = np.random.default_rng(9)
    N = 30
    n = np.arange(1, N + 1, dtype=float)
    G02 = free_coeff(2, N).values
    worst = 0.0
    for _ in range(100):
        xs = []
        for _ in range(2):
            L = int(rng.integers(2, 12))
            x = np.zeros(N, dtype=complex)
            x[:L] = rng.normal(size=L) + 1j * rng.normal(size=L)
            x[L - 1] -= inner(n[:L], x[:L]) / L  # enforce <n, x> = 0
            xs.append(x)
        x1, x2 = xs
        g1, g2 = g00_row_formula(x1).values, g00_row_formula(x2).values
        worst = max(worst, abs(inner(x1, G02 @ x2) + inner(g1, g2)))
    ok = worst < 1e-10
    record(9, ok, f"100 pairs: max |<x1,G02 x2> + <G00 x1,G00 x2>| {worst:.1e}")
    assert ok


def test_criterion_10_local_potentials():
    rng = np.random.default_rng(10)
    found, bad = 0, 0
    for _ in range(50):
        k = int(rng.integers(1, 6))
        sites_ = rng.choice(np.arange(1, 12), size=k, replace=False)
        vals = rng.uniform(-3, 3, size=k)
        if rng.random() < 0.3:
            vals[0] = -1.0 / sites_[0]  # push some draws onto a first-kind threshold
        p = local_potential([(int(s), float(v)) for s, v in zip(sites_, vals)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kind = classify(p).kind
        found += len(null_space_search(p, N_LAT))
        bad += kind in (ThresholdKind.SECOND, ThresholdKind.THIRD)
    ok = found == 0 and bad == 0
    record(10, ok, f"50 local potentials: eigenvectors found {found}; second/third kind {bad}")
    assert ok
