"""Batch driver.

    halfline-threshold analyze --config run.yaml --out results/
    halfline-threshold fixtures --kinds Regular,FirstKind --out results/

Exit codes: 0 all checks pass, 2 passed with warnings, 1 a check failed,
64 the configuration is invalid.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import io
from .config import ConfigError, RunConfig, load_config, parse_config
from .expansion import coefficient_space_index, expand_resolvent, reconcile, verify_HG_identities
from .lattice import inner, weighted_op_norm
from .potential import FactoredPotential
from .threshold import ThresholdKind, analyze, generate_fixture
from .verification import (
    default_oracle_grid,
    expansion_remainder_fit,
    M_inverse_residual,
    null_space_search,
    principal_angles,
    second_resolvent_residual,
)

EXIT_OK, EXIT_FAIL, EXIT_WARN, EXIT_CONFIG = 0, 1, 2, 64
log = logging.getLogger("halfline_threshold")


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _le(name, value, threshold, detail=""):
    return Check(name, float(value), float(threshold), bool(value <= threshold), detail)


def run_pipeline(p: FactoredPotential, cfg: RunConfig, out_dir: Optional[Path]):
    """Classify, expand, verify; write outputs when out_dir is given."""
    tol = cfg.tolerances
    n_lat = cfg.n_lat
    notes: List[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = analyze(p, n_lat, tol.tol_kernel)
        result = expand_resolvent(p, cfg.order, n_lat, report, tol.tol_kernel)
        checks: List[Check] = []
        d = report.diagnostics
        checks.append(_le("eigen_residual", d["eig_residual"], tol.tol_eig))
        if "wz_residual" in d:
            checks.append(_le("wz_identity", d["wz_residual"], 1e-9))
        found = null_space_search(p, n_lat)
        ang = principal_angles(found, report.Esf_basis)
        checks.append(_le("Esf_vs_null_space_angle", ang.max(initial=0.0), 1e-7,
                          f"dim Esf={report.dim_Esf}, search={len(found)}"))
        if report.Psi_c is not None:
            checks.append(_le("psi_c_normalization", abs(d["psi_c_normalization"] + 1), 1e-8))
            checks.append(_le("psi_c_orthogonal_to_Esf", d["psi_c_orthogonality"], 1e-10))
        for j, r in reconcile(p, report, result).items():
            checks.append(_le(f"reconcile_G{j}", r, 1e-7))
        for j in range(result.j_min, result.j_max + 1):
            G = result[j]
            checks.append(_le(f"self_adjoint_G{j}", weighted_op_norm(G - G.conj().T, coefficient_space_index(j)), 1e-9))
        if result.j_min <= -1:
            sv = np.linalg.svd(result[-1], compute_uv=False)
            checks.append(_le("rank_one_G-1", sv[1] / max(sv[0], 1.0) if sv.size > 1 else 0.0, 1e-9))
        if result.j_min == -2:
            G2 = result[-2]
            checks.append(_le("projection_G-2", np.abs(G2 @ G2 - G2).max(), 1e-9))
            checks.append(_le("G-2_equals_P0", np.abs(G2 - report.P0.values).max(), 1e-8))
        for r in verify_HG_identities(p, result, report.P0.values):
            checks.append(_le(f"{r.side}_identity_j{r.j}", r.weighted, 1e-8, f"s={r.s}, raw={r.residual:.3e}"))
        kap = cfg.kappa_grid.values() if cfg.kappa_grid else default_oracle_grid(report.kind.depth)
        fits = {}
        for K in range(max(result.j_min, 0), result.j_max + 1):
            fit = expansion_remainder_fit(p, result, K, kappas=kap, N_oracle=cfg.n_oracle)
            fits[K] = fit
            checks.append(Check(f"remainder_slope_K{K}", fit.slope, K + 1 - 0.1, fit.passes(K + 1 - 0.1),
                                f"r2={fit.r_squared:.4f}"))
        if p.dim_K:
            checks.append(_le("M_inverse_identity", M_inverse_residual(p, 1e-2), 1e-8, "relative"))
        checks.append(_le("second_resolvent_identity", second_resolvent_residual(p, 1e-2, min(n_lat, 100)), 1e-9,
                          "relative"))
    notes += report.warnings + result.warnings
    notes += [str(w.message) for w in caught]
    if out_dir is not None:
        write_outputs(out_dir, cfg, report, result, checks, fits, notes)
    return report, result, checks, notes


def write_outputs(out_dir: Path, cfg, report, result, checks, fits, notes):
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "kind": report.kind.value,
        "dim_E_tilde_mod_E": report.dim_E_tilde_mod_E,
        "dim_E_mod_Esf": report.dim_E_mod_Esf,
        "dim_Esf": report.dim_Esf,
        "n_lat": report.n_lat,
        "diagnostics": report.diagnostics,
        "order_certificate": vars(result.order_certificate),
        "coefficients": list(range(result.j_min, result.j_max + 1)),
        "warnings": notes,
    }
    if cfg.report_format == "json":
        io.write_json(out_dir / "threshold_report.json", summary)
    else:
        rows = [(k, v) for k, v in summary.items() if not isinstance(v, (dict, list))]
        rows += [(f"diagnostics.{k}", v) for k, v in report.diagnostics.items()]
        io.write_rows_csv(out_dir / "threshold_report.csv", ["key", "value"], rows)
    cols = {}
    for name, basis in (("E_tilde", report.E_tilde_basis), ("E", report.E_basis), ("Esf", report.Esf_basis)):
        for i, x in enumerate(basis):
            cols[f"{name}_{i}"] = x
    if report.Psi_c is not None:
        cols["Psi_c"] = report.Psi_c
    io.write_vectors_csv(out_dir / "eigenbasis.csv", cols)
    cdir = out_dir / "coefficients"
    cdir.mkdir(exist_ok=True)
    for j in range(result.j_min, result.j_max + 1):
        io.write_kernel_csv(cdir / f"G_{j}.csv", result[j])
    rows = [(c.name, c.value, c.threshold, c.status, c.detail) for c in checks]
    if cfg.report_format == "json":
        io.write_json(out_dir / "verification_summary.json",
                      [dict(zip(("check", "value", "threshold", "status", "detail"), r)) for r in rows])
    else:
        io.write_rows_csv(out_dir / "verification_summary.csv", ["check", "value", "threshold", "status", "detail"], rows)
    pdir = out_dir / "plot_data"
    pdir.mkdir(exist_ok=True)
    for K, fit in fits.items():
        io.write_rows_csv(pdir / f"remainder_K{K}.csv", ["kappa", "error"], zip(fit.kappa_grid, fit.errors))


def exit_code(checks: Sequence[Check], notes: Sequence[str]) -> int:
    if any(not c.passed for c in checks):
        return EXIT_FAIL
    return EXIT_WARN if notes else EXIT_OK


def _print_checks(title: str, checks: Sequence[Check], quiet: bool):
    if quiet:
        return
    print(title)
    for c in checks:
        print(f"  {c.status}  {c.name:<32s} {c.value:.3e}  (limit {c.threshold:.1e}) {c.detail}")


def run_analysis(cfg: RunConfig, out: Optional[Path] = None, quiet: bool = False) -> int:
    try:
        p = cfg.potential.build()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out or cfg.output_dir or "results")
    try:
        report, result, checks, notes = run_pipeline(p, cfg, out_dir)
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _print_checks(f"{report.kind.value}: {len(checks)} checks", checks, quiet)
    for n in notes:
        log.warning(n)
    return exit_code(checks, notes)


def run_fixture_suite(kinds: Sequence[str], out: Path, seed: int = 0, n_lat: int = 400,
                      order: int = 1, quiet: bool = False) -> int:
    codes = []
    table = []
    for name in kinds:
        kind = ThresholdKind.parse(name)
        cfg = parse_config({"schema_version": 1, "n_lat": n_lat, "order": order,
                            "potential": {"kind": "fixture", "fixture": kind.value, "seed": seed}})
        p = generate_fixture(kind, seed)
        _, _, checks, notes = run_pipeline(p, cfg, Path(out) / kind.value)
        code = exit_code(checks, notes)
        codes.append(code)
        failed = [c.name for c in checks if not c.passed]
        table.append((kind.value, seed, "PASS" if not failed else "FAIL", len(checks), ";".join(failed), len(notes)))
        _print_checks(f"{kind.value} (seed {seed})", checks, quiet)
    io.write_rows_csv(Path(out) / "fixture_summary.csv",
                      ["kind", "seed", "status", "checks", "failed", "warnings"], table)
    if not quiet:
        print()
        for row in table:
            print(f"{row[0]:<12s} {row[2]}  ({row[3]} checks)")
    if EXIT_FAIL in codes:
        return EXIT_FAIL
    return EXIT_WARN if EXIT_WARN in codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfline-threshold", description=__doc__.split("\n")[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="analyze the potential described by a config file")
    a.add_argument("--config", required=True)
    a.add_argument("--out", default=None)
    f = sub.add_parser("fixtures", help="run the pipeline on generated fixtures")
    f.add_argument("--kinds", default="Regular,FirstKind,SecondKind,ThirdKind")
    f.add_argument("--out", default="fixtures_out")
    f.add_argument("--n-lat", type=int, default=400)
    f.add_argument("--order", type=int, default=1)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "analyze":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if cfg.potential.kind == "fixture" and args.seed:
            cfg.potential.seed = args.seed
        return run_analysis(cfg, Path(args.out) if args.out else None, args.quiet)
    try:
        kinds = [ThresholdKind.parse(k).value for k in args.kinds.split(",") if k.strip()]
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_fixture_suite(kinds, Path(args.out), args.seed, args.n_lat, args.order, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
