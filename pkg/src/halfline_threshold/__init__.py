"""Threshold analysis of finite-rank perturbations of the discrete half-line Laplacian."""

from .expansion import ExpansionResult, closed_form_G, expand_resolvent, reconcile, verify_HG_identities
from .free import free_coeff, free_coeff_series, free_resolvent_kernel, g00_row_formula, numeric_free_coeff
from .lattice import LatticeKernel, LatticeVector, apply_H0, make_n_seq, make_one_seq, weighted_op_norm
from .potential import (
    FactoredPotential,
    boundary_condition_potential,
    empty_potential,
    local_potential,
    rank_k_potential,
    sum_potentials,
)
from .series import MatrixSeries, jn_invert, jn_reduce, pseudo_inverse, series_invert_regular
from .threshold import (
    ThresholdKind,
    ThresholdReport,
    analyze,
    canonical_resonance,
    classify,
    compute_M_series,
    eigenspace_bases,
    generate_fixture,
)
from .verification import SlopeFit, dense_resolvent, fit_error_order, null_space_search

__version__ = "0.1.0"
