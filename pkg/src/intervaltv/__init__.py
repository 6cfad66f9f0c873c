"""Interval-constrained total-variation regularisation for 1-D inverse problems.

The package solves deconvolution-type problems where both the data and the
forward operator are known only through elementwise lower/upper bounds.  It
provides the order-constrained primal solver with dual certificates, bound
schedules and convergence diagnostics, level-set analysis, two-step debiasing
with pointwise error bars, and the classical comparison baselines, all backed
by a self-contained dense simplex engine.
"""

__version__ = "0.1.0"

from .signals import Grid, IndexSet, Signal, hausdorff, l1_norm, linf_norm, psnr, ssim_1d, tv
from .operators import (
    DenseOperator,
    IntervalData,
    IntervalOperator,
    adjoint_apply,
    apply,
    check_assumption5,
    data_bounds,
    gaussian_convolution,
    interval_from_noisy,
    perturb_operator,
)
from .regularizers import Regularizer, bregman, in_subdiff_at, in_subdiff_zero, symm_bregman, value
from .solver import feasible_l1_bound, min_norm_certificate, solve_primal

__all__ = [
    "__version__",
    "Grid",
    "Signal",
    "IndexSet",
    "tv",
    "l1_norm",
    "linf_norm",
    "psnr",
    "ssim_1d",
    "hausdorff",
    "DenseOperator",
    "IntervalOperator",
    "IntervalData",
    "gaussian_convolution",
    "perturb_operator",
    "interval_from_noisy",
    "data_bounds",
    "check_assumption5",
    "apply",
    "adjoint_apply",
    "Regularizer",
    "value",
    "in_subdiff_zero",
    "in_subdiff_at",
    "bregman",
    "symm_bregman",
    "solve_primal",
    "min_norm_certificate",
    "feasible_l1_bound",
]
