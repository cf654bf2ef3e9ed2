"""Specification tests for regression models with a mismeasured regressor.

The test compares a deconvoluted, projection-corrected residual-marked
empirical process with zero, using Kolmogorov-Smirnov and Cramer-von Mises
functionals and multiplier-bootstrap critical values.
"""

from .eiv import AlsFit, ParametricModel, als_fit, corrected_monomial
from .engine import TestConfig, TestResult, bootstrap_distribution, run_test
from .error_model import Estimated, ErrorMoments, KnownGaussian, KnownLaplace
from .errors import (
    DeconvoSpecError,
    InputShapeMismatch,
    QuadratureNonConvergence,
    SingularDesign,
    UnstableDeconvolution,
)
from .kernel import DeconvKernelSpec, MomentTable, bandwidth_rot, flattop_ft, moment_table
from .projection import Sample, XiGrid, build_projection, projected_psi, s_pro
from .simulation import DgpSpec, McReport, run_mc_cell, run_table, simulate_dgp

__version__ = "0.1.0"

__all__ = [
    "AlsFit",
    "DeconvKernelSpec",
    "DeconvoSpecError",
    "DgpSpec",
    "ErrorMoments",
    "Estimated",
    "InputShapeMismatch",
    "KnownGaussian",
    "KnownLaplace",
    "McReport",
    "MomentTable",
    "ParametricModel",
    "QuadratureNonConvergence",
    "Sample",
    "SingularDesign",
    "TestConfig",
    "TestResult",
    "UnstableDeconvolution",
    "XiGrid",
    "als_fit",
    "bandwidth_rot",
    "bootstrap_distribution",
    "build_projection",
    "corrected_monomial",
    "flattop_ft",
    "moment_table",
    "projected_psi",
    "run_mc_cell",
    "run_table",
    "run_test",
    "s_pro",
    "simulate_dgp",
]
