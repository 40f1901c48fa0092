"""Closed-form REML fitting, KR variance and sample size for the MMRM under monotone dropout."""

from .config import DesignSpec, load_design
from .covariance import AR1, CompoundSymmetry, Toeplitz, Unstructured, materialize_covariance
from .data import MonotoneDataset, MonotoneStrategy, SubjectRecord, monotonize, read_csv, validate_monotone
from .design import power_exact, size_normal_approx, size_two_step
from .ldl import LdlFactors, ar1_factors, cs_factors, ldl_compose, ldl_decompose
from .reml import MmrmFit, ScaleMode, VisitFit, fit_mmrm, fit_visit, restricted_loglik
from .variance import InfoMode, kr_variance, variance_report, wald_test

__version__ = "0.1.0"
