"""Built-in four-visit, two-arm trial scenarios used by the tables and simulations."""

from __future__ import annotations

import numpy as np

from .config import DesignSpec
from .covariance import AR1, CompoundSymmetry, Toeplitz, Unstructured
from .simulate import Distribution, GenerationSpec

SIGMA_UN = np.array(
    [
        [19.68, 16.45, 15.39, 16.36],
        [16.45, 34.00, 25.34, 26.13],
        [15.39, 25.34, 38.44, 33.91],
        [16.36, 26.13, 33.91, 45.28],
    ]
)

COVARIANCES = {
    "unstructured": Unstructured(SIGMA_UN),
    "cs": CompoundSymmetry(h=45.0, rho=1.0 / 3.0),
    "ar1": AR1(h=45.0, rho=0.8),
    "toeplitz": Toeplitz((40.0, 34.0, 28.0, 22.0)),
}

STRUCTURES = ("unstructured", "cs", "ar1", "toeplitz")
EFFECTS = (-12.0, -8.0, -4.0)

RETENTION = np.array([[1.0, 0.92, 0.86, 0.74], [1.0, 0.93, 0.87, 0.76]])

INTERCEPT = (3.3, 2.7, 2.9, 1.0)
BASELINE_COEF = (0.72, 0.69, 0.61, 0.67)
EARLY_EFFECTS = (0.1, -1.5, -2.3)
BASELINE_MEAN, BASELINE_SD = 17.9, 5.5

# second scenario: three-level prognostic factor shifting baseline and outcomes
STRATA_PROBS = (0.3, 0.4, 0.3)
STRATA_EFFECTS = (0.0, -0.5, 0.5)

# qstar per scenario: baseline only, or baseline + two factor indicators
SCENARIO_QSTAR = {1: 1, 2: 3}


def design(structure: str, tau: float, scenario: int = 1, alpha=0.05, target_power=0.9) -> DesignSpec:
    return DesignSpec(
        p=4,
        allocation=(0.5, 0.5),
        retention=RETENTION,
        cov_model=COVARIANCES[structure],
        tau=tau,
        alpha=alpha,
        target_power=target_power,
        qstar=SCENARIO_QSTAR[scenario],
    )


def generator(structure: str, tau: float, scenario: int = 1, distribution: Distribution = Distribution()) -> GenerationSpec:
    strata = scenario == 2
    return GenerationSpec(
        intercept=INTERCEPT,
        baseline_coef=BASELINE_COEF,
        treatment=(*EARLY_EFFECTS, tau),
        cov_model=COVARIANCES[structure],
        retention=RETENTION,
        allocation=(0.5, 0.5),
        baseline_mean=BASELINE_MEAN,
        baseline_sd=BASELINE_SD,
        distribution=distribution,
        strata_probs=STRATA_PROBS if strata else None,
        strata_effects=STRATA_EFFECTS if strata else None,
    )


def table_rows(scenario: int):
    """(structure, tau) in table order."""
    return [(s, t) for s in STRUCTURES for t in EFFECTS]
