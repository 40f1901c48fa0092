"""Normal and t distribution functions needed by the power calculations.

Quantiles of the normal and central t come from scipy's special
functions. The noncentral t CDF is computed here from the mixture
representation

    F(x; f, d) = Phi(-d) + 1/2 sum_j [P_j I_y(j + 1/2, f/2) + d/sqrt(2) Q_j I_y(j + 1, f/2)]

for x >= 0, with y = x^2/(f + x^2), P_j = e^{-l} l^j / j!,
Q_j = e^{-l} l^j / Gamma(j + 3/2), l = d^2/2. The sum runs over a window
around the Poisson mode, so large noncentralities do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln, ndtr, ndtri, stdtr, stdtrit

from .errors import DomainError, NonConvergenceError

MAX_TERMS = 10_000
TAIL_TOL = 1e-12


def normal_cdf(x):
    return ndtr(x)


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return float(ndtri(p))


def t_cdf(x: float, df: float) -> float:
    if not df > 0:
        raise DomainError(f"df must be positive, got {df}")
    return float(stdtr(df, x))


def t_quantile(p: float, df: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if not df > 0:
        raise DomainError(f"df must be positive, got {df}")
    return float(stdtrit(df, p))


@dataclass(frozen=True)
class NoncentralT:
    df: float
    ncp: float

    def __post_init__(self):
        if not self.df > 0:
            raise DomainError(f"df must be positive, got {self.df}")

    def cdf(self, x: float) -> float:
        return noncentral_t_cdf(x, self)

    def sf(self, x: float) -> float:
        """P(T >= x), computed through the reflected CDF to keep tail accuracy."""
        return noncentral_t_cdf(-x, NoncentralT(self.df, -self.ncp))


def _cdf_nonneg(x: float, f: float, d: float) -> float:
    lam = 0.5 * d * d
    mode = int(lam)
    half = int(np.ceil(10.0 * np.sqrt(lam) + 40.0))
    lo = max(0, mode - half)
    hi = mode + half
    if hi - lo + 1 > MAX_TERMS:
        raise NonConvergenceError(f"noncentral t series needs more than {MAX_TERMS} terms")
    j = np.arange(lo, hi + 1, dtype=float)
    if lam > 0:
        loglam = np.log(lam)
        logp = -lam + j * loglam - gammaln(j + 1.0)
        logq = -lam + j * loglam - gammaln(j + 1.5)
    else:
        logp = np.where(j == 0, 0.0, -np.inf)
        logq = np.where(j == 0, -gammaln(1.5), -np.inf)
    P = np.exp(logp)
    if 1.0 - P.sum() > TAIL_TOL:
        raise NonConvergenceError("Poisson weights not captured by the summation window")
    Q = np.exp(logq)
    y = x * x / (f + x * x)
    if y == 0.0:
        return float(ndtr(-d))
    terms = P * betainc(j + 0.5, 0.5 * f, y) + (d / np.sqrt(2.0)) * Q * betainc(j + 1.0, 0.5 * f, y)
    out = ndtr(-d) + 0.5 * terms.sum()
    return float(min(max(out, 0.0), 1.0))


def noncentral_t_cdf(x: float, dist: NoncentralT) -> float:
    """P(t(f, nu) <= x)."""
    if x >= 0:
        return _cdf_nonneg(float(x), dist.df, dist.ncp)
    return 1.0 - _cdf_nonneg(float(-x), dist.df, -dist.ncp)


def sample_noncentral_t(rng: np.random.Generator, df: float, ncp: float, size) -> np.ndarray:
    """Draws of (Z + ncp) / sqrt(chi2_df / df)."""
    z = rng.standard_normal(size)
    c = rng.chisquare(df, size)
    return (z + ncp) / np.sqrt(c / df)
