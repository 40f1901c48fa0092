"""LDL factorization Sigma = L diag(s2) L' of visit covariance matrices.

Row j of U = L^{-1} holds the negated coefficients of the regression of
visit j on visits 1..j-1, so the factors double as the sequential
regression parameters of the model. Visit order is never permuted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidModelError, NotPositiveDefiniteError

# Pivot must exceed this fraction of the largest diagonal entry.
PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class LdlFactors:
    L: np.ndarray  # (p, p) unit lower triangular
    innovations: np.ndarray  # (p,) sigma^2_1..sigma^2_p

    @property
    def p(self) -> int:
        return self.innovations.shape[0]

    @property
    def U(self) -> np.ndarray:
        return unit_lower_inverse(self.L)

    @property
    def betas(self) -> list[np.ndarray]:
        """beta_j for j = 1..p (beta_1 is empty)."""
        U = self.U
        return [-U[j, :j].copy() for j in range(self.p)]

    def compose(self) -> np.ndarray:
        return ldl_compose(self)


def unit_lower_inverse(L: np.ndarray) -> np.ndarray:
    p = L.shape[0]
    return solve_triangular(L, np.eye(p), lower=True, unit_diagonal=True)


def ldl_compose(factors: LdlFactors) -> np.ndarray:
    L = factors.L
    S = (L * factors.innovations) @ L.T
    return 0.5 * (S + S.T)


def ldl_decompose(sigma) -> LdlFactors:
    """Sequential-pivot LDL' without pivoting.

    Raises NotPositiveDefiniteError when a pivot falls below
    PIVOT_TOL times the largest diagonal entry.
    """
    A = np.array(sigma, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("sigma must be a square matrix")
    p = A.shape[0]
    scale = np.max(np.abs(np.diag(A))) if p else 0.0
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * max(scale, 1.0)):
        raise NotPositiveDefiniteError("matrix is not symmetric")
    L = np.eye(p)
    d = np.zeros(p)
    for j in range(p):
        d[j] = A[j, j] - np.dot(L[j, :j] ** 2, d[:j])
        if not d[j] > PIVOT_TOL * scale:
            raise NotPositiveDefiniteError(f"pivot {j + 1} is {d[j]:.3g}")
        for i in range(j + 1, p):
            L[i, j] = (A[i, j] - np.dot(L[i, :j] * L[j, :j], d[:j])) / d[j]
    return LdlFactors(L=L, innovations=d)


def factors_from_regressions(betas, innovations) -> LdlFactors:
    """Build factors from regression rows beta_j and innovation variances."""
    s2 = np.asarray(innovations, dtype=float)
    p = s2.shape[0]
    U = np.eye(p)
    for j, b in enumerate(betas):
        b = np.asarray(b, dtype=float)
        if b.shape != (j,):
            raise ValueError(f"beta_{j + 1} must have length {j}")
        U[j, :j] = -b
    return LdlFactors(L=unit_lower_inverse(U), innovations=s2)


def cs_factors(h: float, rho: float, p: int) -> LdlFactors:
    """Closed-form factors of the compound symmetry matrix h[(1-rho)I + rho 11']."""
    _check_variance(h)
    if p < 1:
        raise InvalidModelError("p must be positive")
    if not -1.0 < rho < 1.0 or (p > 1 and rho <= -1.0 / (p - 1)):
        raise InvalidModelError(f"rho={rho} is not a valid CS correlation for p={p}")
    # every entry below the diagonal in column k (0-based) is rho / (1 + k rho)
    col = rho / (1.0 + np.arange(p) * rho)
    L = np.eye(p)
    s2 = np.empty(p)
    s2[0] = h
    for k in range(1, p):
        L[k:, k - 1] = col[k - 1]
        s2[k] = s2[k - 1] * (1.0 - col[k - 1] ** 2)
    return LdlFactors(L=L, innovations=s2)


def ar1_factors(h: float, rho: float, p: int) -> LdlFactors:
    """Closed-form factors of the AR(1) matrix h * rho^|j-k|."""
    _check_variance(h)
    if p < 1:
        raise InvalidModelError("p must be positive")
    if not -1.0 < rho < 1.0:
        raise InvalidModelError(f"rho={rho} is not a valid AR(1) correlation")
    lag = np.subtract.outer(np.arange(p), np.arange(p))
    L = np.where(lag >= 0, float(rho) ** np.maximum(lag, 0), 0.0)
    s2 = np.full(p, h * (1.0 - rho * rho))
    s2[0] = h
    return LdlFactors(L=L, innovations=s2)


def _check_variance(h):
    if not h > 0:
        raise InvalidModelError(f"variance must be positive, got {h}")
