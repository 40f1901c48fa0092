"""Closed-form LS/ML/REML fit of the MMRM under monotone missingness.

The likelihood factors into p independent regressions: visit j is
regressed on z = (x', y_1, ..., y_{j-1})' over the n_j subjects still
observed at j. The coefficients theta_j = (alpha_underbar_j', beta_j')'
are shared by all three estimators; only the residual scale differs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import MonotoneDataset
from .errors import DimensionMismatchError, InsufficientRowsError, RankDeficientError
from .ldl import LdlFactors, factors_from_regressions

# Singular values below RANK_TOL * largest count as zero.
RANK_TOL = 1e-10


class ScaleMode(enum.Enum):
    LS = "ls"
    ML = "ml"
    REML = "reml"


@dataclass(frozen=True, eq=False)
class VisitFit:
    j: int
    theta: np.ndarray  # (q + j - 1,)
    S: float  # residual sum of squares
    nj: int
    q: int
    zz_inv: np.ndarray  # (Z'Z)^{-1}
    xx_inv: np.ndarray  # (X'X)^{-1} over the same rows
    eta: np.ndarray  # (q, j-1) = (X'X)^{-1} X' Yvec

    @property
    def alpha_under(self) -> np.ndarray:
        return self.theta[: self.q]

    @property
    def beta(self) -> np.ndarray:
        return self.theta[self.q :]

    @property
    def sigma2_ls(self) -> float:
        return self.S / (self.nj - self.q - self.j + 1)

    @property
    def sigma2_ml(self) -> float:
        return self.S / self.nj

    @property
    def sigma2_reml(self) -> float:
        return self.S / (self.nj - self.q)

    def sigma2(self, mode: ScaleMode) -> float:
        mode = ScaleMode(mode)
        if mode is ScaleMode.LS:
            return self.sigma2_ls
        if mode is ScaleMode.ML:
            return self.sigma2_ml
        return self.sigma2_reml

    @property
    def yqy_inv(self) -> np.ndarray:
        """(Yvec' Q Yvec)^{-1}, the lower-right block of zz_inv."""
        return self.zz_inv[self.q :, self.q :]


@dataclass(frozen=True, eq=False)
class MmrmFit:
    data: MonotoneDataset
    visits: tuple
    factors: LdlFactors
    alpha: np.ndarray  # (q, p); column j is alpha_hat_j
    scale_mode: ScaleMode

    @property
    def p(self) -> int:
        return len(self.visits)

    @property
    def q(self) -> int:
        return self.alpha.shape[0]

    @property
    def sigma_hat(self) -> np.ndarray:
        return self.factors.compose()

    @property
    def tau_hat(self) -> np.ndarray:
        """Treatment effect estimate at each visit."""
        return self.alpha[-1]


def _svd_solve(A, visit):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficientError(visit)
    return U, s, Vt


def fit_visit(data: MonotoneDataset, j: int) -> VisitFit:
    """Least-squares fit of y_j on (x, y_1..y_{j-1}) over subjects retained at j."""
    q = data.q
    X, y, Yvec = data.observed_block(j)
    nj = X.shape[0]
    k = q + j - 1
    if nj <= k:
        raise InsufficientRowsError(j, nj, k)
    Z = np.hstack([X, Yvec])
    U, s, Vt = _svd_solve(Z, j)
    theta = Vt.T @ ((U.T @ y) / s)
    resid = y - Z @ theta
    zz_inv = (Vt.T / s**2) @ Vt
    Ux, sx, Vxt = _svd_solve(X, j)
    xx_inv = (Vxt.T / sx**2) @ Vxt
    eta = Vxt.T @ ((Ux.T @ Yvec) / sx[:, None])
    return VisitFit(
        j=j,
        theta=theta,
        S=float(resid @ resid),
        nj=nj,
        q=q,
        zz_inv=0.5 * (zz_inv + zz_inv.T),
        xx_inv=0.5 * (xx_inv + xx_inv.T),
        eta=eta,
    )


def fit_mmrm(data: MonotoneDataset, scale_mode: ScaleMode = ScaleMode.REML) -> MmrmFit:
    scale_mode = ScaleMode(scale_mode)
    visits = tuple(fit_visit(data, j) for j in range(1, data.p + 1))
    factors = factors_from_regressions(
        [v.beta for v in visits], [v.sigma2(scale_mode) for v in visits]
    )
    under = np.column_stack([v.alpha_under for v in visits])
    alpha = under @ factors.L.T
    return MmrmFit(data=data, visits=visits, factors=factors, alpha=alpha, scale_mode=scale_mode)


def restricted_loglik(data: MonotoneDataset, factors: LdlFactors) -> float:
    """Sum over visits of the restricted log-likelihood pieces, constant dropped."""
    if factors.p != data.p:
        raise DimensionMismatchError(f"factors have p={factors.p}, data has p={data.p}")
    q = data.q
    total = 0.0
    for j, (beta, s2) in enumerate(zip(factors.betas, factors.innovations), start=1):
        X, y, Yvec = data.observed_block(j)
        r = y - Yvec @ beta if j > 1 else y
        coef, *_ = np.linalg.lstsq(X, r, rcond=None)
        e = r - X @ coef
        total += 0.5 * (q - X.shape[0]) * np.log(s2) - (e @ e) / (2.0 * s2)
    return float(total)


def estimator_bias_reference(sigma2_true: float, j: int, nj: int, q: int):
    """(ML bias, REML bias) of the visit-j innovation variance estimators."""
    if nj <= q + j - 1:
        raise InsufficientRowsError(j, nj, q + j - 1)
    bias_ml = -(q + j - 1) * sigma2_true / nj
    bias_reml = -(j - 1) * sigma2_true / (nj - q)
    return bias_ml, bias_reml
