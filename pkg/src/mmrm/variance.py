"""Variance estimators for the last-visit fixed effects alpha_p.

phi      plug-in variance assuming known covariance parameters
psi      extra variance from estimating the regression rows beta_j
psi_star bias of the plug-in phi
kr       Kenward-Roger estimate phi + psi - psi_star
delta    delta-method propagation of var(theta_j)

var(beta_j) is taken from the expected information by default, which
makes psi_star = -psi and kr = phi + 2 psi.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .errors import SingularCovariateScatterError
from .reml import MmrmFit, ScaleMode


class InfoMode(enum.Enum):
    EXPECTED = "expected"
    OBSERVED = "observed"


@dataclass(frozen=True, eq=False)
class VarianceReport:
    phi: np.ndarray
    psi: np.ndarray
    psi_star: np.ndarray
    kr: np.ndarray
    delta: np.ndarray
    asymptotic: np.ndarray  # (pq, pq)
    info_mode: InfoMode
    tau_index: int

    def se(self, which: str) -> float:
        """Standard error of tau_p under 'asymptotic', 'kr' or 'delta'."""
        k = self.tau_index
        if which == "asymptotic":
            return float(np.sqrt(self.phi[k, k]))
        return float(np.sqrt(getattr(self, which)[k, k]))


@dataclass(frozen=True)
class WaldResult:
    estimate: float
    se: float
    df: float
    statistic: float
    p_value: float


def _sym(A):
    return 0.5 * (A + A.T)


def beta_variance(fit: MmrmFit, j: int, info_mode: InfoMode = InfoMode.EXPECTED) -> np.ndarray:
    """var(beta_hat_j) for visit j >= 2 (1-based)."""
    v = fit.visits[j - 1]
    s2 = fit.factors.innovations[j - 1]
    if InfoMode(info_mode) is InfoMode.OBSERVED:
        return s2 * v.yqy_inv
    sig = fit.sigma_hat[: j - 1, : j - 1]
    return s2 / (v.nj - fit.q) * np.linalg.inv(sig)


def omegas(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED) -> list[np.ndarray]:
    """omega_j = diag(L_{j-1}' var(beta_j) L_{j-1}); empty for j = 1."""
    L = fit.factors.L
    out = [np.zeros(0)]
    for j in range(2, fit.p + 1):
        Lj = L[: j - 1, : j - 1]
        out.append(np.einsum("ti,tu,ui->i", Lj, beta_variance(fit, j, info_mode), Lj))
    return out


def asymptotic_variance(fit: MmrmFit) -> np.ndarray:
    """(L kron I_q) diag(sigma_j^2 (X_oj'X_oj)^{-1}) (L' kron I_q)."""
    q, p = fit.q, fit.p
    Vw = np.zeros((p * q, p * q))
    for j, v in enumerate(fit.visits):
        Vw[j * q : (j + 1) * q, j * q : (j + 1) * q] = fit.factors.innovations[j] * v.xx_inv
    K = np.kron(fit.factors.L, np.eye(q))
    return _sym(K @ Vw @ K.T)


def phi_p(fit: MmrmFit) -> np.ndarray:
    w = fit.factors.L[-1] ** 2 * fit.factors.innovations
    return _sym(sum(wj * v.xx_inv for wj, v in zip(w, fit.visits)))


def psi_p(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED) -> np.ndarray:
    lp2 = fit.factors.L[-1] ** 2
    s2 = fit.factors.innovations
    om = omegas(fit, info_mode)
    out = np.zeros((fit.q, fit.q))
    for j in range(1, fit.p):
        xj = fit.visits[j].xx_inv
        Vd = sum(om[j][t] * s2[t] * (xj - fit.visits[t].xx_inv) for t in range(j))
        out += lp2[j] * Vd
    return _sym(out)


def psi_star(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED) -> np.ndarray:
    lp2 = fit.factors.L[-1] ** 2
    s2 = fit.factors.innovations
    om = omegas(fit, info_mode)
    out = np.zeros((fit.q, fit.q))
    for j in range(1, fit.p):
        v = fit.visits[j]
        for t in range(j):
            out += lp2[j] * om[j][t] * s2[t] * fit.visits[t].xx_inv
        out -= j / (v.nj - fit.q) * s2[j] * lp2[j] * v.xx_inv
    return _sym(out)


def kr_variance(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED) -> np.ndarray:
    return phi_p(fit) + psi_p(fit, info_mode) - psi_star(fit, info_mode)


def _delta_scale(fit, scale):
    return np.array([v.sigma2(scale) for v in fit.visits])


def delta_variance(fit: MmrmFit, scale: ScaleMode = ScaleMode.LS) -> np.ndarray:
    """sum_j l_pj^2 s2_j A_j (Z_oj'Z_oj)^{-1} A_j' with A_j = (I_q, alpha_1..alpha_{j-1}).

    The innovation variances come from `scale` (least squares by default).
    """
    s2 = _delta_scale(fit, scale)
    lp2 = fit.factors.L[-1] ** 2
    out = np.zeros((fit.q, fit.q))
    for j, v in enumerate(fit.visits):
        A = np.hstack([np.eye(fit.q), fit.alpha[:, :j]])
        out += lp2[j] * s2[j] * A @ v.zz_inv @ A.T
    return _sym(out)


def delta_variance_decomposed(fit: MmrmFit, scale: ScaleMode = ScaleMode.LS) -> np.ndarray:
    """Same quantity via the partitioned inverse of Z'Z.

    sum_j l_pj^2 s2_j (X'X)^{-1} + sum_{j>=2} l_pj^2 (A_j - eta_j) V_beta_j (A_j - eta_j)'
    where eta_j = (X'X)^{-1} X' Yvec and V_beta_j = s2_j (Yvec' Q Yvec)^{-1}.
    """
    s2 = _delta_scale(fit, scale)
    lp2 = fit.factors.L[-1] ** 2
    out = np.zeros((fit.q, fit.q))
    for j, v in enumerate(fit.visits):
        out += lp2[j] * s2[j] * v.xx_inv
        if j:
            B = fit.alpha[:, :j] - v.eta
            out += lp2[j] * B @ (s2[j] * v.yqy_inv) @ B.T
    return _sym(out)


def covariate_vx(fit: MmrmFit) -> np.ndarray:
    """V_xj = 1/n_1j + 1/n_0j + Delta_j' S_xj^{-1} Delta_j, from the raw covariates."""
    data = fit.data
    out = np.empty(fit.p)
    for j in range(1, fit.p + 1):
        m = int(data.visit_counts[j - 1])
        g = data.group[:m]
        xb = data.covariates[:m]
        n1, n0 = int(g.sum()), int(m - g.sum())
        if n1 == 0 or n0 == 0:
            raise SingularCovariateScatterError(f"visit {j} has an empty arm")
        vx = 1.0 / n1 + 1.0 / n0
        if data.qstar:
            m1, m0 = xb[g == 1].mean(axis=0), xb[g == 0].mean(axis=0)
            c = np.where(g[:, None] == 1, xb - m1, xb - m0)
            Sx = c.T @ c
            sv = np.linalg.svd(Sx, compute_uv=False)
            if sv[-1] <= 1e-10 * sv[0]:
                raise SingularCovariateScatterError(f"covariate scatter at visit {j} is singular")
            d = m1 - m0
            vx += float(d @ np.linalg.solve(Sx, d))
        out[j - 1] = vx
    return out


def treatment_variance_components(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED):
    """(var(tau_hat_p), V_x per visit) from the scalar covariate terms.

    The variance is the (q, q) entry of phi + psi, not the KR estimate.
    """
    vx = covariate_vx(fit)
    lp2 = fit.factors.L[-1] ** 2
    s2 = fit.factors.innovations
    om = omegas(fit, info_mode)
    var = float(np.sum(lp2 * s2 * vx))
    for j in range(1, fit.p):
        var += lp2[j] * sum(om[j][t] * s2[t] * (vx[j] - vx[t]) for t in range(j))
    return var, vx


def fitted_df(fit: MmrmFit) -> float:
    """Denominator d.f. (n_1 - q) f_o with f_o from the fitted factors.

    f_o = (sum_j w_j) V_x1 / sum_j w_j V_xj, w_j = l_pj^2 sigma_j^2.
    """
    w = fit.factors.L[-1] ** 2 * fit.factors.innovations
    vx = np.array([v.xx_inv[-1, -1] for v in fit.visits])
    fo = w.sum() * vx[0] / np.dot(w, vx)
    return float((fit.visits[0].nj - fit.q) * fo)


def variance_report(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED) -> VarianceReport:
    info_mode = InfoMode(info_mode)
    phi = phi_p(fit)
    psi = psi_p(fit, info_mode)
    pstar = psi_star(fit, info_mode)
    return VarianceReport(
        phi=phi,
        psi=psi,
        psi_star=pstar,
        kr=phi + psi - pstar,
        delta=delta_variance(fit),
        asymptotic=asymptotic_variance(fit),
        info_mode=info_mode,
        tau_index=fit.q - 1,
    )


def wald_test(fit: MmrmFit, info_mode: InfoMode = InfoMode.EXPECTED, df=None) -> WaldResult:
    """Two-sided t test of tau_p = 0 with the KR standard error."""
    k = fit.q - 1
    var = kr_variance(fit, info_mode)[k, k]
    est = float(fit.tau_hat[-1])
    se = float(np.sqrt(var))
    f = fitted_df(fit) if df is None else float(df)
    t = est / se
    pval = float(2.0 * stdtr(f, -abs(t)))
    return WaldResult(estimate=est, se=se, df=f, statistic=t, p_value=pval)
