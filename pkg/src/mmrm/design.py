"""Design-stage power and sample size for the KR-adjusted Wald t test.

Covariate imbalance at visit t is replaced by its expectation, giving
E(V_xt) = varpi_xt(n) / n with

    varpi_xt(n) = varpi_pi_t (1 + qstar / (n pibar_t - q - 1))

and var(tau_hat_p) ~ varpi_tau(n) / n. Sizes come from a normal
approximation (n_l) refined once with t quantiles at d.f. f(n_l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DesignSpec
from .errors import DegenerateDesignError, InfeasibleError
from .statdist import NoncentralT, normal_quantile, t_cdf, t_quantile

MAX_N = 10_000_000
SMALL_DF = 12.0


@dataclass(frozen=True)
class PowerResult:
    n: int
    lambda_sqrt_n: float
    df: float
    power_exact: float
    power_approx: float
    varpi_tau: float
    varpi_x: np.ndarray
    variance_at: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambdaSqrtN": self.lambda_sqrt_n,
            "df": self.df,
            "powerExact": self.power_exact,
            "powerApprox": self.power_approx,
            "varpiTau": self.varpi_tau,
            "varpiX": self.varpi_x.tolist(),
            "varianceAt": self.variance_at,
        }


@dataclass(frozen=True)
class SampleSizePlan:
    nl: int
    nu: float
    nu_star: float
    final: int
    nominal_power: float
    per_arm: tuple
    used_bisection: bool
    df_nl: float

    def to_dict(self) -> dict:
        return {
            "nl": self.nl,
            "nu": self.nu,
            "nuStar": self.nu_star,
            "final": self.final,
            "nominalPower": self.nominal_power,
            "perArm": list(self.per_arm),
            "usedBisection": self.used_bisection,
            "dfNl": self.df_nl,
        }


def varpi_x(n: float, spec: DesignSpec) -> np.ndarray:
    """n E(V_xt) for every visit, including the imbalance term when D > 0."""
    pibar = spec.pooled_retention
    resid = n * pibar - spec.q - 1
    if (resid <= 0).any():
        t = int(np.argmax(resid <= 0)) + 1
        raise DegenerateDesignError(f"n={n} leaves no residual d.f. at visit {t}")
    out = spec.varpi_pi * (1.0 + spec.qstar / resid)
    if spec.imbalance_d:
        out = out + n * spec.imbalance_d / resid
    return out


def expected_vx(n: float, spec: DesignSpec, t: int) -> float:
    """E(V_xt) at visit t (1-based)."""
    return float(varpi_x(n, spec)[t - 1] / n)


def varpi_tau(n: float, spec: DesignSpec) -> float:
    w = spec.last_row_weights
    vx = varpi_x(n, spec)
    pibar = spec.pooled_retention
    out = float(np.dot(w, vx))
    for j in range(1, spec.p):
        out += w[j] * float(np.sum(vx[j] - vx[:j])) / (n * pibar[j] - spec.q)
    return out


def varpi_tau_star(spec: DesignSpec) -> float:
    return float(np.dot(spec.last_row_weights, spec.varpi_pi))


def covariate_term(spec: DesignSpec, tail: str = "auto") -> float:
    """qstar sum_j b_j / pibar_j, or its simplification qstar / pibar_p.

    'auto' uses the full sum only when pibar_p < 0.5.
    """
    pibar = spec.pooled_retention
    if tail == "auto":
        tail = "full" if pibar[-1] < 0.5 else "simple"
    if tail == "full":
        b = spec.last_row_weights * spec.varpi_pi / varpi_tau_star(spec)
        return float(spec.qstar * np.sum(b / pibar))
    if tail == "simple":
        return float(spec.qstar / pibar[-1])
    raise ValueError(f"unknown tail mode {tail!r}")


def design_df(n: float, spec: DesignSpec) -> float:
    """f(n) = (n pibar_1 - q) f_o, f_o from the retention-based approximation."""
    w = spec.last_row_weights
    vp = spec.varpi_pi
    base = n * spec.pooled_retention[0] - spec.q
    if base <= 0:
        raise DegenerateDesignError(f"n={n} gives no d.f.")
    fo = w.sum() * vp[0] / np.dot(w, vp)
    return float(base * fo)


def power_exact(n: int, spec: DesignSpec, variance_at: Optional[float] = None) -> PowerResult:
    """Two-sided power at total size n.

    varpi_tau is evaluated at `variance_at` (default n); the d.f. always
    use n. Both rejection tails are kept in power_exact; power_approx is
    the one-tail central-t approximation.
    """
    m = n if variance_at is None else variance_at
    wt = varpi_tau(m, spec)
    f = design_df(n, spec)
    ncp = spec.tau / math.sqrt(wt / n)
    crit = t_quantile(1.0 - spec.alpha / 2.0, f)
    dist = NoncentralT(f, ncp)
    exact = dist.sf(crit) + dist.cdf(-crit)
    approx = t_cdf(abs(ncp) - crit, f)
    return PowerResult(
        n=int(n),
        lambda_sqrt_n=ncp,
        df=f,
        power_exact=float(exact),
        power_approx=float(approx),
        varpi_tau=wt,
        varpi_x=varpi_x(n, spec),
        variance_at=float(m),
    )


def _nl_real(spec: DesignSpec, tail: str) -> float:
    z = normal_quantile(1.0 - spec.alpha / 2.0) + normal_quantile(spec.target_power)
    return z * z * varpi_tau_star(spec) / spec.tau**2 + covariate_term(spec, tail)


def size_normal_approx(spec: DesignSpec, tail: str = "auto") -> int:
    """Step-1 size n_l, rounded up."""
    if spec.tau == 0:
        raise InfeasibleError("no sample size detects a zero effect")
    return math.ceil(_nl_real(spec, tail))


def per_arm(n: int, allocation) -> tuple:
    """(n_0, n_1); with equal allocation the arms differ by at most one."""
    n1 = int(math.floor(n * allocation[1] + 0.5))
    return (n - n1, n1)


def _min_valid_n(spec: DesignSpec) -> int:
    pmin = float(spec.pooled_retention.min())
    return max(spec.q + 2, int(math.floor((spec.q + 1) / pmin)) + 1)


def size_by_bisection(spec: DesignSpec, start: int) -> int:
    """Smallest n whose power (variance at n) reaches the target."""
    target = spec.target_power

    def ok(n):
        return power_exact(n, spec).power_exact >= target

    lo = _min_valid_n(spec)
    if ok(lo):
        return lo
    hi = max(4 * start, 200, lo + 1)
    while not ok(hi):
        lo = hi
        hi *= 2
        if hi > MAX_N:
            raise InfeasibleError(f"target power not reached for n <= {MAX_N}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def size_two_step(
    spec: DesignSpec,
    tail: str = "auto",
    nl_offset: int = 0,
    bisection_below: Optional[float] = SMALL_DF,
) -> SampleSizePlan:
    """Two-step sample size.

    n_l is the rounded normal-approximation size (plus `nl_offset`);
    n_u and n_u* refine it with t quantiles at f(n_l). The plan size is
    ceil(n_u) and its nominal power uses varpi_tau(n_l). When f(n_l) is
    below `bisection_below` the size is instead the smallest n whose
    exact power reaches the target; pass None to always use n_u.
    """
    nl = size_normal_approx(spec, tail) + nl_offset
    f = design_df(nl, spec)
    tt = t_quantile(1.0 - spec.alpha / 2.0, f) + t_quantile(spec.target_power, f)
    wt_nl = varpi_tau(nl, spec)
    nu = tt * tt * wt_nl / spec.tau**2
    nu_star = tt * tt * varpi_tau_star(spec) / spec.tau**2 + covariate_term(spec, tail)
    if bisection_below is not None and f < bisection_below:
        final = size_by_bisection(spec, nl)
        power = power_exact(final, spec).power_exact
        used = True
    else:
        final = math.ceil(nu)
        if final > MAX_N:
            raise InfeasibleError(f"required size exceeds {MAX_N}")
        power = power_exact(final, spec, variance_at=nl).power_exact
        used = False
    return SampleSizePlan(
        nl=nl,
        nu=float(nu),
        nu_star=float(nu_star),
        final=final,
        nominal_power=power,
        per_arm=per_arm(final, spec.allocation),
        used_bisection=used,
        df_nl=f,
    )
