"""Data generation and replicated KR Wald tests.

Outcomes at visit j are mu_ij + noise_ij with the noise covariance equal
to the target Sigma under all three distributions:

normal       correlated normal with covariance Sigma
t            eps / sqrt(u/d), eps ~ N(0, (d-2)/d Sigma), u ~ chi2_d
skew-normal  sqrt(Sigma_jj / a) (kappa e + sqrt(1 - kappa^2) eps~_j), centred,
             e = |N(0,1)|, eps~ ~ N(0, R2), R2 = (a R - b 11') / (1 - kappa^2),
             a = 1 - 2 kappa^2 / pi, b = (1 - 2/pi) kappa^2

Dropout is MCAR: each subject's pattern is drawn from its arm's
retention curve. Replication i uses a generator seeded by
SeedSequence([seed, i]), so results do not depend on worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import stdtr

from .config import DesignSpec
from .covariance import CovarianceModel, covariance_from_dict, covariance_to_dict, materialize_covariance
from .data import MonotoneDataset
from .design import per_arm
from .errors import InvalidSpecError, MMRMError, NotPositiveDefiniteError, ReplicationFailureError
from .ldl import ldl_decompose
from .reml import fit_mmrm
from .variance import InfoMode, delta_variance, fitted_df, kr_variance, phi_p

MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class Distribution:
    kind: str = "normal"  # normal | t | skew
    df: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("normal", "t", "skew"):
            raise InvalidSpecError(f"unknown distribution {self.kind!r}")
        if self.kind == "t" and not (self.df is not None and self.df > 2):
            raise InvalidSpecError("multivariate t needs df > 2")
        if self.kind == "skew" and not (self.kappa is not None and -1 < self.kappa < 1):
            raise InvalidSpecError("skew-normal needs kappa in (-1, 1)")


@dataclass(frozen=True, eq=False)
class GenerationSpec:
    """Data-generating model for simulated trials.

    Visit-j mean: intercept[j] + baseline_coef[j] * y0 + treatment[j] * g,
    plus the stratum effect when strata are used. With strata, the stratum
    effect also shifts the baseline y0, and the generated covariates are
    (y0, indicators of strata 2..h).
    """

    intercept: np.ndarray
    baseline_coef: np.ndarray
    treatment: np.ndarray
    cov_model: CovarianceModel
    retention: np.ndarray
    allocation: tuple = (0.5, 0.5)
    baseline_mean: float = 0.0
    baseline_sd: float = 1.0
    distribution: Distribution = Distribution()
    strata_probs: Optional[tuple] = None
    strata_effects: Optional[tuple] = None
    sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("intercept", "baseline_coef", "treatment"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "retention", np.asarray(self.retention, dtype=float))
        p = self.intercept.shape[0]
        if self.baseline_coef.shape != (p,) or self.treatment.shape != (p,):
            raise InvalidSpecError("mean model rows must all have length p")
        if self.retention.shape != (2, p):
            raise InvalidSpecError(f"retention must be 2 x {p}")
        if self.retention.max() > 1 or self.retention.min() < 0 or (np.diff(self.retention, axis=1) > 0).any():
            raise InvalidSpecError("retention must be nonincreasing within [0, 1]")
        if (self.strata_probs is None) != (self.strata_effects is None):
            raise InvalidSpecError("strata probabilities and effects go together")
        if self.strata_probs is not None:
            if len(self.strata_probs) != len(self.strata_effects) or len(self.strata_probs) < 2:
                raise InvalidSpecError("need matching strata probabilities and effects")
            if abs(sum(self.strata_probs) - 1) > 1e-9:
                raise InvalidSpecError("strata probabilities must sum to 1")
        object.__setattr__(self, "sigma", materialize_covariance(self.cov_model, p))

    @property
    def p(self) -> int:
        return self.intercept.shape[0]

    @property
    def qstar(self) -> int:
        return 1 if self.strata_probs is None else len(self.strata_probs)

    def with_effect(self, tau: float) -> "GenerationSpec":
        treat = self.treatment.copy()
        treat[-1] = tau
        return self.replace(treatment=treat)

    def with_distribution(self, dist: Distribution) -> "GenerationSpec":
        return self.replace(distribution=dist)

    def replace(self, **changes) -> "GenerationSpec":
        kw = {k: getattr(self, k) for k in (
            "intercept", "baseline_coef", "treatment", "cov_model", "retention", "allocation",
            "baseline_mean", "baseline_sd", "distribution", "strata_probs", "strata_effects")}
        kw.update(changes)
        return GenerationSpec(**kw)

    def design(self, alpha: float = 0.05, target_power: float = 0.9) -> DesignSpec:
        """Matching design spec: same covariance, retention, allocation and effect."""
        return DesignSpec(
            p=self.p, allocation=self.allocation, retention=self.retention,
            cov_model=self.cov_model, tau=float(self.treatment[-1]), alpha=alpha,
            target_power=target_power, qstar=self.qstar,
        )

    def to_dict(self) -> dict:
        d = {
            "intercept": self.intercept.tolist(),
            "baselineCoef": self.baseline_coef.tolist(),
            "treatment": self.treatment.tolist(),
            "covariance": covariance_to_dict(self.cov_model),
            "retention": self.retention.tolist(),
            "allocation": list(self.allocation),
            "baseline": {"mean": self.baseline_mean, "sd": self.baseline_sd},
            "distribution": {"type": self.distribution.kind},
        }
        if self.distribution.kind == "t":
            d["distribution"]["df"] = self.distribution.df
        if self.distribution.kind == "skew":
            d["distribution"]["kappa"] = self.distribution.kappa
        if self.strata_probs is not None:
            d["strata"] = {"probs": list(self.strata_probs), "effects": list(self.strata_effects)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationSpec":
        try:
            dist = d.get("distribution", {"type": "normal"})
            strata = d.get("strata")
            base = d.get("baseline", {})
            return cls(
                intercept=d["intercept"],
                baseline_coef=d["baselineCoef"],
                treatment=d["treatment"],
                cov_model=covariance_from_dict(d["covariance"]),
                retention=d["retention"],
                allocation=tuple(d.get("allocation", (0.5, 0.5))),
                baseline_mean=float(base.get("mean", 0.0)),
                baseline_sd=float(base.get("sd", 1.0)),
                distribution=Distribution(dist.get("type", "normal"), dist.get("df"), dist.get("kappa")),
                strata_probs=None if strata is None else tuple(strata["probs"]),
                strata_effects=None if strata is None else tuple(strata["effects"]),
            )
        except KeyError as exc:
            raise InvalidSpecError(f"generation spec missing key {exc}") from None


def skew_normal_r2(sigma: np.ndarray, kappa: float) -> np.ndarray:
    sd = np.sqrt(np.diag(sigma))
    R = sigma / np.outer(sd, sd)
    a = 1.0 - 2.0 * kappa**2 / math.pi
    b = (1.0 - 2.0 / math.pi) * kappa**2
    return (a * R - b) / (1.0 - kappa**2)


def _chol(S):
    ldl_decompose(S)  # uniform NotPositiveDefiniteError
    return np.linalg.cholesky(S)


def _noise(gen: GenerationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    S = gen.sigma
    dist = gen.distribution
    p = gen.p
    if dist.kind == "normal":
        return rng.standard_normal((n, p)) @ _chol(S).T
    if dist.kind == "t":
        d = dist.df
        eps = rng.standard_normal((n, p)) @ _chol((d - 2.0) / d * S).T
        u = rng.chisquare(d, n)
        return eps / np.sqrt(u / d)[:, None]
    kappa = dist.kappa
    R2 = skew_normal_r2(S, kappa)
    try:
        C = _chol(R2)
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError(f"skew-normal R2 is not positive definite at kappa={kappa}") from None
    tilde = rng.standard_normal((n, p)) @ C.T
    e = np.abs(rng.standard_normal(n))
    a = 1.0 - 2.0 * kappa**2 / math.pi
    eps = kappa * (e[:, None] - math.sqrt(2.0 / math.pi)) + math.sqrt(1.0 - kappa**2) * tilde
    return eps * np.sqrt(np.diag(S) / a)


def draw_patterns(retention_row: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Dropout patterns r in 0..p with P(r = t) = pi_t - pi_{t+1}."""
    pi = np.concatenate([[1.0], retention_row, [0.0]])
    probs = pi[:-1] - pi[1:]
    u = rng.random(size)
    return np.searchsorted(np.cumsum(probs), u, side="right").clip(max=len(probs) - 1)


def generate_dataset(gen: GenerationSpec, n: int, rng: np.random.Generator) -> MonotoneDataset:
    if n < 2:
        raise InvalidSpecError("need at least two subjects")
    p = gen.p
    n0, n1 = per_arm(n, gen.allocation)
    g = np.repeat([0, 1], [n0, n1])
    if gen.strata_probs is not None:
        k = rng.choice(len(gen.strata_probs), size=n, p=gen.strata_probs)
        shift = np.asarray(gen.strata_effects, dtype=float)[k]
    else:
        k = None
        shift = np.zeros(n)
    y0 = gen.baseline_mean + shift + gen.baseline_sd * rng.standard_normal(n)
    r = np.empty(n, dtype=int)
    r[g == 0] = draw_patterns(gen.retention[0], n0, rng)
    r[g == 1] = draw_patterns(gen.retention[1], n1, rng)
    mu = gen.intercept + np.outer(y0, gen.baseline_coef) + np.outer(g, gen.treatment) + shift[:, None]
    y = mu + _noise(gen, n, rng)
    observed = np.arange(p) < r[:, None]
    if k is None:
        cov = y0[:, None]
    else:
        dummies = (k[:, None] == np.arange(1, len(gen.strata_probs))).astype(float)
        cov = np.column_stack([y0, dummies])
    return MonotoneDataset.from_arrays(y, observed, g, cov)


@dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    ok: bool
    estimate: float = math.nan
    var_asymptotic: float = math.nan
    var_kr: float = math.nan
    var_delta: float = math.nan
    df: float = math.nan
    statistic: float = math.nan
    p_value: float = math.nan
    reject: bool = False


@dataclass(frozen=True)
class ReplicationSummary:
    reps: int
    rejections: int
    failures: int
    simulated_power: float
    mc_se: float
    seed: int
    n: int
    df_mean: float
    df_min: float
    df_max: float
    estimate_mean: float
    estimate_sd: float
    records: tuple = ()

    def to_dict(self) -> dict:
        return {
            "reps": self.reps,
            "rejections": self.rejections,
            "failures": self.failures,
            "simulatedPower": self.simulated_power,
            "mcSE": self.mc_se,
            "seed": self.seed,
            "n": self.n,
            "perRepDf": {"mean": self.df_mean, "min": self.df_min, "max": self.df_max},
            "perRepEstimate": {"mean": self.estimate_mean, "sd": self.estimate_sd},
        }


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def run_one(gen: GenerationSpec, n: int, seed: int, rep: int, alpha: float, info_mode: InfoMode) -> ReplicationRecord:
    try:
        fit = fit_mmrm(generate_dataset(gen, n, replication_rng(seed, rep)))
        k = fit.q - 1
        v_kr = float(kr_variance(fit, info_mode)[k, k])
        v_as = float(phi_p(fit)[k, k])
        v_d = float(delta_variance(fit)[k, k])
        f = fitted_df(fit)
    except (MMRMError, np.linalg.LinAlgError):
        return ReplicationRecord(rep=rep, ok=False)
    est = float(fit.tau_hat[-1])
    t = est / math.sqrt(v_kr)
    pval = float(2.0 * stdtr(f, -abs(t)))
    return ReplicationRecord(
        rep=rep, ok=True, estimate=est, var_asymptotic=v_as, var_kr=v_kr, var_delta=v_d,
        df=f, statistic=t, p_value=pval, reject=pval < alpha,
    )


def _run_chunk(args):
    gen, n, seed, reps, alpha, info_mode = args
    return [run_one(gen, n, seed, r, alpha, info_mode) for r in reps]


def run_replications(
    gen: GenerationSpec,
    n: int,
    reps: int,
    seed: int,
    alpha: float = 0.05,
    info_mode: InfoMode = InfoMode.EXPECTED,
    workers: int = 1,
    keep_records: bool = False,
) -> ReplicationSummary:
    """Simulate `reps` trials of size n and tally KR Wald rejections of tau_p = 0.

    Failed fits are counted, not dropped silently; more than 5% failures
    raises ReplicationFailureError.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    info_mode = InfoMode(info_mode)
    # fail fast on an infeasible generator before spawning workers
    generate_dataset(gen, n, replication_rng(seed, 0))
    idx = list(range(reps))
    if workers <= 1:
        records = _run_chunk((gen, n, seed, idx, alpha, info_mode))
    else:
        chunks = [idx[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_run_chunk, [(gen, n, seed, c, alpha, info_mode) for c in chunks])
            records = sorted((r for part in parts for r in part), key=lambda r: r.rep)
    return summarize(records, seed=seed, n=n, keep_records=keep_records)


def summarize(records, seed: int, n: int, keep_records: bool = False) -> ReplicationSummary:
    good = [r for r in records if r.ok]
    failures = len(records) - len(good)
    if failures > MAX_FAILURE_RATE * len(records):
        raise ReplicationFailureError(f"{failures} of {len(records)} replications failed to fit")
    m = len(good)
    rej = sum(r.reject for r in good)
    power = rej / m if m else math.nan
    df = np.array([r.df for r in good])
    est = np.array([r.estimate for r in good])
    return ReplicationSummary(
        reps=len(records),
        rejections=rej,
        failures=failures,
        simulated_power=power,
        mc_se=math.sqrt(power * (1 - power) / m) if m else math.nan,
        seed=seed,
        n=n,
        df_mean=float(df.mean()) if m else math.nan,
        df_min=float(df.min()) if m else math.nan,
        df_max=float(df.max()) if m else math.nan,
        estimate_mean=float(est.mean()) if m else math.nan,
        estimate_sd=float(est.std(ddof=1)) if m > 1 else math.nan,
        records=tuple(records) if keep_records else (),
    )


def write_records_tsv(path, records) -> None:
    cols = ("rep", "ok", "estimate", "var_asymptotic", "var_kr", "var_delta", "df", "statistic", "p_value", "reject")
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in records:
            fh.write("\t".join(repr(getattr(r, c)) if isinstance(getattr(r, c), float) else str(getattr(r, c)) for c in cols) + "\n")
