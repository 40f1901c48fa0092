"""Trial design specification and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covariance import CovarianceModel, covariance_from_dict, covariance_to_dict, model_factors
from .errors import InvalidSpecError
from .ldl import LdlFactors


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """Planning inputs for a two-arm trial tested at the last visit.

    retention[g, t] is the probability that a subject in arm g is still
    observed at visit t+1; allocation[g] is the randomization fraction.
    With `strata` set to h, the analysis model carries h-1 stratum
    indicators, so q = qstar + h + 1 instead of qstar + 2.
    """

    p: int
    allocation: tuple
    retention: np.ndarray
    cov_model: CovarianceModel
    tau: float
    alpha: float = 0.05
    target_power: float = 0.9
    qstar: int = 1
    strata: Optional[int] = None
    imbalance_d: float = 0.0
    factors: LdlFactors = field(init=False, repr=False)

    def __post_init__(self):
        ret = np.asarray(self.retention, dtype=float)
        alloc = tuple(float(a) for a in self.allocation)
        object.__setattr__(self, "retention", ret)
        object.__setattr__(self, "allocation", alloc)
        if self.p < 1:
            raise InvalidSpecError("p must be positive")
        if ret.shape != (2, self.p):
            raise InvalidSpecError(f"retention must be 2 x {self.p}, got {ret.shape}")
        if len(alloc) != 2 or min(alloc) <= 0 or abs(sum(alloc) - 1.0) > 1e-9:
            raise InvalidSpecError("allocation must be two positive fractions summing to 1")
        if ret.max() > 1 or ret.min() <= 0 or (np.diff(ret, axis=1) > 0).any():
            raise InvalidSpecError("retention must be nonincreasing within (0, 1]")
        if not 0 < self.alpha < 1 or not 0 < self.target_power < 1:
            raise InvalidSpecError("alpha and target power must lie in (0, 1)")
        if self.qstar < 0:
            raise InvalidSpecError("qstar must be nonnegative")
        if self.strata is not None and self.strata < 1:
            raise InvalidSpecError("strata must be a positive count")
        if self.imbalance_d < 0:
            raise InvalidSpecError("imbalance D must be nonnegative")
        object.__setattr__(self, "factors", model_factors(self.cov_model, self.p))

    @property
    def q(self) -> int:
        if self.strata is None:
            return self.qstar + 2
        return self.qstar + self.strata + 1

    @property
    def pooled_retention(self) -> np.ndarray:
        """pi-bar_t = sum_g gamma_g pi_gt."""
        return np.asarray(self.allocation) @ self.retention

    @property
    def varpi_pi(self) -> np.ndarray:
        """sum_g 1 / (gamma_g pi_gt) for each visit."""
        gam = np.asarray(self.allocation)[:, None]
        return (1.0 / (gam * self.retention)).sum(axis=0)

    @property
    def last_row_weights(self) -> np.ndarray:
        """l_pj^2 sigma_j^2 from the covariance model's factors."""
        return self.factors.L[-1] ** 2 * self.factors.innovations

    def replace(self, **changes) -> "DesignSpec":
        kw = dict(
            p=self.p, allocation=self.allocation, retention=self.retention,
            cov_model=self.cov_model, tau=self.tau, alpha=self.alpha,
            target_power=self.target_power, qstar=self.qstar, strata=self.strata,
            imbalance_d=self.imbalance_d,
        )
        kw.update(changes)
        return DesignSpec(**kw)

    def to_dict(self) -> dict:
        d = {
            "p": self.p,
            "allocation": list(self.allocation),
            "retention": self.retention.tolist(),
            "covariance": covariance_to_dict(self.cov_model),
            "tau": self.tau,
            "alpha": self.alpha,
            "targetPower": self.target_power,
            "qstar": self.qstar,
        }
        if self.strata is not None:
            d["strata"] = self.strata
        if self.imbalance_d:
            d["imbalanceD"] = self.imbalance_d
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        try:
            return cls(
                p=int(d["p"]),
                allocation=tuple(d["allocation"]),
                retention=np.asarray(d["retention"], dtype=float),
                cov_model=covariance_from_dict(d["covariance"]),
                tau=float(d["tau"]),
                alpha=float(d.get("alpha", 0.05)),
                target_power=float(d.get("targetPower", 0.9)),
                qstar=int(d.get("qstar", 1)),
                strata=None if d.get("strata") is None else int(d["strata"]),
                imbalance_d=float(d.get("imbalanceD", 0.0)),
            )
        except KeyError as exc:
            raise InvalidSpecError(f"design spec missing key {exc}") from None


def load_design(path) -> DesignSpec:
    with open(path) as fh:
        return DesignSpec.from_dict(json.load(fh))
