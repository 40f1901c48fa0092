"""Covariance models for the post-baseline outcome vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidModelError, NotPositiveDefiniteError
from .ldl import LdlFactors, ar1_factors, cs_factors, ldl_decompose


@dataclass(frozen=True)
class Unstructured:
    sigma: np.ndarray

    def __post_init__(self):
        S = np.array(self.sigma, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise InvalidModelError("unstructured covariance must be square")
        object.__setattr__(self, "sigma", S)
        ldl_decompose(S)  # raises NotPositiveDefiniteError


@dataclass(frozen=True)
class CompoundSymmetry:
    h: float
    rho: float

    def __post_init__(self):
        if not self.h > 0 or not -1.0 < self.rho < 1.0:
            raise InvalidModelError(f"invalid CS parameters h={self.h}, rho={self.rho}")


@dataclass(frozen=True)
class AR1:
    h: float
    rho: float

    def __post_init__(self):
        if not self.h > 0 or not -1.0 < self.rho < 1.0:
            raise InvalidModelError(f"invalid AR(1) parameters h={self.h}, rho={self.rho}")


@dataclass(frozen=True)
class Toeplitz:
    first_row: tuple

    def __post_init__(self):
        row = tuple(float(v) for v in self.first_row)
        if not row or not row[0] > 0:
            raise InvalidModelError("Toeplitz first row must start with a positive variance")
        object.__setattr__(self, "first_row", row)


CovarianceModel = Union[Unstructured, CompoundSymmetry, AR1, Toeplitz]


def materialize_covariance(model: CovarianceModel, p: int) -> np.ndarray:
    """Dense p x p matrix of a covariance model, checked positive definite."""
    if p < 1:
        raise InvalidModelError("p must be positive")
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    if isinstance(model, Unstructured):
        if model.sigma.shape != (p, p):
            raise InvalidModelError(f"unstructured matrix is {model.sigma.shape}, expected {(p, p)}")
        S = model.sigma.copy()
    elif isinstance(model, CompoundSymmetry):
        S = np.where(lag == 0, model.h, model.h * model.rho)
    elif isinstance(model, AR1):
        S = model.h * model.rho ** lag
    elif isinstance(model, Toeplitz):
        if len(model.first_row) != p:
            raise InvalidModelError(f"Toeplitz row has length {len(model.first_row)}, expected {p}")
        S = np.asarray(model.first_row)[lag]
    else:
        raise TypeError(f"unknown covariance model {model!r}")
    ldl_decompose(S)
    return S


def model_factors(model: CovarianceModel, p: int) -> LdlFactors:
    """LDL factors, using the closed forms where one exists."""
    if isinstance(model, CompoundSymmetry):
        return cs_factors(model.h, model.rho, p)
    if isinstance(model, AR1):
        return ar1_factors(model.h, model.rho, p)
    return ldl_decompose(materialize_covariance(model, p))


def covariance_from_dict(d: dict) -> CovarianceModel:
    kind = str(d.get("type", "")).lower()
    params = d.get("params", {})
    try:
        if kind == "unstructured":
            return Unstructured(np.asarray(params["matrix"], dtype=float))
        if kind == "cs":
            return CompoundSymmetry(float(params["h"]), float(params["rho"]))
        if kind == "ar1":
            return AR1(float(params["h"]), float(params["rho"]))
        if kind == "toeplitz":
            return Toeplitz(tuple(params["first_row"]))
    except KeyError as exc:
        raise InvalidModelError(f"covariance params missing {exc}") from None
    raise InvalidModelError(f"unknown covariance type {d.get('type')!r}")


def covariance_to_dict(model: CovarianceModel) -> dict:
    if isinstance(model, Unstructured):
        return {"type": "unstructured", "params": {"matrix": model.sigma.tolist()}}
    if isinstance(model, CompoundSymmetry):
        return {"type": "cs", "params": {"h": model.h, "rho": model.rho}}
    if isinstance(model, AR1):
        return {"type": "ar1", "params": {"h": model.h, "rho": model.rho}}
    return {"type": "toeplitz", "params": {"first_row": list(model.first_row)}}


__all__ = [
    "AR1",
    "CompoundSymmetry",
    "CovarianceModel",
    "NotPositiveDefiniteError",
    "Toeplitz",
    "Unstructured",
    "covariance_from_dict",
    "covariance_to_dict",
    "materialize_covariance",
    "model_factors",
]
