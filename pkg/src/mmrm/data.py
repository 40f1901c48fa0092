"""Subject records and monotone longitudinal datasets.

A dataset row carries the baseline covariates x_b, the treatment flag g
and up to p post-baseline outcomes. The analysis design row is
x = (1, x_b', g)', so the treatment effect is always the last
coefficient. Missingness is tracked by the dropout pattern r_i (number
of leading observed visits); unobserved outcome cells hold NaN but are
never read.
"""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataFormatError,
    EmptyVisitError,
    InsufficientDataError,
    NonMonotoneError,
)


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    group: int
    covariates: tuple
    outcomes: tuple  # floats, None where missing

    @property
    def observed(self) -> tuple:
        return tuple(v is not None for v in self.outcomes)


class MonotoneStrategy(enum.Enum):
    EXCLUDE = "exclude"
    TRUNCATE = "truncate"
    IMPUTE = "impute"


@dataclass(frozen=True, eq=False)
class MonotoneDataset:
    """Subjects sorted by descending dropout pattern.

    Construct through validate_monotone or from_arrays; the constructor
    trusts its inputs.
    """

    ids: tuple
    group: np.ndarray  # (n,) int 0/1
    covariates: np.ndarray  # (n, q*)
    y: np.ndarray  # (n, p), NaN where unobserved
    pattern: np.ndarray  # (n,) r_i in 0..p

    @property
    def n(self) -> int:
        return self.group.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def qstar(self) -> int:
        return self.covariates.shape[1]

    @property
    def q(self) -> int:
        return self.qstar + 2

    @cached_property
    def visit_counts(self) -> np.ndarray:
        """n_j for j = 1..p."""
        return (self.pattern[:, None] >= np.arange(1, self.p + 1)).sum(axis=0)

    @cached_property
    def group_visit_counts(self) -> np.ndarray:
        """(2, p) array of n_gj."""
        out = np.zeros((2, self.p), dtype=int)
        for g in (0, 1):
            r = self.pattern[self.group == g]
            out[g] = (r[:, None] >= np.arange(1, self.p + 1)).sum(axis=0)
        return out

    @cached_property
    def design(self) -> np.ndarray:
        """(n, q) matrix with rows x_i = (1, x_b', g)."""
        return np.column_stack([np.ones(self.n), self.covariates, self.group.astype(float)])

    def pattern_counts(self) -> np.ndarray:
        """(2, p+1) counts of subjects per arm and pattern 0..p."""
        out = np.zeros((2, self.p + 1), dtype=int)
        np.add.at(out, (self.group, self.pattern), 1)
        return out

    @property
    def subjects(self) -> list[SubjectRecord]:
        recs = []
        for i in range(self.n):
            r = int(self.pattern[i])
            outcomes = tuple(float(v) for v in self.y[i, :r]) + (None,) * (self.p - r)
            recs.append(
                SubjectRecord(
                    id=self.ids[i],
                    group=int(self.group[i]),
                    covariates=tuple(float(v) for v in self.covariates[i]),
                    outcomes=outcomes,
                )
            )
        return recs

    def truncate_visits(self, j: int) -> "MonotoneDataset":
        """The same subjects with only visits 1..j kept."""
        if not 1 <= j <= self.p:
            raise ValueError(f"visit {j} outside 1..{self.p}")
        return MonotoneDataset(
            ids=self.ids,
            group=self.group,
            covariates=self.covariates,
            y=self.y[:, :j].copy(),
            pattern=np.minimum(self.pattern, j),
        )

    def observed_block(self, j: int):
        """Rows retained at visit j (1-based): (X_oj, Y_oj, Yvec_oj)."""
        m = int(self.visit_counts[j - 1])
        return self.design[:m], self.y[:m, j - 1], self.y[:m, : j - 1]

    @classmethod
    def from_arrays(cls, y, observed, group, covariates, ids=None) -> "MonotoneDataset":
        y = np.asarray(y, dtype=float)
        observed = np.asarray(observed, dtype=bool)
        group = np.asarray(group).astype(int)
        n, p = y.shape
        covariates = np.asarray(covariates, dtype=float).reshape(n, -1)
        if ids is None:
            ids = tuple(str(i + 1) for i in range(n))
        if observed.shape != (n, p):
            raise ValueError("observed mask must match outcome shape")
        if not np.isin(group, (0, 1)).all():
            raise ValueError("group must be 0 or 1")
        pattern = observed.sum(axis=1)
        prefix = observed == (np.arange(p) < pattern[:, None])
        bad = np.flatnonzero(~prefix.all(axis=1))
        if bad.size:
            i = bad[0]
            first_gap = int(np.argmin(observed[i]))
            visit = first_gap + 1 + int(np.argmax(observed[i, first_gap:]))
            raise NonMonotoneError(ids[i], visit)
        counts = (pattern[:, None] >= np.arange(1, p + 1)).sum(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise EmptyVisitError(int(empty[0]) + 1)
        order = np.argsort(-pattern, kind="stable")
        yy = np.where(observed, y, np.nan)[order]
        return cls(
            ids=tuple(ids[i] for i in order),
            group=group[order],
            covariates=covariates[order],
            y=yy,
            pattern=pattern[order],
        )


def _records_to_arrays(raw: Sequence[SubjectRecord], p: int):
    if not raw:
        raise InsufficientDataError("no subjects")
    qstar = len(raw[0].covariates)
    y = np.full((len(raw), p), np.nan)
    obs = np.zeros((len(raw), p), dtype=bool)
    cov = np.empty((len(raw), qstar))
    for i, rec in enumerate(raw):
        if len(rec.outcomes) != p:
            raise ValueError(f"subject {rec.id!r} has {len(rec.outcomes)} outcome slots, expected {p}")
        if len(rec.covariates) != qstar:
            raise ValueError(f"subject {rec.id!r} has {len(rec.covariates)} covariates, expected {qstar}")
        cov[i] = rec.covariates
        for j, v in enumerate(rec.outcomes):
            if v is not None:
                y[i, j] = v
                obs[i, j] = True
    group = np.array([rec.group for rec in raw])
    ids = tuple(rec.id for rec in raw)
    return y, obs, group, cov, ids


def validate_monotone(raw: Sequence[SubjectRecord], p: int) -> MonotoneDataset:
    y, obs, group, cov, ids = _records_to_arrays(raw, p)
    return MonotoneDataset.from_arrays(y, obs, group, cov, ids)


def monotonize(raw: Sequence[SubjectRecord], strategy: MonotoneStrategy) -> MonotoneDataset:
    """Turn near-monotone records into a monotone dataset.

    EXCLUDE drops subjects with an intermittent gap, TRUNCATE discards
    everything after a subject's first missing visit, IMPUTE fills each
    intermittent gap with the fitted mean of the least-squares regression
    of that visit on (1, x_b, g, earlier outcomes), one visit at a time.
    """
    strategy = MonotoneStrategy(strategy)
    if not raw:
        raise InsufficientDataError("no subjects")
    p = len(raw[0].outcomes)
    y, obs, group, cov, ids = _records_to_arrays(raw, p)
    r = obs.sum(axis=1)
    prefix = (obs == (np.arange(p) < r[:, None])).all(axis=1)

    if strategy is MonotoneStrategy.EXCLUDE:
        keep = np.flatnonzero(prefix)
        return MonotoneDataset.from_arrays(
            y[keep], obs[keep], group[keep], cov[keep], tuple(ids[i] for i in keep)
        )
    if strategy is MonotoneStrategy.TRUNCATE:
        lead = np.cumprod(obs, axis=1).astype(bool)
        return MonotoneDataset.from_arrays(y, lead, group, cov, ids)

    y = y.copy()
    obs = obs.copy()
    base = np.column_stack([np.ones(len(ids)), cov, group.astype(float)])
    for j in range(p):
        later = obs[:, j + 1 :].any(axis=1)
        holes = np.flatnonzero(~obs[:, j] & later)
        if holes.size == 0:
            continue
        train = obs[:, : j + 1].all(axis=1)
        Z = np.column_stack([base, y[:, :j]])
        if train.sum() < Z.shape[1]:
            raise InsufficientDataError(
                f"imputation at visit {j + 1}: {int(train.sum())} rows for {Z.shape[1]} parameters"
            )
        coef, *_ = np.linalg.lstsq(Z[train], y[train, j], rcond=None)
        y[holes, j] = Z[holes] @ coef
        obs[holes, j] = True
    return MonotoneDataset.from_arrays(y, obs, group, cov, ids)


_VISIT_COL = re.compile(r"^y(\d+)$")


def read_csv(path) -> list[SubjectRecord]:
    """Read records from `subject,group,<covariates...>,y1..yp`; empty cell = missing."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "subject" or header[1] != "group":
            raise DataFormatError(f"{path}: header must start with 'subject,group'")
        visit_cols = [i for i, h in enumerate(header) if _VISIT_COL.match(h)]
        if not visit_cols:
            raise DataFormatError(f"{path}: no outcome columns y1..yp")
        first = visit_cols[0]
        expected = [f"y{k}" for k in range(1, len(header) - first + 1)]
        if header[first:] != expected:
            raise DataFormatError(f"{path}: outcome columns must be y1..yp and come last")
        cov_cols = range(2, first)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                group = int(row[1])
                if group not in (0, 1):
                    raise ValueError
                covs = tuple(float(row[i]) for i in cov_cols)
                outcomes = tuple(float(c) if c.strip() else None for c in row[first:])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed value") from None
            records.append(SubjectRecord(row[0].strip(), group, covs, outcomes))
    if not records:
        raise DataFormatError(f"{path}: no data rows")
    return records


def write_csv(path, records: Sequence[SubjectRecord], covariate_names: Optional[Sequence[str]] = None):
    qstar = len(records[0].covariates)
    p = len(records[0].outcomes)
    names = list(covariate_names) if covariate_names else [f"x{k}" for k in range(1, qstar + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "group", *names, *[f"y{k}" for k in range(1, p + 1)]])
        for rec in records:
            w.writerow(
                [rec.id, rec.group, *[repr(float(v)) for v in rec.covariates],
                 *["" if v is None else repr(float(v)) for v in rec.outcomes]]
            )
