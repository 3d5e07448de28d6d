"""Sample containers and CSV input handling.

A dataset holds the diseased arm (cases) and the non-diseased arm
(controls) with a shared covariate layout.  Rows with missing values in
any used column are dropped listwise and counted.
"""

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParseError, ValidationError

_NA_TOKENS = frozenset({"", "na", "n/a", "nan", "null"})


def _as_float_matrix(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _as_float_vector(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-d array, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class CaseSample:
    """Markers and covariates for the diseased arm.

    markers : (n1,) float array
    covariates : (n1, p) float array, row-aligned with markers
    """

    markers: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'markers', _as_float_vector(self.markers, 'markers'))
        object.__setattr__(self, 'covariates', _as_float_matrix(self.covariates, 'covariates'))
        if self.covariates.shape[0] != self.markers.shape[0]:
            raise ValidationError(
                f"covariates have {self.covariates.shape[0]} rows for "
                f"{self.markers.shape[0]} markers")
        if self.n < self.p + 2:
            raise ValidationError(
                f"need at least p + 2 = {self.p + 2} cases, got {self.n}")

    @property
    def n(self):
        return self.markers.shape[0]

    @property
    def p(self):
        return self.covariates.shape[1]

    @cached_property
    def design(self):
        """Design matrix with a leading intercept column, shape (n1, p + 1)."""
        return np.ascontiguousarray(
            np.column_stack([np.ones(self.n), self.covariates]))


@dataclass(frozen=True)
class ControlSample:
    """Markers and covariates for the non-diseased arm."""

    markers: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'markers', _as_float_vector(self.markers, 'markers'))
        object.__setattr__(self, 'covariates', _as_float_matrix(self.covariates, 'covariates'))
        if self.covariates.shape[0] != self.markers.shape[0]:
            raise ValidationError(
                f"covariates have {self.covariates.shape[0]} rows for "
                f"{self.markers.shape[0]} markers")
        if self.n < 1:
            raise ValidationError("need at least one control")

    @property
    def n(self):
        return self.markers.shape[0]

    @property
    def p(self):
        return self.covariates.shape[1]

    @cached_property
    def design(self):
        return np.ascontiguousarray(
            np.column_stack([np.ones(self.n), self.covariates]))


@dataclass(frozen=True)
class BiomarkerDataset:
    """Paired case/control samples with a shared covariate layout."""

    cases: CaseSample
    controls: ControlSample
    covariate_names: tuple = ()
    marker_name: str = "marker"
    factor_levels: dict = None
    n_dropped: int = 0
    swapped: bool = False

    def __post_init__(self):
        if self.cases.p != self.controls.p:
            raise ValidationError(
                f"case covariates have p={self.cases.p} but control "
                f"covariates have p={self.controls.p}")
        if self.covariate_names and len(self.covariate_names) != self.cases.p:
            raise ValidationError(
                f"{len(self.covariate_names)} covariate names for p={self.cases.p}")
        if not self.covariate_names:
            object.__setattr__(
                self, 'covariate_names',
                tuple(f"z{j + 1}" for j in range(self.cases.p)))
        if self.factor_levels is None:
            object.__setattr__(self, 'factor_levels', {})

    @property
    def p(self):
        return self.cases.p

    @classmethod
    def from_arrays(cls, status, markers, covariates, covariate_names=()):
        """Split flat arrays by disease status (1 = case, 0 = control)."""
        status = np.asarray(status)
        markers = np.asarray(markers, dtype=np.float64)
        covariates = np.asarray(covariates, dtype=np.float64)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        bad = ~np.isin(status, (0, 1))
        if np.any(bad):
            raise ValidationError("status values must be 0 or 1")
        case = status == 1
        return cls(
            cases=CaseSample(markers[case], covariates[case]),
            controls=ControlSample(markers[~case], covariates[~case]),
            covariate_names=tuple(covariate_names),
        )


def _parse_float(token, line_no, col):
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"row {line_no}: column '{col}': cannot parse {token!r} as a number"
        ) from None


def load_csv(path, status_col="status", marker_col="marker",
             covariate_cols=(), factor_cols=()):
    """Read a biomarker CSV into a BiomarkerDataset.

    covariate_cols are used in the given order; any of them also listed
    in factor_cols is one-hot encoded in place (levels sorted, first
    level dropped).  Rows with a missing value in any used column are
    dropped listwise; the count is reported on the dataset.
    """
    covariate_cols = list(covariate_cols)
    factor_cols = set(factor_cols)
    unknown_factors = factor_cols - set(covariate_cols)
    if unknown_factors:
        raise ValidationError(
            f"factor columns not among covariates: {sorted(unknown_factors)}")
    used = [status_col, marker_col] + covariate_cols
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [c.strip() for c in header]
        missing = [c for c in used if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        pos = {c: header.index(c) for c in used}
        rows = []
        dropped = 0
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) < len(header):
                raise ParseError(
                    f"row {line_no}: expected {len(header)} fields, got {len(raw)}")
            cells = {c: raw[pos[c]].strip() for c in used}
            if any(cells[c].lower() in _NA_TOKENS for c in used):
                dropped += 1
                continue
            rows.append((line_no, cells))
        if not rows:
            raise ValidationError(f"{path}: no usable rows after dropping {dropped}")

    # factor level dictionaries come from the retained rows only
    levels = {}
    for c in sorted(factor_cols):
        levels[c] = tuple(sorted({cells[c] for _, cells in rows}))

    status = np.empty(len(rows))
    markers = np.empty(len(rows))
    names = []
    for c in covariate_cols:
        if c in factor_cols:
            names.extend(f"{c}={lvl}" for lvl in levels[c][1:])
        else:
            names.append(c)
    covs = np.zeros((len(rows), len(names)))
    nan_dropped = 0
    keep = np.ones(len(rows), dtype=bool)
    for r, (line_no, cells) in enumerate(rows):
        sval = _parse_float(cells[status_col], line_no, status_col)
        if sval not in (0.0, 1.0):
            raise ValidationError(
                f"row {line_no}: column '{status_col}': status must be 0 or 1, "
                f"got {cells[status_col]!r}")
        status[r] = sval
        markers[r] = _parse_float(cells[marker_col], line_no, marker_col)
        col = 0
        for c in covariate_cols:
            if c in factor_cols:
                for lvl in levels[c][1:]:
                    covs[r, col] = 1.0 if cells[c] == lvl else 0.0
                    col += 1
            else:
                covs[r, col] = _parse_float(cells[c], line_no, c)
                col += 1
        if not np.isfinite(markers[r]) or not np.all(np.isfinite(covs[r])):
            keep[r] = False
            nan_dropped += 1
    dropped += nan_dropped
    status, markers, covs = status[keep], markers[keep], covs[keep]

    case = status == 1.0
    n1, n0 = int(case.sum()), int((~case).sum())
    p = len(names)
    if n1 < p + 2:
        raise ValidationError(
            f"{path}: need at least p + 2 = {p + 2} cases, found {n1}")
    if n0 < 1:
        raise ValidationError(f"{path}: no control rows (status 0)")
    cases = CaseSample(markers[case], covs[case])
    if np.linalg.matrix_rank(cases.design) < p + 1:
        raise ValidationError(
            f"{path}: case design matrix is rank deficient; drop a collinear "
            f"covariate or a factor level absent among cases")
    return BiomarkerDataset(
        cases=cases,
        controls=ControlSample(markers[~case], covs[~case]),
        covariate_names=tuple(names),
        marker_name=marker_col,
        factor_levels={c: levels[c] for c in sorted(factor_cols)},
        n_dropped=dropped,
    )


def write_csv(dataset, path, status_col="status"):
    """Write a dataset back to CSV at full float precision.

    Cases come first, then controls.  Factor-encoded covariates are
    written as their 0/1 dummies under the expanded names, so a written
    file reloads (with no factor flags) to an identical dataset.
    """
    names = list(dataset.covariate_names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([status_col, dataset.marker_name] + names)
        for arm, flag in ((dataset.cases, 1), (dataset.controls, 0)):
            for i in range(arm.n):
                row = [flag, f"{arm.markers[i]:.17g}"]
                row.extend(f"{v:.17g}" for v in arm.covariates[i])
                w.writerow(row)
