"""Balanced panel container and the linear-algebra primitives shared by all estimators.

Rows are stored unit-major: unit ``i`` (1-based) and period ``t`` (1-based) live
at row ``(i - 1) * T + (t - 1)``. Every other module goes through
:func:`row_index`, :attr:`PanelDataset.unit_ids` and
:attr:`PanelDataset.period_ids` rather than re-deriving the mapping.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import DimensionError, SingularDesignError

__all__ = [
    "PanelDataset",
    "DesignMatrix",
    "OlsFit",
    "RANK_TOL",
    "row_index",
    "ols_fit",
    "within_demean_unit",
    "within_demean_twoway",
    "unit_means",
    "period_means",
    "unit_dummy_columns",
    "period_dummy_columns",
    "group_demean",
    "twoway_group_demean",
    "read_csv",
    "write_csv",
]

#: Singular values below ``RANK_TOL * s_max`` count as zero in :func:`ols_fit`.
RANK_TOL = 1e-10


def row_index(unit: int, period: int, n_periods: int) -> int:
    """0-based row of the observation for 1-based ``unit`` and ``period``."""
    return (unit - 1) * n_periods + (period - 1)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """A balanced panel of outcome ``y``, treatment ``w`` and confounders ``x``.

    Parameters
    ----------
    n_units, n_periods : int
        Panel dimensions N and T.
    outcome, treatment : ndarray, shape (N*T,)
        Stacked unit-major vectors.
    confounders : ndarray, shape (N*T, J)
        Observed confounders; ``J`` may be zero.
    """

    n_units: int
    n_periods: int
    outcome: NDArray[np.float64]
    treatment: NDArray[np.float64]
    confounders: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.n_units < 1 or self.n_periods < 1:
            raise DimensionError(
                f"panel needs N >= 1 and T >= 1, got N={self.n_units}, T={self.n_periods}"
            )
        n = self.n_units * self.n_periods
        y = np.ascontiguousarray(self.outcome, dtype=np.float64)
        w = np.ascontiguousarray(self.treatment, dtype=np.float64)
        x = np.asarray(self.confounders, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.size == 0:
            x = np.zeros((n, 0))
        x = np.ascontiguousarray(x)
        if y.shape != (n,) or w.shape != (n,) or x.shape[0] != n:
            raise DimensionError(
                f"expected {n} rows (N={self.n_units}, T={self.n_periods}); got "
                f"y {y.shape}, w {w.shape}, x {x.shape}"
            )
        for name, arr in (("outcome", y), ("treatment", w), ("confounders", x)):
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{name} contains non-finite entries")
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "treatment", w)
        object.__setattr__(self, "confounders", x)

    @property
    def n_obs(self) -> int:
        return self.n_units * self.n_periods

    @property
    def n_confounders(self) -> int:
        return self.confounders.shape[1]

    @property
    def unit_ids(self) -> NDArray[np.int64]:
        """0-based unit index of each row."""
        return np.repeat(np.arange(self.n_units), self.n_periods)

    @property
    def period_ids(self) -> NDArray[np.int64]:
        """0-based period index of each row."""
        return np.tile(np.arange(self.n_periods), self.n_units)

    def confounder_names(self) -> list[str]:
        return [f"x{j + 1}" for j in range(self.n_confounders)]

    def replace(self, **changes) -> "PanelDataset":
        fields = dict(
            n_units=self.n_units,
            n_periods=self.n_periods,
            outcome=self.outcome,
            treatment=self.treatment,
            confounders=self.confounders,
        )
        fields.update(changes)
        return PanelDataset(**fields)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Named dense regressor columns."""

    names: tuple[str, ...]
    values: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        names = tuple(self.names)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2 or vals.shape[1] != len(names):
            raise DimensionError(
                f"{len(names)} column names for a value block of shape {vals.shape}"
            )
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DimensionError(f"duplicate column names: {dupes}")
        if not np.all(np.isfinite(vals)):
            raise DimensionError("design matrix contains non-finite entries")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_columns(cls, columns: Mapping[str, NDArray[np.float64]]) -> "DesignMatrix":
        names = tuple(columns)
        if not names:
            raise DimensionError("design matrix needs at least one column")
        return cls(names, np.column_stack([np.asarray(columns[n], dtype=float) for n in names]))

    @classmethod
    def empty(cls, n_rows: int) -> "DesignMatrix":
        return cls((), np.zeros((n_rows, 0)))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> NDArray[np.float64]:
        return self.values[:, self.names.index(name)]

    def hstack(self, *others: "DesignMatrix") -> "DesignMatrix":
        blocks = [self, *others]
        rows = {b.n_rows for b in blocks}
        if len(rows) != 1:
            raise DimensionError(f"cannot stack blocks with row counts {sorted(rows)}")
        names = tuple(n for b in blocks for n in b.names)
        return DesignMatrix(names, np.hstack([b.values for b in blocks]))

    def take_rows(self, rows: NDArray[np.int64]) -> "DesignMatrix":
        return DesignMatrix(self.names, self.values[rows])


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Least-squares coefficients keyed by column name."""

    coefficients: dict[str, float]
    residuals: NDArray[np.float64] = field(repr=False)
    used_rows: int

    def __getitem__(self, name: str) -> float:
        return self.coefficients[name]


def _null_space_columns(r: NDArray, piv: NDArray, names: Sequence[str], tol: float) -> list[str]:
    _, s, vt = np.linalg.svd(r)
    small = s <= tol * s[0] if s.size and s[0] > 0 else np.ones(s.shape, dtype=bool)
    involved = np.zeros(len(names), dtype=bool)
    for v in vt[small]:
        # v lives in the pivoted coordinate system
        involved[piv] |= np.abs(v) > 1e-8
    if r.shape[1] > r.shape[0]:
        involved[piv[r.shape[0]:]] = True
    return [n for n, hit in zip(names, involved) if hit]


def ols_fit(X: DesignMatrix, y: NDArray[np.float64]) -> OlsFit:
    """Least squares via column-pivoted QR.

    Raises
    ------
    SingularDesignError
        If any singular value of the design is below ``RANK_TOL`` times the
        largest one. The error names the columns spanning the null space.
    """
    y = np.asarray(y, dtype=np.float64)
    n, p = X.values.shape
    if y.shape != (n,):
        raise DimensionError(f"design has {n} rows but y has shape {y.shape}")
    if p == 0:
        raise DimensionError("design matrix has no columns")
    if n < p:
        raise SingularDesignError(
            f"{n} rows cannot identify {p} coefficients", list(X.names)
        )
    q, r, piv = sla.qr(X.values, mode="economic", pivoting=True)
    s = np.linalg.svd(r, compute_uv=False)
    if s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
        bad = _null_space_columns(r, piv, X.names, RANK_TOL)
        raise SingularDesignError(f"singular design; collinear columns: {bad}", bad)
    beta_piv = sla.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[piv] = beta_piv
    resid = y - X.values @ beta
    return OlsFit(dict(zip(X.names, beta.tolist())), resid, n)


def _check_length(v: NDArray, dataset: PanelDataset) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != dataset.n_obs:
        raise DimensionError(
            f"vector has {v.shape[0]} rows, panel has N*T = {dataset.n_obs}"
        )
    return v


def _as_cube(v: NDArray, dataset: PanelDataset) -> NDArray[np.float64]:
    # (N, T, k) view for column blocks, (N, T) for vectors
    return v.reshape((dataset.n_units, dataset.n_periods) + v.shape[1:])


def unit_means(v: NDArray[np.float64], dataset: PanelDataset) -> NDArray[np.float64]:
    """Per-unit time mean, broadcast back to every row of the unit."""
    v = _check_length(v, dataset)
    cube = _as_cube(v, dataset)
    m = cube.mean(axis=1, keepdims=True)
    return np.broadcast_to(m, cube.shape).reshape(v.shape).copy()


def period_means(v: NDArray[np.float64], dataset: PanelDataset) -> NDArray[np.float64]:
    """Per-period cross-unit mean, broadcast back to every row of the period."""
    v = _check_length(v, dataset)
    cube = _as_cube(v, dataset)
    m = cube.mean(axis=0, keepdims=True)
    return np.broadcast_to(m, cube.shape).reshape(v.shape).copy()


def within_demean_unit(v: NDArray[np.float64], dataset: PanelDataset) -> NDArray[np.float64]:
    """Subtract each unit's time mean (the one-way within transform)."""
    v = _check_length(v, dataset)
    return v - unit_means(v, dataset)


def within_demean_twoway(v: NDArray[np.float64], dataset: PanelDataset) -> NDArray[np.float64]:
    """Balanced two-way within transform ``v_it - v_i. - v_.t + v_..``."""
    v = _check_length(v, dataset)
    cube = _as_cube(v, dataset)
    out = (
        cube
        - cube.mean(axis=1, keepdims=True)
        - cube.mean(axis=0, keepdims=True)
        + cube.mean(axis=(0, 1), keepdims=True)
    )
    return out.reshape(v.shape)


def unit_dummy_columns(dataset: PanelDataset) -> DesignMatrix:
    """One-hot unit indicators ``z1..zN``."""
    names = tuple(f"z{i + 1}" for i in range(dataset.n_units))
    vals = np.zeros((dataset.n_obs, dataset.n_units))
    vals[np.arange(dataset.n_obs), dataset.unit_ids] = 1.0
    return DesignMatrix(names, vals)


def period_dummy_columns(dataset: PanelDataset) -> DesignMatrix:
    """One-hot period indicators ``p1..pT``."""
    names = tuple(f"p{t + 1}" for t in range(dataset.n_periods))
    vals = np.zeros((dataset.n_obs, dataset.n_periods))
    vals[np.arange(dataset.n_obs), dataset.period_ids] = 1.0
    return DesignMatrix(names, vals)


def group_demean(v: NDArray[np.float64], codes: NDArray[np.int64]) -> NDArray[np.float64]:
    """Subtract group means for arbitrary (possibly unbalanced) integer group codes."""
    v = np.asarray(v, dtype=np.float64)
    _, inv = np.unique(codes, return_inverse=True)
    counts = np.bincount(inv)
    sums = np.bincount(inv, weights=v)
    return v - (sums / counts)[inv]


def twoway_group_demean(
    v: NDArray[np.float64],
    unit_codes: NDArray[np.int64],
    period_codes: NDArray[np.int64],
    tol: float = 1e-13,
    max_iter: int = 10_000,
) -> NDArray[np.float64]:
    """Two-way within transform on an unbalanced subset by alternating projections."""
    out = np.asarray(v, dtype=np.float64).copy()
    scale = max(1.0, float(np.max(np.abs(out))) if out.size else 1.0)
    for _ in range(max_iter):
        prev = out
        out = group_demean(group_demean(out, unit_codes), period_codes)
        if np.max(np.abs(out - prev), initial=0.0) <= tol * scale:
            break
    return out


_CSV_FMT = "%.17g"


def write_csv(dataset: PanelDataset, path: str | Path) -> None:
    """Write ``unit,period,y,w,x1..xJ`` with 17 significant digits."""
    header = ["unit", "period", "y", "w", *dataset.confounder_names()]
    units = dataset.unit_ids + 1
    periods = dataset.period_ids + 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in range(dataset.n_obs):
            row = [str(units[r]), str(periods[r]), _CSV_FMT % dataset.outcome[r],
                   _CSV_FMT % dataset.treatment[r]]
            row.extend(_CSV_FMT % x for x in dataset.confounders[r])
            writer.writerow(row)


def read_csv(path: str | Path) -> PanelDataset:
    """Read a panel written by :func:`write_csv` (row order may be arbitrary)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        records = [row for row in reader if row]
    if header[:4] != ["unit", "period", "y", "w"]:
        raise DimensionError(f"unexpected CSV header {header!r}")
    xcols = header[4:]
    expected = [f"x{j + 1}" for j in range(len(xcols))]
    if xcols != expected:
        raise DimensionError(f"confounder columns must be {expected}, got {xcols}")
    units = np.array([int(r[0]) for r in records])
    periods = np.array([int(r[1]) for r in records])
    if units.size == 0:
        raise DimensionError("empty panel CSV")
    n_units, n_periods = int(units.max()), int(periods.max())
    if units.min() < 1 or periods.min() < 1:
        raise DimensionError("unit and period ids are 1-based")
    n = n_units * n_periods
    idx = (units - 1) * n_periods + (periods - 1)
    if len(records) != n or np.unique(idx).size != n:
        raise DimensionError(
            f"panel is not balanced: {len(records)} rows for N={n_units}, T={n_periods}"
        )
    vals = np.array([[float(c) for c in r[2:]] for r in records]).reshape(len(records), -1)
    ordered = np.empty_like(vals)
    ordered[idx] = vals
    return PanelDataset(
        n_units=n_units,
        n_periods=n_periods,
        outcome=ordered[:, 0],
        treatment=ordered[:, 1],
        confounders=ordered[:, 2:],
    )


def as_design(columns: Iterable[tuple[str, NDArray[np.float64]]]) -> DesignMatrix:
    """Build a :class:`DesignMatrix` from ``(name, column)`` pairs."""
    cols = list(columns)
    if not cols:
        raise DimensionError("design matrix needs at least one column")
    return DesignMatrix(tuple(n for n, _ in cols), np.column_stack([c for _, c in cols]))
