"""Per-(setting, method) summary statistics of Monte Carlo estimates."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .runner import ExperimentResult, format_float

__all__ = ["SUMMARY_HEADER", "Summary", "summarize", "box_stats", "write_summary_csv"]

SUMMARY_HEADER = (
    "setting", "method", "n", "n_failed", "mean_bias", "mae",
    "median", "q1", "q3", "whisker_low", "whisker_high",
)


@dataclass(frozen=True)
class Summary:
    """Bias, MAE and boxplot statistics; NaN when every replication failed."""

    setting: str
    method: str
    n: int
    n_failed: int
    mean_bias: float
    mae: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outliers"] = list(self.outliers)
        return d


def box_stats(values: np.ndarray) -> tuple[float, float, float, float, float, tuple[float, ...]]:
    """Median, quartiles and 1.5*IQR whiskers.

    Quartiles use linear interpolation between order statistics. Whiskers
    end at the most extreme observations inside ``[q1 - 1.5 IQR, q3 + 1.5 IQR]``;
    anything beyond is returned as an outlier. Whiskers never end inside the
    box.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        nan = float("nan")
        return nan, nan, nan, nan, nan, ()
    q1, med, q3 = (float(q) for q in np.quantile(v, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    outliers = tuple(float(x) for x in v[(v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr)])
    # interpolated quartiles can fall outside the data kept by the fences
    lo = min(float(inside[0]), q1) if inside.size else q1
    hi = max(float(inside[-1]), q3) if inside.size else q3
    return med, q1, q3, lo, hi, outliers


def summarize(result: ExperimentResult) -> list[Summary]:
    """One :class:`Summary` per (setting, method), in the order rows first appear."""
    groups: dict[tuple[str, str], list] = {}
    for r in result.rows:
        groups.setdefault((r.setting, r.method), []).append(r)
    out = []
    for (setting, method), rows in groups.items():
        ok = [r for r in rows if r.ok]
        errors = np.array([r.beta_hat - r.beta_true for r in ok])
        betas = np.array([r.beta_hat for r in ok])
        if ok:
            bias, mae = float(np.mean(errors)), float(np.mean(np.abs(errors)))
        else:
            bias = mae = float("nan")
        med, q1, q3, lo, hi, outliers = box_stats(betas)
        out.append(Summary(setting, method, len(ok), len(rows) - len(ok), bias, mae, med, q1, q3, lo, hi, outliers))
    return out


def summary_lookup(summaries: list[Summary]) -> dict[tuple[str, str], Summary]:
    return {(s.setting, s.method): s for s in summaries}


def write_summary_csv(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summarize(result):
            w.writerow([
                s.setting, s.method, s.n, s.n_failed,
                *(format_float(getattr(s, k)) for k in SUMMARY_HEADER[4:]),
            ])
    return path
