"""Monte Carlo runner: replicate every grid cell, run its estimators, record rows."""

from __future__ import annotations

import csv
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..dgp import TRUE_BETA, derive_seed, generate
from ..errors import ConfigError, PanelDmlError
from ..estimators import estimate
from .config import ExperimentConfig, GridCell

__all__ = [
    "RESULTS_HEADER",
    "ResultRow",
    "ExperimentResult",
    "replication_seed",
    "run_replication",
    "run_experiment",
    "write_outputs",
    "read_results",
    "format_float",
]

RESULTS_HEADER = ("setting", "method", "rep", "beta_hat", "error", "wall_time_s")
# Failures that indicate a degenerate draw rather than a bug; anything else propagates.
_RECOVERABLE = (PanelDmlError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class ResultRow:
    setting: str
    method: str
    rep: int
    beta_hat: float
    error: str = ""
    wall_time: float | None = None
    beta_true: float = 1.0

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Rows in canonical order plus the per-setting metadata needed to score them."""

    rows: tuple[ResultRow, ...]
    settings: dict[str, dict[str, Any]] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.rows)

    def select(self, setting: str | None = None, method: str | None = None) -> list[ResultRow]:
        return [
            r for r in self.rows
            if (setting is None or r.setting == setting) and (method is None or r.method == method)
        ]

    def betas(self, setting: str, method: str) -> np.ndarray:
        return np.array([r.beta_hat for r in self.select(setting, method) if r.ok])


def format_float(x: float | None) -> str:
    """Shortest round-trip decimal; blank for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def replication_seed(base_seed: int, setting: str, rep: int) -> int:
    """Dataset seed for replication ``rep`` of a cell (keyed by setting id or ``seed_key``)."""
    return derive_seed(base_seed, zlib.crc32(setting.encode("utf-8")), rep)


def _clean_error(exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"{type(exc).__name__}: {msg}" if msg else type(exc).__name__


def run_replication(cell: GridCell, rep: int, base_seed: int = 0, record_timing: bool = False) -> list[ResultRow]:
    """Generate one dataset for ``cell`` and run every estimator on it.

    A failure inside one estimator becomes an error row for that method only;
    a failure to generate the data marks every method of the replication.
    """
    seed = replication_seed(base_seed, cell.seed_key or cell.setting, rep)
    try:
        dataset, truth = generate(cell.dgp.with_seed(seed), cell.generator)
    except _RECOVERABLE as exc:
        err = _clean_error(exc)
        return [ResultRow(cell.setting, m.name, rep, math.nan, err) for m in cell.methods]

    rows = []
    for spec in cell.methods:
        t0 = time.perf_counter()
        try:
            res = estimate(dataset, spec, truth=truth, seed=derive_seed(seed, 1))
            beta, err = res.beta_hat, ""
        except _RECOVERABLE as exc:
            beta, err = math.nan, _clean_error(exc)
        elapsed = time.perf_counter() - t0 if record_timing else None
        rows.append(ResultRow(cell.setting, spec.name, rep, beta, err, elapsed, truth.beta))
    return rows


def _task(args: tuple[GridCell, int, int, bool]) -> list[ResultRow]:
    return run_replication(*args)


def _canonical(rows: Iterable[ResultRow], cfg: ExperimentConfig) -> tuple[ResultRow, ...]:
    cell_pos = {c.setting: i for i, c in enumerate(cfg.grid)}
    method_pos = {(c.setting, m.name): j for c in cfg.grid for j, m in enumerate(c.methods)}
    return tuple(sorted(rows, key=lambda r: (cell_pos[r.setting], method_pos[(r.setting, r.method)], r.rep)))


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentResult:
    """Run every (cell, replication) pair; outputs do not depend on ``cfg.workers``.

    When ``cfg.out_dir`` is set, ``results.csv``, ``summary.csv`` and
    ``settings.json`` are written there.
    """
    tasks = [(cell, rep, cfg.base_seed, cfg.record_timing) for cell in cfg.grid for rep in range(cfg.n_reps)]
    rows: list[ResultRow] = []
    if cfg.workers == 1:
        for i, t in enumerate(tasks, start=1):
            rows.extend(_task(t))
            if progress:
                print(f"\r{i}/{len(tasks)} replications", end="", flush=True)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for i, part in enumerate(pool.map(_task, tasks), start=1):
                rows.extend(part)
                if progress:
                    print(f"\r{i}/{len(tasks)} replications", end="", flush=True)
    if progress:
        print()
    result = ExperimentResult(_canonical(rows, cfg), {c.setting: _setting_info(c) for c in cfg.grid})
    if cfg.out_dir is not None:
        write_outputs(result, cfg.out_dir)
    return result


def _setting_info(cell: GridCell) -> dict[str, Any]:
    return {**cell.to_dict(), "beta": TRUE_BETA}


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write ``results.csv``, ``summary.csv`` and ``settings.json``."""
    from .summary import write_summary_csv

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    results = out / "results.csv"
    with open(results, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in result.rows:
            w.writerow([r.setting, r.method, r.rep, format_float(r.beta_hat), r.error, format_float(r.wall_time)])
    settings = out / "settings.json"
    settings.write_text(json.dumps(result.settings, indent=2, sort_keys=True) + "\n")
    return [results, write_summary_csv(result, out / "summary.csv"), settings]


def read_results(in_dir: str | Path) -> ExperimentResult:
    """Load a result written by :func:`write_outputs`."""
    src = Path(in_dir)
    settings_path = src / "settings.json"
    settings = json.loads(settings_path.read_text()) if settings_path.exists() else {}
    rows = []
    try:
        fh = open(src / "results.csv", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read {src / 'results.csv'}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RESULTS_HEADER:
            raise ConfigError(f"unexpected results header {header}")
        for rec in reader:
            setting, method, rep, beta, err, wall = rec
            rows.append(ResultRow(
                setting, method, int(rep),
                float(beta) if beta else math.nan, err,
                float(wall) if wall else None,
                float(settings.get(setting, {}).get("beta", 1.0)),
            ))
    return ExperimentResult(tuple(rows), settings)
