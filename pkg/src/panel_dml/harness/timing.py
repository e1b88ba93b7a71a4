"""Wall-clock comparison of the estimators across panel shapes."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dgp import DgpConfig, derive_seed, generate
from ..estimators import DML_METHODS, EstimatorSpec, Method, estimate

__all__ = ["TimingRow", "timing_benchmark", "warm_up"]


@dataclass(frozen=True)
class TimingRow:
    n_units: int
    n_periods: int
    method: str
    mean_seconds: float
    runs: tuple[float, ...]


def warm_up() -> None:
    """Trigger JIT compilation so the first timed method is not penalized."""
    ds, _ = generate(DgpConfig(20, 4, seed=1))
    estimate(ds, EstimatorSpec(Method.PDML), seed=1)


def timing_benchmark(
    shapes: Sequence[tuple[int, int]] = ((500, 10),),
    methods: Sequence[Method] = DML_METHODS,
    n_iter: int = 5,
    seed: int = 0,
) -> list[TimingRow]:
    """Average wall time of each method per (N, T) shape over ``n_iter`` datasets.

    Each iteration draws a fresh structure-C, u-shaped dataset; every method
    is timed on the same draw.
    """
    warm_up()
    rows = []
    for n, t in shapes:
        times: dict[Method, list[float]] = {m: [] for m in methods}
        for i in range(n_iter):
            ds, truth = generate(DgpConfig(n, t, seed=derive_seed(seed, n, t, i)))
            for m in methods:
                t0 = time.perf_counter()
                estimate(ds, EstimatorSpec(m), truth=truth, seed=derive_seed(seed, i))
                times[m].append(time.perf_counter() - t0)
        rows.extend(
            TimingRow(n, t, m.value, float(np.mean(ts)), tuple(ts)) for m, ts in times.items()
        )
    return rows
