"""Named experiment configurations.

Desk-scale presets (``*-small``) finish in minutes on one core; the others
match the published scale (N=500, T=10, 100 replications) and are meant for
overnight runs.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from ..crossfit import Strategy
from ..dgp import DgpConfig
from ..errors import ConfigError
from ..estimators import BASELINE_METHODS, DML_METHODS, EstimatorSpec, Method
from .config import ExperimentConfig, GridCell

__all__ = ["PRESETS", "preset", "baseline_cells", "split_cells", "preset_names"]

STRUCTURES = ("A", "B", "C")
FORMS = ("linear", "ushaped")
#: Roster of the confounder and sample-size sweeps, which add the two ablations.
SWEEP_METHODS = (
    Method.SIMPLE_OLS, Method.FE_ONLY, Method.POLS, Method.FIXED_EFFECTS,
    *DML_METHODS, Method.ORACLE_FE, Method.ORACLE_NO_FE,
)


def _specs(methods: Iterable[Method], two_way: bool = False) -> tuple[EstimatorSpec, ...]:
    return tuple(EstimatorSpec(m, two_way=two_way) for m in methods)


def baseline_cells(
    n_units: int,
    n_periods: int,
    structures: Sequence[str] = STRUCTURES,
    forms: Sequence[str] = FORMS,
    methods: Sequence[Method] = BASELINE_METHODS,
    rho: float = 0.0,
    two_way: bool = False,
    suffix: str = "",
) -> tuple[GridCell, ...]:
    """One cell per (structure, functional form) with the given roster."""
    return tuple(
        GridCell(
            f"{s}-{f}{suffix}",
            DgpConfig(n_units, n_periods, 1, s, f, rho=rho, two_way=two_way),
            _specs(methods, two_way),
        )
        for s in structures
        for f in forms
    )


def split_cells(
    n_units: int = 100,
    n_periods: int = 50,
    rho: float = 0.9,
    methods: Sequence[Method] = (Method.DML_CRE, Method.DML_DUMMIES, Method.DML_LATE_FE, Method.PDML),
) -> tuple[GridCell, ...]:
    """Every DML method under every cross-fitting strategy, labelled ``Method[split]``."""
    specs = tuple(
        EstimatorSpec(m, split=s, label=f"{m.value}[{s.value}]")
        for m in methods
        for s in Strategy
    )
    return (GridCell("splitting", DgpConfig(n_units, n_periods, 1, "C", "ushaped", rho=rho), specs),)


def _confounder_sweep(n_units: int, js: Sequence[int]) -> tuple[GridCell, ...]:
    return tuple(
        GridCell(f"J{j}", DgpConfig(n_units, 10, j, "C", "ushaped"), _specs(SWEEP_METHODS),
                 generator="multi_confounder", sweep=("J", j))
        for j in js
    )


def _sample_size_sweep(ns: Sequence[int], n_confounders: int) -> tuple[GridCell, ...]:
    # dummies stop at N=1000; beyond that one estimate takes minutes
    return tuple(
        GridCell(f"N{n}-J{n_confounders}", DgpConfig(n, 10, n_confounders, "C", "ushaped"),
                 _specs(m for m in SWEEP_METHODS if n <= 1000 or m is not Method.DML_DUMMIES),
                 generator="multi_confounder", sweep=("N", n))
        for n in ns
    )


def _autocorr(n_reps: int, methods: Sequence[Method] = BASELINE_METHODS) -> ExperimentConfig:
    cells = tuple(
        GridCell(f"C-{form}-rho{rho}", DgpConfig(100, 50, 1, "C", form, rho=rho), _specs(methods),
                 sweep=("rho", rho), seed_key=f"C-{form}-autocorrelation")
        for form in FORMS
        for rho in (0.0, 0.5, 0.9)
    )
    return ExperimentConfig(cells, n_reps)


PRESETS: dict[str, Callable[[], ExperimentConfig]] = {
    "baseline-small": lambda: ExperimentConfig(baseline_cells(200, 10), 30),
    "baseline": lambda: ExperimentConfig(baseline_cells(500, 10), 100),
    "nt-small": lambda: ExperimentConfig(baseline_cells(10, 500, forms=("ushaped",)), 30),
    "nt": lambda: ExperimentConfig(
        baseline_cells(100, 50, suffix="-N100T50")
        + baseline_cells(50, 100, suffix="-N50T100")
        + baseline_cells(10, 500, suffix="-N10T500"),
        100,
    ),
    "splitting-small": lambda: ExperimentConfig(split_cells(), 30),
    "splitting": lambda: ExperimentConfig(split_cells(), 100),
    "confounders-small": lambda: ExperimentConfig(_confounder_sweep(500, (1, 5, 10)), 20),
    "confounders": lambda: ExperimentConfig(_confounder_sweep(500, (1, 2, 3, 5, 10, 20)), 100),
    "sample-size": lambda: ExperimentConfig(
        _sample_size_sweep((100, 250, 500, 1000, 2500, 5000), 1)
        + _sample_size_sweep((100, 250, 500, 1000, 2500, 5000), 5),
        100,
    ),
    "twoway-small": lambda: ExperimentConfig(
        baseline_cells(200, 10, forms=("ushaped",), two_way=True, suffix="-twoway"), 30),
    "twoway": lambda: ExperimentConfig(baseline_cells(500, 10, two_way=True, suffix="-twoway"), 100),
    "autocorrelation-small": lambda: _autocorr(30, (Method.FIXED_EFFECTS, Method.DML_CRE, Method.ORACLE_FE)),
    "autocorrelation": lambda: _autocorr(100),
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None
