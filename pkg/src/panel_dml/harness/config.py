"""Experiment grids and their TOML representation.

A config file holds top-level run settings, optional estimator defaults and
one ``[[cell]]`` table per grid cell::

    n_reps = 30
    base_seed = 0
    workers = 1

    [defaults]            # applied to every estimator unless overridden
    split = "random"
    [defaults.boost]
    max_rounds = 200

    [[cell]]
    setting = "C-ushaped"
    methods = ["FixedEffects", "DmlCRE", { method = "DmlDummies", split = "by-unit", label = "DmlDummies[by-unit]" }]
    sweep = { name = "J", value = 1 }   # optional, used by the MAE line plot
    seed_key = "C-ushaped"              # optional, shared draws across cells
    [cell.dgp]
    n_units = 200
    n_periods = 10
    structure = "C"
    functional_form = "ushaped"

The full schema is documented in ``docs/experiment-config.md``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..boost import BoostConfig
from ..crossfit import Strategy
from ..dgp import GENERATORS, DgpConfig
from ..errors import ConfigError
from ..estimators import EstimatorSpec, Method

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "GridCell",
    "ExperimentConfig",
    "spec_from_entry",
    "spec_to_dict",
    "config_from_dict",
    "load_config",
]

_SPEC_KEYS = {
    "method", "label", "split", "folds", "n_folds", "nlo_width", "neighbor_width",
    "two_way", "late_demean_scope", "final_stage", "boost",
}


@dataclass(frozen=True)
class GridCell:
    """One DGP setting and the estimators run on each of its replications.

    ``sweep`` optionally tags the cell with a swept parameter, e.g.
    ``("J", 5)``, so line plots can put it on the horizontal axis.
    ``seed_key`` replaces the setting id when deriving dataset seeds; cells
    sharing a key reuse the same random draws (common random numbers), so a
    sweep over ``rho`` compares identical panels apart from ``rho``.
    """

    setting: str
    dgp: DgpConfig
    methods: tuple[EstimatorSpec, ...]
    generator: str = "auto"
    sweep: tuple[str, float] | None = None
    seed_key: str | None = None

    def __post_init__(self) -> None:
        if not self.setting or any(ch in self.setting for ch in ",\n\r\"/"):
            raise ConfigError(f"setting id {self.setting!r} must be non-empty without , \" / or newlines")
        methods = tuple(self.methods)
        if not methods:
            raise ConfigError(f"cell {self.setting!r} lists no methods")
        names = [m.name for m in methods]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"cell {self.setting!r} has duplicate method labels {dupes}; set 'label'")
        if self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")
        object.__setattr__(self, "methods", methods)
        if self.sweep is not None:
            name, value = self.sweep
            object.__setattr__(self, "sweep", (str(name), float(value)))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "setting": self.setting,
            "generator": self.generator,
            "dgp": self.dgp.to_dict(),
            "methods": [spec_to_dict(m) for m in self.methods],
        }
        if self.sweep is not None:
            d["sweep"] = {"name": self.sweep[0], "value": self.sweep[1]}
        if self.seed_key is not None:
            d["seed_key"] = self.seed_key
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    grid: tuple[GridCell, ...]
    n_reps: int
    base_seed: int = 0
    workers: int = 1
    out_dir: Path | None = None
    record_timing: bool = False

    def __post_init__(self) -> None:
        grid = tuple(self.grid)
        if not grid:
            raise ConfigError("experiment grid is empty")
        if self.n_reps < 1:
            raise ConfigError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed}")
        ids = [c.setting for c in grid]
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        if dupes:
            raise ConfigError(f"duplicate setting ids {dupes}")
        object.__setattr__(self, "grid", grid)
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))

    @property
    def expected_rows(self) -> int:
        return sum(len(c.methods) for c in self.grid) * self.n_reps

    def replace(self, **changes: Any) -> "ExperimentConfig":
        return replace(self, **changes)


def spec_to_dict(spec: EstimatorSpec) -> dict[str, Any]:
    return {
        "method": spec.method.value,
        "label": spec.name,
        "split": spec.split.value,
        "n_folds": spec.n_folds,
        "neighbor_width": spec.neighbor_width,
        "two_way": spec.two_way,
        "late_demean_scope": spec.late_demean_scope,
        "final_stage": spec.final_stage,
        "boost": {k: getattr(spec.boost, k) for k in spec.boost.__dataclass_fields__},
    }


def spec_from_entry(
    entry: str | Mapping[str, Any],
    defaults: Mapping[str, Any] | None = None,
    two_way: bool = False,
) -> EstimatorSpec:
    """Build an :class:`EstimatorSpec` from a method name or a table of options.

    ``defaults`` supplies options the entry leaves out; ``two_way`` is the
    fallback when neither sets it (normally the cell's DGP flag).
    """
    merged: dict[str, Any] = dict(defaults or {})
    if isinstance(entry, str):
        merged["method"] = entry
    else:
        unknown = set(entry) - _SPEC_KEYS
        if unknown:
            raise ConfigError(f"unknown estimator keys {sorted(unknown)}")
        boost = {**merged.get("boost", {}), **entry.get("boost", {})}
        merged.update(entry)
        merged["boost"] = boost
    unknown = set(merged) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown estimator keys {sorted(unknown)}")
    if "method" not in merged:
        raise ConfigError("estimator entry needs a 'method'")
    boost_opts = merged.get("boost", {})
    bad = set(boost_opts) - set(BoostConfig.__dataclass_fields__)
    if bad:
        raise ConfigError(f"unknown boost keys {sorted(bad)}")
    return EstimatorSpec(
        method=Method.parse(merged["method"]),
        boost=BoostConfig(**boost_opts),
        split=Strategy.parse(merged.get("split", "random")),
        n_folds=merged.get("n_folds", merged.get("folds")),
        neighbor_width=int(merged.get("neighbor_width", merged.get("nlo_width", 1))),
        two_way=bool(merged.get("two_way", two_way)),
        late_demean_scope=merged.get("late_demean_scope", "global"),
        final_stage=merged.get("final_stage", "average"),
        label=merged.get("label"),
    )


def _cell_from_dict(d: Mapping[str, Any], defaults: Mapping[str, Any]) -> GridCell:
    unknown = set(d) - {"setting", "dgp", "methods", "generator", "sweep", "seed_key", "defaults"}
    if unknown:
        raise ConfigError(f"unknown cell keys {sorted(unknown)}")
    for key in ("setting", "dgp", "methods"):
        if key not in d:
            raise ConfigError(f"grid cell is missing {key!r}")
    dgp = DgpConfig.from_dict(d["dgp"])
    cell_defaults = {**defaults, **d.get("defaults", {})}
    if "boost" in defaults or "boost" in d.get("defaults", {}):
        cell_defaults["boost"] = {**defaults.get("boost", {}), **d.get("defaults", {}).get("boost", {})}
    methods = tuple(spec_from_entry(m, cell_defaults, dgp.two_way) for m in d["methods"])
    sweep = d.get("sweep")
    if sweep is not None:
        sweep = (sweep["name"], sweep["value"])
    seed_key = d.get("seed_key")
    return GridCell(str(d["setting"]), dgp, methods, d.get("generator", "auto"), sweep,
                    None if seed_key is None else str(seed_key))


def config_from_dict(d: Mapping[str, Any], out_dir: str | Path | None = None) -> ExperimentConfig:
    unknown = set(d) - {"n_reps", "base_seed", "workers", "record_timing", "defaults", "cell", "out_dir"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cells: Sequence[Mapping[str, Any]] = d.get("cell", [])
    defaults = d.get("defaults", {})
    return ExperimentConfig(
        grid=tuple(_cell_from_dict(c, defaults) for c in cells),
        n_reps=int(d.get("n_reps", 1)),
        base_seed=int(d.get("base_seed", 0)),
        workers=int(d.get("workers", 1)),
        out_dir=out_dir if out_dir is not None else d.get("out_dir"),
        record_timing=bool(d.get("record_timing", False)),
    )


def load_config(path: str | Path, out_dir: str | Path | None = None) -> ExperimentConfig:
    """Read an experiment config from a TOML file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, out_dir)
