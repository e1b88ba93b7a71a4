"""Cross-fitting fold plans for panel data.

Five ways of assigning the N*T rows to K folds:

``random``      rows shuffled into K near-equal folds
``by-unit``     units shuffled into K groups; a unit's rows share a fold
``by-period``   periods shuffled into K groups; a period's rows share a fold
``time-folds``  K contiguous period blocks (earlier blocks take the remainder)
``nlo``         the time-folds layout, but training for fold k also drops the
                ``neighbor_width`` blocks on either side of k (no wrap-around)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .paneldata import PanelDataset

__all__ = ["Strategy", "FoldPlan", "make_folds", "training_rows", "default_folds"]


class Strategy(str, enum.Enum):
    RANDOM = "random"
    BY_UNIT = "by-unit"
    BY_PERIOD = "by-period"
    TIME_FOLDS = "time-folds"
    NLO = "nlo"

    @classmethod
    def parse(cls, value: "Strategy | str") -> "Strategy":
        if isinstance(value, cls):
            return value
        key = "".join(ch for ch in str(value).lower() if ch.isalnum())
        lookup = {
            "random": cls.RANDOM,
            "byunit": cls.BY_UNIT,
            "byperiod": cls.BY_PERIOD,
            "timefolds": cls.TIME_FOLDS,
            "nlo": cls.NLO,
            "neighborsleftout": cls.NLO,
        }
        try:
            return lookup[key]
        except KeyError:
            choices = ", ".join(s.value for s in cls)
            raise ConfigError(f"unknown split strategy {value!r}; choose from {choices}") from None


def default_folds(strategy: Strategy | str) -> int:
    """5 folds for every strategy except neighbors-left-out, which uses 10."""
    return 10 if Strategy.parse(strategy) is Strategy.NLO else 5


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of every row to one of ``n_folds`` folds (ids 1..K)."""

    strategy: Strategy
    n_folds: int
    fold_of: NDArray[np.int64] = field(repr=False)
    neighbor_width: int = 1

    def __post_init__(self) -> None:
        fold_of = np.asarray(self.fold_of, dtype=np.int64)
        if fold_of.size and (fold_of.min() < 1 or fold_of.max() > self.n_folds):
            raise ConfigError(f"fold ids must lie in 1..{self.n_folds}")
        object.__setattr__(self, "fold_of", fold_of)
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))

    def fold_rows(self, k: int) -> NDArray[np.int64]:
        self._check(k)
        return np.flatnonzero(self.fold_of == k)

    def fold_sizes(self) -> NDArray[np.int64]:
        return np.bincount(self.fold_of, minlength=self.n_folds + 1)[1:]

    def _check(self, k: int) -> None:
        if not 1 <= k <= self.n_folds:
            raise ConfigError(f"fold id {k} outside 1..{self.n_folds}")


def _near_equal_labels(n_items: int, n_folds: int, perm: NDArray[np.int64] | None) -> NDArray[np.int64]:
    """Fold label (1-based) for each item; chunk sizes differ by at most one."""
    items = np.arange(n_items) if perm is None else perm
    labels = np.empty(n_items, dtype=np.int64)
    for k, chunk in enumerate(np.array_split(items, n_folds), start=1):
        labels[chunk] = k
    return labels


def make_folds(
    dataset: PanelDataset,
    strategy: Strategy | str = Strategy.RANDOM,
    n_folds: int | None = None,
    seed: int = 0,
    neighbor_width: int = 1,
) -> FoldPlan:
    """Build a fold plan; ``n_folds`` defaults to :func:`default_folds`."""
    strategy = Strategy.parse(strategy)
    k = default_folds(strategy) if n_folds is None else int(n_folds)
    n, t = dataset.n_units, dataset.n_periods
    if k < 2:
        raise ConfigError(f"cross-fitting needs K >= 2 folds, got K={k}")
    if neighbor_width < 0:
        raise ConfigError(f"neighbor_width must be >= 0, got {neighbor_width}")
    rng = np.random.default_rng(seed)

    if strategy is Strategy.RANDOM:
        if dataset.n_obs < k:
            raise ConfigError(f"random split needs N*T >= K; N*T={dataset.n_obs}, K={k}")
        fold_of = _near_equal_labels(dataset.n_obs, k, rng.permutation(dataset.n_obs))
    elif strategy is Strategy.BY_UNIT:
        if n < k:
            raise ConfigError(f"by-unit split needs N >= K; N={n}, K={k}")
        fold_of = _near_equal_labels(n, k, rng.permutation(n))[dataset.unit_ids]
    else:
        if t < k:
            raise ConfigError(f"{strategy.value} split needs T >= K; T={t}, K={k}")
        if strategy is Strategy.NLO and k < 2 * neighbor_width + 2:
            raise ConfigError(
                f"nlo split needs K >= 2*neighbor_width + 2; K={k}, neighbor_width={neighbor_width}"
            )
        perm = rng.permutation(t) if strategy is Strategy.BY_PERIOD else None
        fold_of = _near_equal_labels(t, k, perm)[dataset.period_ids]
    return FoldPlan(strategy, k, fold_of, neighbor_width)


def training_rows(plan: FoldPlan, k: int) -> NDArray[np.int64]:
    """Rows used to train the nuisance models that predict fold ``k``."""
    plan._check(k)
    if plan.strategy is Strategy.NLO:
        excluded = np.abs(plan.fold_of - k) <= plan.neighbor_width
    else:
        excluded = plan.fold_of == k
    return np.flatnonzero(~excluded)
