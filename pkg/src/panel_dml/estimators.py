"""Effect estimators: linear baselines, infeasible oracles and five DML variants.

All DML variants share :func:`dml_core`. They differ only in the nuisance
features handed to the learners, in whether the data are demeaned before
learning, and in whether the residuals are demeaned before the final
residual-on-residual regression:

==============  =========================================  =====================
method          nuisance features                          residual transform
==============  =========================================  =====================
PDML            x                                          none
DmlEarlyFE      within-demeaned x (targets demeaned too)   none
DmlLateFE       x                                          within transform
DmlDummies      x, unit dummies (+ period dummies)         none
DmlCRE          x, unit means of x and w (+ period means)  none
==============  =========================================  =====================
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np
from numpy.typing import NDArray

from . import boost
from .boost import BoostConfig
from .crossfit import FoldPlan, Strategy, make_folds, training_rows
from .dgp import SimulationTruth, derive_seed, eval_form
from .errors import ConfigError, EstimationError, SingularDesignError
from .paneldata import (
    DesignMatrix,
    PanelDataset,
    group_demean,
    ols_fit,
    period_dummy_columns,
    period_means,
    twoway_group_demean,
    unit_dummy_columns,
    unit_means,
    within_demean_twoway,
    within_demean_unit,
)

__all__ = [
    "Method",
    "EstimatorSpec",
    "EstimateResult",
    "Learner",
    "boosted_learner",
    "estimate",
    "simple_ols",
    "pols",
    "fixed_effects",
    "fe_only",
    "lsdv",
    "cre_ols",
    "oracle_fe",
    "oracle_no_fe",
    "dml_core",
    "pdml",
    "dml_early_fe",
    "dml_late_fe",
    "dml_dummies",
    "dml_cre",
]

ResidualTransform = Literal["none", "demean_unit", "demean_twoway"]

#: ``learner(features, target, train_rows, predict_rows, role, seed) -> predictions``;
#: ``role`` is ``"w"`` for the treatment model and ``"y"`` for the outcome model.
Learner = Callable[[NDArray[np.float64], NDArray[np.float64], NDArray[np.int64],
                    NDArray[np.int64], str, int], NDArray[np.float64]]


class Method(str, enum.Enum):
    SIMPLE_OLS = "SimpleOLS"
    POLS = "POLS"
    FIXED_EFFECTS = "FixedEffects"
    FE_ONLY = "FeOnly"
    PDML = "PDML"
    DML_EARLY_FE = "DmlEarlyFE"
    DML_LATE_FE = "DmlLateFE"
    DML_DUMMIES = "DmlDummies"
    DML_CRE = "DmlCRE"
    ORACLE_FE = "OracleFE"
    ORACLE_NO_FE = "OracleNoFE"

    @classmethod
    def parse(cls, value: "Method | str") -> "Method":
        if isinstance(value, cls):
            return value
        key = "".join(ch for ch in str(value).lower() if ch.isalnum())
        for m in cls:
            if m.value.lower() == key:
                return m
        raise ConfigError(
            f"unknown method {value!r}; choose from {', '.join(m.value for m in cls)}"
        )

    @property
    def is_dml(self) -> bool:
        return self in DML_METHODS

    @property
    def is_oracle(self) -> bool:
        return self in (Method.ORACLE_FE, Method.ORACLE_NO_FE)


DML_METHODS = (
    Method.PDML,
    Method.DML_EARLY_FE,
    Method.DML_LATE_FE,
    Method.DML_DUMMIES,
    Method.DML_CRE,
)
LINEAR_METHODS = (Method.SIMPLE_OLS, Method.POLS, Method.FIXED_EFFECTS)
#: The method roster of the baseline comparison, in display order.
BASELINE_METHODS = LINEAR_METHODS + DML_METHODS + (Method.ORACLE_FE,)
FEASIBLE_METHODS = LINEAR_METHODS + (Method.FE_ONLY,) + DML_METHODS


@dataclass(frozen=True)
class EstimatorSpec:
    """What to estimate and how.

    ``late_demean_scope`` chooses whether late demeaning uses each unit's
    residuals across the whole panel (``"global"``) or only within the
    prediction fold (``"fold"``). ``final_stage`` averages per-fold slopes
    (``"average"``) or runs one pooled regression on all cross-fitted
    residuals (``"pooled"``).
    """

    method: Method
    boost: BoostConfig = field(default_factory=BoostConfig)
    split: Strategy = Strategy.RANDOM
    n_folds: int | None = None
    neighbor_width: int = 1
    two_way: bool = False
    late_demean_scope: Literal["global", "fold"] = "global"
    final_stage: Literal["average", "pooled"] = "average"
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "split", Strategy.parse(self.split))
        if self.late_demean_scope not in ("global", "fold"):
            raise ConfigError(f"late_demean_scope must be 'global' or 'fold', got {self.late_demean_scope!r}")
        if self.final_stage not in ("average", "pooled"):
            raise ConfigError(f"final_stage must be 'average' or 'pooled', got {self.final_stage!r}")

    @property
    def name(self) -> str:
        return self.label or self.method.value


@dataclass(frozen=True, eq=False)
class EstimateResult:
    method: str
    beta_hat: float
    fold_betas: tuple[float, ...] = ()
    diagnostics: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "method": self.method,
            "beta_hat": self.beta_hat,
            "fold_betas": list(self.fold_betas),
            "diagnostics": dict(self.diagnostics),
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True)


# --------------------------------------------------------------------------- linear estimators


def _treatment_coef(X: DesignMatrix, y: NDArray[np.float64]) -> float:
    return ols_fit(X, y)["w"]


def _xcols(x: NDArray[np.float64], prefix: str = "x") -> list[tuple[str, NDArray[np.float64]]]:
    return [(f"{prefix}{j + 1}", x[:, j]) for j in range(x.shape[1])]


def _design(cols: list[tuple[str, NDArray[np.float64]]]) -> DesignMatrix:
    return DesignMatrix(tuple(n for n, _ in cols), np.column_stack([c for _, c in cols]))


def simple_ols(dataset: PanelDataset) -> float:
    """Slope of y on w with an intercept, ignoring every confounder."""
    n = dataset.n_obs
    return _treatment_coef(_design([("const", np.ones(n)), ("w", dataset.treatment)]), dataset.outcome)


def pols(dataset: PanelDataset, confounders: NDArray[np.float64] | None = None) -> float:
    """Pooled OLS of y on an intercept, w and the confounders entered linearly."""
    x = dataset.confounders if confounders is None else confounders
    if x.shape[1] == 0:
        raise ConfigError("pooled OLS needs at least one confounder (J >= 1)")
    cols = [("const", np.ones(dataset.n_obs)), ("w", dataset.treatment), *_xcols(x)]
    return _treatment_coef(_design(cols), dataset.outcome)


def _within(v: NDArray[np.float64], dataset: PanelDataset, two_way: bool) -> NDArray[np.float64]:
    return within_demean_twoway(v, dataset) if two_way else within_demean_unit(v, dataset)


def fixed_effects(
    dataset: PanelDataset,
    two_way: bool = False,
    confounders: NDArray[np.float64] | None = None,
) -> float:
    """Within estimator: OLS of demeaned y on demeaned w and confounders (no intercept)."""
    x = dataset.confounders if confounders is None else confounders
    cols = [("w", _within(dataset.treatment, dataset, two_way))]
    cols += _xcols(_within(x, dataset, two_way)) if x.shape[1] else []
    return _treatment_coef(_design(cols), _within(dataset.outcome, dataset, two_way))


def fe_only(dataset: PanelDataset, two_way: bool = False) -> float:
    """Within estimator that ignores the observed confounders."""
    return fixed_effects(dataset, two_way, confounders=np.zeros((dataset.n_obs, 0)))


def lsdv(dataset: PanelDataset, two_way: bool = False) -> float:
    """Dummy-variable regression: y on w, x and all N unit dummies (no intercept).

    With ``two_way`` the first period dummy is dropped to avoid collinearity.
    """
    block = DesignMatrix(("w", *dataset.confounder_names()),
                         np.column_stack([dataset.treatment, dataset.confounders]))
    block = block.hstack(unit_dummy_columns(dataset))
    if two_way:
        pd = period_dummy_columns(dataset)
        block = block.hstack(DesignMatrix(pd.names[1:], pd.values[:, 1:]))
    return _treatment_coef(block, dataset.outcome)


def cre_ols(dataset: PanelDataset, include_treatment_mean: bool = True) -> float:
    """Mundlak regression: pooled OLS of y on w, x and the unit means of x (and w)."""
    cols = [("const", np.ones(dataset.n_obs)), ("w", dataset.treatment),
            *_xcols(dataset.confounders),
            *_xcols(unit_means(dataset.confounders, dataset), prefix="xbar")]
    if include_treatment_mean:
        cols.append(("wbar", unit_means(dataset.treatment, dataset)))
    return _treatment_coef(_design(cols), dataset.outcome)


def _oracle_confounders(dataset: PanelDataset, truth: SimulationTruth | None) -> NDArray[np.float64]:
    if truth is None:
        raise ConfigError("oracle estimators need the simulation truth")
    return eval_form(truth.functional_form, dataset.confounders)


def oracle_fe(dataset: PanelDataset, truth: SimulationTruth, two_way: bool = False) -> float:
    """Fixed effects with the confounders passed through the true functional form."""
    return fixed_effects(dataset, two_way, confounders=_oracle_confounders(dataset, truth))


def oracle_no_fe(dataset: PanelDataset, truth: SimulationTruth) -> float:
    """Pooled OLS with the confounders passed through the true functional form."""
    return pols(dataset, confounders=_oracle_confounders(dataset, truth))


# --------------------------------------------------------------------------- DML


def boosted_learner(cfg: BoostConfig) -> Learner:
    """Nuisance learner: tune the round count by CV on the training rows, refit, predict."""

    def fit_predict(features, target, train, pred, role, seed):
        model = boost.fit_tuned(features, target, cfg.with_seed(seed), training=train)
        return boost.predict(model, features[pred])

    return fit_predict


def _rmse(v: NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _transform_fold(
    vw: NDArray[np.float64],
    vy: NDArray[np.float64],
    rows: NDArray[np.int64],
    dataset: PanelDataset,
    residual_transform: ResidualTransform,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    units = dataset.unit_ids[rows]
    if residual_transform == "demean_unit":
        return group_demean(vw, units), group_demean(vy, units)
    periods = dataset.period_ids[rows]
    return (twoway_group_demean(vw, units, periods), twoway_group_demean(vy, units, periods))


def _residual_slope(vw, vy, label: str) -> float:
    X = DesignMatrix(("const", "v_w"), np.column_stack([np.ones(vw.shape[0]), vw]))
    try:
        return ols_fit(X, vy)["v_w"]
    except SingularDesignError as exc:
        raise EstimationError(f"{label}: treatment residuals have no variation ({exc})") from exc


def dml_core(
    dataset: PanelDataset,
    w_features: DesignMatrix,
    y_features: DesignMatrix,
    plan: FoldPlan,
    boost_cfg: BoostConfig = BoostConfig(),
    residual_transform: ResidualTransform = "none",
    seed: int = 0,
    *,
    outcome: NDArray[np.float64] | None = None,
    treatment: NDArray[np.float64] | None = None,
    learner: Learner | None = None,
    late_demean_scope: Literal["global", "fold"] = "global",
    final_stage: Literal["average", "pooled"] = "average",
    method: str = "dml",
) -> EstimateResult:
    """Cross-fitted partially linear DML.

    For each fold k the treatment and outcome models are trained on
    ``training_rows(plan, k)`` and predict fold k. The out-of-fold residuals
    are optionally within-transformed, then the outcome residual is regressed
    on the treatment residual (with an intercept) fold by fold and the fold
    slopes are averaged.

    Parameters
    ----------
    outcome, treatment : array, optional
        Targets for the two nuisance models; default to the dataset's y and w.
    learner : callable, optional
        Replaces the tuned boosted-tree learner (see :data:`Learner`).
    """
    t0 = time.perf_counter()
    if residual_transform not in ("none", "demean_unit", "demean_twoway"):
        raise ConfigError(f"unknown residual transform {residual_transform!r}")
    y = dataset.outcome if outcome is None else np.asarray(outcome, dtype=float)
    w = dataset.treatment if treatment is None else np.asarray(treatment, dtype=float)
    n = dataset.n_obs
    if w_features.n_rows != n or y_features.n_rows != n or plan.fold_of.shape[0] != n:
        raise ConfigError("features and fold plan must be row-aligned with the dataset")
    fit_predict = learner or boosted_learner(boost_cfg)

    w_hat = np.full(n, np.nan)
    y_hat = np.full(n, np.nan)
    folds = []
    for k in range(1, plan.n_folds + 1):
        pred = plan.fold_rows(k)
        if pred.size < 2:
            raise EstimationError(f"{method}: fold {k} has {pred.size} row(s); need at least 2")
        train = training_rows(plan, k)
        w_hat[pred] = fit_predict(w_features.values, w, train, pred, "w", derive_seed(seed, k, 0))
        y_hat[pred] = fit_predict(y_features.values, y, train, pred, "y", derive_seed(seed, k, 1))
        folds.append(pred)

    vw = w - w_hat
    vy = y - y_hat
    diagnostics = {"rmse_w": _rmse(vw), "rmse_y": _rmse(vy)}

    if residual_transform != "none" and late_demean_scope == "global":
        two_way = residual_transform == "demean_twoway"
        vw, vy = _within(vw, dataset, two_way), _within(vy, dataset, two_way)

    fold_resid = []
    for k, rows in enumerate(folds, start=1):
        rw, ry = vw[rows], vy[rows]
        if residual_transform != "none" and late_demean_scope == "fold":
            rw, ry = _transform_fold(rw, ry, rows, dataset, residual_transform)
        fold_resid.append((rw, ry))

    if final_stage == "pooled":
        rw = np.concatenate([r[0] for r in fold_resid])
        ry = np.concatenate([r[1] for r in fold_resid])
        fold_betas = (_residual_slope(rw, ry, f"{method} (pooled)"),)
    else:
        fold_betas = tuple(
            _residual_slope(rw, ry, f"{method}: fold {k}")
            for k, (rw, ry) in enumerate(fold_resid, start=1)
        )
    beta_hat = float(np.mean(fold_betas))
    return EstimateResult(method, beta_hat, fold_betas, diagnostics, time.perf_counter() - t0)


def _x_design(x: NDArray[np.float64], prefix: str = "x") -> DesignMatrix:
    return DesignMatrix(tuple(f"{prefix}{j + 1}" for j in range(x.shape[1])), x)


def _require_confounders(dataset: PanelDataset, method: str) -> None:
    if dataset.n_confounders == 0:
        raise ConfigError(f"{method} needs at least one confounder (J >= 1)")


def _plan_for(dataset: PanelDataset, spec: EstimatorSpec, seed: int) -> FoldPlan:
    return make_folds(dataset, spec.split, spec.n_folds, derive_seed(seed, 0), spec.neighbor_width)


def _dml_kwargs(spec: EstimatorSpec, learner: Learner | None) -> dict[str, Any]:
    return dict(learner=learner, late_demean_scope=spec.late_demean_scope,
                final_stage=spec.final_stage, method=spec.name)


def pdml(dataset: PanelDataset, spec: EstimatorSpec, seed: int = 0,
         plan: FoldPlan | None = None, learner: Learner | None = None) -> EstimateResult:
    """Pooled DML on the raw confounders."""
    _require_confounders(dataset, spec.name)
    plan = plan or _plan_for(dataset, spec, seed)
    feats = _x_design(dataset.confounders)
    return dml_core(dataset, feats, feats, plan, spec.boost, "none", derive_seed(seed, 1),
                    **_dml_kwargs(spec, learner))


def dml_early_fe(dataset: PanelDataset, spec: EstimatorSpec, seed: int = 0,
                 plan: FoldPlan | None = None, learner: Learner | None = None) -> EstimateResult:
    """Within-transform y, w and x first, then run pooled DML on the demeaned data."""
    _require_confounders(dataset, spec.name)
    plan = plan or _plan_for(dataset, spec, seed)
    feats = _x_design(_within(dataset.confounders, dataset, spec.two_way))
    return dml_core(
        dataset, feats, feats, plan, spec.boost, "none", derive_seed(seed, 1),
        outcome=_within(dataset.outcome, dataset, spec.two_way),
        treatment=_within(dataset.treatment, dataset, spec.two_way),
        **_dml_kwargs(spec, learner),
    )


def dml_late_fe(dataset: PanelDataset, spec: EstimatorSpec, seed: int = 0,
                plan: FoldPlan | None = None, learner: Learner | None = None) -> EstimateResult:
    """Pooled DML whose residuals are within-transformed before the final regression."""
    _require_confounders(dataset, spec.name)
    plan = plan or _plan_for(dataset, spec, seed)
    feats = _x_design(dataset.confounders)
    transform = "demean_twoway" if spec.two_way else "demean_unit"
    return dml_core(dataset, feats, feats, plan, spec.boost, transform, derive_seed(seed, 1),
                    **_dml_kwargs(spec, learner))


def dml_dummies(dataset: PanelDataset, spec: EstimatorSpec, seed: int = 0,
                plan: FoldPlan | None = None, learner: Learner | None = None) -> EstimateResult:
    """Pooled DML with one-hot unit (and, two-way, period) dummies as extra features."""
    _require_confounders(dataset, spec.name)
    plan = plan or _plan_for(dataset, spec, seed)
    feats = _x_design(dataset.confounders).hstack(unit_dummy_columns(dataset))
    if spec.two_way:
        feats = feats.hstack(period_dummy_columns(dataset))
    return dml_core(dataset, feats, feats, plan, spec.boost, "none", derive_seed(seed, 1),
                    **_dml_kwargs(spec, learner))


def cre_features(dataset: PanelDataset, two_way: bool = False) -> DesignMatrix:
    """Confounders plus the unit means of every confounder and of the treatment.

    Two-way designs add the period means of the confounders and the treatment.
    """
    x = dataset.confounders
    feats = _x_design(x).hstack(
        _x_design(unit_means(x, dataset), "xbar"),
        DesignMatrix(("wbar",), unit_means(dataset.treatment, dataset)),
    )
    if two_way:
        feats = feats.hstack(
            _x_design(period_means(x, dataset), "xtbar"),
            DesignMatrix(("wtbar",), period_means(dataset.treatment, dataset)),
        )
    return feats


def dml_cre(dataset: PanelDataset, spec: EstimatorSpec, seed: int = 0,
            plan: FoldPlan | None = None, learner: Learner | None = None) -> EstimateResult:
    """Pooled DML with Mundlak-style unit means of x and w as extra features."""
    _require_confounders(dataset, spec.name)
    plan = plan or _plan_for(dataset, spec, seed)
    feats = cre_features(dataset, spec.two_way)
    return dml_core(dataset, feats, feats, plan, spec.boost, "none", derive_seed(seed, 1),
                    **_dml_kwargs(spec, learner))


_DML_DISPATCH = {
    Method.PDML: pdml,
    Method.DML_EARLY_FE: dml_early_fe,
    Method.DML_LATE_FE: dml_late_fe,
    Method.DML_DUMMIES: dml_dummies,
    Method.DML_CRE: dml_cre,
}


def estimate(
    dataset: PanelDataset,
    spec: EstimatorSpec,
    truth: SimulationTruth | None = None,
    seed: int = 0,
    learner: Learner | None = None,
) -> EstimateResult:
    """Run one estimator; deterministic given ``(dataset, spec, seed)``."""
    method = spec.method
    if method.is_oracle and truth is None:
        raise ConfigError(f"{method.value} is an oracle and needs the simulation truth")
    if method.is_dml:
        return _DML_DISPATCH[method](dataset, spec, seed, learner=learner)
    t0 = time.perf_counter()
    if method is Method.SIMPLE_OLS:
        beta = simple_ols(dataset)
    elif method is Method.POLS:
        beta = pols(dataset)
    elif method is Method.FIXED_EFFECTS:
        beta = fixed_effects(dataset, spec.two_way)
    elif method is Method.FE_ONLY:
        beta = fe_only(dataset, spec.two_way)
    elif method is Method.ORACLE_FE:
        beta = oracle_fe(dataset, truth, spec.two_way)
    else:
        beta = oracle_no_fe(dataset, truth)
    return EstimateResult(spec.name, float(beta), wall_time=time.perf_counter() - t0)
