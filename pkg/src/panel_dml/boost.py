"""Least-squares gradient boosted regression trees.

The learner mirrors the hyperparameter contract of a standard boosted-tree
library (learning rate 0.3, depth 6, early stopping after 10 stale rounds, up
to 200 rounds tuned by 5-fold cross-validation) but is written from scratch:

* trees are grown depth-wise by exact greedy search over midpoints between
  consecutive distinct feature values, scored by squared-error reduction;
* ties go to the lowest feature index, then the lowest threshold;
* leaf values are plain in-leaf residual means (no regularisation terms);
* a row goes left when ``x <= threshold``.

Features are sorted once per fit and the presorted columns are reused by
every boosting round and every cross-validation fold, so a tree level costs
one pass over ``rows x features``. Columns holding only 0/1 values (unit
dummies) have a single candidate threshold and are scanned through their
nonzero rows alone, which keeps one-hot blocks of several hundred columns
affordable without changing the candidate splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, DimensionError

__all__ = [
    "BoostConfig",
    "RegressionTree",
    "BoostedModel",
    "fit_tree",
    "fit_boosted",
    "cv_tune_rounds",
    "fit_tuned",
    "predict",
]


@dataclass(frozen=True)
class BoostConfig:
    learning_rate: float = 0.3
    max_depth: int = 6
    early_stopping_rounds: int = 10
    max_rounds: int = 200
    cv_folds: int = 5
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.max_depth > 20:
            raise ConfigError(f"max_depth above 20 is not supported, got {self.max_depth}")
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.early_stopping_rounds < 1:
            raise ConfigError("early_stopping_rounds must be >= 1")
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")

    def with_seed(self, seed: int) -> "BoostConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Binary tree in heap layout: node ``k`` has children ``2k+1`` and ``2k+2``.

    ``feature[k] >= 0`` marks an internal node, ``-1`` a leaf and ``-2`` an
    unused slot.
    """

    feature: NDArray[np.int32] = field(repr=False)
    threshold: NDArray[np.float64] = field(repr=False)
    value: NDArray[np.float64] = field(repr=False)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == -1))

    @property
    def depth(self) -> int:
        used = np.flatnonzero(self.feature != -2)
        return int(np.floor(np.log2(used.max() + 1))) if used.size else 0

    def predict(self, features: NDArray[np.float64]) -> NDArray[np.float64]:
        X = _as_features(features)
        out = np.zeros(X.shape[0])
        _predict_rows(X, np.arange(X.shape[0]), self.feature, self.threshold, self.value, out, 1.0)
        return out

    def to_dict(self) -> dict:
        nodes = []
        for k in np.flatnonzero(self.feature != -2):
            if self.feature[k] >= 0:
                nodes.append({"node": int(k), "feature": int(self.feature[k]),
                              "threshold": float(self.threshold[k])})
            else:
                nodes.append({"node": int(k), "leaf": float(self.value[k])})
        return {"nodes": nodes}


@dataclass(frozen=True, eq=False)
class BoostedModel:
    """``prediction = base_score + learning_rate * sum(tree outputs)``."""

    base_score: float
    learning_rate: float
    trees: tuple[RegressionTree, ...]
    n_features: int

    @property
    def rounds_used(self) -> int:
        return len(self.trees)

    def to_json(self) -> str:
        return json.dumps({
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        })


# --------------------------------------------------------------------------- kernels


@numba.njit(cache=True, nogil=True)
def _grow(X, rows, dense_pos, order, svals, bin_ptr, bin_idx, g, max_depth, min_leaf,
          feat, thr, val, node):
    m = g.shape[0]
    n_feat = dense_pos.shape[0]
    size = feat.shape[0]
    cnt = np.zeros(size, np.int64)
    tot = np.zeros(size)
    active = np.zeros(size, np.bool_)
    gmin = np.empty(size)
    gmax = np.empty(size)
    best_gain = np.zeros(size)
    best_f = np.empty(size, np.int64)
    best_t = np.zeros(size)
    cl = np.zeros(size, np.int64)
    sl = np.zeros(size)
    last = np.zeros(size)
    score = np.zeros(size)

    for k in range(size):
        feat[k] = -2
    for i in range(m):
        node[i] = 0
        tot[0] += g[i]
    cnt[0] = m
    active[0] = True

    for depth in range(max_depth + 1):
        lo = (1 << depth) - 1
        hi = (1 << (depth + 1)) - 1
        if depth == max_depth:
            for k in range(lo, hi):
                if active[k]:
                    feat[k] = -1
                    val[k] = tot[k] / cnt[k]
            break

        for k in range(lo, hi):
            gmin[k] = np.inf
            gmax[k] = -np.inf
        for i in range(m):
            k = node[i]
            if active[k]:
                if g[i] < gmin[k]:
                    gmin[k] = g[i]
                if g[i] > gmax[k]:
                    gmax[k] = g[i]
        any_open = False
        for k in range(lo, hi):
            if not active[k]:
                continue
            if cnt[k] < 2 * min_leaf or gmax[k] <= gmin[k]:
                feat[k] = -1
                val[k] = tot[k] / cnt[k]
                active[k] = False
            else:
                any_open = True
                best_gain[k] = 0.0
                best_f[k] = -1
                score[k] = tot[k] * tot[k] / cnt[k]
        if not any_open:
            break

        for f in range(n_feat):
            for k in range(lo, hi):
                cl[k] = 0
                sl[k] = 0.0
            d = dense_pos[f]
            if d < 0:
                # 0/1 column: one candidate (0.5); sums over the rows equal to 1
                for p in range(bin_ptr[f], bin_ptr[f + 1]):
                    i = bin_idx[p]
                    k = node[i]
                    if active[k]:
                        cl[k] += 1
                        sl[k] += g[i]
                for k in range(lo, hi):
                    if not active[k]:
                        continue
                    c1 = cl[k]
                    c0 = cnt[k] - c1
                    if c1 >= min_leaf and c0 >= min_leaf:
                        s1 = sl[k]
                        s0 = tot[k] - s1
                        gain = s0 * s0 / c0 + s1 * s1 / c1 - score[k]
                        if gain > best_gain[k]:
                            best_gain[k] = gain
                            best_f[k] = f
                            best_t[k] = 0.5
                continue
            for jj in range(m):
                i = order[d, jj]
                k = node[i]
                if not active[k]:
                    continue
                v = svals[d, jj]
                c = cl[k]
                if c >= min_leaf and v > last[k]:
                    nr = cnt[k] - c
                    if nr >= min_leaf:
                        s = sl[k]
                        sr = tot[k] - s
                        gain = s * s / c + sr * sr / nr - score[k]
                        if gain > best_gain[k]:
                            best_gain[k] = gain
                            best_f[k] = f
                            mid = last[k] + 0.5 * (v - last[k])
                            if mid >= v:
                                mid = last[k]
                            best_t[k] = mid
                cl[k] = c + 1
                sl[k] += g[i]
                last[k] = v

        for k in range(lo, hi):
            if not active[k]:
                continue
            active[k] = False
            if best_f[k] >= 0:
                feat[k] = best_f[k]
                thr[k] = best_t[k]
                active[2 * k + 1] = True
                active[2 * k + 2] = True
            else:
                feat[k] = -1
                val[k] = tot[k] / cnt[k]
        for i in range(m):
            k = node[i]
            f = feat[k]
            if f >= 0:
                if X[rows[i], f] <= thr[k]:
                    child = 2 * k + 1
                else:
                    child = 2 * k + 2
                node[i] = child
                cnt[child] += 1
                tot[child] += g[i]


@numba.njit(cache=True, nogil=True)
def _predict_rows(X, rows, feat, thr, val, out, scale):
    for r in range(rows.shape[0]):
        k = 0
        while feat[k] >= 0:
            if X[rows[r], feat[k]] <= thr[k]:
                k = 2 * k + 1
            else:
                k = 2 * k + 2
        out[r] += scale * val[k]


# --------------------------------------------------------------------------- helpers


def _as_features(features) -> NDArray[np.float64]:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {X.shape}")
    return np.ascontiguousarray(X)


@dataclass
class _Presorted:
    """Column orderings of the training rows, built once per fit.

    Continuous columns keep a value-sorted index list; columns whose training
    values are all 0 or 1 instead keep the (sorted) local rows equal to 1,
    which is all the split search needs for their single candidate threshold.
    """

    rows: NDArray[np.int64]        # rows of X in local order
    dense_pos: NDArray[np.int64]   # (F,) row in order/svals, -1 for 0/1 columns
    order: NDArray[np.int32]       # (F_dense, m) local indices sorted by value
    svals: NDArray[np.float64]     # (F_dense, m) sorted values
    bin_ptr: NDArray[np.int64]     # (F + 1,) CSC pointers into bin_idx
    bin_idx: NDArray[np.int32]     # local rows holding a 1

    @classmethod
    def build(cls, X: NDArray[np.float64], rows: NDArray[np.int64]) -> "_Presorted":
        sub = X[rows]
        m, n_feat = sub.shape
        binary = np.all((sub == 0.0) | (sub == 1.0), axis=0)
        dense = np.flatnonzero(~binary)
        dense_pos = np.full(n_feat, -1, dtype=np.int64)
        dense_pos[dense] = np.arange(dense.size)
        dsub = sub[:, dense]
        order = np.ascontiguousarray(np.argsort(dsub, axis=0, kind="stable").T, dtype=np.int32)
        svals = np.ascontiguousarray(np.take_along_axis(dsub, order.T.astype(np.int64), axis=0).T)
        ones_col, ones_row = np.nonzero(sub.T * binary[:, None])
        bin_ptr = np.zeros(n_feat + 1, dtype=np.int64)
        np.cumsum(np.bincount(ones_col, minlength=n_feat), out=bin_ptr[1:])
        bin_idx = ones_row.astype(np.int32)
        return cls(np.ascontiguousarray(rows, dtype=np.int64), dense_pos,
                   order.reshape(dense.size, m), svals.reshape(dense.size, m), bin_ptr, bin_idx)

    def subset(self, local_mask: NDArray[np.bool_]) -> "_Presorted":
        new_id = (np.cumsum(local_mask) - 1).astype(np.int32)
        n_dense, m_sub = self.order.shape[0], int(local_mask.sum())
        keep = local_mask[self.order]
        order = np.ascontiguousarray(new_id[self.order[keep]].reshape(n_dense, m_sub))
        svals = np.ascontiguousarray(self.svals[keep].reshape(n_dense, m_sub))
        keep_bin = local_mask[self.bin_idx]
        col_of = np.repeat(np.arange(self.dense_pos.size), np.diff(self.bin_ptr))
        bin_ptr = np.zeros_like(self.bin_ptr)
        np.cumsum(np.bincount(col_of[keep_bin], minlength=self.dense_pos.size), out=bin_ptr[1:])
        bin_idx = np.ascontiguousarray(new_id[self.bin_idx[keep_bin]])
        return _Presorted(self.rows[local_mask], self.dense_pos, order, svals, bin_ptr, bin_idx)


class _Grower:
    """Scratch buffers for repeatedly growing trees on one presorted sample."""

    def __init__(self, X: NDArray[np.float64], pre: _Presorted, cfg: BoostConfig):
        self.X = X
        self.pre = pre
        self.cfg = cfg
        self.size = (1 << (cfg.max_depth + 1)) - 1
        self.node = np.zeros(pre.rows.shape[0], np.int32)

    def grow(self, g: NDArray[np.float64]) -> RegressionTree:
        feat = np.empty(self.size, np.int32)
        thr = np.zeros(self.size)
        val = np.zeros(self.size)
        pre = self.pre
        _grow(self.X, pre.rows, pre.dense_pos, pre.order, pre.svals, pre.bin_ptr, pre.bin_idx, g,
              self.cfg.max_depth, self.cfg.min_samples_leaf, feat, thr, val, self.node)
        return RegressionTree(feat, thr, val)

    def train_output(self, tree: RegressionTree) -> NDArray[np.float64]:
        """Tree output on the training rows, read off the final leaf assignment."""
        return tree.value[self.node]


def _check_targets(X: NDArray, y) -> NDArray[np.float64]:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"{X.shape[0]} feature rows but targets have shape {y.shape}")
    if X.shape[0] == 0:
        raise DimensionError("cannot fit on an empty training set")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DimensionError("features and targets must be finite")
    return y


def _rmse(resid: NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(resid * resid)))


# --------------------------------------------------------------------------- public API


def fit_tree(features, targets, cfg: BoostConfig = BoostConfig()) -> RegressionTree:
    """Fit one CART regression tree to ``targets`` by greedy variance reduction."""
    X = _as_features(features)
    y = _check_targets(X, targets)
    pre = _Presorted.build(X, np.arange(X.shape[0]))
    return _Grower(X, pre, cfg).grow(y)


def _boost(X, y, pre: _Presorted, cfg: BoostConfig, n_rounds: int,
           val_rows: NDArray[np.int64] | None = None):
    """Run ``n_rounds`` boosting rounds; returns (base, trees, val_rmse per round, train_rmse)."""
    yt = y[pre.rows]
    base = float(np.mean(yt))
    grower = _Grower(X, pre, cfg)
    lr = cfg.learning_rate
    fitted = np.full(yt.shape[0], base)
    trees: list[RegressionTree] = []
    train_curve: list[float] = []
    val_curve: list[float] = []
    if val_rows is not None:
        yv = y[val_rows]
        val_pred = np.full(val_rows.shape[0], base)
    best, best_round = np.inf, 0
    for r in range(n_rounds):
        tree = grower.grow(yt - fitted)
        trees.append(tree)
        fitted = fitted + lr * grower.train_output(tree)
        train_curve.append(_rmse(yt - fitted))
        if val_rows is not None:
            _predict_rows(X, val_rows, tree.feature, tree.threshold, tree.value, val_pred, lr)
            score = _rmse(yv - val_pred)
            val_curve.append(score)
            if score < best:
                best, best_round = score, r
            elif r - best_round >= cfg.early_stopping_rounds:
                break
    return base, trees, val_curve, train_curve


def fit_boosted(
    features,
    targets,
    cfg: BoostConfig = BoostConfig(),
    validation: Sequence[int] | NDArray[np.int64] | None = None,
    training: Sequence[int] | NDArray[np.int64] | None = None,
) -> BoostedModel:
    """Stagewise least-squares boosting.

    Parameters
    ----------
    features : array, shape (n, F)
    targets : array, shape (n,)
    cfg : BoostConfig
    validation : index array, optional
        Held-out rows for early stopping. Fitting stops once the validation
        RMSE has not improved for ``cfg.early_stopping_rounds`` rounds and the
        model keeps the trees up to the best round.
    training : index array, optional
        Rows to fit on; defaults to every row not in ``validation``.
    """
    X = _as_features(features)
    y = _check_targets(X, targets)
    n = X.shape[0]
    val_rows = None if validation is None else np.unique(np.asarray(validation, dtype=np.int64))
    if training is None:
        mask = np.ones(n, dtype=bool)
        if val_rows is not None:
            mask[val_rows] = False
        train_rows = np.flatnonzero(mask)
    else:
        train_rows = np.unique(np.asarray(training, dtype=np.int64))
        if val_rows is not None and np.intersect1d(train_rows, val_rows).size:
            raise ConfigError("training and validation rows overlap")
    if train_rows.size == 0:
        raise DimensionError("cannot fit on an empty training set")
    pre = _Presorted.build(X, train_rows)
    base, trees, val_curve, _ = _boost(X, y, pre, cfg, cfg.max_rounds, val_rows)
    if val_rows is not None and val_rows.size:
        trees = trees[: int(np.argmin(val_curve)) + 1]
    return BoostedModel(base, cfg.learning_rate, tuple(trees), X.shape[1])


def training_curve(features, targets, cfg: BoostConfig, n_rounds: int) -> list[float]:
    """Training RMSE after each of ``n_rounds`` rounds (no early stopping)."""
    X = _as_features(features)
    y = _check_targets(X, targets)
    pre = _Presorted.build(X, np.arange(X.shape[0]))
    return _boost(X, y, pre, cfg, n_rounds)[3]


def cv_folds(n_rows: int, n_folds: int, seed: int) -> list[NDArray[np.int64]]:
    """Shuffle ``range(n_rows)`` and cut it into near-equal folds."""
    if n_rows < n_folds:
        raise ConfigError(f"{n_rows} rows cannot fill {n_folds} cross-validation folds")
    perm = np.random.default_rng(seed).permutation(n_rows)
    return [np.sort(part) for part in np.array_split(perm, n_folds)]


def _cv_tune(X, y, pre: _Presorted, cfg: BoostConfig) -> tuple[int, NDArray[np.float64]]:
    m = pre.rows.shape[0]
    folds = cv_folds(m, cfg.cv_folds, cfg.seed)
    lr = cfg.learning_rate
    states = []
    for held in folds:
        mask = np.ones(m, dtype=bool)
        mask[held] = False
        sub = pre.subset(mask)
        yt = y[sub.rows]
        base = float(np.mean(yt))
        val_rows = pre.rows[held]
        states.append({
            "grower": _Grower(X, sub, cfg),
            "yt": yt,
            "fitted": np.full(yt.shape[0], base),
            "val_rows": val_rows,
            "yv": y[val_rows],
            "val_pred": np.full(val_rows.shape[0], base),
        })
    curve: list[float] = []
    best, best_round = np.inf, 0
    for r in range(cfg.max_rounds):
        scores = []
        for st in states:
            grower = st["grower"]
            tree = grower.grow(st["yt"] - st["fitted"])
            st["fitted"] += lr * grower.train_output(tree)
            _predict_rows(X, st["val_rows"], tree.feature, tree.threshold, tree.value,
                          st["val_pred"], lr)
            scores.append(_rmse(st["yv"] - st["val_pred"]))
        mean_score = float(np.mean(scores))
        curve.append(mean_score)
        if mean_score < best:
            best, best_round = mean_score, r
        elif r - best_round >= cfg.early_stopping_rounds:
            break
    return best_round + 1, np.asarray(curve)


def cv_tune_rounds(features, targets, cfg: BoostConfig = BoostConfig()) -> int:
    """Number of rounds minimising mean held-out RMSE over ``cfg.cv_folds`` random folds.

    All folds advance one round at a time; the search stops once the mean
    held-out RMSE has not improved for ``cfg.early_stopping_rounds`` rounds.
    """
    X = _as_features(features)
    y = _check_targets(X, targets)
    if X.shape[0] < cfg.cv_folds:
        raise ConfigError(f"{X.shape[0]} rows cannot fill {cfg.cv_folds} cross-validation folds")
    pre = _Presorted.build(X, np.arange(X.shape[0]))
    return _cv_tune(X, y, pre, cfg)[0]


def fit_tuned(features, targets, cfg: BoostConfig = BoostConfig(),
              training: NDArray[np.int64] | None = None) -> BoostedModel:
    """Tune the round count by cross-validation, then refit on all training rows.

    The refit uses exactly the tuned number of rounds with no early stopping.
    """
    X = _as_features(features)
    y = _check_targets(X, targets)
    rows = np.arange(X.shape[0]) if training is None else np.asarray(training, dtype=np.int64)
    if rows.shape[0] < cfg.cv_folds:
        raise ConfigError(f"{rows.shape[0]} rows cannot fill {cfg.cv_folds} cross-validation folds")
    pre = _Presorted.build(X, rows)
    n_rounds, _ = _cv_tune(X, y, pre, cfg)
    base, trees, _, _ = _boost(X, y, pre, cfg, n_rounds)
    return BoostedModel(base, cfg.learning_rate, tuple(trees), X.shape[1])


def predict(model: BoostedModel, features) -> NDArray[np.float64]:
    """Evaluate the ensemble: ``base_score + learning_rate * sum of tree outputs``."""
    X = _as_features(features)
    if X.shape[1] != model.n_features:
        raise DimensionError(
            f"model was trained on {model.n_features} features, got {X.shape[1]}"
        )
    total = np.zeros(X.shape[0])
    rows = np.arange(X.shape[0])
    for tree in model.trees:
        _predict_rows(X, rows, tree.feature, tree.threshold, tree.value, total, 1.0)
    return model.base_score + model.learning_rate * total
