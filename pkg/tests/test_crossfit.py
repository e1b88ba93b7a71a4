import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panel_dml.crossfit import FoldPlan, Strategy, default_folds, make_folds, training_rows
from panel_dml.errors import ConfigError
from panel_dml.paneldata import PanelDataset


def panel(n, t):
    z = np.zeros(n * t)
    return PanelDataset(n, t, z, z, np.zeros((n * t, 1)))


def training_folds(plan, k):
    return set(np.unique(plan.fold_of[training_rows(plan, k)]).tolist())


def test_time_folds_block_arithmetic():
    ds = panel(2, 10)
    plan = make_folds(ds, "time-folds", 5)
    t = ds.period_ids + 1
    np.testing.assert_array_equal(plan.fold_of, np.ceil(t / 2).astype(int))


def test_time_folds_remainder_goes_to_early_blocks():
    plan = make_folds(panel(1, 11), "time-folds", 4)
    np.testing.assert_array_equal(plan.fold_sizes(), [3, 3, 3, 2])


def test_by_unit_two_folds_of_two_units():
    ds = panel(4, 6)
    plan = make_folds(ds, "by-unit", 2, seed=3)
    units_per_fold = [set(ds.unit_ids[plan.fold_rows(k)]) for k in (1, 2)]
    assert [len(u) for u in units_per_fold] == [2, 2]
    np.testing.assert_array_equal(plan.fold_sizes(), [12, 12])


@pytest.mark.property
@pytest.mark.parametrize("k,expected", [
    (1, set(range(3, 11))),
    (5, {1, 2, 3, 7, 8, 9, 10}),
    (10, set(range(1, 9))),
])
def test_nlo_golden_training_folds(k, expected):
    plan = make_folds(panel(3, 20), "nlo", 10)
    assert training_folds(plan, k) == expected


def test_nlo_wider_neighbourhood():
    plan = make_folds(panel(2, 12), "nlo", 6, neighbor_width=2)
    assert training_folds(plan, 1) == {4, 5, 6}
    assert training_folds(plan, 4) == {1}


def test_defaults_and_parse_aliases():
    assert default_folds("nlo") == 10 and default_folds(Strategy.RANDOM) == 5
    assert make_folds(panel(2, 20), "nlo").n_folds == 10
    for text, want in [("ByUnit", Strategy.BY_UNIT), ("by_period", Strategy.BY_PERIOD),
                       ("TimeFolds", Strategy.TIME_FOLDS), ("neighbors-left-out", Strategy.NLO)]:
        assert Strategy.parse(text) is want
    with pytest.raises(ConfigError, match="random"):
        Strategy.parse("zigzag")


@pytest.mark.parametrize("n,t,strategy,k,w,bound", [
    (5, 5, "random", 1, 1, "K >= 2"),
    (1, 2, "random", 3, 1, "N\\*T >= K"),
    (3, 10, "by-unit", 4, 1, "N >= K"),
    (10, 3, "by-period", 4, 1, "T >= K"),
    (10, 3, "time-folds", 4, 1, "T >= K"),
    (10, 20, "nlo", 5, 2, "K >= 2\\*neighbor_width \\+ 2"),
])
def test_precondition_errors_name_the_bound(n, t, strategy, k, w, bound):
    with pytest.raises(ConfigError, match=bound):
        make_folds(panel(n, t), strategy, k, neighbor_width=w)


def test_fold_id_range_checked():
    plan = make_folds(panel(3, 4), "random", 3)
    for bad in (0, 4):
        with pytest.raises(ConfigError):
            training_rows(plan, bad)
        with pytest.raises(ConfigError):
            plan.fold_rows(bad)
    with pytest.raises(ConfigError):
        FoldPlan("random", 2, np.array([1, 3]))


@pytest.mark.property
@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 12), t=st.integers(2, 25), k=st.integers(2, 8),
    strategy=st.sampled_from(list(Strategy)), seed=st.integers(0, 2**32 - 1),
)
def test_plan_invariants(n, t, k, strategy, seed):
    ds = panel(n, t)
    need = {Strategy.RANDOM: n * t, Strategy.BY_UNIT: n}.get(strategy, t)
    if strategy is Strategy.NLO:
        k = max(k, 4)
    if need < k:
        with pytest.raises(ConfigError):
            make_folds(ds, strategy, k, seed)
        return
    plan = make_folds(ds, strategy, k, seed)
    assert plan.fold_of.shape == (n * t,)
    assert set(plan.fold_of.tolist()) <= set(range(1, k + 1))
    again = make_folds(ds, strategy, k, seed)
    np.testing.assert_array_equal(plan.fold_of, again.fold_of)

    # partition and training complement
    rows = [plan.fold_rows(j) for j in range(1, k + 1)]
    np.testing.assert_array_equal(np.sort(np.concatenate(rows)), np.arange(n * t))
    for j in range(1, k + 1):
        train = training_rows(plan, j)
        assert np.intersect1d(train, rows[j - 1]).size == 0
        if strategy is not Strategy.NLO:
            assert train.size + rows[j - 1].size == n * t

    # balance in the strategy's own unit of assignment
    sizes = plan.fold_sizes()
    step = {Strategy.RANDOM: 1, Strategy.BY_UNIT: t}.get(strategy, n)
    assert sizes.max() - sizes.min() <= step

    # grouping structure
    per_unit = [len(set(plan.fold_of[ds.unit_ids == i])) for i in range(n)]
    per_period = [len(set(plan.fold_of[ds.period_ids == p])) for p in range(t)]
    if strategy is Strategy.BY_UNIT:
        assert max(per_unit) == 1
    if strategy in (Strategy.BY_PERIOD, Strategy.TIME_FOLDS, Strategy.NLO):
        assert max(per_period) == 1
    if strategy in (Strategy.TIME_FOLDS, Strategy.NLO):
        first = plan.fold_of[ds.unit_ids == 0]
        assert np.all(np.diff(first) >= 0)
        assert first[0] == 1 and first[-1] == k


@pytest.mark.property
@settings(max_examples=60, deadline=None)
@given(t=st.integers(4, 60), k=st.integers(4, 12), w=st.integers(1, 3))
def test_nlo_gap(t, k, w):
    if t < k or k < 2 * w + 2:
        return
    ds = panel(2, t)
    plan = make_folds(ds, "nlo", k, neighbor_width=w)
    for j in range(1, k + 1):
        pred_t = ds.period_ids[plan.fold_rows(j)]
        train_t = ds.period_ids[training_rows(plan, j)]
        assert train_t.size > 0
        gap = np.abs(train_t[:, None] - pred_t[None, :]).min()
        # w whole blocks sit between the two sets; the shortest block has floor(T/K) periods
        assert gap >= (t // k) * w + 1
        if w == 1:
            assert gap >= math.ceil(t / k)
