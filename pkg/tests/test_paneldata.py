import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from panel_dml.errors import DimensionError, SingularDesignError
from panel_dml.paneldata import (
    DesignMatrix,
    PanelDataset,
    as_design,
    group_demean,
    ols_fit,
    period_dummy_columns,
    period_means,
    read_csv,
    row_index,
    twoway_group_demean,
    unit_dummy_columns,
    unit_means,
    within_demean_twoway,
    within_demean_unit,
    write_csv,
)


def panel(n, t, y=None, w=None, x=None):
    k = n * t
    return PanelDataset(
        n, t,
        np.zeros(k) if y is None else np.asarray(y, float),
        np.zeros(k) if w is None else np.asarray(w, float),
        np.zeros((k, 0)) if x is None else np.asarray(x, float),
    )


def solve_by_elimination(A, b):
    """Normal equations solved with Gauss-Jordan elimination and partial pivoting."""
    M = A.T @ A
    v = A.T @ b
    aug = np.column_stack([M, v]).astype(float)
    p = M.shape[0]
    for c in range(p):
        piv = c + int(np.argmax(np.abs(aug[c:, c])))
        aug[[c, piv]] = aug[[piv, c]]
        aug[c] /= aug[c, c]
        for r in range(p):
            if r != c:
                aug[r] -= aug[r, c] * aug[c]
    return aug[:, -1]


# ---------------------------------------------------------------- dataset and layout


def test_row_layout_is_unit_major():
    ds = panel(3, 4)
    assert row_index(2, 3, 4) == 6
    assert ds.unit_ids[6] == 1 and ds.period_ids[6] == 2
    assert ds.n_obs == 12


def test_dataset_rejects_wrong_length_and_nonfinite():
    with pytest.raises(DimensionError):
        PanelDataset(2, 2, np.zeros(3), np.zeros(4), np.zeros((4, 1)))
    with pytest.raises(DimensionError):
        PanelDataset(2, 2, np.array([0, 0, np.nan, 0]), np.zeros(4), np.zeros((4, 1)))


def test_zero_confounders_allowed():
    ds = panel(2, 2)
    assert ds.n_confounders == 0 and ds.confounder_names() == []


def test_design_matrix_rejects_duplicate_names():
    with pytest.raises(DimensionError):
        DesignMatrix(("a", "a"), np.zeros((3, 2)))


# ---------------------------------------------------------------- OLS


def test_ols_exact_line():
    X = DesignMatrix(("const", "x"), np.array([[1, 0], [1, 1], [1, 2.0]]))
    fit = ols_fit(X, np.array([1, 3, 5.0]))
    assert fit["const"] == pytest.approx(1.0, abs=1e-12)
    assert fit["x"] == pytest.approx(2.0, abs=1e-12)


def test_ols_constant_fit():
    fit = ols_fit(DesignMatrix(("const",), np.ones((3, 1))), np.array([4.0, 4, 4]))
    assert fit["const"] == pytest.approx(4.0)
    np.testing.assert_allclose(fit.residuals, 0, atol=1e-12)


def test_ols_planted_coefficients_match_elimination_oracle():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((50, 3))
    beta = np.array([0.5, -2.0, 3.25])
    b = A @ beta
    fit = ols_fit(DesignMatrix(("a", "b", "c"), A), b)
    got = np.array([fit[k] for k in "abc"])
    np.testing.assert_allclose(got, beta, atol=1e-10)
    np.testing.assert_allclose(got, solve_by_elimination(A, b), atol=1e-10)


def test_ols_singular_names_columns():
    x = np.arange(6.0)
    X = DesignMatrix(("const", "x", "x2", "z"), np.column_stack([np.ones(6), x, 2 * x, np.sin(x)]))
    with pytest.raises(SingularDesignError) as exc:
        ols_fit(X, x)
    assert set(exc.value.columns) >= {"x", "x2"}
    assert "z" not in exc.value.columns


def test_ols_underdetermined_and_length_errors():
    with pytest.raises(SingularDesignError):
        ols_fit(DesignMatrix(("a", "b"), np.eye(2)[:1]), np.ones(1))
    with pytest.raises(DimensionError):
        ols_fit(DesignMatrix(("a",), np.ones((3, 1))), np.ones(2))


@pytest.mark.property
@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(6, 30),
    p=st.integers(1, 5),
    seed=st.integers(0, 2**32 - 1),
)
def test_ols_matches_normal_equations(n, p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p))
    b = rng.standard_normal(n)
    fit = ols_fit(DesignMatrix(tuple(f"c{j}" for j in range(p)), A), b)
    got = np.array([fit[f"c{j}"] for j in range(p)])
    oracle = solve_by_elimination(A, b)
    np.testing.assert_allclose(got, oracle, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(oracle).max()))
    # residuals orthogonal to every regressor
    scale = np.linalg.norm(A, axis=0) * np.linalg.norm(b) + 1e-300
    assert np.all(np.abs(A.T @ fit.residuals) / scale < 1e-8)


# ---------------------------------------------------------------- transforms


def test_within_demean_unit_examples():
    np.testing.assert_allclose(within_demean_unit(np.array([1, 2, 3.0]), panel(1, 3)), [-1, 0, 1])
    np.testing.assert_allclose(within_demean_unit(np.array([1, 3, 10, 20.0]), panel(2, 2)), [-1, 1, -5, 5])
    np.testing.assert_allclose(within_demean_unit(np.array([4, 4, 7, 7.0]), panel(2, 2)), 0)


def test_within_demean_length_mismatch():
    with pytest.raises(DimensionError):
        within_demean_unit(np.zeros(5), panel(2, 2))
    with pytest.raises(DimensionError):
        within_demean_twoway(np.zeros(5), panel(2, 2))
    with pytest.raises(DimensionError):
        unit_means(np.zeros(3), panel(2, 2))


def test_within_demean_twoway_examples():
    ds = panel(2, 2)
    np.testing.assert_allclose(within_demean_twoway(np.array([0, 1, 1, 0.0]), ds), [-0.5, 0.5, 0.5, -0.5])
    np.testing.assert_allclose(within_demean_twoway(np.full(4, 3.0), ds), 0, atol=1e-15)
    a, b = np.array([1.0, -2.0, 5.0]), np.array([0.5, 4.0])
    sep = (a[:, None] + b[None, :]).reshape(-1)
    np.testing.assert_allclose(within_demean_twoway(sep, panel(3, 2)), 0, atol=1e-12)


def test_unit_and_period_means_examples():
    np.testing.assert_allclose(unit_means(np.array([1, 2, 3, 4.0]), panel(1, 4)), 2.5)
    np.testing.assert_allclose(unit_means(np.array([1, 3, 0, 8.0]), panel(2, 2)), [2, 2, 4, 4])
    np.testing.assert_allclose(period_means(np.array([1, 3, 5, 7.0]), panel(2, 2)), [3, 5, 3, 5])
    np.testing.assert_allclose(period_means(np.array([2, 6.0]), panel(2, 1)), [4, 4])
    const = np.array([5, 5, 9, 9.0])
    np.testing.assert_array_equal(unit_means(const, panel(2, 2)), const)


def test_means_of_column_blocks():
    ds = panel(2, 3)
    x = np.arange(12.0).reshape(6, 2)
    got = unit_means(x, ds)
    np.testing.assert_allclose(got[:3], np.tile(x[:3].mean(0), (3, 1)))
    np.testing.assert_allclose(within_demean_unit(x, ds)[:, 1], within_demean_unit(x[:, 1], ds))


def test_dummy_columns():
    np.testing.assert_array_equal(unit_dummy_columns(panel(2, 1)).values, [[1, 0], [0, 1]])
    d = unit_dummy_columns(panel(3, 2))
    np.testing.assert_array_equal(d.values.sum(axis=0), [2, 2, 2])
    np.testing.assert_array_equal(d.values.sum(axis=1), 1)
    assert d.names == ("z1", "z2", "z3")
    p = period_dummy_columns(panel(3, 2))
    assert p.names == ("p1", "p2") and np.all(p.values.sum(axis=0) == 3)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.mark.property
@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_within_demean_properties(n, t, data):
    ds = panel(n, t)
    v = data.draw(arrays(np.float64, n * t, elements=finite))
    d = within_demean_unit(v, ds)
    np.testing.assert_allclose(within_demean_unit(d, ds), d, atol=1e-12 * max(1, np.abs(v).max()))
    np.testing.assert_allclose(d + unit_means(v, ds), v, rtol=0, atol=1e-12 * max(1, np.abs(v).max()))
    np.testing.assert_allclose(d.reshape(n, t).sum(axis=1), 0, atol=1e-10 * max(1, np.abs(v).max()) * t)
    assert np.var(d) <= np.var(v) + 1e-9 * max(1, np.var(v))
    d2 = within_demean_twoway(v, ds)
    tol = 1e-8 * max(1, np.abs(v).max())
    np.testing.assert_allclose(d2.reshape(n, t).sum(axis=1), 0, atol=tol * t)
    np.testing.assert_allclose(d2.reshape(n, t).sum(axis=0), 0, atol=tol * n)


def test_reconstruction_identity_is_exact():
    rng = np.random.default_rng(3)
    ds = panel(7, 5)
    v = rng.standard_normal(35)
    d = within_demean_unit(v, ds)
    np.testing.assert_array_equal(d, v - unit_means(v, ds))


def test_group_demean_matches_balanced_transforms():
    rng = np.random.default_rng(5)
    ds = panel(4, 5)
    v = rng.standard_normal(20)
    np.testing.assert_allclose(group_demean(v, ds.unit_ids), within_demean_unit(v, ds), atol=1e-14)
    np.testing.assert_allclose(
        twoway_group_demean(v, ds.unit_ids, ds.period_ids), within_demean_twoway(v, ds), atol=1e-10
    )


# ---------------------------------------------------------------- FE identities on generic panels


def _random_panel(seed, n=6, t=4, j=2):
    rng = np.random.default_rng(seed)
    k = n * t
    x = rng.standard_normal((k, j)) + np.repeat(rng.standard_normal((n, j)), t, axis=0)
    w = x @ rng.standard_normal(j) + np.repeat(rng.standard_normal(n), t) + rng.standard_normal(k)
    y = w + x @ rng.standard_normal(j) + np.repeat(rng.standard_normal(n), t) + rng.standard_normal(k)
    return PanelDataset(n, t, y, w, x)


@pytest.mark.property
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.integers(3, 6))
def test_fe_equals_dummy_ols(seed, n, t):
    ds = _random_panel(seed, n, t)
    dm = lambda v: within_demean_unit(v, ds)
    fe = ols_fit(as_design([("w", dm(ds.treatment)), ("x1", dm(ds.confounders[:, 0])),
                            ("x2", dm(ds.confounders[:, 1]))]), dm(ds.outcome))
    lsdv = ols_fit(
        as_design([("w", ds.treatment), ("x1", ds.confounders[:, 0]), ("x2", ds.confounders[:, 1])])
        .hstack(unit_dummy_columns(ds)),
        ds.outcome,
    )
    for k in ("w", "x1", "x2"):
        assert fe[k] == pytest.approx(lsdv[k], rel=1e-8, abs=1e-8)


@pytest.mark.property
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 9), st.integers(3, 6))
def test_mundlak_equals_fe(seed, n, t):
    ds = _random_panel(seed, n, t)
    x, w = ds.confounders, ds.treatment
    dm = lambda v: within_demean_unit(v, ds)
    fe = ols_fit(as_design([("w", dm(w)), ("x1", dm(x[:, 0])), ("x2", dm(x[:, 1]))]), dm(ds.outcome))
    xbar = unit_means(x, ds)
    cre = ols_fit(
        as_design([("const", np.ones(ds.n_obs)), ("w", w), ("x1", x[:, 0]), ("x2", x[:, 1]),
                   ("xbar1", xbar[:, 0]), ("xbar2", xbar[:, 1]), ("wbar", unit_means(w, ds))]),
        ds.outcome,
    )
    assert cre["w"] == pytest.approx(fe["w"], rel=1e-8, abs=1e-8)


def test_mundlak_without_treatment_mean_differs_from_fe():
    # the unit mean of w must be among the regressors; x-means alone do not reproduce FE
    ds = _random_panel(1, 40, 5)
    x, w = ds.confounders, ds.treatment
    dm = lambda v: within_demean_unit(v, ds)
    fe = ols_fit(as_design([("w", dm(w)), ("x1", dm(x[:, 0])), ("x2", dm(x[:, 1]))]), dm(ds.outcome))
    xbar = unit_means(x, ds)
    partial = ols_fit(
        as_design([("const", np.ones(ds.n_obs)), ("w", w), ("x1", x[:, 0]), ("x2", x[:, 1]),
                   ("xbar1", xbar[:, 0]), ("xbar2", xbar[:, 1])]),
        ds.outcome,
    )
    assert abs(partial["w"] - fe["w"]) > 1e-4


# ---------------------------------------------------------------- CSV


def test_csv_round_trip_is_lossless(tmp_path):
    ds = _random_panel(9, 3, 4)
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    back = read_csv(path)
    assert (back.n_units, back.n_periods) == (3, 4)
    np.testing.assert_array_equal(back.outcome, ds.outcome)
    np.testing.assert_array_equal(back.confounders, ds.confounders)
    lines = path.read_text().splitlines()
    assert lines[0] == "unit,period,y,w,x1,x2"
    assert lines[1].startswith("1,1,")


def test_csv_shuffled_rows_and_unbalanced(tmp_path):
    ds = _random_panel(2, 2, 3)
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    head, *body = path.read_text().splitlines()
    path.write_text("\n".join([head] + body[::-1]) + "\n")
    np.testing.assert_array_equal(read_csv(path).treatment, ds.treatment)
    path.write_text("\n".join([head] + body[:-1]) + "\n")
    with pytest.raises(DimensionError):
        read_csv(path)
