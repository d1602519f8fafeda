import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohcomb.baseforecast import ExpertModel
from cohcomb.errors import ConfigError, EmptyTestSet, MissingForecast, ZeroBenchmarkError
from cohcomb.evaluation import (
    EvalReport,
    ExperimentConfig,
    ar_relative,
    ar_table,
    geometric_relative,
    rolling_origin_plan,
    run_experiment,
    score,
    table_columns,
    validate_approach,
)
from cohcomb.hierarchy import aggregate_bottom_up, build_constraint_matrix


def enumerate_q(total, first, H, step):
    """Count (origin, horizon) targets inside the sample by brute force."""
    q = [0] * H
    o = first
    while o < total:
        for h in range(1, H + 1):
            if o + h <= total:
                q[h - 1] += 1
        o += step
    return tuple(q)


def test_plan_small():
    plan = rolling_origin_plan(20, 10, 3)
    assert plan.origins == tuple(range(10, 20))
    assert plan.q_counts == (10, 9, 8) == enumerate_q(20, 10, 3, 1)


def test_plan_year():
    q = rolling_origin_plan(365, 141, 7).q_counts
    assert q[0] == 224 and q[-1] == 218


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 80), st.integers(1, 79), st.integers(1, 9), st.integers(1, 5))
def test_plan_matches_enumeration(total, first, H, step):
    if first >= total:
        with pytest.raises(EmptyTestSet):
            rolling_origin_plan(total, first, H, step)
        return
    assert rolling_origin_plan(total, first, H, step).q_counts == enumerate_q(total, first, H, step)


def test_plan_errors():
    with pytest.raises(EmptyTestSet):
        rolling_origin_plan(10, 10, 3)
    with pytest.raises(ConfigError):
        rolling_origin_plan(10, 5, 0)


def _grid(plan, n, fill):
    return np.full((len(plan.origins), plan.max_horizon, n), fill, dtype=float)


def test_score_examples():
    plan = rolling_origin_plan(2, 1, 1)
    mae, mse, q = score([0.0, 1.0], _grid(plan, 1, 2.0), plan)  # error -1
    assert (mae[0, 0], mse[0, 0], q) == (1.0, 1.0, (1,))
    plan = rolling_origin_plan(3, 1, 1)
    actual = np.array([0.0, 3.0, -1.0])
    mae, mse, _ = score(actual, _grid(plan, 1, 0.0), plan)
    assert (mae[0, 0], mse[0, 0]) == (2.0, 5.0)
    mae, mse, _ = score(actual, actual[1:].reshape(2, 1, 1), plan)
    assert (mae[0, 0], mse[0, 0]) == (0.0, 0.0)


def test_score_ignores_out_of_sample_slots():
    plan = rolling_origin_plan(4, 2, 3)
    fc = _grid(plan, 1, 0.0)
    fc[1, 1:] = np.nan  # beyond the sample, never scored
    mae, _, q = score(np.ones(4), fc, plan)
    assert q == (2, 1, 0)
    np.testing.assert_array_equal(mae[:2, 0], [1, 1])
    fc[0, 0] = np.nan
    with pytest.raises(MissingForecast):
        score(np.ones(4), fc, plan)


def test_geometric_relative_examples():
    assert geometric_relative([1.0, 2.0], [1.0, 2.0]).value == 1.0
    assert geometric_relative([0.5, 2.0], [1.0, 1.0]).value == pytest.approx(1.0, abs=1e-15)
    assert geometric_relative([0.81, 1.0], [1.0, 1.0]).value == pytest.approx(0.9, abs=1e-15)
    r = geometric_relative([2.0, 3.0], [0.0, 3.0])
    assert (r.value, r.n_ratios, r.excluded) == (1.0, 1, 1)
    with pytest.raises(ZeroBenchmarkError):
        geometric_relative([1.0], [0.0])


ratios = st.lists(st.floats(0.01, 100), min_size=1, max_size=20)


@settings(max_examples=100, deadline=None)
@given(ratios, st.randoms(use_true_random=False))
def test_geometric_relative_permutation_invariant(vals, rnd):
    app = np.array(vals)
    bench = np.linspace(0.5, 2.0, len(vals))
    perm = list(range(len(vals)))
    rnd.shuffle(perm)
    a = geometric_relative(app, bench).value
    b = geometric_relative(app[perm], bench[perm]).value
    assert a == pytest.approx(b, rel=1e-12)


def _report_from_errors(err_app, err_bench, plan):
    n = err_app.shape[2]
    valid = np.ones(len(plan.origins), dtype=bool)
    return EvalReport(plan, tuple(f"s{i}" for i in range(n)),
                      {"ew": err_bench, "x": err_app}, {"ew": valid, "x": valid.copy()})


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 3.0]))
def test_ar_homogeneity(seed, c):
    rng = np.random.default_rng(seed)
    plan = rolling_origin_plan(30, 20, 3)
    e = rng.normal(size=(len(plan.origins), 3, 4))
    e[~plan.target_mask()] = np.nan
    rep = _report_from_errors(c * e, e, plan)
    for hs in ([1], [1, 2, 3]):
        mae, mse = ar_relative(rep, "x", hs)
        assert mae.value == pytest.approx(c, abs=1e-9)
        assert mse.value == pytest.approx(c * c, abs=1e-9)


def test_toy_experiment(toy_data):
    C, frame = toy_data
    plan = rolling_origin_plan(len(frame), 40, 7)
    rep = run_experiment(frame, C, [ExpertModel("seasonal_naive"), ExpertModel("ses")],
                         ["ew", "ow_var", "occ_be", "mint_shr:ses", "base:ses"], plan)
    table = ar_table(rep)
    assert (table.loc["ew"] == 1.0).all()
    for a in rep.approaches:
        np.testing.assert_array_equal(rep.q_counts(a), plan.q_counts)
        assert rep.failures(a) == 0
    for a in ("occ_be", "mint_shr:ses"):
        assert rep.coherence_max(a) <= 1e-8
    assert table.columns.get_level_values(1).tolist()[:6] == ["1", "2", "3", "5", "7", "1:7"]


def test_threads_give_identical_results(toy_data):
    C, frame = toy_data
    plan = rolling_origin_plan(len(frame), 50, 3, step=2)
    experts = [ExpertModel("mean"), ExpertModel("drift"), ExpertModel("ses")]
    apps = ["ew", "ow_cov", "src", "scr_var", "occ_wlsv", "occ_be"]
    one = run_experiment(frame, C, experts, apps, plan, ExperimentConfig(threads=1))
    many = run_experiment(frame, C, experts, apps, plan, ExperimentConfig(threads=4))
    for a in apps:
        np.testing.assert_array_equal(one.errors[a], many.errors[a])


def test_failures_are_recorded_and_run_continues(toy_data):
    C, frame = toy_data
    # seasonal naive residuals start at day 8, so origins 10 and 11 have 3 and 4 rows
    cfg = ExperimentConfig(min_residual_rows=5)
    rep = run_experiment(frame.iloc[:20], C, [ExpertModel("seasonal_naive"), ExpertModel("mean")],
                         ["ew", "occ_be"], rolling_origin_plan(20, 10, 2), cfg)
    assert rep.failures("ew") == 0
    assert rep.failures("occ_be") == 2
    assert "TooFewObservations" in rep.failure_messages["occ_be"][0]
    np.testing.assert_array_equal(rep.q_counts("occ_be"), [8, 7])
    assert np.isfinite(ar_relative(rep, "occ_be", [1, 2])[1].value)


def test_validate_approach():
    validate_approach("base:ses", ["ses"])
    validate_approach("mint_shr", ["ses"])
    for bad in ("base:arima", "mint_shr:x", "occ", "ew:1"):
        with pytest.raises(ConfigError):
            validate_approach(bad, ["ses"])


def test_table_columns():
    assert table_columns(7) == [1, 2, 3, 5, 7, "1:7"]
    assert table_columns(2) == [1, 2, "1:2"]


@pytest.fixture
def toy_data(grid_spec):
    rng = np.random.default_rng(4)
    T = 80
    t = np.arange(T)
    bottoms = 50 + 5 * np.sin(2 * np.pi * t / 7)[None, :] + rng.normal(0, 2, (len(grid_spec.bottom_ids), T))
    full = aggregate_bottom_up(grid_spec, bottoms)
    frame = pd.DataFrame(full.T, index=pd.date_range("2024-01-01", periods=T), columns=list(grid_spec.series_ids))
    return build_constraint_matrix(grid_spec), frame
