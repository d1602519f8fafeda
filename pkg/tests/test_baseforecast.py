import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohcomb.baseforecast import (
    MODEL_KINDS,
    ExpertModel,
    SeriesData,
    forecast_base,
    import_forecast_bundle,
    insample_residuals,
    one_step_fitted,
)
from cohcomb.errors import DuplicateRow, NonNumericValue, SeriesTooShort, UnbalancedBundle, UnknownSeriesId


def test_seasonal_naive_repeats_last_cycle():
    s = SeriesData(np.arange(1.0, 8.0), period=7)
    np.testing.assert_array_equal(forecast_base(ExpertModel("seasonal_naive"), s, 3), [1, 2, 3])
    np.testing.assert_array_equal(forecast_base(ExpertModel("seasonal_naive"), s, 9), [1, 2, 3, 4, 5, 6, 7, 1, 2])


def test_mean_and_drift():
    np.testing.assert_array_equal(forecast_base(ExpertModel("mean"), SeriesData([2.0, 4, 6]), 2), [4, 4])
    np.testing.assert_allclose(forecast_base(ExpertModel("drift"), SeriesData(np.arange(1.0, 11.0)), 2), [11, 12])


def test_ses_hand_computed():
    # level: 10 -> 10 + 0.5 (20 - 10) = 15 -> 15 + 0.5 (10 - 15) = 12.5
    fc = forecast_base(ExpertModel("ses", alpha=0.5), SeriesData([10.0, 20.0, 10.0]), 3)
    np.testing.assert_allclose(fc, [12.5] * 3)


def test_too_short():
    with pytest.raises(SeriesTooShort):
        forecast_base(ExpertModel("seasonal_naive"), SeriesData(np.ones(6)), 1)
    with pytest.raises(SeriesTooShort):
        forecast_base(ExpertModel("drift"), SeriesData([1.0]), 1)


def test_bad_model_arguments():
    with pytest.raises(ValueError):
        ExpertModel("arima")
    with pytest.raises(ValueError):
        ExpertModel("ses", alpha=1.5)
    with pytest.raises(ValueError):
        SeriesData([1.0, np.nan])


def test_residual_examples():
    periodic = SeriesData(np.tile(np.arange(7.0), 4))
    np.testing.assert_array_equal(insample_residuals(ExpertModel("seasonal_naive"), periodic), 0.0)
    np.testing.assert_allclose(insample_residuals(ExpertModel("mean"), SeriesData([2.0, 4, 6])), [2, 3])


def test_fitted_nan_during_warmup():
    fit = one_step_fitted(ExpertModel("seasonal_naive"), SeriesData(np.arange(10.0)))
    assert np.isnan(fit[:7]).all() and np.isfinite(fit[7:]).all()


def test_fitted_matches_recursive_forecasts():
    y = np.random.default_rng(1).normal(50, 5, 30)
    for kind in MODEL_KINDS:
        model = ExpertModel(kind)
        fit = one_step_fitted(model, SeriesData(y))
        for t in range(model.warmup(7), 30):
            assert fit[t] == pytest.approx(forecast_base(model, SeriesData(y[:t]), 1)[0], rel=1e-12)


def test_common_trim_gives_equal_rows():
    y = SeriesData(np.random.default_rng(2).normal(size=40))
    rows = {len(insample_residuals(ExpertModel(k), y, trim=7)) for k in MODEL_KINDS}
    assert rows == {33}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=40), st.sampled_from(MODEL_KINDS), st.integers(1, 10))
def test_forecasts_deterministic(values, kind, h):
    s = SeriesData(values)
    a = forecast_base(ExpertModel(kind), s, h)
    b = forecast_base(ExpertModel(kind), s, h)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (h,)


def _write_bundle(path, experts, series, origins=("2024-01-01",), horizons=(1,), drop=None):
    rows = [
        (o, h, e, s, float(100 * j + i + h))
        for o in origins for h in horizons
        for j, e in enumerate(experts) for i, s in enumerate(series)
    ]
    if drop is not None:
        del rows[drop]
    pd.DataFrame(rows, columns=["origin_date", "horizon", "expert_id", "series_id", "value"]).to_csv(path, index=False)


def test_import_large_bundle(tmp_path):
    series = [f"s{i}" for i in range(76)]
    path = tmp_path / "f.csv"
    _write_bundle(path, ["a", "b", "c"], series, horizons=(1, 2))
    bs = import_forecast_bundle(path, series)
    assert bs.experts == ("a", "b", "c") and len(bs) == 2
    b = bs[(pd.Timestamp("2024-01-01"), 2)]
    assert (b.n, b.p, b.m) == (76, 3, 228)
    assert b.values[b.index(2, 5)] == 200 + 5 + 2


def test_import_reorders_to_index(tmp_path):
    path = tmp_path / "f.csv"
    _write_bundle(path, ["a", "b"], ["x", "y"])
    b = import_forecast_bundle(path, ["y", "x"], experts=["b", "a"])[(pd.Timestamp("2024-01-01"), 1)]
    np.testing.assert_array_equal(b.values, [102, 101, 2, 1])


def test_import_errors(tmp_path):
    path = tmp_path / "f.csv"
    _write_bundle(path, ["a", "b"], ["x", "y"], drop=3)
    with pytest.raises(UnbalancedBundle):
        import_forecast_bundle(path, ["x", "y"])
    _write_bundle(path, ["a"], ["x", "zz"])
    with pytest.raises(UnknownSeriesId):
        import_forecast_bundle(path, ["x", "y"])
    with pytest.raises(DuplicateRow):
        _write_bundle(path, ["a"], ["x"])
        import_forecast_bundle([path, path], ["x"])
    path.write_text("origin_date,horizon,expert_id,series_id,value\n2024-01-01,1,a,x,abc\n")
    with pytest.raises(NonNumericValue):
        import_forecast_bundle(path, ["x"])
