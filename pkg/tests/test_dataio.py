import numpy as np
import pandas as pd
import pytest

from cohcomb.baseforecast import ExpertModel
from cohcomb.config import RunConfig, load_config
from cohcomb.dataio import (
    load_dataset_csv,
    read_ar_metrics,
    table_from_report_csv,
    write_dataset_csv,
    write_report,
)
from cohcomb.errors import ConfigError, DataError, DuplicateRow, NonContiguousDates, NonNumericValue
from cohcomb.evaluation import rolling_origin_plan, run_experiment
from cohcomb.hierarchy import aggregate_bottom_up, build_constraint_matrix


def _long(days=365, series=("a", "b", "c"), drop=()):
    dates = pd.date_range("2023-01-01", periods=days)
    rows = [
        (d.strftime("%Y-%m-%d"), s, float(k + 10 * j))
        for k, d in enumerate(dates) for j, s in enumerate(series)
        if (k, s) not in drop
    ]
    return pd.DataFrame(rows, columns=["date", "series_id", "value"])


def test_load_full_year(tmp_path):
    path = tmp_path / "d.csv"
    _long().to_csv(path, index=False)
    ds = load_dataset_csv(path)
    assert ds.frame.shape == (365, 3)
    assert list(ds.frame.columns) == ["a", "b", "c"]
    assert ds.gaps == {"a": 0, "b": 0, "c": 0}


def test_single_gap_is_carried_forward(tmp_path):
    path = tmp_path / "d.csv"
    _long(drop={(100, "b")}).to_csv(path, index=False)
    ds = load_dataset_csv(path)
    assert ds.gaps["b"] == 1
    assert ds.frame["b"].iloc[100] == ds.frame["b"].iloc[99] == 99 + 10


def test_long_gap_rejected(tmp_path):
    path = tmp_path / "d.csv"
    _long(drop={(k, "a") for k in range(50, 55)}).to_csv(path, index=False)
    with pytest.raises(NonContiguousDates):
        load_dataset_csv(path)
    assert load_dataset_csv(path, gap_cap=5).gaps["a"] == 5


def test_common_span(tmp_path):
    path = tmp_path / "d.csv"
    _long(days=30, drop={(0, "a"), (29, "c")}).to_csv(path, index=False)
    ds = load_dataset_csv(path)
    assert len(ds.frame) == 28 and ds.dates[0] == pd.Timestamp("2023-01-02")


def test_bad_rows(tmp_path):
    path = tmp_path / "d.csv"
    df = _long(days=5)
    pd.concat([df, df.iloc[[3]]]).to_csv(path, index=False)
    with pytest.raises(DuplicateRow):
        load_dataset_csv(path)
    df["value"] = df["value"].astype(object)
    df.loc[2, "value"] = "n/a"
    df.to_csv(path, index=False)
    with pytest.raises(NonNumericValue):
        load_dataset_csv(path)
    path.write_text("day,id,v\n")
    with pytest.raises(DataError):
        load_dataset_csv(path)


def test_dataset_roundtrip(tmp_path):
    frame = pd.DataFrame({"x": [1.5, 2.25], "y": [3.0, 4.0]}, index=pd.date_range("2024-02-28", periods=2))
    write_dataset_csv(frame, tmp_path / "d.csv")
    back = load_dataset_csv(tmp_path / "d.csv").frame
    np.testing.assert_array_equal(back.to_numpy(), frame.to_numpy())


def test_report_files(tmp_path, grid_spec):
    rng = np.random.default_rng(0)
    bottoms = 20 + rng.normal(0, 1, (4, 40))
    frame = pd.DataFrame(aggregate_bottom_up(grid_spec, bottoms).T,
                         index=pd.date_range("2024-01-01", periods=40), columns=list(grid_spec.series_ids))
    C = build_constraint_matrix(grid_spec)
    plan = rolling_origin_plan(40, 30, 3)
    rep = run_experiment(frame, C, [ExpertModel("mean"), ExpertModel("ses")], ["ew", "ow_var", "occ_be"], plan)
    paths = write_report(rep, tmp_path / "out")
    df = pd.read_csv(paths["report"])
    assert list(df.columns) == ["approach", "series", "horizon", "metric", "value"]
    q = df[(df.metric == "Q") & (df.approach == "occ_be")]["value"].tolist()
    assert q == [10, 9, 8]
    approaches, horizons, values = read_ar_metrics(paths["report"])
    assert approaches == ["ew", "ow_var", "occ_be"]
    assert horizons == ["1", "2", "3", "1:3"]
    assert all(values[("ew", m, h)] == 1.0 for m in ("AR-MAE", "AR-MSE") for h in horizons)
    assert paths["table"].read_text() == table_from_report_csv(paths["report"])
    coh = pd.read_csv(paths["coherence"])
    assert coh[coh.approach == "occ_be"]["residual"].max() <= 1e-8


def test_config_file_and_overrides(tmp_path):
    (tmp_path / "d.csv").write_text("x")
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text(
        '[data]\ndataset = "d.csv"\nhierarchy = "h.json"\n'
        '[models]\nexperts = ["mean", "ses"]\n'
        '[plan]\nfirst_train = 20\nhorizon = 3\n'
        '[methods]\napproaches = ["ew", "occ_be"]\n[methods.covariance]\nocc_be = "diagonal"\n'
    )
    cfg = load_config(cfg_path, horizon=5, experts="drift,mean")
    assert cfg.dataset == tmp_path / "d.csv"
    assert cfg.horizon == 5 and cfg.first_train == 20
    assert cfg.experts == ("drift", "mean")
    assert cfg.covariance == {"occ_be": "diagonal"}
    assert load_config(None) == RunConfig()
    cfg_path.write_text("[data]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_config(cfg_path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
