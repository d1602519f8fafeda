"""Simple deterministic expert forecasters and import of external forecasts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .combiner import ForecastBundle
from .errors import (
    DuplicateRow,
    NonNumericValue,
    SeriesTooShort,
    UnbalancedBundle,
    UnknownSeriesId,
)

MODEL_KINDS = ("seasonal_naive", "mean", "drift", "ses")


@dataclass(frozen=True)
class SeriesData:
    values: np.ndarray
    period: int = 7
    id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"series {self.id!r} holds non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def head(self, length: int) -> "SeriesData":
        return SeriesData(self.values[:length], self.period, self.id)


@dataclass(frozen=True)
class ExpertModel:
    kind: str
    alpha: float = 0.2
    name: str | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "ses" and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"ses alpha must lie in (0, 1), got {self.alpha}")

    @property
    def id(self) -> str:
        return self.name or self.kind

    def warmup(self, period: int) -> int:
        """Leading observations without a one-step in-sample residual."""
        return {"seasonal_naive": period, "mean": 1, "drift": 2, "ses": 1}[self.kind]


def _need(series: SeriesData, length: int, what: str) -> None:
    if len(series) < length:
        raise SeriesTooShort(
            f"series {series.id!r} has {len(series)} observations, {what} needs {length}"
        )


def forecast_base(model: ExpertModel, series: SeriesData, h: int) -> np.ndarray:
    y = series.values
    T = len(y)
    steps = np.arange(1, h + 1)
    if model.kind == "seasonal_naive":
        s = series.period
        _need(series, s, "seasonal_naive")
        return y[T - s + (steps - 1) % s].copy()
    if model.kind == "mean":
        _need(series, 1, "mean")
        return np.full(h, y.mean())
    if model.kind == "drift":
        _need(series, 2, "drift")
        return y[-1] + steps * (y[-1] - y[0]) / (T - 1)
    _need(series, 1, "ses")
    return np.full(h, _ses_levels(y, model.alpha)[-1])


def _ses_levels(y: np.ndarray, alpha: float) -> np.ndarray:
    level = np.empty_like(y)
    level[0] = y[0]
    for t in range(1, len(y)):
        level[t] = alpha * y[t] + (1.0 - alpha) * level[t - 1]
    return level


def one_step_fitted(model: ExpertModel, series: SeriesData) -> np.ndarray:
    """``y_hat[t | t-1]`` for every ``t``; NaN where the model cannot forecast yet."""
    y = series.values
    T = len(y)
    fit = np.full(T, np.nan)
    if model.kind == "seasonal_naive":
        s = series.period
        fit[s:] = y[:T - s]
    elif model.kind == "mean":
        fit[1:] = np.cumsum(y)[:-1] / np.arange(1, T)
    elif model.kind == "drift":
        t = np.arange(2, T)
        fit[2:] = y[t - 1] + (y[t - 1] - y[0]) / (t - 1)
    else:
        fit[1:] = _ses_levels(y, model.alpha)[:-1]
    return fit


def insample_residuals(model: ExpertModel, series: SeriesData, trim: int | None = None) -> np.ndarray:
    """One-step in-sample errors ``y_t - y_hat[t | t-1]`` from position ``trim`` on.

    ``trim`` defaults to the model's own warm-up; pass the largest warm-up
    over a set of experts to get equally long residual vectors.
    """
    start = model.warmup(series.period) if trim is None else trim
    if start < model.warmup(series.period):
        raise ValueError(f"trim {start} is shorter than the {model.kind} warm-up")
    _need(series, start + 1, f"{model.kind} residuals")
    return (series.values - one_step_fitted(model, series))[start:]


@dataclass(frozen=True)
class BundleSet:
    """Imported base forecasts keyed by ``(origin_date, horizon)``."""

    bundles: dict
    experts: tuple[str, ...]
    series_ids: tuple[str, ...]

    def __getitem__(self, key) -> ForecastBundle:
        return self.bundles[key]

    def __len__(self) -> int:
        return len(self.bundles)

    @property
    def origins(self) -> list:
        return sorted({o for o, _ in self.bundles})


BUNDLE_COLUMNS = ["origin_date", "horizon", "expert_id", "series_id", "value"]


def read_bundle_frame(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in BUNDLE_COLUMNS if c not in df.columns]
    if missing:
        raise UnbalancedBundle(f"{path}: missing columns {missing}")
    df = df[BUNDLE_COLUMNS].copy()
    values = pd.to_numeric(df["value"], errors="coerce")
    bad = values.isna() | ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise NonNumericValue(f"{path}: non-numeric value {df['value'].iloc[row]!r} on data row {row + 1}")
    df["value"] = values.astype(float)
    df["horizon"] = pd.to_numeric(df["horizon"], errors="coerce")
    if df["horizon"].isna().any() or (df["horizon"] < 1).any():
        raise NonNumericValue(f"{path}: horizons must be positive integers")
    df["horizon"] = df["horizon"].astype(int)
    df["origin_date"] = pd.to_datetime(df["origin_date"], format="ISO8601")
    keys = ["origin_date", "horizon", "expert_id", "series_id"]
    dup = df.duplicated(keys)
    if dup.any():
        raise DuplicateRow(f"{path}: duplicated rows, first {df.loc[dup, keys].iloc[0].tolist()}")
    return df


def import_forecast_bundle(
    path: str | Path | Sequence[str | Path],
    index: Sequence[str],
    experts: Sequence[str] | None = None,
) -> BundleSet:
    """Read long-format forecasts into balanced bundles in ``index`` series order.

    Experts keep their order of first appearance unless ``experts`` is given.
    """
    paths = [path] if isinstance(path, (str, Path)) else list(path)
    df = pd.concat([read_bundle_frame(p) for p in paths], ignore_index=True)
    keys = ["origin_date", "horizon", "expert_id", "series_id"]
    if df.duplicated(keys).any():
        raise DuplicateRow("the same forecast appears in more than one file")
    index = tuple(index)
    unknown = sorted(set(df["series_id"]) - set(index))
    if unknown:
        raise UnknownSeriesId(f"series not in hierarchy: {unknown[:5]}")
    if experts is None:
        experts = tuple(dict.fromkeys(df["expert_id"]))
    else:
        experts = tuple(experts)
        absent = sorted(set(experts) - set(df["expert_id"]))
        if absent:
            raise UnbalancedBundle(f"experts without forecasts: {absent}")
        df = df[df["expert_id"].isin(experts)]

    n, p = len(index), len(experts)
    e_pos = {e: j for j, e in enumerate(experts)}
    s_pos = {s: i for i, s in enumerate(index)}
    bundles = {}
    for (origin, h), grp in df.groupby(["origin_date", "horizon"], sort=True):
        if len(grp) != n * p:
            raise UnbalancedBundle(
                f"origin {origin.date()} horizon {h}: {len(grp)} cells, expected {n}*{p}"
            )
        pos = grp["expert_id"].map(e_pos).to_numpy() * n + grp["series_id"].map(s_pos).to_numpy()
        values = np.empty(n * p)
        values[pos] = grp["value"].to_numpy()
        bundles[(origin, int(h))] = ForecastBundle(values, n, p)
    return BundleSet(bundles, experts, index)
