"""Rolling-origin experiments and relative accuracy scoring."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .baseforecast import BundleSet, ExpertModel, SeriesData, forecast_base, one_step_fitted
from .combiner import (
    ForecastBundle,
    combine_weighted,
    combined_residuals,
    mint_reconcile,
    occ_combine_many,
    single_task_weights,
)
from .covariance import ResidualPanel, assemble_W
from .errors import (
    CohCombError,
    ConfigError,
    DataError,
    DimensionMismatch,
    EmptyTestSet,
    MissingForecast,
    TooFewObservations,
    ZeroBenchmarkError,
)
from .hierarchy import ConstraintMatrix, coherence_residual

log = logging.getLogger(__name__)

SINGLE_APPROACHES = (
    "ew", "ow_var", "ow_cov", "mint_shr", "src",
    "scr_ew", "scr_var", "scr_cov", "occ_wlsv", "occ_be",
)
DEFAULT_COV_KINDS = {
    "occ_wlsv": "diagonal",
    "occ_be": "expert_block_shrunk",
    "mint_shr": "full_shrunk",
    "src": "full_shrunk",
    "scr_ew": "full_shrunk",
    "scr_var": "full_shrunk",
    "scr_cov": "full_shrunk",
}
TABLE_HORIZONS = (1, 2, 3, 5, 7)


@dataclass(frozen=True)
class RollingPlan:
    total_len: int
    first_train_len: int
    max_horizon: int
    step: int
    origins: tuple[int, ...]

    @property
    def q_counts(self) -> tuple[int, ...]:
        """Number of evaluable forecasts per horizon ``1..H``."""
        o = np.asarray(self.origins)
        return tuple(int(np.sum(o + h <= self.total_len)) for h in range(1, self.max_horizon + 1))

    def target_mask(self) -> np.ndarray:
        """``(n_origins, H)`` flags for targets inside the sample."""
        o = np.asarray(self.origins)[:, None]
        h = np.arange(1, self.max_horizon + 1)[None, :]
        return o + h <= self.total_len


def rolling_origin_plan(total_len: int, first_train_len: int, H: int, step: int = 1) -> RollingPlan:
    """Expanding-window origins ``first_train_len, first_train_len + step, ...``.

    An origin ``o`` trains on the first ``o`` observations and forecasts
    positions ``o+1 .. o+H`` (1-based), truncated at ``total_len``.
    """
    if H < 1 or step < 1 or first_train_len < 1:
        raise ConfigError("horizon, step and first training length must be positive")
    if first_train_len + 1 > total_len:
        raise EmptyTestSet(f"first training window {first_train_len} leaves no test data in {total_len}")
    origins = tuple(range(first_train_len, total_len, step))
    return RollingPlan(total_len, first_train_len, H, step, origins)


def forecast_errors(actuals: np.ndarray, forecasts: np.ndarray, plan: RollingPlan) -> np.ndarray:
    """``actual - forecast`` on the ``(n_origins, H, n)`` grid, NaN beyond the sample."""
    actuals = np.asarray(actuals, dtype=float)
    forecasts = np.asarray(forecasts, dtype=float)
    if actuals.ndim == 1:
        actuals = actuals[:, None]
    if forecasts.ndim == 2:
        forecasts = forecasts[:, :, None]
    n_o, H = len(plan.origins), plan.max_horizon
    if forecasts.shape[:2] != (n_o, H) or forecasts.shape[2] != actuals.shape[1]:
        raise DimensionMismatch(f"forecasts {forecasts.shape} do not match plan ({n_o}, {H}, n)")
    if actuals.shape[0] != plan.total_len:
        raise DimensionMismatch(f"{actuals.shape[0]} actuals for a plan over {plan.total_len}")
    mask = plan.target_mask()
    idx = np.asarray(plan.origins)[:, None] + np.arange(H)[None, :]
    target = actuals[np.minimum(idx, plan.total_len - 1)]
    err = np.where(mask[:, :, None], target - forecasts, np.nan)
    if np.isnan(err[mask]).any():
        o, h, _ = np.argwhere(np.isnan(err) & mask[:, :, None])[0]
        raise MissingForecast(f"no forecast for origin {plan.origins[o]}, horizon {h + 1}")
    return err


def score(actuals, forecasts, plan: RollingPlan) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Per-horizon, per-series MAE and MSE (each ``H x n``) and the counts ``Q_h``."""
    err = forecast_errors(actuals, forecasts, plan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # horizons with Q_h = 0 give NaN
        return np.nanmean(np.abs(err), axis=0), np.nanmean(err**2, axis=0), plan.q_counts


@dataclass(frozen=True)
class Relative:
    value: float
    n_ratios: int
    excluded: int


def geometric_relative(app, bench) -> Relative:
    """Geometric mean of ``app / bench`` over entries with a positive benchmark."""
    app = np.asarray(app, dtype=float).ravel()
    bench = np.asarray(bench, dtype=float).ravel()
    keep = np.isfinite(app) & np.isfinite(bench) & (bench > 0)
    excluded = int(np.sum(np.isfinite(bench) & ~keep))
    if not keep.any():
        raise ZeroBenchmarkError("no series with a positive benchmark error")
    with np.errstate(divide="ignore"):
        logs = np.log(app[keep]) - np.log(bench[keep])
    return Relative(float(np.exp(np.mean(logs))), int(keep.sum()), excluded)


@dataclass
class EvalReport:
    """Errors of every approach on the rolling grid plus derived scores.

    ``errors[app]`` is ``(n_origins, H, n)``; ``valid[app]`` flags origins
    where the approach succeeded. Relative scores compare an approach with
    the benchmark on exactly the origins where the approach succeeded.
    """

    plan: RollingPlan
    series_ids: tuple[str, ...]
    errors: dict[str, np.ndarray]
    valid: dict[str, np.ndarray]
    benchmark: str = "ew"
    coherence: list[tuple[str, int, int, float]] = field(default_factory=list)
    failure_messages: dict[str, list[str]] = field(default_factory=dict)

    @property
    def approaches(self) -> tuple[str, ...]:
        return tuple(self.errors)

    @property
    def horizons(self) -> tuple[int, ...]:
        return tuple(range(1, self.plan.max_horizon + 1))

    def failures(self, approach: str) -> int:
        return int(np.sum(~self.valid[approach]))

    def _cases(self, approach: str, metric: str, over: str) -> np.ndarray:
        err = self.errors[over][self.valid[approach]]
        vals = np.abs(err) if metric == "mae" else err**2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(vals, axis=0) if len(err) else np.full(err.shape[1:], np.nan)

    def mae(self, approach: str) -> np.ndarray:
        return self._cases(approach, "mae", approach)

    def mse(self, approach: str) -> np.ndarray:
        return self._cases(approach, "mse", approach)

    def q_counts(self, approach: str) -> np.ndarray:
        mask = self.plan.target_mask()[self.valid[approach]]
        return mask.sum(axis=0)

    def coherence_max(self, approach: str) -> float:
        vals = [r for a, _, _, r in self.coherence if a == approach]
        return max(vals) if vals else float("nan")


def ar_relative(
    report: EvalReport,
    approach: str,
    horizons: Sequence[int] | int,
    benchmark: str | None = None,
) -> tuple[Relative, Relative]:
    """AR-MAE and AR-MSE of ``approach`` against the benchmark.

    Several horizons are pooled by one geometric mean over all (horizon,
    series) ratios.
    """
    bench = benchmark or report.benchmark
    hs = [horizons] if isinstance(horizons, int) else list(horizons)
    rows = [h - 1 for h in hs]
    out = []
    for metric in ("mae", "mse"):
        app = report._cases(approach, metric, approach)[rows]
        ref = report._cases(approach, metric, bench)[rows]
        if approach == bench:
            app = ref
        out.append(geometric_relative(app, ref))
    return out[0], out[1]


def table_columns(H: int) -> list:
    cols = [h for h in TABLE_HORIZONS if h <= H]
    cols.append(f"1:{H}")
    return cols


def ar_table(report: EvalReport, columns: Sequence | None = None) -> pd.DataFrame:
    """One row per approach, AR-MAE then AR-MSE per column label."""
    H = report.plan.max_horizon
    columns = list(columns or table_columns(H))
    records = []
    for app in report.approaches:
        row = {"approach": app}
        for col in columns:
            hs = range(1, H + 1) if col == f"1:{H}" else [int(col)]
            try:
                mae, mse = ar_relative(report, app, list(hs))
                row[("AR-MAE", str(col))], row[("AR-MSE", str(col))] = mae.value, mse.value
            except ZeroBenchmarkError:
                row[("AR-MAE", str(col))] = row[("AR-MSE", str(col))] = float("nan")
        records.append(row)
    order = [(m, str(c)) for m in ("AR-MAE", "AR-MSE") for c in columns]
    df = pd.DataFrame(records).set_index("approach")[order]
    df.columns = pd.MultiIndex.from_tuples(order)
    return df


@dataclass(frozen=True)
class ExperimentConfig:
    period: int = 7
    benchmark: str = "ew"
    threads: int = 1
    cov_kinds: Mapping[str, str] = field(default_factory=dict)
    mint_expert: str | None = None
    min_residual_rows: int = 2

    def kind(self, approach: str) -> str:
        base = approach.split(":")[0]
        return self.cov_kinds.get(approach, self.cov_kinds.get(base, DEFAULT_COV_KINDS[base]))


def _resolve_dataset(dataset, series_ids):
    if isinstance(dataset, pd.DataFrame):
        missing = [s for s in series_ids if s not in dataset.columns]
        if missing:
            raise DataError(f"dataset lacks hierarchy series {missing[:5]}")
        return dataset[list(series_ids)].to_numpy(dtype=float), pd.DatetimeIndex(dataset.index)
    if isinstance(dataset, Mapping):
        missing = [s for s in series_ids if s not in dataset]
        if missing:
            raise DataError(f"dataset lacks hierarchy series {missing[:5]}")
        cols = [np.asarray(getattr(dataset[s], "values", dataset[s]), dtype=float) for s in series_ids]
        return np.column_stack(cols), None
    return np.asarray(dataset, dtype=float), None


class _ExpertSource:
    """Base forecasts and one-step errors of one expert on the full sample."""

    def __init__(self, name, forecast_fn, one_step_errors):
        self.name = name
        self.forecast = forecast_fn
        self.errors = one_step_errors


def _builtin_source(model: ExpertModel, Y: np.ndarray, period: int, ids) -> _ExpertSource:
    series = [SeriesData(Y[:, i], period, ids[i]) for i in range(Y.shape[1])]
    err = np.column_stack([s.values - one_step_fitted(model, s) for s in series])

    def fc(o, H):
        return np.column_stack([forecast_base(model, s.head(o), H) for s in series])

    return _ExpertSource(model.id, fc, err)


def _imported_sources(bundles: BundleSet, Y: np.ndarray, dates) -> list[_ExpertSource]:
    if dates is None:
        raise ConfigError("imported forecasts need a dated dataset")
    pos = {d: k for k, d in enumerate(dates)}
    T, n = Y.shape
    sources = []
    for j, name in enumerate(bundles.experts):
        err = np.full((T, n), np.nan)
        for (origin, h), b in bundles.bundles.items():
            k = pos.get(origin)
            if h == 1 and k is not None and k + 1 < T:
                err[k + 1] = Y[k + 1] - b.expert(j)

        def fc(o, H, j=j):
            out = np.full((H, n), np.nan)
            origin = dates[o - 1]
            for h in range(1, min(H, T - o) + 1):
                b = bundles.bundles.get((origin, h))
                if b is None:
                    raise MissingForecast(f"no imported forecast for origin {origin.date()}, horizon {h}")
                out[h - 1] = b.expert(j)
            return out

        sources.append(_ExpertSource(name, fc, err))
    return sources


def run_experiment(
    dataset,
    hierarchy: ConstraintMatrix,
    experts: Sequence[ExpertModel | BundleSet],
    approaches: Sequence[str],
    plan: RollingPlan,
    config: ExperimentConfig | None = None,
) -> EvalReport:
    """Fit experts at every origin, apply every approach, collect errors.

    Approach failures at an origin (singular covariance and the like) are
    recorded and the run continues.
    """
    config = config or ExperimentConfig()
    ids = hierarchy.series_ids
    Y, dates = _resolve_dataset(dataset, ids)
    if Y.shape != (plan.total_len, hierarchy.n):
        raise DimensionMismatch(f"dataset shape {Y.shape} vs plan {plan.total_len} x n={hierarchy.n}")

    sources: list[_ExpertSource] = []
    for e in experts:
        if isinstance(e, BundleSet):
            if tuple(e.series_ids) != tuple(ids):
                raise DataError("imported bundle series order differs from the hierarchy")
            sources.extend(_imported_sources(e, Y, dates))
        else:
            sources.append(_builtin_source(e, Y, config.period, ids))
    names = [s.name for s in sources]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate expert ids {names}")
    approaches = list(dict.fromkeys(approaches))
    if config.benchmark not in approaches:
        approaches.insert(0, config.benchmark)
    for a in approaches:
        validate_approach(a, names)
    mint_expert = config.mint_expert or names[0]

    runner = _OriginRunner(Y, hierarchy, sources, approaches, plan, config, mint_expert)
    n_o = len(plan.origins)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(runner, range(n_o)))
    else:
        results = [runner(k) for k in range(n_o)]

    H, n = plan.max_horizon, hierarchy.n
    errors = {a: np.full((n_o, H, n), np.nan) for a in approaches}
    valid = {a: np.zeros(n_o, dtype=bool) for a in approaches}
    report = EvalReport(plan, ids, errors, valid, config.benchmark)
    mask = plan.target_mask()
    for k, (fcs, audit, fails) in enumerate(results):
        for a, fc in fcs.items():
            valid[a][k] = True
            tgt = plan.origins[k] + np.arange(H)
            errors[a][k] = np.where(mask[k][:, None], Y[np.minimum(tgt, plan.total_len - 1)] - fc, np.nan)
        report.coherence.extend(audit)
        for a, msg in fails.items():
            report.failure_messages.setdefault(a, []).append(msg)
    if not valid[config.benchmark].all():
        raise DataError(f"benchmark {config.benchmark!r} failed at some origins")
    return report


def validate_approach(approach: str, experts: Sequence[str]) -> None:
    base, _, arg = approach.partition(":")
    if base == "base":
        if arg not in experts:
            raise ConfigError(f"unknown expert {arg!r} in {approach!r}")
    elif base == "mint_shr" and arg:
        if arg not in experts:
            raise ConfigError(f"unknown expert {arg!r} in {approach!r}")
    elif base not in SINGLE_APPROACHES or arg:
        raise ConfigError(f"unknown approach {approach!r}")


class _OriginRunner:
    def __init__(self, Y, C, sources, approaches, plan, config, mint_expert):
        self.Y, self.C, self.sources = Y, C, sources
        self.approaches, self.plan, self.config = approaches, plan, config
        self.names = [s.name for s in sources]
        self.mint_expert = mint_expert

    def __call__(self, k: int):
        o = self.plan.origins[k]
        H, n, p = self.plan.max_horizon, self.C.n, len(self.sources)
        # (p, H, n); rows past the sample stay NaN
        F = np.stack([s.forecast(o, H) for s in self.sources])
        n_eval = min(H, self.plan.total_len - o)
        stacked = F[:, :n_eval, :].transpose(0, 2, 1).reshape(n * p, n_eval)
        cache = _PanelCache(self.sources, o, n, p, self.config.min_residual_rows)

        fcs, audit, fails = {}, [], {}
        for a in self.approaches:
            try:
                out = np.full((H, n), np.nan)
                out[:n_eval] = self._apply(a, F[:, :n_eval, :], stacked, cache)
            except CohCombError as err:
                log.debug("approach %s failed at origin %d: %s", a, o, err)
                fails[a] = f"origin {o}: {type(err).__name__}: {err}"
                continue
            fcs[a] = out
            for h in range(n_eval):
                audit.append((a, o, h + 1, coherence_residual(self.C, out[h])))
        return fcs, audit, fails

    def _apply(self, a, F, stacked, cache):
        base, _, arg = a.partition(":")
        n, p = self.C.n, len(self.sources)
        cfg = self.config
        if base == "base":
            return F[self.names.index(arg)]
        if base == "ew":
            return F.mean(axis=0)
        if base in ("ow_var", "ow_cov"):
            w = single_task_weights(cache.panel, base[3:])
            return np.stack([combine_weighted(ForecastBundle(col, n, p), w) for col in stacked.T])
        if base == "mint_shr":
            j = self.names.index(arg or self.mint_expert)
            W = cache.expert_W(j, cfg.kind(a))
            return mint_reconcile(F[j].T, W, self.C).T
        if base == "src":
            rec = [mint_reconcile(F[j].T, cache.expert_W(j, cfg.kind(a)), self.C) for j in range(p)]
            return np.mean(rec, axis=0).T
        if base.startswith("scr_"):
            kind = base[4:]
            w = single_task_weights(cache.panel, kind)
            comb = np.stack([combine_weighted(ForecastBundle(col, n, p), w) for col in stacked.T])
            res = ResidualPanel(combined_residuals(cache.panel, w), n, 1)
            W = assemble_W(res, _single_kind(cfg.kind(a)))
            return mint_reconcile(comb.T, W, self.C).T
        if base in ("occ_wlsv", "occ_be"):
            W = cache.W(cfg.kind(a))
            return occ_combine_many(stacked, W, self.C, n, p).T
        raise ConfigError(f"unknown approach {a!r}")


def _single_kind(kind: str) -> str:
    return "full_shrunk" if kind == "expert_block_shrunk" else kind


class _PanelCache:
    """Residual panel of one origin and the covariance matrices built from it."""

    def __init__(self, sources, o, n, p, min_rows):
        self.sources, self.o, self.n, self.p = sources, o, n, p
        self.min_rows = min_rows
        self._panel = None
        self._W = {}

    @property
    def panel(self) -> ResidualPanel:
        if self._panel is None:
            raw = np.hstack([s.errors[: self.o] for s in self.sources])
            panel = ResidualPanel.listwise(raw, self.n, self.p)
            if panel.T < max(2, self.min_rows):
                raise TooFewObservations(f"{panel.T} complete residual rows before origin {self.o}")
            self._panel = panel
        return self._panel

    def W(self, kind):
        if kind not in self._W:
            self._W[kind] = assemble_W(self.panel, kind)
        return self._W[kind]

    def expert_W(self, j, kind):
        key = (j, kind)
        if key not in self._W:
            sub = ResidualPanel(self.panel.expert(j), self.n, 1)
            self._W[key] = assemble_W(sub, _single_kind(kind))
        return self._W[key]
