"""CSV ingestion and report persistence."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .baseforecast import SeriesData
from .errors import (
    DataError,
    DuplicateRow,
    NonContiguousDates,
    NonNumericValue,
    ZeroBenchmarkError,
)
from .evaluation import EvalReport, ar_relative, table_columns

DATASET_COLUMNS = ["date", "series_id", "value"]
REPORT_COLUMNS = ["approach", "series", "horizon", "metric", "value"]
ALL_SERIES = "__all__"


@dataclass(frozen=True)
class Dataset:
    """Aligned daily panel, one column per series, plus LOCF gap counts."""

    frame: pd.DataFrame
    gaps: dict[str, int]

    def series(self, period: int = 7) -> dict[str, SeriesData]:
        return {
            sid: SeriesData(self.frame[sid].to_numpy(), period, sid) for sid in self.frame.columns
        }

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.frame.index)


def load_dataset_csv(path: str | Path, gap_cap: int = 3) -> Dataset:
    """Read ``date,series_id,value`` rows into an aligned daily panel.

    Series are cut to their common date span; inside it, missing days are
    filled by carrying the last observation forward, at most ``gap_cap``
    consecutive days per gap.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in DATASET_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    values = pd.to_numeric(df["value"], errors="coerce")
    bad = values.isna() | ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise NonNumericValue(f"{path}: non-numeric value {df['value'].iloc[row]!r} on data row {row + 1}")
    try:
        dates = pd.to_datetime(df["date"], format="ISO8601")
    except (ValueError, TypeError) as err:
        raise DataError(f"{path}: dates must be ISO-8601: {err}") from err
    long = pd.DataFrame({"date": dates.dt.normalize(), "series_id": df["series_id"], "value": values})
    dup = long.duplicated(["date", "series_id"])
    if dup.any():
        first = long.loc[dup].iloc[0]
        raise DuplicateRow(f"{path}: duplicate row for {first['series_id']} on {first['date'].date()}")

    wide = long.pivot(index="date", columns="series_id", values="value")
    wide = wide[list(dict.fromkeys(long["series_id"]))]
    spans = {sid: (col.first_valid_index(), col.last_valid_index()) for sid, col in wide.items()}
    start = max(s for s, _ in spans.values())
    end = min(e for _, e in spans.values())
    if start > end:
        raise NonContiguousDates(f"{path}: series share no common date span")
    wide = wide.reindex(pd.date_range(start, end, freq="D"))

    gaps = {}
    for sid, col in wide.items():
        miss = col.isna().to_numpy()
        gaps[sid] = int(miss.sum())
        if miss.any():
            run = _longest_run(miss)
            if run > gap_cap:
                raise NonContiguousDates(
                    f"{path}: series {sid!r} misses {run} consecutive days (cap {gap_cap})"
                )
    wide = wide.ffill()
    wide.index.name = "date"
    wide.columns.name = None
    return Dataset(wide, gaps)


def _longest_run(flags: np.ndarray) -> int:
    best = cur = 0
    for f in flags:
        cur = cur + 1 if f else 0
        best = max(best, cur)
    return best


def write_dataset_csv(frame: pd.DataFrame, path: str | Path) -> None:
    long = frame.rename_axis("date").reset_index().melt(
        id_vars="date", var_name="series_id", value_name="value"
    )
    long["date"] = pd.DatetimeIndex(long["date"]).strftime("%Y-%m-%d")
    long.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def fmt(v: float) -> str:
    return repr(float(v))


def report_rows(report: EvalReport) -> list[tuple]:
    """Long-format rows: per-series MAE/MSE/Q, then AR metrics and failure counts."""
    rows = []
    H = report.plan.max_horizon
    for app in report.approaches:
        mae, mse, q = report.mae(app), report.mse(app), report.q_counts(app)
        for i, sid in enumerate(report.series_ids):
            for h in range(H):
                rows.append((app, sid, str(h + 1), "MAE", fmt(mae[h, i])))
                rows.append((app, sid, str(h + 1), "MSE", fmt(mse[h, i])))
        for h in range(H):
            rows.append((app, ALL_SERIES, str(h + 1), "Q", str(int(q[h]))))
        for col in [str(h) for h in range(1, H + 1)] + [f"1:{H}"]:
            hs = list(range(1, H + 1)) if ":" in col else [int(col)]
            try:
                r_mae, r_mse = ar_relative(report, app, hs)
                vals = [("AR-MAE", r_mae.value), ("AR-MSE", r_mse.value)]
                excl = r_mae.excluded + r_mse.excluded
            except ZeroBenchmarkError:
                vals, excl = [("AR-MAE", float("nan")), ("AR-MSE", float("nan"))], -1
            for metric, v in vals:
                rows.append((app, ALL_SERIES, col, metric, fmt(v)))
            rows.append((app, ALL_SERIES, col, "excluded", str(excl)))
        rows.append((app, ALL_SERIES, "", "failures", str(report.failures(app))))
        rows.append((app, ALL_SERIES, "", "coherence_max", fmt(report.coherence_max(app))))
    return rows


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "table": out / "table.txt",
        "coherence": out / "coherence.csv",
    }
    _write_rows(paths["report"], REPORT_COLUMNS, report_rows(report))
    _write_rows(
        paths["coherence"],
        ["approach", "origin", "horizon", "residual"],
        [(a, str(o), str(h), fmt(r)) for a, o, h, r in report.coherence],
    )
    table = table_from_report_csv(paths["report"])
    paths["table"].write_text(table, encoding="utf-8")
    return paths


def _write_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_ar_metrics(path: str | Path) -> tuple[list[str], list[str], dict]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in REPORT_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: not a report CSV, missing columns {missing}")
    ar = df[df["metric"].isin(["AR-MAE", "AR-MSE"])]
    approaches = list(dict.fromkeys(ar["approach"]))
    horizons = list(dict.fromkeys(ar["horizon"]))
    values = {(r.approach, r.metric, r.horizon): float(r.value) for r in ar.itertuples()}
    return approaches, horizons, values


def format_table(approaches, columns, values: Mapping, digits: int = 3) -> str:
    """Plain-text table: approaches down, AR-MAE then AR-MSE columns across."""
    cols = [str(c) for c in columns]
    width = max(8, *(len(a) for a in approaches)) if approaches else 8
    cw = max(digits + 3, *(len(c) for c in cols))
    half = len(cols) * (cw + 1) - 1
    lines = [
        f"{'':<{width}} | {'AR-MAE':^{half}} | {'AR-MSE':^{half}}",
        f"{'Approach':<{width}} | " + " ".join(f"{c:>{cw}}" for c in cols)
        + " | " + " ".join(f"{c:>{cw}}" for c in cols),
    ]
    lines.append("-" * len(lines[1]))
    for app in approaches:
        cells = []
        for metric in ("AR-MAE", "AR-MSE"):
            cells.append(" ".join(
                f"{values.get((app, metric, c), float('nan')):>{cw}.{digits}f}" for c in cols
            ))
        lines.append(f"{app:<{width}} | " + " | ".join(cells))
    return "\n".join(lines) + "\n"


def table_from_report_csv(path: str | Path, columns=None) -> str:
    approaches, horizons, values = read_ar_metrics(path)
    if columns is None:
        pooled = [h for h in horizons if ":" in h]
        H = int(pooled[0].split(":")[1]) if pooled else max(int(h) for h in horizons)
        columns = [str(c) for c in table_columns(H)]
    return format_table(approaches, columns, values)
