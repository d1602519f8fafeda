"""Regenerate the toy fixture in data/toy/.

Writes a 2-zone x 2-source hierarchy, 140 days of coherent daily data with a
weekly cycle, a run config, and a forecast-bundle CSV from two synthetic
"external" experts for trying the import path.
"""

import argparse
import json
from pathlib import Path

import numpy as np
import pandas as pd

from cohcomb.baseforecast import ExpertModel, SeriesData, forecast_base
from cohcomb.dataio import write_dataset_csv
from cohcomb.hierarchy import GroupedHierarchySpec, aggregate_bottom_up

CONFIG = """\
[data]
dataset = "toy_dataset.csv"
hierarchy = "toy_hierarchy.json"
period = 7

[models]
experts = ["seasonal_naive", "mean", "drift", "ses"]
ses_alpha = 0.2

[methods]
approaches = ["base:ses", "mint_shr", "ew", "ow_var", "ow_cov", "src",
              "scr_ew", "scr_var", "scr_cov", "occ_wlsv", "occ_be"]
benchmark = "ew"
mint_expert = "ses"

[plan]
first_train = 98
horizon = 7
step = 1

[output]
out = "../../results/toy"
threads = 1
seed = 0
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data" / "toy")
    ap.add_argument("--days", type=int, default=140)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    spec = GroupedHierarchySpec.cross("IT", {"zone": ["NORD", "SUD"], "source": ["HYDRO", "SOLAR"]})
    (args.out / "toy_hierarchy.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")

    t = np.arange(args.days)
    level = np.array([120.0, 60.0, 40.0, 90.0])
    weekly = np.array([8.0, 2.0, 5.0, 1.0])[:, None] * np.sin(2 * np.pi * t / 7)[None, :]
    trend = np.array([0.05, 0.3, -0.02, 0.2])[:, None] * t[None, :]
    noise = rng.normal(0.0, [[6.0], [4.0], [3.0], [5.0]], (4, args.days))
    bottoms = np.maximum(level[:, None] + weekly + trend + noise, 1.0).round(3)
    full = aggregate_bottom_up(spec, bottoms)
    dates = pd.date_range("2023-01-01", periods=args.days, freq="D")
    frame = pd.DataFrame(full.T, index=dates, columns=list(spec.series_ids))
    write_dataset_csv(frame, args.out / "toy_dataset.csv")
    (args.out / "toy.toml").write_text(CONFIG)

    # two "external" experts: seasonal naive and ses, each with its own noise
    rows = []
    ext = {"ext_snaive": ExpertModel("seasonal_naive"), "ext_ses": ExpertModel("ses", 0.3)}
    for o in range(14, args.days):
        for name, model in ext.items():
            for sid in spec.series_ids:
                fc = forecast_base(model, SeriesData(frame[sid].to_numpy()[:o], 7, sid), 7)
                fc = fc + rng.normal(0.0, 1.0, 7)
                for h, v in enumerate(fc, start=1):
                    rows.append((dates[o - 1].strftime("%Y-%m-%d"), h, name, sid, round(float(v), 4)))
    pd.DataFrame(rows, columns=["origin_date", "horizon", "expert_id", "series_id", "value"]).to_csv(
        args.out / "toy_forecasts.csv", index=False, lineterminator="\n"
    )
    print(f"wrote fixture to {args.out}")


if __name__ == "__main__":
    main()
