"""Command-line entry point: ``cohcomb {validate,run,simulate,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .baseforecast import import_forecast_bundle
from .config import RunConfig, load_config
from .dataio import load_dataset_csv, table_from_report_csv, write_report
from .errors import CohCombError, ConfigError
from .evaluation import ExperimentConfig, rolling_origin_plan, run_experiment, validate_approach
from .hierarchy import GroupedHierarchySpec, build_constraint_matrix, coherence_residual
from .simulate import (
    SimulationConfig,
    format_simulation_csv,
    format_simulation_summary,
    run_simulation,
)

log = logging.getLogger("cohcomb")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--dataset", help="CSV with columns date,series_id,value")
    p.add_argument("--hierarchy", help="hierarchy JSON (top, bottoms, groupings)")
    p.add_argument("--forecasts", action="append", help="forecast-bundle CSV (repeatable)")
    p.add_argument("--experts", help="comma-separated built-in models; '' for none")
    p.add_argument("--approaches", help="comma-separated approach ids")
    p.add_argument("--mint-expert", dest="mint_expert", help="expert reconciled by mint_shr")
    p.add_argument("--first-train", dest="first_train", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--step", type=int)
    p.add_argument("--period", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohcomb", description="Coherent combination of multi-expert hierarchical forecasts."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("validate", help="check config, hierarchy and data; writes nothing"))
    _add_run_flags(sub.add_parser("run", help="rolling-origin experiment and reports"))

    sim = sub.add_parser("simulate", help="Monte Carlo comparison on a simulated hierarchy")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replications", type=int, default=1000)
    sim.add_argument("--meta-runs", dest="meta_runs", type=int, default=20)
    sim.add_argument("--t-obs", dest="t_obs", type=int, default=200)
    sim.add_argument("--zones", type=int, default=2)
    sim.add_argument("--sources", type=int, default=4)
    sim.add_argument("--experts", type=int, default=3)
    sim.add_argument("--cross-corr", dest="cross_corr", type=float, default=0.3)
    sim.add_argument("--out", default="results/simulation")
    sim.add_argument("--threads", type=int, default=1, help="accepted for symmetry; runs single-threaded")

    rep = sub.add_parser("report", help="print the AR table of an existing report CSV")
    rep.add_argument("report_csv", type=Path)
    rep.add_argument("--out", help="also write the table to this file")
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {
        k: getattr(args, k)
        for k in ("dataset", "hierarchy", "forecasts", "experts", "approaches", "mint_expert",
                  "first_train", "horizon", "step", "period", "out", "seed", "threads")
    }
    if overrides["experts"] == "":
        overrides["experts"] = ()
    cfg = load_config(args.config, **overrides)
    cfg.validate()
    return cfg


def _load_inputs(cfg: RunConfig):
    spec = GroupedHierarchySpec.from_json(cfg.hierarchy)
    C = build_constraint_matrix(spec)
    data = load_dataset_csv(cfg.dataset, gap_cap=cfg.gap_cap)
    missing = [s for s in C.series_ids if s not in data.frame.columns]
    if missing:
        raise ConfigError(f"dataset lacks hierarchy series {missing[:5]}")
    experts = list(cfg.expert_models())
    if cfg.forecasts:
        experts.append(import_forecast_bundle(cfg.forecasts, C.series_ids))
    names = list(cfg.experts)
    for e in experts[len(cfg.experts):]:
        names.extend(e.experts)
    for a in cfg.approaches:
        validate_approach(a, names)
    if cfg.mint_expert is not None and cfg.mint_expert not in names:
        raise ConfigError(f"mint_expert {cfg.mint_expert!r} is not an expert")
    plan = rolling_origin_plan(len(data.frame), cfg.first_train, cfg.horizon, cfg.step)
    return spec, C, data, experts, plan


def cmd_validate(args) -> int:
    cfg = _config_from_args(args)
    spec, C, data, experts, plan = _load_inputs(cfg)
    rank = int(np.linalg.matrix_rank(C.C))
    if rank != C.n_u:
        raise ConfigError(f"constraint matrix has rank {rank}, expected {C.n_u}")
    Y = data.frame[list(C.series_ids)].to_numpy()
    worst = max(coherence_residual(C, row) for row in Y)
    print(f"hierarchy: n={C.n} series, n_u={C.n_u} constraints, rank={rank}")
    print(f"dataset: {len(Y)} days {data.dates[0].date()}..{data.dates[-1].date()}, "
          f"filled gaps={sum(data.gaps.values())}, max coherence residual={worst:.3e}")
    print(f"plan: {len(plan.origins)} origins, Q_h={list(plan.q_counts)}")
    print(f"experts: {len(cfg.experts)} built-in, {len(cfg.forecasts)} forecast file(s); "
          f"approaches: {', '.join(cfg.approaches)}")
    print("ok")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    spec, C, data, experts, plan = _load_inputs(cfg)
    exp_cfg = ExperimentConfig(
        period=cfg.period,
        benchmark=cfg.benchmark,
        threads=cfg.threads,
        cov_kinds=cfg.covariance,
        mint_expert=cfg.mint_expert,
    )
    report = run_experiment(data.frame, C, experts, cfg.approaches, plan, exp_cfg)
    paths = write_report(report, cfg.out)
    sys.stdout.write(paths["table"].read_text(encoding="utf-8"))
    for app in report.approaches:
        if report.failures(app):
            print(f"{app}: failed at {report.failures(app)} of {len(plan.origins)} origins")
        coherent = app.startswith(("mint_shr", "src", "scr_", "occ_"))
        if coherent and report.coherence_max(app) > cfg.coherence_tol:
            print(f"{app}: coherence residual {report.coherence_max(app):.3e} exceeds {cfg.coherence_tol:g}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(
        zones=args.zones, sources=args.sources, experts=args.experts,
        replications=args.replications, meta_runs=args.meta_runs, t_obs=args.t_obs,
        cross_corr=args.cross_corr, seed=args.seed,
    )
    result = run_simulation(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = format_simulation_summary(result)
    (out / "simulation.csv").write_text(format_simulation_csv(result), encoding="utf-8")
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return 0


def cmd_report(args) -> int:
    table = table_from_report_csv(args.report_csv)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except CohCombError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error: IOError: {err}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
