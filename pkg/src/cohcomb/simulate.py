"""Monte Carlo check of coherent combination on a simulated grouped hierarchy.

Each meta-run draws a residual panel from the true error covariance,
estimates the expert-block shrunk covariance from it, then scores several combiners
over independent replications of noisy expert forecasts of a coherent truth.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .combiner import mint_reconcile, occ_operator
from .covariance import ResidualPanel, WMatrix, assemble_W
from .evaluation import geometric_relative
from .hierarchy import GroupedHierarchySpec, build_constraint_matrix, summing_matrix

METHODS = ("ew", "ew_proj", "occ_oracle", "occ_be", "occ_wlsv")


@dataclass(frozen=True)
class SimulationConfig:
    zones: int = 2
    sources: int = 4
    experts: int = 3
    replications: int = 1000
    meta_runs: int = 20
    t_obs: int = 200
    expert_scales: tuple[float, ...] = (1.0, 1.25, 1.6)
    within_corr: float = 0.6
    cross_corr: float = 0.3
    seed: int = 0


@dataclass
class MetaRun:
    mse: dict[str, np.ndarray]
    bias: dict[str, np.ndarray]
    se: dict[str, np.ndarray]
    ar_mse: dict[str, float]
    shrink_lambda: tuple[float, ...]


@dataclass
class SimulationResult:
    config: SimulationConfig
    series_ids: tuple[str, ...]
    true_W: np.ndarray
    runs: list[MetaRun] = field(default_factory=list)
    max_coherence: dict[str, float] = field(default_factory=dict)

    def share_below_one(self, method: str) -> float:
        return float(np.mean([r.ar_mse[method] < 1.0 for r in self.runs]))


def hierarchy_for(cfg: SimulationConfig) -> GroupedHierarchySpec:
    return GroupedHierarchySpec.cross(
        "T",
        {
            "zone": [f"Z{k + 1}" for k in range(cfg.zones)],
            "source": [f"S{k + 1}" for k in range(cfg.sources)],
        },
    )


def true_covariance(spec: GroupedHierarchySpec, cfg: SimulationConfig, rng) -> np.ndarray:
    """Heteroscedastic errors, correlated within experts through a common factor.

    Error scale grows with the square root of the number of bottoms a series
    aggregates; each expert has its own scale and random per-series jitter.
    ``cross_corr`` mixes in a correlation pattern shared by all experts, so
    the full correlation is ``c (J_p (x) R_0) + (1 - c) blockdiag(R_j)``.
    """
    S = summing_matrix(spec)
    n, p = S.shape[0], cfg.experts
    size = np.sqrt(S.sum(axis=1))
    scales = np.resize(np.asarray(cfg.expert_scales, dtype=float), p)

    def factor_corr():
        load = rng.uniform(0.3, 1.0, n) * np.sqrt(cfg.within_corr)
        R = np.outer(load, load)
        np.fill_diagonal(R, 1.0)
        return R

    c = cfg.cross_corr
    R = c * np.kron(np.ones((p, p)), factor_corr())
    for j in range(p):
        R[j * n:(j + 1) * n, j * n:(j + 1) * n] += (1.0 - c) * factor_corr()
    sd = np.concatenate([size * scales[j] * rng.uniform(0.6, 1.6, n) for j in range(p)])
    return R * np.outer(sd, sd)


def run_simulation(cfg: SimulationConfig | None = None) -> SimulationResult:
    cfg = cfg or SimulationConfig()
    spec = hierarchy_for(cfg)
    C = build_constraint_matrix(spec)
    S = summing_matrix(spec)
    n, p = C.n, cfg.experts
    root = np.random.SeedSequence(cfg.seed)
    cov_seq, *run_seqs = root.spawn(cfg.meta_runs + 1)
    W_true = true_covariance(spec, cfg, np.random.default_rng(cov_seq))
    L = np.linalg.cholesky(W_true)

    oracle = occ_operator(WMatrix(W_true, "full"), C, n, p)
    ew = np.tile(np.eye(n), p) / p
    proj = mint_reconcile(ew, np.eye(n), C)

    result = SimulationResult(cfg, C.series_ids, W_true)
    for seq in run_seqs:
        rng = np.random.default_rng(seq)
        panel = ResidualPanel(rng.standard_normal((cfg.t_obs, n * p)) @ L.T, n, p)
        W_be = assemble_W(panel, "expert_block_shrunk")
        W_wls = assemble_W(panel, "diagonal")
        ops = {
            "ew": ew,
            "ew_proj": proj,
            "occ_oracle": oracle,
            "occ_be": occ_operator(W_be, C, n, p),
            "occ_wlsv": occ_operator(W_wls, C, n, p),
        }
        bottoms = rng.normal(100.0, 10.0, (S.shape[1], cfg.replications))
        y = S @ bottoms
        y_hat = np.tile(y, (p, 1)) + L @ rng.standard_normal((n * p, cfg.replications))
        run = MetaRun({}, {}, {}, {}, W_be.shrink_lambda)
        for name, op in ops.items():
            fc = op @ y_hat
            err = fc - y
            run.mse[name] = np.mean(err**2, axis=1)
            run.bias[name] = err.mean(axis=1)
            run.se[name] = err.std(axis=1, ddof=1) / np.sqrt(cfg.replications)
            if name != "ew":
                resid = np.max(np.abs(C.C @ fc), axis=0) / (1.0 + np.max(np.abs(fc), axis=0))
                result.max_coherence[name] = max(result.max_coherence.get(name, 0.0), float(resid.max()))
        for name in ops:
            run.ar_mse[name] = geometric_relative(run.mse[name], run.mse["ew"]).value
        result.runs.append(run)
    return result


def format_simulation_csv(result: SimulationResult) -> str:
    """Long CSV ``meta_run,method,series,metric,value``; floats in round-trip repr."""
    buf = io.StringIO()
    buf.write("meta_run,method,series,metric,value\n")
    for k, run in enumerate(result.runs):
        for name in METHODS:
            buf.write(f"{k},{name},__all__,AR-MSE,{run.ar_mse[name]!r}\n")
            buf.write(f"{k},{name},__all__,mean_MSE,{float(np.mean(run.mse[name]))!r}\n")
            for i, sid in enumerate(result.series_ids):
                buf.write(f"{k},{name},{sid},MSE,{float(run.mse[name][i])!r}\n")
                buf.write(f"{k},{name},{sid},bias,{float(run.bias[name][i])!r}\n")
                buf.write(f"{k},{name},{sid},bias_se,{float(run.se[name][i])!r}\n")
        for j, lam in enumerate(run.shrink_lambda):
            buf.write(f"{k},occ_be,expert{j + 1},lambda,{float(lam)!r}\n")
    return buf.getvalue()


def format_simulation_summary(result: SimulationResult) -> str:
    cfg = result.config
    lines = [
        f"simulated hierarchy: n={len(result.series_ids)}, experts={cfg.experts}, "
        f"replications={cfg.replications}, meta-runs={cfg.meta_runs}, T_obs={cfg.t_obs}, seed={cfg.seed}",
        f"{'method':<12} {'AR-MSE mean':>12} {'min':>8} {'max':>8} {'share<1':>8}",
    ]
    for name in METHODS:
        vals = np.array([r.ar_mse[name] for r in result.runs])
        lines.append(
            f"{name:<12} {vals.mean():>12.4f} {vals.min():>8.4f} {vals.max():>8.4f} "
            f"{result.share_below_one(name):>8.2f}"
        )
    for name, r in sorted(result.max_coherence.items()):
        lines.append(f"max coherence residual {name}: {r:.3e}")
    return "\n".join(lines) + "\n"
