"""Coherent multi-expert forecast combination for linearly constrained series."""

from .baseforecast import ExpertModel, SeriesData, forecast_base, import_forecast_bundle, insample_residuals
from .combiner import (
    CoherentForecast,
    ForecastBundle,
    combine_ew,
    combine_ow_cov,
    combine_ow_var,
    mint_reconcile,
    occ_combine,
    pipeline_scr,
    pipeline_src,
    qp_oracle_combine,
)
from .covariance import ResidualPanel, WMatrix, assemble_W, ensure_pd, sample_covariance, shrink_to_diagonal
from .evaluation import EvalReport, ar_relative, rolling_origin_plan, run_experiment, score
from .hierarchy import (
    ConstraintMatrix,
    GroupedHierarchySpec,
    aggregate_bottom_up,
    build_constraint_matrix,
    coherence_residual,
)

__version__ = "0.1.0"
