"""Run configuration: TOML file plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .baseforecast import MODEL_KINDS, ExpertModel
from .covariance import KINDS
from .errors import ConfigError
from .evaluation import DEFAULT_COV_KINDS

# config-file section for every flat key
SECTIONS = {
    "dataset": "data", "hierarchy": "data", "forecasts": "data", "period": "data",
    "gap_cap": "data",
    "experts": "models", "ses_alpha": "models",
    "approaches": "methods", "benchmark": "methods", "mint_expert": "methods",
    "covariance": "methods",
    "first_train": "plan", "horizon": "plan", "step": "plan",
    "out": "output", "threads": "output", "seed": "output",
    "coherence_tol": "tolerances",
}
PATH_KEYS = ("dataset", "hierarchy", "out")


@dataclass(frozen=True)
class RunConfig:
    dataset: Path | None = None
    hierarchy: Path | None = None
    forecasts: tuple[Path, ...] = ()
    period: int = 7
    gap_cap: int = 3
    experts: tuple[str, ...] = ("seasonal_naive", "mean", "drift", "ses")
    ses_alpha: float = 0.2
    approaches: tuple[str, ...] = (
        "ew", "ow_var", "ow_cov", "mint_shr", "src",
        "scr_ew", "scr_var", "scr_cov", "occ_wlsv", "occ_be",
    )
    benchmark: str = "ew"
    mint_expert: str | None = None
    covariance: dict[str, str] = field(default_factory=dict)
    first_train: int | None = None
    horizon: int = 7
    step: int = 1
    out: Path = Path("results")
    threads: int = 1
    seed: int = 0
    coherence_tol: float = 1e-8

    def expert_models(self) -> list[ExpertModel]:
        return [ExpertModel(kind, alpha=self.ses_alpha) for kind in self.experts]

    def validate(self) -> None:
        for key in ("dataset", "hierarchy"):
            path = getattr(self, key)
            if path is None:
                raise ConfigError(f"missing required setting {key!r}")
            if not Path(path).is_file():
                raise ConfigError(f"{key} file not found: {path}")
        for path in self.forecasts:
            if not Path(path).is_file():
                raise ConfigError(f"forecast file not found: {path}")
        unknown = [e for e in self.experts if e not in MODEL_KINDS]
        if unknown:
            raise ConfigError(f"unknown built-in experts {unknown}; expected {MODEL_KINDS}")
        if not self.experts and not self.forecasts:
            raise ConfigError("no experts: list built-in models or forecast files")
        if self.first_train is None or self.first_train < 1:
            raise ConfigError("first_train must be a positive integer")
        if self.horizon < 1 or self.step < 1 or self.threads < 1 or self.period < 1:
            raise ConfigError("horizon, step, threads and period must be positive")
        if not 0.0 < self.ses_alpha < 1.0:
            raise ConfigError("ses_alpha must lie in (0, 1)")
        for app, kind in self.covariance.items():
            if app not in DEFAULT_COV_KINDS:
                raise ConfigError(f"covariance override for unknown approach {app!r}")
            if kind not in KINDS:
                raise ConfigError(f"unknown covariance kind {kind!r}; expected {KINDS}")


def _coerce(name: str, value: Any, base: Path | None):
    target = {f.name: f for f in fields(RunConfig)}[name]
    if name in PATH_KEYS:
        p = Path(value)
        return base / p if base is not None and not p.is_absolute() else p
    if name == "forecasts":
        items = [value] if isinstance(value, (str, Path)) else list(value)
        return tuple(_coerce("dataset", v, base) for v in items)
    if name in ("experts", "approaches"):
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        return tuple(value)
    if name == "covariance":
        if not isinstance(value, dict):
            raise ConfigError("covariance must be a table of approach = kind")
        return dict(value)
    if name == "mint_expert":
        return str(value) if value else None
    ann = str(target.type)
    try:
        if ann.startswith("int"):
            return int(value)
        if ann.startswith("float"):
            return float(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {name}: {value!r}") from err
    return value


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Build a config from an optional TOML file, then apply non-None overrides.

    Relative paths in the file resolve against the file's directory; paths
    given as overrides resolve against the working directory.
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err
        for key, value in _flatten(data):
            if key not in SECTIONS:
                raise ConfigError(f"{path}: unknown setting {key!r}")
            values[key] = _coerce(key, value, path.parent)
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value, None)
    return replace(RunConfig(), **values)


def _flatten(data: dict):
    for key, value in data.items():
        if isinstance(value, dict) and key not in SECTIONS:
            yield from _flatten(value)
        else:
            yield key, value
