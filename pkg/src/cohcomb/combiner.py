"""Coherent forecast combination, reconciliation and single-task weights.

The stacked base forecasts follow ``y_hat = K y + e`` with ``K = 1_p (x) I_n``:
every expert forecasts every series. ``K`` is applied as expert-block
summation except in the dense-``W`` path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .covariance import ResidualPanel, WMatrix, ensure_pd, shrunk_covariance
from .errors import (
    DegeneratePanel,
    DimensionMismatch,
    RankDeficientConstraints,
    SingularAfterConditioning,
    SingularKKT,
    SingularProjection,
    SingularSeriesCovariance,
    SingularW,
    UnbalancedBundle,
)
from .hierarchy import ConstraintMatrix, coherence_residual

COHERENCE_TOL = 1e-8
MSE_FLOOR = 1e-12

METHODS = (
    "occ_wlsv", "occ_be", "mint_shr", "src", "scr_ew", "scr_var", "scr_cov",
    "ew", "ow_var", "ow_cov", "base",
)


@dataclass(frozen=True)
class ForecastBundle:
    """Base forecasts of ``p`` experts for ``n`` series, stacked expert-major.

    Position of (expert ``j``, series ``i``) is ``j * n + i`` (0-based).
    """

    values: np.ndarray
    n: int
    p: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.n * self.p:
            raise UnbalancedBundle(f"bundle has {v.shape[0]} values, expected {self.n}*{self.p}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_experts(cls, forecasts: Sequence) -> "ForecastBundle":
        mat = np.asarray([np.asarray(f, dtype=float) for f in forecasts])
        if mat.ndim != 2:
            raise UnbalancedBundle("every expert must forecast the same number of series")
        return cls(mat.reshape(-1), n=mat.shape[1], p=mat.shape[0])

    @property
    def m(self) -> int:
        return self.n * self.p

    @property
    def matrix(self) -> np.ndarray:
        """``p x n`` view, one row per expert."""
        return self.values.reshape(self.p, self.n)

    def expert(self, j: int) -> np.ndarray:
        return self.matrix[j]

    def index(self, expert: int, series: int) -> int:
        return expert * self.n + series


@dataclass(frozen=True)
class CoherentForecast:
    y_tilde: np.ndarray
    method: str
    coherent: bool
    residual: float


def _as_C(C) -> np.ndarray:
    return C.C if isinstance(C, ConstraintMatrix) else np.atleast_2d(np.asarray(C, dtype=float))


def _wrap(y: np.ndarray, C, method: str) -> CoherentForecast:
    res = coherence_residual(C, y)
    return CoherentForecast(y, method, res <= COHERENCE_TOL, res)


def _cho(A: np.ndarray, exc: type, what: str):
    try:
        fac = linalg.cho_factor(A, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as err:
        raise exc(f"{what} is not positive definite: {err}") from err
    return fac


def _info_and_rhs(Y: np.ndarray, W, n: int, p: int):
    """Return ``K' W^-1 K`` and ``K' W^-1 Y`` for ``Y`` of shape ``(m, k)``."""
    kind = W.kind if isinstance(W, WMatrix) else "full"
    Wm = W.W if isinstance(W, WMatrix) else np.asarray(W, dtype=float)
    m = n * p
    if Wm.shape != (m, m):
        raise DimensionMismatch(f"W has shape {Wm.shape}, expected ({m}, {m})")

    if kind in ("identity", "diagonal"):
        d = np.diag(Wm).reshape(p, n)
        if not np.all(d > 0):
            raise SingularW("diagonal W has non-positive entries")
        inv = 1.0 / d
        info = np.diag(inv.sum(axis=0))
        rhs = (inv[:, :, None] * Y.reshape(p, n, -1)).sum(axis=0)
        return info, rhs

    if kind == "expert_block_shrunk":
        info = np.zeros((n, n))
        rhs = np.zeros((n, Y.shape[1]))
        eye = np.eye(n)
        for j in range(p):
            sl = slice(j * n, (j + 1) * n)
            fac = _cho(Wm[sl, sl], SingularW, f"W block {j}")
            info += linalg.cho_solve(fac, eye)
            rhs += linalg.cho_solve(fac, Y[sl])
        return info, rhs

    fac = _cho(Wm, SingularW, "W")
    K = np.tile(np.eye(n), (p, 1))
    A = linalg.cho_solve(fac, np.hstack([K, Y]))
    summed = A.reshape(p, n, -1).sum(axis=0)
    return summed[:, :n], summed[:, n:]


def _project(x: np.ndarray, Wfac, C: np.ndarray, exc: type) -> np.ndarray:
    """``x - V C' (C V C')^-1 C x`` with ``V`` given by ``Wfac`` (solve callable)."""
    if C.shape[0] == 0:
        return x
    VCt = Wfac(C.T)
    G = C @ VCt
    fac = _cho((G + G.T) / 2.0, exc, "C V C'")
    return x - VCt @ linalg.cho_solve(fac, C @ x)


def _occ_apply(Y: np.ndarray, W, C: np.ndarray, n: int, p: int) -> np.ndarray:
    info, rhs = _info_and_rhs(Y, W, n, p)
    fac = _cho((info + info.T) / 2.0, SingularW, "K' W^-1 K")
    x = linalg.cho_solve(fac, rhs)
    return _project(x, lambda B: linalg.cho_solve(fac, B), C, RankDeficientConstraints)


def _method_for(W) -> str:
    kind = W.kind if isinstance(W, WMatrix) else None
    return {"diagonal": "occ_wlsv", "expert_block_shrunk": "occ_be"}.get(kind, "occ")


def occ_combine(bundle: ForecastBundle, W, C, method: str | None = None) -> CoherentForecast:
    """Optimal coherent combination of all experts' base forecasts.

    Solves ``min (y_hat - K y)' W^-1 (y_hat - K y)  s.t.  C y = 0`` in closed
    form: the GLS combination ``W_c K' W^-1 y_hat`` with
    ``W_c = (K' W^-1 K)^-1``, followed by the oblique projection
    ``I - W_c C' (C W_c C')^-1 C``. Every inverse is a Cholesky solve.
    """
    Cm = _as_C(C)
    if Cm.shape[1] != bundle.n:
        raise DimensionMismatch(f"C has {Cm.shape[1]} columns, bundle has n = {bundle.n}")
    y = _occ_apply(bundle.values[:, None], W, Cm, bundle.n, bundle.p)[:, 0]
    return _wrap(y, C, method or _method_for(W))


def occ_combine_many(values: np.ndarray, W, C, n: int, p: int) -> np.ndarray:
    """:func:`occ_combine` for an ``m x k`` array of stacked forecasts at once."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != n * p:
        raise DimensionMismatch(f"expected {n * p} rows, got {values.shape[0]}")
    return _occ_apply(values, W, _as_C(C), n, p)


def occ_operator(W, C, n: int, p: int) -> np.ndarray:
    """The ``n x m`` linear map ``y_hat -> y_tilde`` of :func:`occ_combine`."""
    return _occ_apply(np.eye(n * p), W, _as_C(C), n, p)


def qp_oracle_combine(bundle: ForecastBundle, W, C) -> np.ndarray:
    """Direct LU solve of the KKT system of the constrained WLS problem.

    Shares no code with :func:`occ_combine`; kept as an independent check.
    """
    Wm = W.W if isinstance(W, WMatrix) else np.asarray(W, dtype=float)
    Cm = _as_C(C)
    n, p = bundle.n, bundle.p
    n_u = Cm.shape[0]
    K = np.kron(np.ones((p, 1)), np.eye(n))
    try:
        WinvK = np.linalg.solve(Wm, K)
        Winvy = np.linalg.solve(Wm, bundle.values)
        kkt = np.block([[K.T @ WinvK, Cm.T], [Cm, np.zeros((n_u, n_u))]])
        rhs = np.concatenate([K.T @ Winvy, np.zeros(n_u)])
        sol = linalg.solve(kkt, rhs)
    except (np.linalg.LinAlgError, linalg.LinAlgError) as err:
        raise SingularKKT(str(err)) from err
    if not np.all(np.isfinite(sol)):
        raise SingularKKT("non-finite KKT solution")
    return sol[:n]


def mint_reconcile(y_hat, W_n, C, method: str = "mint_shr") -> CoherentForecast:
    """Least squares adjustment ``y_hat - W C' (C W C')^-1 C y_hat``.

    ``y_hat`` may also be an ``n x k`` array of forecasts reconciled column by
    column; then the bare array is returned.
    """
    Wm = W_n.W if isinstance(W_n, WMatrix) else np.asarray(W_n, dtype=float)
    Cm = _as_C(C)
    y = np.asarray(y_hat, dtype=float)
    if y.shape[0] != Cm.shape[1] or Wm.shape != (Cm.shape[1], Cm.shape[1]):
        raise DimensionMismatch(
            f"y_hat {y.shape}, W {Wm.shape} incompatible with C {Cm.shape}"
        )
    x = y[:, None] if y.ndim == 1 else y
    out = _project(x, lambda B: Wm @ B, Cm, SingularProjection)
    if y.ndim == 2:
        return out
    return _wrap(out[:, 0], C, method)


def combine_ew(bundle: ForecastBundle) -> np.ndarray:
    return bundle.matrix.mean(axis=0)


def combine_weighted(bundle: ForecastBundle, weights: np.ndarray) -> np.ndarray:
    """Per-series combination with an ``n x p`` weight matrix."""
    return np.einsum("ij,ji->i", weights, bundle.matrix)


def _check_panel(bundle: ForecastBundle, panel: ResidualPanel) -> None:
    if (panel.n, panel.p) != (bundle.n, bundle.p):
        raise DimensionMismatch(
            f"panel (n={panel.n}, p={panel.p}) does not match bundle (n={bundle.n}, p={bundle.p})"
        )


def ow_var_weights(panel: ResidualPanel) -> np.ndarray:
    """Inverse in-sample MSE weights, ``n x p``, rows summing to one.

    MSEs are floored at ``1e-12`` times the largest series variance so a
    perfect in-sample fit takes (almost) all the weight instead of dividing
    by zero.
    """
    R = panel.residuals
    if R.shape[0] < 1:
        raise DegeneratePanel("empty residual panel")
    mse = (R**2).mean(axis=0).reshape(panel.p, panel.n).T
    scale = float(np.max(R.var(axis=0))) if R.shape[0] > 1 else 0.0
    scale = max(scale, float(mse.max()))
    if not np.isfinite(scale) or scale <= 0.0:
        raise DegeneratePanel("all in-sample residuals are zero")
    inv = 1.0 / np.maximum(mse, MSE_FLOOR * scale)
    return inv / inv.sum(axis=1, keepdims=True)


def ow_cov_weights_from_sigma(sigma) -> np.ndarray:
    """``Sigma^-1 1 / (1' Sigma^-1 1)``; entries may be negative."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        Wp = ensure_pd(sigma, kind="series")
    except SingularAfterConditioning as err:
        raise SingularSeriesCovariance(str(err)) from err
    fac = linalg.cho_factor(Wp.W, lower=True)
    u = linalg.cho_solve(fac, np.ones(sigma.shape[0]))
    return u / u.sum()


def ow_cov_weights(panel: ResidualPanel) -> np.ndarray:
    """Full-covariance weights per series from the ``p x p`` second-moment matrix."""
    T = panel.T
    if T < 1:
        raise DegeneratePanel("empty residual panel")
    out = np.empty((panel.n, panel.p))
    for i in range(panel.n):
        E = panel.series(i)
        out[i] = ow_cov_weights_from_sigma(E.T @ E / T)
    return out


def combine_ow_var(bundle: ForecastBundle, panel: ResidualPanel) -> np.ndarray:
    _check_panel(bundle, panel)
    return combine_weighted(bundle, ow_var_weights(panel))


def combine_ow_cov(bundle: ForecastBundle, panel: ResidualPanel) -> np.ndarray:
    _check_panel(bundle, panel)
    return combine_weighted(bundle, ow_cov_weights(panel))


def pipeline_src(bundle: ForecastBundle, per_expert_W: Sequence, C) -> CoherentForecast:
    """Reconcile each expert separately, then average."""
    if len(per_expert_W) != bundle.p:
        raise DimensionMismatch(f"{len(per_expert_W)} W matrices for {bundle.p} experts")
    rec = [mint_reconcile(bundle.expert(j), per_expert_W[j], C).y_tilde for j in range(bundle.p)]
    return _wrap(np.mean(rec, axis=0), C, "src")


def single_task_weights(panel: ResidualPanel, weight_kind: str) -> np.ndarray:
    if weight_kind == "ew":
        return np.full((panel.n, panel.p), 1.0 / panel.p)
    if weight_kind == "var":
        return ow_var_weights(panel)
    if weight_kind == "cov":
        return ow_cov_weights(panel)
    raise ValueError(f"unknown weight kind {weight_kind!r}")


def combined_residuals(panel: ResidualPanel, weights: np.ndarray) -> np.ndarray:
    """In-sample residuals of the single-task combined forecast, ``T x n``."""
    E = panel.residuals.reshape(panel.T, panel.p, panel.n)
    return np.einsum("tji,ij->ti", E, weights)


def pipeline_scr(
    bundle: ForecastBundle,
    panel: ResidualPanel,
    C,
    weight_kind: str,
    W_n=None,
) -> CoherentForecast:
    """Combine series by series, then reconcile the combined vector.

    Without ``W_n``, the shrunk covariance of the combined in-sample
    residuals is used.
    """
    _check_panel(bundle, panel)
    weights = single_task_weights(panel, weight_kind)
    combined = combine_weighted(bundle, weights)
    if W_n is None:
        S, lam = shrunk_covariance(combined_residuals(panel, weights))
        W_n = ensure_pd(S, "full_shrunk", lam)
    rec = mint_reconcile(combined, W_n, C)
    return _wrap(rec.y_tilde, C, f"scr_{weight_kind}")
