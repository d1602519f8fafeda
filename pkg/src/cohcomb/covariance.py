"""Base-forecast error covariance estimators.

Residual columns are stacked expert-major: expert 0's ``n`` series, then
expert 1's, and so on, matching :class:`cohcomb.combiner.ForecastBundle`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatch,
    NotSymmetric,
    SingularAfterConditioning,
    TooFewObservations,
)

Kind = Literal["identity", "diagonal", "expert_block_shrunk", "full_shrunk"]
KINDS = ("identity", "diagonal", "expert_block_shrunk", "full_shrunk")

JITTER_STEPS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class ResidualPanel:
    residuals: np.ndarray
    n: int
    p: int

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.residuals, dtype=float))
        if r.shape[1] != self.n * self.p:
            raise DimensionMismatch(
                f"panel has {r.shape[1]} columns, expected n*p = {self.n}*{self.p}"
            )
        object.__setattr__(self, "residuals", r)

    @classmethod
    def listwise(cls, residuals, n: int, p: int) -> "ResidualPanel":
        """Drop every row holding a non-finite value."""
        r = np.atleast_2d(np.asarray(residuals, dtype=float))
        return cls(r[np.isfinite(r).all(axis=1)], n, p)

    @property
    def T(self) -> int:
        return self.residuals.shape[0]

    def expert(self, j: int) -> np.ndarray:
        return self.residuals[:, j * self.n:(j + 1) * self.n]

    def series(self, i: int) -> np.ndarray:
        """``T x p`` residuals of series ``i`` across experts."""
        return self.residuals[:, i::self.n]


@dataclass(frozen=True)
class WMatrix:
    W: np.ndarray
    kind: str = "full_shrunk"
    shrink_lambda: float | tuple[float, ...] | None = None
    jitter: float = 0.0
    p: int | None = None

    @property
    def m(self) -> int:
        return self.W.shape[0]


def sample_covariance(panel: ResidualPanel | np.ndarray, block: int | None = None) -> np.ndarray:
    """Unbiased (divisor ``T - 1``) covariance of one expert block or all columns."""
    if isinstance(panel, ResidualPanel):
        X = panel.residuals if block is None else panel.expert(block)
    else:
        X = np.atleast_2d(np.asarray(panel, dtype=float))
    if X.shape[0] < 2:
        raise TooFewObservations(f"need at least 2 residual rows, got {X.shape[0]}")
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / (X.shape[0] - 1)


def schafer_strimmer_lambda(X) -> float:
    """Shrinkage intensity towards the diagonal, estimated on correlations.

    ``lambda = sum var(r_ij) / sum r_ij**2`` over ``i != j``, clipped to
    [0, 1]; 1 when every off-diagonal correlation is zero. Zero-variance
    columns contribute no correlations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = X.shape[0]
    if T < 2:
        raise TooFewObservations(f"need at least 2 residual rows, got {T}")
    Xc = X - X.mean(axis=0)
    sd = np.sqrt((Xc**2).sum(axis=0) / (T - 1))
    scale = np.divide(1.0, sd, out=np.zeros_like(sd), where=sd > 0)
    Z = Xc * scale
    wbar = Z.T @ Z / T
    r = wbar * T / (T - 1)
    Z2 = Z**2
    var_r = (Z2.T @ Z2 - T * wbar**2) * T / (T - 1) ** 3
    off = ~np.eye(X.shape[1], dtype=bool)
    denom = np.sum(r[off] ** 2)
    if denom <= 0.0:
        return 1.0
    return float(np.clip(np.sum(var_r[off]) / denom, 0.0, 1.0))


def _check_symmetric(S: np.ndarray, tol: float = 1e-10) -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if not np.allclose(S, S.T, rtol=0.0, atol=tol * scale):
        raise NotSymmetric("matrix is not symmetric")


def shrink_to_diagonal(S, lam: float | None = None, data=None) -> tuple[np.ndarray, float]:
    """``lam * diag(S) + (1 - lam) * S``.

    Pass ``lam`` to force an intensity, or the residual ``data`` that produced
    ``S`` to estimate it with :func:`schafer_strimmer_lambda`.
    """
    S = np.asarray(S, dtype=float)
    _check_symmetric(S)
    if lam is None:
        if data is None:
            raise ValueError("shrink_to_diagonal needs either lam or data")
        lam = schafer_strimmer_lambda(data)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    out = (1.0 - lam) * S
    np.fill_diagonal(out, np.diag(S))
    return out, float(lam)


def shrunk_covariance(X) -> tuple[np.ndarray, float]:
    return shrink_to_diagonal(sample_covariance(X), data=X)


def ensure_pd(W, kind: str = "full_shrunk", shrink_lambda=None, p: int | None = None) -> WMatrix:
    """Return ``W`` as a :class:`WMatrix`, jittering the diagonal if needed.

    When Cholesky fails, ``delta * mean(diag(W)) * I`` is added with ``delta``
    escalating from 1e-10 to 1e-6; the applied ``delta`` is recorded.
    """
    W = np.array(W, dtype=float)
    _check_symmetric(W)
    W = (W + W.T) / 2.0
    if _is_pd(W):
        return WMatrix(W, kind, shrink_lambda, 0.0, p)
    base = float(np.mean(np.diag(W))) if W.size else 0.0
    if base > 0.0 and np.isfinite(base):
        eye = np.eye(W.shape[0])
        for delta in JITTER_STEPS:
            Wj = W + delta * base * eye
            if _is_pd(Wj):
                return WMatrix(Wj, kind, shrink_lambda, delta, p)
    raise SingularAfterConditioning(
        f"matrix not positive definite after jitter up to {JITTER_STEPS[-1]:g} * mean(diag)"
    )


def _is_pd(W: np.ndarray) -> bool:
    if not np.all(np.isfinite(W)):
        return False
    try:
        linalg.cholesky(W, lower=True)
    except linalg.LinAlgError:
        return False
    return True


def assemble_W(panel: ResidualPanel, kind: Kind) -> WMatrix:
    n, p = panel.n, panel.p
    m = n * p
    if kind == "identity":
        return WMatrix(np.eye(m), kind, None, 0.0, p)
    if kind == "diagonal":
        var = np.diag(sample_covariance(panel))
        return ensure_pd(np.diag(var), kind, None, p)
    if kind == "expert_block_shrunk":
        W = np.zeros((m, m))
        lams = []
        for j in range(p):
            X = panel.expert(j)
            Sj, lam = shrink_to_diagonal(sample_covariance(X), data=X)
            W[j * n:(j + 1) * n, j * n:(j + 1) * n] = Sj
            lams.append(lam)
        return ensure_pd(W, kind, tuple(lams), p)
    if kind == "full_shrunk":
        S, lam = shrunk_covariance(panel.residuals)
        return ensure_pd(S, kind, lam, p)
    raise ValueError(f"unknown covariance kind {kind!r}; expected one of {KINDS}")
