from fractions import Fraction

import numpy as np
import pytest

from cohcomb.hierarchy import ConstraintMatrix, GroupedHierarchySpec

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def frac_rref(rows):
    """Exact row reduction over the rationals; returns (rref, rank)."""
    A = [[Fraction(x) for x in r] for r in rows]
    n_rows, n_cols = len(A), len(A[0]) if A else 0
    rank = 0
    for c in range(n_cols):
        piv = next((r for r in range(rank, n_rows) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        pv = A[rank][c]
        A[rank] = [x / pv for x in A[rank]]
        for r in range(n_rows):
            if r != rank and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[rank])]
        rank += 1
    return A, rank


def frac_solve(A, b):
    """Exact solution of a square nonsingular system."""
    aug = [list(r) + [bi] for r, bi in zip(A, b)]
    R, rank = frac_rref(aug)
    assert rank == len(A)
    return [row[-1] for row in R]


def kkt_exact(y_hat_experts, W_diag, C_rows):
    """Exact constrained WLS for diagonal W via the Lagrangian stationarity system."""
    p, n = len(y_hat_experts), len(y_hat_experts[0])
    n_u = len(C_rows)
    winv = [[Fraction(1) / Fraction(W_diag[j * n + i]) for i in range(n)] for j in range(p)]
    A = [[Fraction(0)] * (n + n_u) for _ in range(n + n_u)]
    b = [Fraction(0)] * (n + n_u)
    for i in range(n):
        A[i][i] = sum(winv[j][i] for j in range(p))
        b[i] = sum(winv[j][i] * Fraction(y_hat_experts[j][i]) for j in range(p))
        for r in range(n_u):
            A[i][n + r] = Fraction(C_rows[r][i])
            A[n + r][i] = Fraction(C_rows[r][i])
    return frac_solve(A, b)[:n]


@pytest.fixture
def single_spec():
    return GroupedHierarchySpec.from_dict(
        {"top": "T", "bottoms": ["a", "b"], "groupings": [{"name": "g", "aggregates": {}}]}
    )


@pytest.fixture
def grid_spec():
    return GroupedHierarchySpec.from_dict(
        {
            "top": "T",
            "bottoms": ["z1s1", "z1s2", "z2s1", "z2s2"],
            "groupings": [
                {"name": "zone", "aggregates": {"Z1": ["z1s1", "z1s2"], "Z2": ["z2s1", "z2s2"]}},
                {"name": "source", "aggregates": {"S1": ["z1s1", "z2s1"], "S2": ["z1s2", "z2s2"]}},
            ],
        }
    )


@pytest.fixture
def toy_C():
    return ConstraintMatrix.from_array([[1.0, -1.0, -1.0]], ["T", "a", "b"])


def random_instance(rng, n=None, n_u=None, p=None, full_W=True):
    """Random aggregation-like C = [I | -A] (full row rank) and Wishart-style W."""
    n = n or int(rng.integers(3, 13))
    n_u = n_u if n_u is not None else int(rng.integers(1, min(5, n - 1) + 1))
    p = p or int(rng.integers(1, 5))
    A = rng.integers(0, 2, size=(n_u, n - n_u)).astype(float)
    C = np.hstack([np.eye(n_u), -A])
    m = n * p
    G = rng.standard_normal((m, m + 5))
    W = G @ G.T / (m + 5) + 0.05 * np.eye(m)
    y_hat = rng.normal(50.0, 10.0, m)
    return C, W, y_hat, n, p
