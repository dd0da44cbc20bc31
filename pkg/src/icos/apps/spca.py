"""Sparse principal components from dd*/sdd* relaxations with deflation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..conic import AffineExpr, ProblemBuilder, Status
from ..matcones import symmat
from ._common import build_and_solve

log = logging.getLogger(__name__)

METHODS = ("dd_dual", "sdd_dual")
THRESHOLD = 1e-4


@dataclass
class Component:
    loading: np.ndarray
    objective: float
    rank_one: bool
    explained_variance: float


@dataclass
class SpcaResult:
    components: list[Component] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


def _relaxation(A: np.ndarray, k: float, method: str, export: str | None):
    n = A.shape[0]
    B = ProblemBuilder()
    pos = B.nonneg(n * (n + 1) // 2)
    neg = B.nonneg(n * (n + 1) // 2)
    X = [[None] * n for _ in range(n)]
    budget = AffineExpr()
    t = 0
    for i in range(n):
        for j in range(i, n):
            X[i][j] = X[j][i] = pos[t] - neg[t]
            budget.iadd(pos[t] + neg[t], 1.0 if i == j else 2.0)
            t += 1
    B.add_eq(sum((X[i][i] for i in range(n)), AffineExpr()), 1.0)
    B.add_nonneg(k - budget)
    if method == "dd_dual":
        for i in range(n):
            B.add_nonneg(X[i][i])
        for i in range(n):
            for j in range(i + 1, n):
                B.add_nonneg(X[i][i] + X[j][j] + 2 * X[i][j])
                B.add_nonneg(X[i][i] + X[j][j] - 2 * X[i][j])
    else:
        for i in range(n):
            for j in range(i + 1, n):
                B.add_cone("rsoc", [X[i][i], X[j][j] * 0.5, X[i][j]])
        if n == 1:
            B.add_nonneg(X[0][0])
    obj = AffineExpr()
    for i in range(n):
        for j in range(n):
            obj.iadd(X[i][j], A[i, j])
    B.set_objective(obj, "max")
    P, sol = build_and_solve(B, export)
    if sol.status != Status.OPTIMAL:
        return None, sol.status
    Xv = np.array([[X[i][j].value(sol.x) for j in range(n)] for i in range(n)])
    return (P.objective(sol.x), Xv), sol.status


def adjusted_variance(A: np.ndarray, loadings: np.ndarray) -> np.ndarray:
    """Per-component variance after removing correlation with earlier components.

    With ``V'AV = R'R`` (Cholesky, R upper triangular) the j-th component
    explains ``R_jj^2 / Tr(A)``.
    """
    V = np.column_stack(loadings)
    G = V.T @ A @ V
    R = np.linalg.cholesky(symmat(G) + 1e-14 * np.eye(G.shape[0])).T
    return np.diag(R) ** 2 / np.trace(A)


def sparse_pca(A, k: float, method: str = "dd_dual", ncomp: int = 1, export: str | None = None) -> SpcaResult:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if k < 1:
        raise ValueError("k must be >= 1")
    A0 = symmat(A)
    Acur = A0.copy()
    res = SpcaResult()
    loadings = []
    for c in range(ncomp):
        out, status = _relaxation(Acur, k, method, export if c == 0 else None)
        if out is None:
            res.errors.append(f"component {c + 1}: solver status {status.value}")
            break
        obj, X = out
        w, V = np.linalg.eigh(symmat(X))
        x = V[:, -1].copy()
        x[np.abs(x) < THRESHOLD * np.abs(x).max()] = 0.0
        x /= np.linalg.norm(x)
        # sign convention: largest-magnitude entry positive
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        x += 0.0
        rank_one = bool(w[-2] <= 1e-6 * max(w[-1], 1e-300)) if len(w) > 1 else True
        loadings.append(x)
        res.components.append(Component(x, obj, rank_one, 0.0))
        Acur = Acur - float(x @ Acur @ x) * np.outer(x, x)
    if loadings:
        ev = adjusted_variance(A0, loadings)
        for comp, v in zip(res.components, ev):
            comp.explained_variance = float(min(max(v, 0.0), 1.0))
    return res
