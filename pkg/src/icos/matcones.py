"""Diagonally dominant matrix cones: predicates, duals and conic encodings.

Matrices are plain ``numpy`` arrays; :func:`symmat` symmetrizes by averaging.
Encoders take a :class:`~icos.conic.ProblemBuilder` and an ``n x n`` nested
list of affine expressions (only the upper triangle is read) and only ever
append variables and rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .conic import AffineExpr, ProblemBuilder, Status, solve

SQRT2 = math.sqrt(2.0)


def symmat(a) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


@dataclass
class ConeMembership:
    member: bool
    witness: Any = None

    def __bool__(self):
        return self.member


def is_dd(A, tol: float = 1e-9) -> ConeMembership:
    """Row diagonal dominance ``a_ii + tol >= sum_{j != i} |a_ij|``.

    The witness of a non-member is the first violating row index.
    """
    A = symmat(A)
    off = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    bad = np.flatnonzero(np.diag(A) + tol < off)
    if len(bad):
        return ConeMembership(False, int(bad[0]))
    return ConeMembership(True)


def is_sdd(A, tol: float = 1e-9) -> ConeMembership:
    """Scaled diagonal dominance via the positive-scaling LP.

    Finds ``d >= 1`` with ``(a_ii + tol) d_i >= sum_{j != i} |a_ij| d_j`` of
    smallest total weight; the witness is that ``d``.
    """
    A = symmat(A)
    n = A.shape[0]
    if np.any(np.diag(A) < -tol):
        return ConeMembership(False, None)
    B = ProblemBuilder()
    e = B.nonneg(n)
    d = [1.0 + ei for ei in e]
    for i in range(n):
        row = (A[i, i] + tol) * d[i]
        for j in range(n):
            if j != i and A[i, j] != 0.0:
                row = row - abs(A[i, j]) * d[j]
        B.add_nonneg(row)
    B.set_objective(sum(e, AffineExpr()))
    P = B.build()
    sol = solve(P, feas_tol=1e-9, gap_tol=1e-9)
    if sol.status == Status.OPTIMAL:
        return ConeMembership(True, 1.0 + sol.x[:n])
    if sol.status == Status.PRIMAL_INFEASIBLE:
        return ConeMembership(False, None)
    raise RuntimeError(f"sdd scaling LP ended with status {sol.status.value}")


def is_psd(A, tol: float = 1e-9) -> ConeMembership:
    """Eigenvalue test ``lambda_min >= -tol * max(1, ||A||_inf)``.

    Member witness: a factor ``L`` with ``A ~= L L'`` (clipped eigenfactor).
    Non-member witness: a unit eigenvector of the smallest eigenvalue.
    """
    A = symmat(A)
    w, V = np.linalg.eigh(A)
    scale = max(1.0, float(np.abs(A).sum(axis=1).max(initial=0.0)))
    if w[0] >= -tol * scale:
        return ConeMembership(True, V * np.sqrt(np.maximum(w, 0.0)))
    return ConeMembership(False, V[:, 0])


def dd_extreme_rays(n: int) -> list[np.ndarray]:
    """``e_i`` for each i, then ``e_i + e_j`` and ``e_i - e_j`` for i < j."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eye = np.eye(n)
    rays = [eye[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            rays.append(eye[i] + eye[j])
            rays.append(eye[i] - eye[j])
    return rays


def in_dd_dual(X, tol: float = 1e-9) -> ConeMembership:
    """``v'Xv >= -tol`` for every extreme ray of DD; witness is a violating ray."""
    X = symmat(X)
    n = X.shape[0]
    d = np.diag(X)
    for i in range(n):
        if d[i] < -tol:
            v = np.zeros(n)
            v[i] = 1.0
            return ConeMembership(False, v)
    for i in range(n):
        for j in range(i + 1, n):
            for sgn in (1.0, -1.0):
                if d[i] + d[j] + 2 * sgn * X[i, j] < -tol:
                    v = np.zeros(n)
                    v[i], v[j] = 1.0, sgn
                    return ConeMembership(False, v)
    return ConeMembership(True)


def in_sdd_dual(X, tol: float = 1e-9) -> ConeMembership:
    """Every 2x2 principal submatrix psd; witness is the offending index pair."""
    X = symmat(X)
    n = X.shape[0]
    d = np.diag(X)
    for i in range(n):
        if d[i] < -tol:
            return ConeMembership(False, (i, i))
    for i in range(n):
        for j in range(i + 1, n):
            if d[i] * d[j] - X[i, j] ** 2 < -tol:
                return ConeMembership(False, (i, j))
    return ConeMembership(True)


# encoders -------------------------------------------------------------------------


def sym_vars(builder: ProblemBuilder, n: int, cone: str = "free") -> list[list[AffineExpr]]:
    """Fresh symmetric ``n x n`` block of variables (upper triangle, row-major)."""
    ids = builder.add_vars(cone, n * (n + 1) // 2)
    Q = [[None] * n for _ in range(n)]
    k = 0
    for i in range(n):
        for j in range(i, n):
            Q[i][j] = Q[j][i] = AffineExpr.var(ids[k])
            k += 1
    return Q


def constant_block(A) -> list[list[AffineExpr]]:
    A = symmat(A)
    return [[AffineExpr(None, A[i, j]) for j in range(A.shape[0])] for i in range(A.shape[0])]


def encode_dd(builder: ProblemBuilder, Q) -> dict:
    """``Q_ii >= sum_j z_ij`` and ``-z_ij <= Q_ij <= z_ij`` with ``z >= 0``."""
    n = len(Q)
    if n == 1:
        builder.add_nonneg(Q[0][0])
        return {"z": {}}
    z = {}
    for i in range(n):
        for j in range(i + 1, n):
            (z[i, j],) = builder.nonneg(1)
    for i in range(n):
        row = AffineExpr.lift(Q[i][i]).copy()
        for j in range(n):
            if j != i:
                row.iadd(z[min(i, j), max(i, j)], -1.0)
        builder.add_nonneg(row)
    for (i, j), zij in z.items():
        builder.add_nonneg(zij - Q[i][j])
        builder.add_nonneg(zij + Q[i][j])
    return {"z": z}


def encode_sdd(builder: ProblemBuilder, Q) -> dict:
    """``Q = sum_{i<j} M^ij`` with each 2x2 block psd.

    Block ``(i, j)`` is a rotated cone triple ``(a, c, w)`` with ``2ac >= w^2``
    standing for ``[[a, w/sqrt2], [w/sqrt2, c]]``.  Returns the triple ids.
    """
    n = len(Q)
    if n == 1:
        builder.add_nonneg(Q[0][0])
        return {"blocks": {}}
    blocks = {}
    diag = [AffineExpr() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, c, w = builder.add_vars("rsoc", 3)
            blocks[i, j] = (a, c, w)
            diag[i].iadd(AffineExpr.var(a))
            diag[j].iadd(AffineExpr.var(c))
            builder.add_eq(AffineExpr.lift(Q[i][j]) - AffineExpr.var(w, 1.0 / SQRT2), 0.0)
    for i in range(n):
        builder.add_eq(AffineExpr.lift(Q[i][i]) - diag[i], 0.0)
    return {"blocks": blocks}


def encode_psd_surrogate(builder: ProblemBuilder, Q, inner: str) -> dict:
    if inner == "dd":
        return encode_dd(builder, Q)
    if inner == "sdd":
        return encode_sdd(builder, Q)
    raise ValueError(f"inner cone must be 'dd' or 'sdd', got {inner!r}")


def encode_copositive_pn(builder: ProblemBuilder, M, inner: str = "dd") -> dict:
    """``M = P + N`` with ``N >= 0`` entrywise (diagonal included) and ``P`` dd/sdd."""
    n = len(M)
    N = sym_vars(builder, n, "nonneg")
    P = [[AffineExpr.lift(M[i][j]) - N[i][j] for j in range(n)] for i in range(n)]
    handle = encode_psd_surrogate(builder, P, inner)
    handle["N"] = N
    handle["P"] = P
    return handle
