"""Copositive upper bounds on the independence number of a graph."""

from __future__ import annotations

import math

import numpy as np

from ..conic import AffineExpr, ProblemBuilder, Status
from ..gram import AffinePoly, polya_coeff_nonneg, with_cone
from ..poly import Monomial
from ._common import DriverError, build_and_solve
from .fixtures import Graph

METHODS = ("rdsos", "rsdsos", "polya")


def lifted_form(g: Graph, gamma: AffineExpr) -> AffinePoly:
    """``(x.^2)' (gamma (A + I) - J) (x.^2)`` with ``gamma`` affine."""
    n = g.n
    M = g.adjacency + np.eye(n)
    terms: dict[Monomial, AffineExpr] = {}
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 2
            e[j] += 2
            mult = 1.0 if i == j else 2.0
            terms[tuple(e)] = (gamma * M[i, j] - 1.0) * mult
    return AffinePoly(n, terms)


def stable_set_bound(g: Graph, method: str = "rdsos", r: int = 0, export: str | None = None) -> float:
    """Smallest ``gamma`` certified by the chosen inner approximation of copositivity.

    ``+inf`` means the approximation is infeasible for every ``gamma``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    B = ProblemBuilder()
    (gamma,) = B.free(1, name="gamma")
    form = lifted_form(g, gamma)
    if method == "polya":
        polya_coeff_nonneg(B, form, r)
    else:
        with_cone(B, form, "dsos" if method == "rdsos" else "sdsos", r)
    B.set_objective(gamma, "min")
    P, sol = build_and_solve(B, export)
    if sol.status == Status.OPTIMAL:
        return P.objective(sol.x)
    if sol.status == Status.PRIMAL_INFEASIBLE:
        return math.inf
    raise DriverError(f"stable set bound ({method}, r={r}): solver status {sol.status.value}")
