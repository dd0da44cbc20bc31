"""Lower bounds on the minimum of a form over the unit sphere."""

from __future__ import annotations

import math

from ..conic import AffineExpr, ProblemBuilder, Status
from ..gram import AffinePoly, polya_coeff_nonneg, with_cone
from ..poly import Polynomial, sphere_multiply
from ._common import DriverError, build_and_solve

METHODS = ("dsos", "sdsos", "polya")


def min_form_on_sphere(p: Polynomial, cone: str = "dsos", r: int = 0, export: str | None = None) -> float:
    """Largest ``gamma`` with ``(p - gamma (x'x)^d) (x'x)^r`` in the chosen cone.

    Returns ``-inf`` when no ``gamma`` is feasible.
    """
    if cone not in METHODS:
        raise ValueError(f"cone must be one of {METHODS}")
    if not p.is_homogeneous() or p.degree % 2:
        raise ValueError("p must be a form of even degree")
    d = p.degree // 2
    B = ProblemBuilder()
    (gamma,) = B.free(1, name="gamma")
    target = AffinePoly.lift(p) - AffinePoly.scaled(sphere_multiply(Polynomial.constant(p.nvars, 1.0), d), gamma)
    if cone == "polya":
        polya_coeff_nonneg(B, target, r)
    else:
        with_cone(B, target, cone, r)
    B.set_objective(gamma, "max")
    P, sol = build_and_solve(B, export)
    if sol.status == Status.OPTIMAL:
        return P.objective(sol.x)
    if sol.status == Status.PRIMAL_INFEASIBLE:
        return -math.inf
    raise DriverError(f"sphere bound ({cone}, r={r}): solver status {sol.status.value}")
