"""Moment-based upper bounds on the price of a call on the maximum of m assets."""

from __future__ import annotations

from ..conic import AffineExpr, ProblemBuilder, Status
from ..matcones import encode_copositive_pn
from ._common import DriverError, build_and_solve
from .fixtures import MomentData

METHODS = ("ddp", "sddp")


def options_bound(data: MomentData, strike: float | None = None, method: str = "sddp",
                  export: str | None = None) -> float:
    """Minimize ``y0 + y'mu + <Y, sigma + mu mu'>`` over quadratic upper bounds of the payoff.

    For every payoff piece ``l`` (``l = 0`` is the zero piece) the bordered
    matrix ``[[Y, (y - e_l)/2], [(y - e_l)'/2, y0 + K_l]]`` must be copositive,
    which is relaxed to ``P + N`` with ``P`` dd (ddp) or sdd (sddp).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    K = data.strike if strike is None else strike
    if K is None:
        raise ValueError("strike price required")
    m = data.m
    B = ProblemBuilder()
    (y0,) = B.free(1, name="y0")
    y = B.free(m, name="y")
    Yv = B.free(m * (m + 1) // 2, name="Y")
    Y = [[None] * m for _ in range(m)]
    k = 0
    for i in range(m):
        for j in range(i, m):
            Y[i][j] = Y[j][i] = Yv[k]
            k += 1
    second = data.sigma + data.mu[:, None] * data.mu[None, :]
    obj = AffineExpr.lift(y0)
    for i in range(m):
        obj = obj + y[i] * data.mu[i]
        for j in range(m):
            obj = obj + Y[i][j] * second[i, j]
    inner = "dd" if method == "ddp" else "sdd"
    for piece in range(m + 1):
        M = [[Y[i][j] for j in range(m)] + [None] for i in range(m)] + [[None] * (m + 1)]
        for i in range(m):
            lin = y[i] - (1.0 if piece == i + 1 else 0.0)
            M[i][m] = M[m][i] = lin * 0.5
        M[m][m] = y0 + (K if piece > 0 else 0.0)
        encode_copositive_pn(B, M, inner)
    B.set_objective(obj, "min")
    P, sol = build_and_solve(B, export)
    if sol.status == Status.OPTIMAL:
        return P.objective(sol.x)
    raise DriverError(f"options bound ({method}, K={K}): solver status {sol.status.value}")


def expected_payoff(points, masses, strike: float, normalize: bool = True) -> float:
    """``E[max(x_1 - K, ..., x_m - K, 0)]`` under a discrete distribution."""
    tot = float(sum(masses)) if normalize else 1.0
    return sum(w * max(0.0, max(p) - strike) for p, w in zip(points, masses)) / tot
