from __future__ import annotations

from ..conic import ConicProblem, ProblemBuilder, solve


class DriverError(RuntimeError):
    """The solver did not reach a conclusive status."""


def build_and_solve(builder: ProblemBuilder, export: str | None = None, **opts):
    P: ConicProblem = builder.build()
    if export:
        with open(export, "w") as fh:
            fh.write(P.to_json())
    return P, solve(P, **opts)
