"""L1 polynomial regression under a dsos/sdsos convexity certificate."""

from __future__ import annotations

import numpy as np

from ..conic import AffineExpr, ProblemBuilder, Status
from ..gram import AffinePoly, GramBasis, with_cone
from ..matcones import encode_psd_surrogate
from ..poly import Monomial, Polynomial, monomial_basis, mono_mul
from ._common import DriverError, build_and_solve

BASIS_CAP = 400


def _diff(m: Monomial, i: int):
    if m[i] == 0:
        return None, 0
    e = list(m)
    e[i] -= 1
    return tuple(e), m[i]


def convex_regress(x, y, degree: int, cone: str = "dsos", basis_cap: int = BASIS_CAP,
                   export: str | None = None) -> Polynomial:
    """Fit ``f`` of degree <= ``degree`` minimizing ``sum |f(x_i) - y_i|``.

    Convexity is imposed through the biform ``w' H(x) w`` in ``2n`` variables,
    or directly on the constant Hessian when ``degree == 2``.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[0] == 1 and np.ndim(x) == 1:
        X = X.T
    Y = np.asarray(y, dtype=float).ravel()
    npts, n = X.shape
    if Y.shape[0] != npts:
        raise ValueError("x and y lengths differ")
    if degree < 2 or degree % 2:
        raise ValueError("degree must be even and >= 2")
    if cone not in ("dsos", "sdsos"):
        raise ValueError("cone must be 'dsos' or 'sdsos'")
    half = (degree - 2) // 2
    gram_size = n * len(monomial_basis(n, 0, half))
    if gram_size > basis_cap:
        raise ValueError(f"convexity Gram basis has {gram_size} monomials (cap {basis_cap})")

    B = ProblemBuilder()
    mons = monomial_basis(n, 0, degree)
    coef = dict(zip(mons, B.free(len(mons), name="coef")))
    resid = B.nonneg(npts, name="t")
    for k in range(npts):
        fx = AffineExpr()
        for m, cexpr in coef.items():
            fx.iadd(cexpr, float(np.prod(X[k] ** np.array(m))))
        B.add_nonneg(resid[k] - fx + Y[k])
        B.add_nonneg(resid[k] + fx - Y[k])

    # Hessian entries as affine polynomials in x
    H = [[{} for _ in range(n)] for _ in range(n)]
    for m, cexpr in coef.items():
        for i in range(n):
            mi, ki = _diff(m, i)
            if mi is None:
                continue
            for j in range(n):
                mij, kj = _diff(mi, j)
                if mij is None:
                    continue
                e = H[i][j].setdefault(mij, AffineExpr())
                e.iadd(cexpr, float(ki * kj))
    if degree == 2:
        zero = (0,) * n
        Hc = [[H[i][j].get(zero, AffineExpr()) for j in range(n)] for i in range(n)]
        encode_psd_surrogate(B, Hc, "dd" if cone == "dsos" else "sdd")
    else:
        N = 2 * n
        terms: dict[Monomial, AffineExpr] = {}
        for i in range(n):
            for j in range(n):
                for mx, e in H[i][j].items():
                    w = [0] * n
                    w[i] += 1
                    w[j] += 1
                    key = tuple(mx) + tuple(w)
                    terms.setdefault(key, AffineExpr()).iadd(e)
        biform = AffinePoly(N, terms)
        xb = monomial_basis(n, 0, half)
        basis = []
        for i in range(n):
            wi = tuple(1 if k == i else 0 for k in range(n))
            for mx in xb:
                basis.append(tuple(mx) + wi)
        with_cone(B, biform, cone, 0, basis=GramBasis(basis, [list(range(len(basis)))]))
    B.set_objective(sum(resid, AffineExpr()), "min")
    P, sol = build_and_solve(B, export)
    if sol.status != Status.OPTIMAL:
        raise DriverError(f"convex regression: solver status {sol.status.value}")
    return Polynomial(n, {m: e.value(sol.x) for m, e in coef.items()})
