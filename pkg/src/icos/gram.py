"""Gram-matrix compilation of dsos/sdsos and Polya constraints.

A polynomial constraint ``p in cone`` becomes ``p * (sum x_i^2)^r = z' Q z``
with ``Q`` diagonally dominant (dsos) or scaled diagonally dominant (sdsos).
Coefficients of ``p`` may be affine in builder variables, which is how
bounds such as ``p - gamma (x'x)^d`` are optimized in a single solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import matcones
from .conic import AffineExpr, ProblemBuilder, Status, solve
from .poly import Monomial, Polynomial, grlex_key, mono_is_even, mono_mul, monomial_basis, sphere_multiply

CONES = ("dsos", "sdsos")
_INNER = {"dsos": "dd", "sdsos": "sdd"}


class GramError(ValueError):
    """A monomial of the target cannot be produced by the Gram basis."""

    def __init__(self, msg: str, monomial: Monomial | None = None):
        super().__init__(msg)
        self.monomial = monomial


class AffinePoly:
    """Polynomial whose coefficients are :class:`AffineExpr` objects."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, AffineExpr] | None = None):
        self.nvars = nvars
        self.terms: dict[Monomial, AffineExpr] = {}
        for m, e in (terms or {}).items():
            if len(m) != nvars:
                raise ValueError(f"monomial {m} does not have {nvars} exponents")
            self.terms[tuple(m)] = AffineExpr.lift(e).copy()

    @classmethod
    def lift(cls, p) -> "AffinePoly":
        if isinstance(p, AffinePoly):
            return p
        return cls(p.nvars, {m: AffineExpr(None, c) for m, c in p.items()})

    @classmethod
    def scaled(cls, p: Polynomial, expr) -> "AffinePoly":
        """``expr * p`` for a numeric polynomial ``p`` and affine scalar ``expr``."""
        expr = AffineExpr.lift(expr)
        return cls(p.nvars, {m: expr * c for m, c in p.items()})

    def _binop(self, other, sign: float) -> "AffinePoly":
        other = AffinePoly.lift(other)
        if other.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        out = AffinePoly(self.nvars, self.terms)
        for m, e in other.terms.items():
            if m in out.terms:
                out.terms[m].iadd(e, sign)
            else:
                out.terms[m] = e * sign
        return out

    def __add__(self, other):
        return self._binop(other, 1.0)

    def __sub__(self, other):
        return self._binop(other, -1.0)

    def mul_poly(self, q: Polynomial) -> "AffinePoly":
        """Product with a numeric polynomial (coefficients stay affine)."""
        if q.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        out: dict[Monomial, AffineExpr] = {}
        for m, e in self.terms.items():
            for mq, cq in q.items():
                k = mono_mul(m, mq)
                if k in out:
                    out[k].iadd(e, cq)
                else:
                    out[k] = e * cq
        return AffinePoly(self.nvars, out)

    def sphere_multiply(self, r: int) -> "AffinePoly":
        if r == 0:
            return self
        return self.mul_poly(sphere_multiply(Polynomial.constant(self.nvars, 1.0), r))

    def support(self) -> list[Monomial]:
        """Monomials whose coefficient is not identically zero, in grlex order."""
        return sorted((m for m, e in self.terms.items() if not (e.is_constant() and e.const == 0.0)),
                      key=grlex_key)

    def is_constant(self) -> bool:
        return all(e.is_constant() for e in self.terms.values())

    def to_polynomial(self, x: np.ndarray | None = None) -> Polynomial:
        """Numeric polynomial; requires constant coefficients unless ``x`` is given."""
        if x is None and not self.is_constant():
            raise ValueError("coefficients depend on decision variables")
        return Polynomial(self.nvars, {m: (e.const if x is None else e.value(x)) for m, e in self.terms.items()})

    @property
    def degree(self) -> int:
        s = self.support()
        return max((sum(m) for m in s), default=0)


@dataclass
class GramBasis:
    monomials: list[Monomial]
    blocks: list[list[int]]

    def __len__(self):
        return len(self.monomials)


def gram_basis(nvars: int, degree: int, homogeneous: bool = True, even: bool = False,
               reduce: bool = True) -> GramBasis:
    """Half-degree monomial basis, split into parity blocks for even targets."""
    if degree % 2:
        raise ValueError(f"degree must be even, got {degree}")
    d = degree // 2
    mons = monomial_basis(nvars, d if homogeneous else 0, d)
    if reduce and even:
        groups: dict[tuple, list[int]] = {}
        for k, m in enumerate(mons):
            groups.setdefault(tuple(e % 2 for e in m), []).append(k)
        blocks = sorted(groups.values(), key=lambda b: b[0])
    else:
        blocks = [list(range(len(mons)))]
    return GramBasis(mons, blocks)


def basis_for(p: AffinePoly, reduce: bool = True) -> GramBasis:
    supp = p.support()
    if not supp:
        return GramBasis([], [])
    degs = {sum(m) for m in supp}
    hom = len(degs) == 1
    deg = max(degs)
    if deg % 2:
        raise GramError(f"odd degree {deg} cannot be a Gram form")
    return gram_basis(p.nvars, deg, hom, all(mono_is_even(m) for m in supp), reduce)


def gram_match(builder: ProblemBuilder, p: AffinePoly, basis: GramBasis, Q: Sequence) -> int:
    """Coefficient-matching rows ``sum_{z_i z_j = m} Q_ij = p_m``.

    ``Q`` holds one symmetric block of affine entries per ``basis.blocks``
    entry.  Off-diagonal pairs count twice.  Returns the number of rows added.
    """
    rows: dict[Monomial, AffineExpr] = {}
    for blk, Qb in zip(basis.blocks, Q):
        for a, ia in enumerate(blk):
            for b in range(a, len(blk)):
                m = mono_mul(basis.monomials[ia], basis.monomials[blk[b]])
                e = rows.setdefault(m, AffineExpr())
                e.iadd(Qb[a][b], 1.0 if a == b else 2.0)
    for m in p.support():
        if m not in rows:
            raise GramError(f"monomial {m} of the target is not reachable from the Gram basis", m)
    count = 0
    for m in sorted(rows, key=grlex_key):
        target = p.terms.get(m)
        expr = rows[m] - target if target is not None else rows[m]
        builder.add_eq(expr, 0.0)
        count += 1
    return count


@dataclass
class GramHandle:
    cone: str
    r: int
    basis: GramBasis
    Q: list
    encodings: list
    target: AffinePoly

    def gram_matrix(self, x: np.ndarray, repair: bool = True) -> np.ndarray:
        """Dense Gram matrix in basis order from a solver point ``x``.

        With ``repair`` the raw values are projected back into the cone:
        dd rows get their diagonal raised to the off-diagonal row sum, sdd
        matrices are rebuilt from their 2x2 blocks after projecting each block
        onto the psd cone.
        """
        n = len(self.basis)
        G = np.zeros((n, n))
        for blk, Qb, enc in zip(self.basis.blocks, self.Q, self.encodings):
            k = len(blk)
            B = np.array([[Qb[a][b].value(x) for b in range(k)] for a in range(k)])
            if repair:
                B = _repair(B, self.cone, enc, x)
            G[np.ix_(blk, blk)] = B
        return G


def _repair(B: np.ndarray, cone: str, enc: dict, x: np.ndarray) -> np.ndarray:
    k = B.shape[0]
    if k == 1:
        return np.maximum(B, 0.0)
    if cone == "dsos":
        B = B.copy()
        off = np.abs(B).sum(axis=1) - np.abs(np.diag(B))
        idx = np.arange(k)
        B[idx, idx] = np.maximum(B[idx, idx], off)
        return B
    out = np.zeros((k, k))
    h = 1.0 / math.sqrt(2.0)
    for (i, j), (ia, ic, iw) in enc["blocks"].items():
        a, c, w = x[ia], x[ic], x[iw] * h
        M = _psd2(a, w, c)
        out[i, i] += M[0, 0]
        out[j, j] += M[1, 1]
        out[i, j] += M[0, 1]
        out[j, i] += M[0, 1]
    return out


def _psd2(a: float, b: float, c: float) -> np.ndarray:
    """Nearest psd matrix to ``[[a, b], [b, c]]`` in Frobenius norm."""
    w, V = np.linalg.eigh(np.array([[a, b], [b, c]]))
    return (V * np.maximum(w, 0.0)) @ V.T


def with_cone(builder: ProblemBuilder, p, cone: str, r: int = 0, basis: GramBasis | None = None,
              reduce: bool = True) -> GramHandle:
    """Constrain ``p * (sum x^2)^r`` to be dsos or sdsos."""
    if cone not in CONES:
        raise ValueError(f"cone must be one of {CONES}, got {cone!r}")
    if r < 0:
        raise ValueError("r must be >= 0")
    q = AffinePoly.lift(p).sphere_multiply(r)
    if basis is None:
        basis = basis_for(q, reduce)
    Qs, encs = [], []
    for blk in basis.blocks:
        Qb = matcones.sym_vars(builder, len(blk))
        Qs.append(Qb)
    gram_match(builder, q, basis, Qs)
    for Qb in Qs:
        encs.append(matcones.encode_psd_surrogate(builder, Qb, _INNER[cone]))
    return GramHandle(cone, r, basis, Qs, encs, q)


# certificates ---------------------------------------------------------------------


@dataclass
class Certificate:
    cone: str
    r: int
    basis: list[Monomial]
    Q: np.ndarray
    residual: float

    def reconstruct(self, nvars: int) -> Polynomial:
        terms: dict[Monomial, float] = {}
        n = len(self.basis)
        for i in range(n):
            for j in range(i, n):
                v = self.Q[i, j] * (1.0 if i == j else 2.0)
                if v != 0.0:
                    m = mono_mul(self.basis[i], self.basis[j])
                    terms[m] = terms.get(m, 0.0) + v
        return Polynomial(nvars, terms)

    def residual_against(self, p: Polynomial) -> float:
        diff = self.reconstruct(p.nvars) - sphere_multiply(p, self.r)
        return max((abs(c) for c in diff.terms.values()), default=0.0)

    def cone_ok(self, tol: float = 1e-8) -> bool:
        if len(self.basis) == 0:
            return True
        pred = matcones.is_dd if self.cone == "dsos" else matcones.is_sdd
        return bool(pred(self.Q, tol))

    def to_json(self) -> str:
        return json.dumps({
            "cone": self.cone,
            "r": self.r,
            "basis": [list(m) for m in self.basis],
            "Q": [float(v) for v in self.Q.ravel()],
            "residual": self.residual,
        })

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        doc = json.loads(text)
        basis = [tuple(m) for m in doc["basis"]]
        n = len(basis)
        Q = np.array(doc["Q"], float).reshape(n, n)
        return cls(doc["cone"], int(doc["r"]), basis, Q, float(doc["residual"]))


@dataclass
class Membership:
    """``member`` is True, False, or None (solver could not decide)."""

    member: bool | None
    certificate: Certificate | None = None
    status: str = ""
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.member, self.certificate))


def is_member(p: Polynomial, cone: str, r: int = 0, tol: float = 1e-6, cone_tol: float = 1e-8,
              export: str | None = None) -> Membership:
    """Decide ``p * (sum x^2)^r in dsos/sdsos`` with a checked certificate.

    ``False`` is only reported with a solver infeasibility certificate; any
    other failure (iteration limit, numerical trouble, certificate that does
    not verify) yields ``None``.
    """
    B = ProblemBuilder()
    try:
        h = with_cone(B, p, cone, r)
    except GramError as exc:
        return Membership(False, None, "nonmember", {"reason": str(exc)})
    P = B.build()
    if export:
        with open(export, "w") as fh:
            fh.write(P.to_json())
    sol = solve(P, feas_tol=1e-8, gap_tol=1e-8)
    info = {"solver_status": sol.status.value, "iterations": sol.iterations,
            "nvars": P.nvars, "nrows": P.nrows}
    if sol.status == Status.PRIMAL_INFEASIBLE:
        return Membership(False, None, "nonmember", info)
    if sol.status != Status.OPTIMAL:
        return Membership(None, None, "unknown", info)
    Q = h.gram_matrix(sol.x)
    cert = Certificate(cone, r, list(h.basis.monomials), Q, 0.0)
    cert.residual = cert.residual_against(p)
    if cert.residual <= tol and cert.cone_ok(cone_tol):
        return Membership(True, cert, "member", info)
    info["residual"] = cert.residual
    return Membership(None, cert, "unknown", info)


def sdsos_separating_functional(f: Polynomial) -> float:
    """``sum_m c_m * (+1 if m even else -1)``; negative values rule out sdsos."""
    return float(sum(c if mono_is_even(m) else -c for m, c in f.items()))


def polya_coeff_nonneg(builder: ProblemBuilder, p, r: int = 0) -> int:
    """Require every coefficient of ``p * (sum x^2)^r`` to be nonnegative."""
    q = AffinePoly.lift(p).sphere_multiply(r)
    count = 0
    for m in sorted(q.terms, key=grlex_key):
        e = q.terms[m]
        if e.is_constant() and e.const >= 0.0:
            continue
        builder.add_nonneg(e)
        count += 1
    return count


def polya_certificate_search(p: Polynomial, r_max: int = 10) -> int | None:
    """Smallest ``r <= r_max`` making all coefficients of ``p (sum x^2)^r`` nonnegative."""
    if not p.is_homogeneous() or not all(mono_is_even(m) for m in p.monomials()):
        raise ValueError("polya search needs an even form")
    q = p
    for r in range(r_max + 1):
        if all(c >= 0.0 for c in q.terms.values()):
            return r
        q = sphere_multiply(q, 1)
    return None


def positivity_certificate_form(p: Polynomial, r: int) -> Polynomial:
    """The 2n-variable form whose r-dsos membership certifies ``p`` positive definite.

    Variables are ``(v_1..v_n, w_1..w_n)``; the form is
    ``p(v^2 - w^2) - (sum (v_i^2 - w_i^2)^2)^d / sqrt(r) + (sum v_i^4 + w_i^4)^d / (2 sqrt(r))``.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if not p.is_homogeneous() or p.degree % 2:
        raise ValueError("p must be a form of even degree")
    n = p.nvars
    d = p.degree // 2
    N = 2 * n
    sub = []
    for i in range(n):
        sub.append(Polynomial.variable(N, i) ** 2 - Polynomial.variable(N, n + i) ** 2)
    comp = Polynomial(N)
    for m, c in p.items():
        t = Polynomial.constant(N, c)
        for i, e in enumerate(m):
            if e:
                t = t * sub[i] ** e
        comp = comp + t
    sq = Polynomial(N)
    quart = Polynomial(N)
    for i in range(n):
        sq = sq + sub[i] ** 2
        quart = quart + Polynomial.variable(N, i) ** 4 + Polynomial.variable(N, n + i) ** 4
    k = 1.0 / math.sqrt(r)
    return comp - (sq ** d) * k + (quart ** d) * (0.5 * k)
