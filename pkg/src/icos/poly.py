"""Sparse multivariate polynomials over the reals.

Monomials are plain tuples of nonnegative exponents, one entry per variable.
Variables are positional and print as ``x1 .. xn``.  All term iteration uses
graded lexicographic order so downstream compiled problems are deterministic.
"""

from __future__ import annotations

import json
import re
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple


def grlex_key(m: Monomial):
    """Sort key: total degree first, then lexicographically largest first."""
    return (sum(m), tuple(-e for e in m))


def monomial_basis(nvars: int, dmin: int, dmax: int) -> list[Monomial]:
    """All monomials in ``nvars`` variables with ``dmin <= degree <= dmax``."""
    if nvars < 1 or dmin < 0 or dmax < dmin:
        raise ValueError(f"bad basis request nvars={nvars} dmin={dmin} dmax={dmax}")
    out = []
    for d in range(dmin, dmax + 1):
        block = []
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            block.append(tuple(e))
        block.sort(key=grlex_key)
        out.extend(block)
    return out


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def mono_is_even(m: Monomial) -> bool:
    return all(e % 2 == 0 for e in m)


class Polynomial:
    """Polynomial with float coefficients stored as ``{exponents: coef}``.

    Exact zeros are pruned on construction; nothing else is.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, float] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        self.nvars = int(nvars)
        clean = {}
        for m, c in (terms or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != self.nvars:
                raise ValueError(f"monomial {m} has length {len(m)}, expected {self.nvars}")
            if any(e < 0 for e in m):
                raise ValueError(f"negative exponent in {m}")
            c = float(c)
            if c != 0.0:
                clean[m] = c
        self._terms = clean

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        """The polynomial ``x_{i+1}`` (``i`` is zero-based)."""
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1.0})

    @classmethod
    def sphere(cls, nvars: int) -> "Polynomial":
        """``x1^2 + ... + xn^2``."""
        terms = {}
        for i in range(nvars):
            e = [0] * nvars
            e[i] = 2
            terms[tuple(e)] = 1.0
        return cls(nvars, terms)

    @property
    def terms(self) -> Mapping[Monomial, float]:
        return MappingProxyType(self._terms)

    def items(self):
        """Terms in graded lexicographic order."""
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def monomials(self) -> list[Monomial]:
        return sorted(self._terms, key=grlex_key)

    def coeff(self, m: Monomial) -> float:
        return self._terms.get(tuple(m), 0.0)

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    @property
    def mindegree(self) -> int:
        return min((sum(m) for m in self._terms), default=0)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._terms}) <= 1

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "Polynomial"):
        if self.nvars != other.nvars:
            raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.nvars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self.nvars, {m: c * float(other) for m, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = mono_mul(m1, m2)
                out[m] = out.get(m, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def diff(self, i: int) -> "Polynomial":
        """Partial derivative with respect to variable ``i`` (zero-based)."""
        out = {}
        for m, c in self._terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                out[tuple(e)] = c * m[i]
        return Polynomial(self.nvars, out)

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self):
        return f"Polynomial({self.nvars}, {to_text(self)!r})"


def evaluate(p: Polynomial, point) -> float | np.ndarray:
    """Value of ``p`` at one point (1-D) or at each row of a 2-D array."""
    pt = np.asarray(point, dtype=float)
    if pt.shape[-1] != p.nvars:
        raise ValueError(f"point has {pt.shape[-1]} coordinates, polynomial has {p.nvars} variables")
    if not p._terms:
        return 0.0 if pt.ndim == 1 else np.zeros(pt.shape[0])
    exps = np.array(list(p._terms.keys()), dtype=float)
    coefs = np.array(list(p._terms.values()))
    if pt.ndim == 1:
        return float(coefs @ np.prod(pt[None, :] ** exps, axis=1))
    vals = np.prod(pt[:, None, :] ** exps[None, :, :], axis=2)
    return vals @ coefs


def sphere_multiply(p: Polynomial, r: int) -> Polynomial:
    """``p * (x1^2 + ... + xn^2)^r``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return p
    return p * Polynomial.sphere(p.nvars) ** r


class PolyMatrix:
    """Symmetric matrix of polynomials."""

    def __init__(self, entries: Sequence[Sequence[Polynomial]]):
        self.n = len(entries)
        self.entries = [list(row) for row in entries]
        for i in range(self.n):
            if len(self.entries[i]) != self.n:
                raise ValueError("PolyMatrix must be square")
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise ValueError(f"PolyMatrix not symmetric at ({i},{j})")

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def evaluate(self, point) -> np.ndarray:
        return np.array([[evaluate(e, point) for e in row] for row in self.entries])


def hessian(f: Polynomial) -> PolyMatrix:
    grads = [f.diff(i) for i in range(f.nvars)]
    H = [[None] * f.nvars for _ in range(f.nvars)]
    for i in range(f.nvars):
        for j in range(i, f.nvars):
            H[i][j] = H[j][i] = grads[i].diff(j)
    return PolyMatrix(H)


def homogenize(p: Polynomial) -> Polynomial:
    """Append a variable ``y`` and return ``y^d p(x/y)`` with ``d = deg p``."""
    if p.is_zero():
        raise ValueError("cannot homogenize the zero polynomial")
    d = p.degree
    return Polynomial(p.nvars + 1, {m + (d - sum(m),): c for m, c in p.terms.items()})


def dehomogenize(p: Polynomial, var: int | None = None) -> Polynomial:
    """Set variable ``var`` (zero-based, default last) to one and drop it."""
    if not p.is_homogeneous():
        raise ValueError("dehomogenize needs a homogeneous polynomial")
    if p.nvars < 2:
        raise ValueError("need at least two variables")
    var = p.nvars - 1 if var is None else var
    out: dict = {}
    for m, c in p.terms.items():
        k = m[:var] + m[var + 1:]
        out[k] = out.get(k, 0.0) + c
    return Polynomial(p.nvars - 1, out)


def is_even(p: Polynomial) -> bool:
    return all(mono_is_even(m) for m in p.terms)


# text and JSON ---------------------------------------------------------------

class PolySyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|x(?P<var>\d+)|(?P<op>[-+*^]))"
)


def _tokens(text: str):
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise PolySyntaxError(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
        start = m.start(m.lastgroup) - (m.lastgroup == "var")
        yield m.lastgroup, m.group(m.lastgroup), start
        pos = m.end()


def parse(text: str, nvars: int | None = None) -> Polynomial:
    """Parse ``c*x1^e*x2...`` terms joined by ``+``/``-``.

    Lines starting with ``#`` are ignored.  ``nvars`` defaults to the largest
    variable index that appears (at least 1).
    """
    text = "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))
    toks = list(_tokens(text))
    if not toks:
        raise PolySyntaxError("empty polynomial", 0)
    terms: list[tuple[float, dict]] = []
    i = 0
    maxvar = 0

    def expect_factor(i):
        if i >= len(toks):
            raise PolySyntaxError("expected a factor", len(text))
        kind, val, pos = toks[i]
        if kind == "num":
            return ("num", float(val)), i + 1
        if kind == "var":
            idx = int(val)
            if idx < 1:
                raise PolySyntaxError("variables are numbered from x1", pos)
            e = 1
            if i + 1 < len(toks) and toks[i + 1][1] == "^":
                if i + 2 >= len(toks) or toks[i + 2][0] != "num" or not toks[i + 2][1].isdigit():
                    p = toks[i + 2][2] if i + 2 < len(toks) else len(text)
                    raise PolySyntaxError("expected integer exponent", p)
                e = int(toks[i + 2][1])
                return ("var", idx, e), i + 3
            return ("var", idx, e), i + 1
        raise PolySyntaxError(f"unexpected {val!r}", pos)

    first = True
    while i < len(toks):
        sign = 1.0
        kind, val, pos = toks[i]
        if kind == "op" and val in "+-":
            sign = -1.0 if val == "-" else 1.0
            i += 1
        elif not first:
            raise PolySyntaxError(f"expected '+' or '-' but found {val!r}", pos)
        first = False
        coef = sign
        exps: dict[int, int] = {}
        fac, i = expect_factor(i)
        while True:
            if fac[0] == "num":
                coef *= fac[1]
            else:
                exps[fac[1]] = exps.get(fac[1], 0) + fac[2]
                maxvar = max(maxvar, fac[1])
            if i < len(toks) and toks[i][1] == "*":
                fac, i = expect_factor(i + 1)
            else:
                break
        terms.append((coef, exps))
    n = nvars if nvars is not None else max(maxvar, 1)
    if maxvar > n:
        raise PolySyntaxError(f"variable x{maxvar} exceeds nvars={n}", 0)
    out: dict = {}
    for coef, exps in terms:
        m = [0] * n
        for v, e in exps.items():
            m[v - 1] = e
        m = tuple(m)
        out[m] = out.get(m, 0.0) + coef
    return Polynomial(n, out)


def _fmt(c: float) -> str:
    c = float(c)
    if c.is_integer() and abs(c) < 2 ** 53:
        return str(int(c))
    return repr(c)


def to_text(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for m, c in p.items():
        factors = [f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e]
        mag = abs(c)
        if factors:
            body = "*".join(factors) if mag == 1.0 else _fmt(mag) + "*" + "*".join(factors)
        else:
            body = _fmt(mag)
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)


def to_json(p: Polynomial) -> str:
    return json.dumps({
        "nvars": p.nvars,
        "terms": [{"exps": list(m), "coef": c} for m, c in p.items()],
    })


def from_json(text: str | dict) -> Polynomial:
    data = json.loads(text) if isinstance(text, str) else text
    try:
        n = int(data["nvars"])
        terms = data["terms"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"polynomial JSON needs 'nvars' and 'terms': {exc}") from None
    out: dict = {}
    for k, t in enumerate(terms):
        e = tuple(int(v) for v in t["exps"])
        if len(e) != n:
            raise ValueError(f"terms[{k}].exps has length {len(e)}, expected {n}")
        out[e] = out.get(e, 0.0) + float(t["coef"])
    return Polynomial(n, out)


def motzkin() -> Polynomial:
    """x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 x3^2 + x3^6."""
    return parse("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2*x3^2 + x3^6")


def random_form(nvars: int, degree: int, rng) -> Polynomial:
    """Dense form with standard-normal coefficients drawn from ``rng.normal()``."""
    basis = monomial_basis(nvars, degree, degree)
    return Polynomial(nvars, {m: rng.normal() for m in basis})
