"""Standard-form conic problems and the builder used by every encoder.

A problem is ``min c'x  s.t.  Ax = b,  x in K`` where ``K`` is an ordered
product of free, nonnegative, second-order and rotated second-order cones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

SCHEMA = "icos-conic/1"
CONE_TYPES = ("free", "nonneg", "soc", "rsoc")
_MIN_DIM = {"free": 1, "nonneg": 1, "soc": 2, "rsoc": 3}


class ConicFormatError(ValueError):
    """Malformed problem data; the message starts with a JSON path."""


class AffineExpr:
    """``const + sum coef_i * var_i`` over builder variable ids."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[int, float] | None = None, const: float = 0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @classmethod
    def var(cls, i: int, coef: float = 1.0) -> "AffineExpr":
        return cls({int(i): float(coef)})

    @classmethod
    def lift(cls, v) -> "AffineExpr":
        if isinstance(v, AffineExpr):
            return v
        return cls(None, float(v))

    def is_constant(self) -> bool:
        return not any(self.coeffs.values())

    def copy(self) -> "AffineExpr":
        return AffineExpr(self.coeffs, self.const)

    def iadd(self, other, scale: float = 1.0) -> "AffineExpr":
        """In-place ``self += scale * other``; returns self."""
        if isinstance(other, AffineExpr):
            for k, v in other.coeffs.items():
                self.coeffs[k] = self.coeffs.get(k, 0.0) + scale * v
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other):
        return (-self).iadd(other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, k):
        if isinstance(k, AffineExpr):
            if k.is_constant():
                k = k.const
            elif self.is_constant():
                return k * self.const
            else:
                raise TypeError("product of two non-constant affine expressions")
        k = float(k)
        return AffineExpr({i: v * k for i, v in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[i] for i, v in self.coeffs.items())

    def __repr__(self):
        parts = [f"{v:+g}*v{i}" for i, v in sorted(self.coeffs.items())]
        return f"AffineExpr({self.const:g} {' '.join(parts)})"


@dataclass
class ConicProblem:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: list[tuple[str, int]]
    names: dict = field(default_factory=dict)
    sense: str = "min"
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.A.sum_duplicates()
        self.validate()

    @property
    def nvars(self) -> int:
        return self.c.shape[0]

    @property
    def nrows(self) -> int:
        return self.b.shape[0]

    def validate(self):
        for k, (t, d) in enumerate(self.cones):
            if t not in CONE_TYPES:
                raise ConicFormatError(f"$.cones[{k}].type: unknown cone {t!r}")
            if d < _MIN_DIM[t]:
                raise ConicFormatError(f"$.cones[{k}].dim: {t} cone needs dim >= {_MIN_DIM[t]}, got {d}")
        total = sum(d for _, d in self.cones)
        if total != self.nvars:
            raise ConicFormatError(f"$.cones: sizes sum to {total} but c has length {self.nvars}")
        if self.A.shape != (self.nrows, self.nvars):
            raise ConicFormatError(f"$.A: shape {self.A.shape} does not match ({self.nrows}, {self.nvars})")

    def objective(self, x: np.ndarray) -> float:
        """User-facing objective: undoes the sign flip applied for maximization."""
        v = float(self.c @ x)
        return (-v if self.sense == "max" else v) + self.offset

    def cone_violation(self, v: np.ndarray, dual: bool = False) -> float:
        """Largest amount by which ``v`` leaves ``K`` (or ``K*`` when ``dual``).

        All cones here are self-dual except ``free``, whose dual is ``{0}``.
        """
        v = np.asarray(v, dtype=float)
        worst = 0.0
        pos = 0
        for t, d in self.cones:
            seg = v[pos:pos + d]
            pos += d
            if t == "free":
                worst = max(worst, float(np.abs(seg).max()) if dual else 0.0)
            elif t == "nonneg":
                worst = max(worst, float(np.maximum(-seg, 0).max()))
            elif t == "soc":
                worst = max(worst, float(np.linalg.norm(seg[1:]) - seg[0]))
            else:
                # 2uv >= |w|^2, u, v >= 0  <=>  |(u - v, sqrt2 w)| <= u + v
                u, w_, rest = seg[0], seg[1], seg[2:]
                gap = float(np.hypot(u - w_, math.sqrt(2.0) * np.linalg.norm(rest)) - (u + w_))
                worst = max(worst, gap / math.sqrt(2.0))
        return worst

    # JSON ------------------------------------------------------------------
    def to_json(self) -> str:
        coo = self.A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        trip = [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]
        doc = {
            "schema": SCHEMA,
            "cones": [{"type": t, "dim": int(d)} for t, d in self.cones],
            "A": {"rows": self.nrows, "cols": self.nvars, "triplets": trip},
            "b": [float(v) for v in self.b],
            "c": [float(v) for v in self.c],
            "objective": {"sense": self.sense, "offset": float(self.offset)},
            "names": self.names,
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ConicProblem":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConicFormatError(f"$: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConicFormatError("$: expected an object")
        if doc.get("schema", SCHEMA) != SCHEMA:
            raise ConicFormatError(f"$.schema: expected {SCHEMA!r}")
        for key in ("cones", "A", "b", "c"):
            if key not in doc:
                raise ConicFormatError(f"$.{key}: missing")
        cones = []
        for k, cone in enumerate(doc["cones"]):
            if not isinstance(cone, dict) or "type" not in cone or "dim" not in cone:
                raise ConicFormatError(f"$.cones[{k}]: needs 'type' and 'dim'")
            if not isinstance(cone["dim"], int):
                raise ConicFormatError(f"$.cones[{k}].dim: must be an integer")
            cones.append((cone["type"], cone["dim"]))
        Ad = doc["A"]
        for key in ("rows", "cols", "triplets"):
            if key not in Ad:
                raise ConicFormatError(f"$.A.{key}: missing")
        m, n = int(Ad["rows"]), int(Ad["cols"])
        rows, cols, vals = [], [], []
        for k, t in enumerate(Ad["triplets"]):
            if len(t) != 3:
                raise ConicFormatError(f"$.A.triplets[{k}]: expected [i, j, v]")
            i, j, v = int(t[0]), int(t[1]), float(t[2])
            if not (0 <= i < m and 0 <= j < n):
                raise ConicFormatError(f"$.A.triplets[{k}]: index ({i}, {j}) out of range")
            rows.append(i)
            cols.append(j)
            vals.append(v)
        # duplicate triplets are summed
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
        if len(doc["b"]) != m:
            raise ConicFormatError(f"$.b: length {len(doc['b'])} != A.rows {m}")
        if len(doc["c"]) != n:
            raise ConicFormatError(f"$.c: length {len(doc['c'])} != A.cols {n}")
        obj = doc.get("objective", {})
        return cls(np.array(doc["c"], float), A, np.array(doc["b"], float), cones,
                   doc.get("names", {}), obj.get("sense", "min"), float(obj.get("offset", 0.0)))


class ProblemBuilder:
    """Incrementally assembles a :class:`ConicProblem`.

    Variables are created in cone segments and identified by integer ids in
    insertion order.  Rows and slack variables are likewise appended in call
    order, so identical call sequences compile to identical problems.
    """

    def __init__(self):
        self.cones: list[tuple[str, int]] = []
        self.nvars = 0
        self._rows: list[tuple[dict, float]] = []
        self._objective: AffineExpr | None = None
        self._sense = "min"
        self.names: dict = {}

    def add_vars(self, cone: str, dim: int, name: str | None = None) -> list[int]:
        if cone not in CONE_TYPES:
            raise ValueError(f"unknown cone {cone!r}")
        if dim < _MIN_DIM[cone]:
            raise ValueError(f"{cone} segment needs dim >= {_MIN_DIM[cone]}")
        if cone in ("free", "nonneg") and self.cones and self.cones[-1][0] == cone:
            self.cones[-1] = (cone, self.cones[-1][1] + dim)
        else:
            self.cones.append((cone, dim))
        ids = list(range(self.nvars, self.nvars + dim))
        self.nvars += dim
        if name:
            self.names[name] = [ids[0], dim]
        return ids

    def free(self, dim: int = 1, name: str | None = None) -> list[AffineExpr]:
        return [AffineExpr.var(i) for i in self.add_vars("free", dim, name)]

    def nonneg(self, dim: int = 1, name: str | None = None) -> list[AffineExpr]:
        return [AffineExpr.var(i) for i in self.add_vars("nonneg", dim, name)]

    def _check_ids(self, coeffs: Mapping[int, float]):
        for i in coeffs:
            if not 0 <= i < self.nvars:
                raise KeyError(f"unknown variable id {i}")

    def add_eq_row(self, coeffs: Mapping[int, float], rhs: float) -> int:
        """Append the row ``sum coeffs[i] * x_i = rhs``."""
        self._check_ids(coeffs)
        self._rows.append(({int(k): float(v) for k, v in coeffs.items() if v != 0.0}, float(rhs)))
        return len(self._rows) - 1

    def add_eq(self, expr, rhs: float = 0.0) -> int:
        """Constrain the affine expression ``expr == rhs``."""
        expr = AffineExpr.lift(expr)
        return self.add_eq_row(expr.coeffs, rhs - expr.const)

    def add_nonneg(self, expr) -> int:
        """Constrain ``expr >= 0`` through a fresh nonnegative slack."""
        expr = AffineExpr.lift(expr)
        (s,) = self.add_vars("nonneg", 1)
        coeffs = dict(expr.coeffs)
        coeffs[s] = coeffs.get(s, 0.0) - 1.0
        return self.add_eq_row(coeffs, -expr.const)

    def add_cone(self, cone: str, exprs: list) -> list[int]:
        """Constrain the vector of affine ``exprs`` to lie in ``cone``."""
        ids = self.add_vars(cone, len(exprs))
        for i, e in zip(ids, exprs):
            self.add_eq(AffineExpr.lift(e) - AffineExpr.var(i), 0.0)
        return ids

    def set_objective(self, expr, sense: str = "min"):
        if self._objective is not None:
            raise ValueError("objective already set")
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        expr = AffineExpr.lift(expr)
        self._check_ids(expr.coeffs)
        self._objective = expr
        self._sense = sense

    @property
    def nrows(self) -> int:
        return len(self._rows)

    def build(self) -> ConicProblem:
        n, m = self.nvars, len(self._rows)
        c = np.zeros(n)
        offset = 0.0
        if self._objective is not None:
            for i, v in self._objective.coeffs.items():
                c[i] += v
            offset = self._objective.const
            if self._sense == "max":
                c = -c
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        b = np.zeros(m)
        for r, (coeffs, rhs) in enumerate(self._rows):
            for k in sorted(coeffs):
                indices.append(k)
                data.append(coeffs[k])
            indptr.append(len(indices))
            b[r] = rhs
        A = sp.csr_matrix((np.array(data, float), np.array(indices, np.int64), np.array(indptr, np.int64)),
                          shape=(m, n))
        return ConicProblem(c, A, b, list(self.cones), dict(self.names), self._sense, offset)
