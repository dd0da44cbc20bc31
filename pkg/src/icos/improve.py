"""Iterative tightening of dd/sdd inner approximations of an SDP.

Two schemes are provided:

* change of basis: optimize over ``{U'QU : Q dd/sdd}`` and reset ``U`` to the
  Cholesky factor of the last optimum;
* column generation: optimize over the conic hull of a growing set of
  rank-one (LP) or width-two (SOCP) psd atoms, pricing new atoms from the
  eigenvectors of the dual slack matrix.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import matcones
from .conic import AffineExpr, ProblemBuilder, Status, solve
from .matcones import symmat

SQRT2 = math.sqrt(2.0)
PIVOT_FLOOR = 1e-10
PRICE_TOL = 1e-7


class SdpInfeasible(RuntimeError):
    pass


class SdpUnbounded(RuntimeError):
    pass


@dataclass
class SdpData:
    """``min Tr(CX)  s.t.  Tr(A_i X) = b_i,  X psd``."""

    C: np.ndarray
    constraints: list[tuple[np.ndarray, float]]

    def __post_init__(self):
        self.C = symmat(self.C)
        self.constraints = [(symmat(A), float(b)) for A, b in self.constraints]
        for k, (A, _) in enumerate(self.constraints):
            if A.shape != self.C.shape:
                raise ValueError(f"constraint {k} has shape {A.shape}, expected {self.C.shape}")

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def residual(self, X: np.ndarray) -> float:
        """Largest relative violation ``|Tr(A_i X) - b_i| / (1 + |b_i|)``."""
        return max((abs(np.sum(A * X) - b) / (1 + abs(b)) for A, b in self.constraints), default=0.0)

    def to_json(self) -> dict:
        return {"C": self.C.tolist(), "constraints": [{"A": A.tolist(), "b": b} for A, b in self.constraints]}

    @classmethod
    def from_json(cls, doc: dict) -> "SdpData":
        return cls(np.array(doc["C"], float), [(np.array(c["A"], float), c["b"]) for c in doc["constraints"]])


@dataclass
class IterationTrace:
    values: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    X_final: np.ndarray | None = None
    atoms: list[int] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("iteration,value,status\n")
        for k, (v, s) in enumerate(zip(self.values, self.statuses)):
            out.write(f"{k},{v!r},{s}\n")
        return out.getvalue()


def _raise_status(status: Status, what: str):
    if status == Status.PRIMAL_INFEASIBLE:
        raise SdpInfeasible(f"{what} is infeasible")
    if status == Status.DUAL_INFEASIBLE:
        raise SdpUnbounded(f"{what} is unbounded")
    raise RuntimeError(f"{what}: solver status {status.value}")


def solve_ddp(sdp: SdpData, cone: str = "dd", U: np.ndarray | None = None,
              export: str | None = None) -> tuple[float, np.ndarray]:
    """Optimize over ``X = U'QU`` with ``Q`` dd or sdd; returns ``(value, X)``."""
    n = sdp.n
    U = np.eye(n) if U is None else np.asarray(U, float)
    if U.shape != (n, n):
        raise ValueError(f"U must be {n}x{n}")
    try:
        np.linalg.solve(U, np.eye(n))
    except np.linalg.LinAlgError:
        raise ValueError("U is singular") from None
    B = ProblemBuilder()
    Q = matcones.sym_vars(B, n)
    matcones.encode_psd_surrogate(B, Q, cone)

    def inner(M):
        Mt = symmat(U @ M @ U.T)
        e = AffineExpr()
        for i in range(n):
            for j in range(n):
                if Mt[i, j] != 0.0:
                    e.iadd(Q[i][j], Mt[i, j])
        return e

    for A, b in sdp.constraints:
        B.add_eq(inner(A), b)
    B.set_objective(inner(sdp.C))
    P = B.build()
    if export:
        with open(export, "w") as fh:
            fh.write(P.to_json())
    sol = solve(P, feas_tol=1e-8, gap_tol=1e-8)
    if sol.status != Status.OPTIMAL:
        _raise_status(sol.status, f"{cone} program")
    Qv = np.array([[Q[i][j].value(sol.x) for j in range(n)] for i in range(n)])
    X = symmat(U.T @ Qv @ U)
    return float(np.sum(sdp.C * X)), X


def chol_upper(X: np.ndarray, floor: float = PIVOT_FLOOR, indef_tol: float = 1e-8) -> np.ndarray:
    """Upper-triangular ``U`` with ``U'U ~= X``.

    Pivots below ``floor`` are raised to it; a pivot below
    ``-indef_tol * max(1, max diag)`` means X is indefinite (LinAlgError).
    """
    X = symmat(X)
    n = X.shape[0]
    scale = max(1.0, float(np.abs(np.diag(X)).max(initial=0.0)))
    U = np.zeros((n, n))
    for j in range(n):
        d = X[j, j] - U[:j, j] @ U[:j, j]
        if d < -indef_tol * scale:
            raise np.linalg.LinAlgError(f"pivot {j} is {d:.3e}; matrix is indefinite")
        U[j, j] = math.sqrt(max(d, floor))
        for k in range(j + 1, n):
            U[j, k] = (X[j, k] - U[:j, j] @ U[:j, k]) / U[j, j]
    return U


def cholesky_iterate(sdp: SdpData, cone: str = "dd", iters: int = 5) -> IterationTrace:
    """Repeat ``solve_ddp`` with ``U_{k+1} = chol(X_k)`` starting from ``U_0 = I``."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    trace = IterationTrace()
    U = np.eye(sdp.n)
    flat = 0
    for k in range(iters):
        try:
            value, X = solve_ddp(sdp, cone, U)
        except (SdpInfeasible, SdpUnbounded, RuntimeError) as exc:
            if k == 0:
                raise
            trace.statuses.append(f"stopped: {exc}")
            break
        trace.values.append(value)
        trace.statuses.append("optimal")
        trace.iterates.append(X)
        trace.X_final = X
        if len(trace.values) > 1 and abs(trace.values[-2] - value) < 1e-9:
            flat += 1
            if flat >= 2:
                break
        else:
            flat = 0
        if k + 1 == iters:
            break
        try:
            U = chol_upper(X)
        except np.linalg.LinAlgError:
            try:
                U = chol_upper(X + 1e-9 * np.eye(sdp.n))
            except np.linalg.LinAlgError as exc:
                trace.statuses.append(f"aborted: {exc}")
                break
    return trace


def _eig_sorted(S: np.ndarray):
    """Eigenpairs ascending; ties broken by lowest index of the eigenvector's leading entry."""
    w, V = np.linalg.eigh(symmat(S))
    for k in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, k]) > 1e-12))
        if V[i, k] < 0:
            V[:, k] = -V[:, k]
    return w, V


def colgen_lp(sdp: SdpData, iters: int = 5) -> IterationTrace:
    """Column generation over rank-one atoms ``b b'`` seeded with the DD extreme rays."""
    atoms = [np.outer(v, v) for v in matcones.dd_extreme_rays(sdp.n)]
    return _colgen(sdp, iters, atoms, width=1)


def colgen_socp(sdp: SdpData, iters: int = 5) -> IterationTrace:
    """Column generation over ``V Lambda V'`` with ``V`` n x 2 and ``Lambda`` 2x2 psd."""
    n = sdp.n
    if n < 2:
        raise ValueError("SOCP column generation needs n >= 2")
    eye = np.eye(n)
    atoms = [np.column_stack([eye[i], eye[j]]) for i in range(n) for j in range(i + 1, n)]
    return _colgen(sdp, iters, atoms, width=2)


def _colgen(sdp: SdpData, iters: int, atoms: list, width: int) -> IterationTrace:
    if iters < 0:
        raise ValueError("iters must be >= 0")
    trace = IterationTrace()
    for k in range(iters + 1):
        value, X, y = _master(sdp, atoms, width, first=(k == 0))
        trace.values.append(value)
        trace.statuses.append("optimal")
        trace.iterates.append(X)
        trace.X_final = X
        trace.atoms.append(len(atoms))
        if k == iters:
            break
        S = sdp.C - sum((yi * A for yi, (A, _) in zip(y, sdp.constraints)), np.zeros_like(sdp.C))
        w, V = _eig_sorted(S)
        if w[0] >= -PRICE_TOL:
            break
        if width == 1:
            atoms.append(np.outer(V[:, 0], V[:, 0]))
        else:
            atoms.append(V[:, :2].copy())
    return trace


def _master(sdp: SdpData, atoms: list, width: int, first: bool):
    n = sdp.n
    B = ProblemBuilder()
    mats = [A for A, _ in sdp.constraints] + [sdp.C]
    cols: list[list[tuple[int, float]]] = [[] for _ in mats]
    blocks = []
    for atom in atoms:
        if width == 1:
            (a,) = B.add_vars("nonneg", 1)
            blocks.append((a,))
            for r, M in enumerate(mats):
                cols[r].append((a, float(np.sum(M * atom))))
        else:
            a, c, w = B.add_vars("rsoc", 3)
            blocks.append((a, c, w))
            v1, v2 = atom[:, 0], atom[:, 1]
            for r, M in enumerate(mats):
                cols[r].append((a, float(v1 @ M @ v1)))
                cols[r].append((c, float(v2 @ M @ v2)))
                cols[r].append((w, SQRT2 * float(v1 @ M @ v2)))
    for r, (_, b) in enumerate(sdp.constraints):
        B.add_eq_row({i: v for i, v in cols[r] if v != 0.0}, b)
    B.set_objective(AffineExpr({i: v for i, v in cols[-1]}))
    P = B.build()
    sol = solve(P, feas_tol=1e-8, gap_tol=1e-8)
    if sol.status != Status.OPTIMAL:
        _raise_status(sol.status, "restricted master" if first else "master")
    X = np.zeros((n, n))
    for atom, blk in zip(atoms, blocks):
        if width == 1:
            X += max(sol.x[blk[0]], 0.0) * atom
        else:
            a, c, w = (sol.x[i] for i in blk)
            Lam = np.array([[a, w / SQRT2], [w / SQRT2, c]])
            lw, lv = np.linalg.eigh(Lam)
            Lam = (lv * np.maximum(lw, 0.0)) @ lv.T
            X += atom @ Lam @ atom.T
    X = symmat(X)
    return float(np.sum(sdp.C * X)), X, sol.y


# test instances ------------------------------------------------------------------


def random_section(n: int, rng, dim: int = 2) -> tuple[SdpData, list[np.ndarray]]:
    """Random SDP whose feasible set is the psd part of ``I + x_1 A_1 + ... + x_dim A_dim``.

    The directions are traceless, so the section is compact and contains ``I``
    (which is dd, making every inner approximation feasible).  Returns the
    problem and the direction matrices.
    """
    dirs = []
    for _ in range(dim):
        M = rng.normal(size=(n, n))
        M = symmat(M)
        M -= np.trace(M) / n * np.eye(n)
        dirs.append(M)
    idx = [(i, j) for i in range(n) for j in range(i, n)]

    def svec(M):
        return np.array([M[i, j] * (1.0 if i == j else SQRT2) for i, j in idx])

    def smat(v):
        M = np.zeros((n, n))
        for k, (i, j) in enumerate(idx):
            M[i, j] = M[j, i] = v[k] / (1.0 if i == j else SQRT2)
        return M

    D = np.array([svec(M) for M in dirs])
    _, _, Vt = np.linalg.svd(D)
    null = Vt[dim:]
    cons = []
    for v in null:
        F = smat(v)
        cons.append((F, float(np.trace(F))))
    C = symmat(rng.normal(size=(n, n)))
    return SdpData(C, cons), dirs


def section_sdp_value(sdp: SdpData, dirs: list[np.ndarray], grid: int = 3600) -> float:
    """SDP optimum over a two-dimensional section by boundary ray search.

    Points are ``I + t (cos a A + sin a B)``; along each ray the boundary is
    at ``t = -1 / lambda_min``.  A grid over the angle is refined with a
    bounded scalar minimizer around the best cell.
    """
    from scipy.optimize import minimize_scalar

    if len(dirs) != 2:
        raise ValueError("oracle handles two-dimensional sections")
    A, B = dirs
    C = sdp.C
    g = np.array([np.sum(C * A), np.sum(C * B)])
    base = float(np.trace(C))

    def val(a):
        M = math.cos(a) * A + math.sin(a) * B
        lmin = np.linalg.eigvalsh(M)[0]
        if lmin >= 0:
            return base  # unbounded ray cannot occur for traceless directions
        t = -1.0 / lmin
        return base + t * (g[0] * math.cos(a) + g[1] * math.sin(a))

    angles = np.linspace(0.0, 2 * math.pi, grid, endpoint=False)
    vals = np.array([val(a) for a in angles])
    k = int(np.argmin(vals))
    h = 2 * math.pi / grid
    res = minimize_scalar(val, bounds=(angles[k] - h, angles[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, vals[k], base))


def two_by_two_sdp_value(C, A, b: float) -> float:
    """``min Tr(CX) s.t. Tr(AX) = b, X psd`` for positive definite ``A`` and ``b > 0``.

    Equals ``b * lambda_min(A^{-1/2} C A^{-1/2})`` (any dimension).
    """
    w, V = np.linalg.eigh(symmat(A))
    Ai = (V / np.sqrt(w)) @ V.T
    return float(b * np.linalg.eigvalsh(Ai @ symmat(C) @ Ai)[0])
