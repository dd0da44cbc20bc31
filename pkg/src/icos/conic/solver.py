"""Primal-dual interior-point method for LP/SOCP in standard conic form.

The iteration follows the homogeneous self-dual embedding

    A x - b tau = 0,   A'y + s - c tau = 0,   b'y - c'x - kappa = 0,

with Nesterov-Todd scaling on second-order cone blocks and a Mehrotra
predictor-corrector.  Each Newton step solves the regularized quasi-definite
system ``[[-(H + dI), A'], [A, dI]]`` (dense LU below 500 variables, sparse LU
above) followed by iterative refinement against the unregularized matrix.

Sign conventions for certificates:

* ``PRIMAL_INFEASIBLE``: ``certificate = y`` with ``b'y = 1`` and
  ``-A'y`` in the dual cone (an improving ray of the dual problem).
* ``DUAL_INFEASIBLE``: ``certificate = x`` with ``c'x = -1``, ``Ax = 0`` and
  ``x`` in the cone (an improving ray of the primal problem).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import ConeSet, NTScaling
from .problem import ConicProblem

log = logging.getLogger(__name__)

DENSE_LIMIT = 500
KKT_RESID_MAX = 1e-7


class Status(str, Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    ITER_LIMIT = "iter_limit"
    NUMERICAL_ERROR = "numerical_error"


@dataclass
class ConicSolution:
    status: Status
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_obj: float = np.nan
    dual_obj: float = np.nan
    gap: float = np.nan
    certificate: np.ndarray | None = None
    iterations: int = 0
    pres: float = np.nan
    dres: float = np.nan
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


@dataclass
class SolverOptions:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-7
    infeas_tol: float = 1e-8
    max_iter: int = 200
    dense: bool | None = None
    presolve: bool = True
    equilibrate: bool = True
    regularization: float = 1e-8


def solve(problem: ConicProblem, feas_tol: float = 1e-7, gap_tol: float = 1e-7,
          max_iter: int = 200, **kwargs) -> ConicSolution:
    """Solve ``problem``; never raises on numerical trouble (see ``status``)."""
    opts = SolverOptions(feas_tol=feas_tol, gap_tol=gap_tol, max_iter=max_iter, **kwargs)
    return _Solve(problem, opts).run()


class _Solve:
    def __init__(self, problem: ConicProblem, opts: SolverOptions):
        self.P = problem
        self.opts = opts
        n = problem.nvars
        kind = np.zeros(n, np.int8)  # 0 free, 1 nonneg, 2 soc member
        self.soc_blocks: list[tuple[np.ndarray, bool]] = []
        pos = 0
        for t, d in problem.cones:
            idx = np.arange(pos, pos + d)
            if t == "nonneg":
                kind[idx] = 1
            elif t in ("soc", "rsoc"):
                kind[idx] = 2
                self.soc_blocks.append((idx, t == "rsoc"))
            pos += d
        self.kind = kind

    # presolve ------------------------------------------------------------
    def presolve(self):
        P = self.P
        m, n = P.nrows, P.nvars
        A = P.A.copy()
        A.eliminate_zeros()
        Acsc = A.tocsc()
        b = P.b.copy()
        row_nnz = np.diff(A.indptr).astype(np.int64)
        row_on = np.ones(m, bool)
        col_on = np.ones(n, bool)
        fixed_val = np.zeros(n)
        self.fix_log: list[tuple[int, int, float]] = []
        stack = [i for i in range(m) if row_nnz[i] <= 1] if self.opts.presolve else []
        infeasible_row = None
        while stack:
            i = stack.pop()
            if not row_on[i] or row_nnz[i] > 1:
                continue
            lo, hi = A.indptr[i], A.indptr[i + 1]
            cols = A.indices[lo:hi]
            vals = A.data[lo:hi]
            act = col_on[cols]
            if row_nnz[i] == 0:
                if abs(b[i]) > 1e-12 * (1.0 + np.abs(P.b).max(initial=0.0)):
                    infeasible_row = (i, None, np.sign(b[i]))
                    break
                row_on[i] = False
                continue
            j = int(cols[act][0])
            a = float(vals[act][0])
            if self.kind[j] == 2:
                continue
            v = b[i] / a
            if self.kind[j] == 1 and v < 0:
                if v < -1e-12 * (1.0 + abs(b[i])):
                    infeasible_row = (i, j, -np.sign(a))
                    break
                v = 0.0
            fixed_val[j] = v
            self.fix_log.append((i, j, a))
            row_on[i] = False
            col_on[j] = False
            clo, chi = Acsc.indptr[j], Acsc.indptr[j + 1]
            for k, akj in zip(Acsc.indices[clo:chi], Acsc.data[clo:chi]):
                b[k] -= akj * v
                if row_on[k]:
                    row_nnz[k] -= 1
                    if row_nnz[k] <= 1:
                        stack.append(k)
            b[i] = 0.0
        self.Acsc_full = Acsc
        self.fixed_val = fixed_val
        self.row_on, self.col_on = row_on, col_on
        self.b_red_full = b
        return infeasible_row

    def lift_dual(self, y_red_full: np.ndarray, cvec: np.ndarray) -> np.ndarray:
        """Fill duals of presolve-removed rows so fixed columns have zero reduced cost."""
        y = y_red_full.copy()
        Acsc = self.Acsc_full
        for i, j, a in reversed(self.fix_log):
            lo, hi = Acsc.indptr[j], Acsc.indptr[j + 1]
            rows, vals = Acsc.indices[lo:hi], Acsc.data[lo:hi]
            acc = cvec[j] - float(vals @ y[rows]) + a * y[i]
            y[i] = acc / a
        return y

    # main --------------------------------------------------------------------
    def run(self) -> ConicSolution:
        P = self.P
        infeasible_row = self.presolve()
        if infeasible_row is not None:
            return self._presolve_infeasible(infeasible_row)
        rows = np.flatnonzero(self.row_on)
        cols = np.flatnonzero(self.col_on)
        A = self.P.A.tocsr()[rows][:, cols].tocsr()
        b = self.b_red_full[rows]
        c = P.c[cols]
        colmap = -np.ones(P.nvars, np.int64)
        colmap[cols] = np.arange(len(cols))
        kind = self.kind[cols]
        blocks = [(colmap[idx], rot) for idx, rot in self.soc_blocks]

        # rotate RSOC blocks into SOC coordinates: x_rsoc = T x_soc, T = T^-1
        ncol = len(cols)
        T = sp.identity(ncol, format="lil")
        h = np.sqrt(0.5)
        for idx, rot in blocks:
            if rot:
                i0, i1 = idx[0], idx[1]
                T[i0, i0] = h
                T[i0, i1] = h
                T[i1, i0] = h
                T[i1, i1] = -h
        T = T.tocsr()
        any_rot = any(rot for _, rot in blocks)
        if any_rot:
            A = (A @ T).tocsr()
            c = T @ c
        cones = ConeSet(ncol, np.flatnonzero(kind == 0), np.flatnonzero(kind == 1),
                        [idx for idx, _ in blocks])

        # equilibration
        D = np.ones(len(rows))
        E = np.ones(ncol)
        if self.opts.equilibrate and A.nnz:
            D, E = _ruiz(A, cones, blocks)
        As = sp.diags(D) @ A @ sp.diags(E)
        # normalize b and c so the embedded solution stays O(1)
        beta = max(1.0, float(np.abs(D * b).max(initial=0.0))) if self.opts.equilibrate else 1.0
        gamma = max(1.0, float(np.abs(E * c).max(initial=0.0))) if self.opts.equilibrate else 1.0
        core = _HSD(As.tocsr(), D * b / beta, E * c / gamma, cones, self.opts,
                    unscale=(beta * E, gamma * D, gamma / E, A, b, c))
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = core.iterate()

        # undo scaling and rotation, then postsolve
        x_red = beta * E * res["x"]
        s_red = gamma * res["s"] / E
        y_red = gamma * D * res["y"]
        if any_rot:
            x_red = T @ x_red
            s_red = T @ s_red
        status = res["status"]
        x = np.zeros(P.nvars)
        y = np.zeros(P.nrows)
        y[rows] = y_red
        if status == Status.PRIMAL_INFEASIBLE:
            y = self.lift_dual(y, np.zeros(P.nvars))
            by = float(P.b @ y)
            y = y / by if by > 0 else y
            s = -(P.A.T @ y)
            return ConicSolution(status, x, y, s, certificate=y.copy(), iterations=res["iters"], info=res)
        x[cols] = x_red
        if status == Status.DUAL_INFEASIBLE:
            cx = float(P.c @ x)
            if cx < 0:
                x = x / -cx
            return ConicSolution(status, x, y, np.zeros(P.nvars), certificate=x.copy(),
                                 iterations=res["iters"], info=res)
        x[~self.col_on] = self.fixed_val[~self.col_on]
        y = self.lift_dual(y, P.c)
        s = P.c - P.A.T @ y
        pobj = float(P.c @ x)
        dobj = float(P.b @ y)
        pres = float(np.abs(P.A @ x - P.b).max(initial=0.0)) / (1 + np.abs(P.b).max(initial=0.0))
        dres = float(np.abs(s[self.kind == 0]).max(initial=0.0)) / (1 + np.abs(P.c).max(initial=0.0))
        gap = abs(pobj - dobj) / (1 + abs(pobj))
        return ConicSolution(status, x, y, s, pobj, dobj, gap, None, res["iters"], pres, dres, info=res)

    def _presolve_infeasible(self, infeasible_row):
        P = self.P
        i, _, sign = infeasible_row
        y = np.zeros(P.nrows)
        y[i] = sign
        y = self.lift_dual(y, np.zeros(P.nvars))
        by = float(P.b @ y)
        if by > 0:
            y /= by
        s = -(P.A.T @ y)
        return ConicSolution(Status.PRIMAL_INFEASIBLE, np.zeros(P.nvars), y, s, certificate=y.copy(),
                             iterations=0, info={"presolve": True})


def _ruiz(A: sp.csr_matrix, cones: ConeSet, blocks, iters: int = 15):
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    M = abs(A).tocsr()
    for _ in range(iters):
        S = (sp.diags(D) @ M @ sp.diags(E)).tocsr()
        rn = S.max(axis=1).toarray().ravel()
        cn = S.max(axis=0).toarray().ravel()
        for idx, _ in blocks:
            cn[idx] = cn[idx].max()
        rn[rn == 0] = 1.0
        cn[cn == 0] = 1.0
        if max(abs(1 - rn).max(initial=0), abs(1 - cn).max(initial=0)) < 0.1:
            break
        D = np.clip(D / np.sqrt(rn), 1e-4, 1e4)
        E = np.clip(E / np.sqrt(cn), 1e-4, 1e4)
    return D, E


class _HSD:
    def __init__(self, A, b, c, cones: ConeSet, opts: SolverOptions, unscale):
        self.A, self.b, self.c = A, b, c
        self.cones = cones
        self.opts = opts
        self.m, self.n = A.shape
        self.dense = opts.dense if opts.dense is not None else (self.n < DENSE_LIMIT)
        self.unscale = unscale
        self.pivoting = False
        if self.dense:
            self.Ad = A.toarray()
        self.AT = A.T.tocsr()

    # linear algebra --------------------------------------------------------------
    def factor(self, Hdiag, Hblocks, reg):
        n, m = self.n, self.m
        cones = self.cones
        if self.dense:
            K = np.zeros((n + m, n + m))
            K[:n, n:] = self.Ad.T
            K[n:, :n] = self.Ad
            L = cones.nonneg
            K[L, L] = -Hdiag
            for k, idx in cones.soc.items():
                blk = Hblocks[k]
                K[idx[:, :, None], idx[:, None, :]] = -blk
            K0 = K.copy()
            K[np.arange(n), np.arange(n)] -= reg
            K[np.arange(n, n + m), np.arange(n, n + m)] += reg
            lu = la.lu_factor(K, check_finite=False)
            self._K0 = K0
            self._solve_reg = lambda r: la.lu_solve(lu, r, check_finite=False)
            self._mul0 = lambda z: K0 @ z
        else:
            rr, cc, vv = [], [], []
            L = cones.nonneg
            rr.append(L)
            cc.append(L)
            vv.append(-Hdiag)
            for k, idx in cones.soc.items():
                blk = Hblocks[k]
                rr.append(np.repeat(idx, k, axis=1).ravel())
                cc.append(np.tile(idx, (1, k)).ravel())
                vv.append(-blk.ravel())
            H = sp.coo_matrix((np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))),
                              shape=(n, n)).tocsr()
            K0 = sp.bmat([[H, self.AT], [self.A, None]], format="csc")
            R = sp.diags(np.concatenate([-reg * np.ones(n), reg * np.ones(m)]))
            K = (K0 + R).tocsc()
            if not self.pivoting:
                lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                               options={"SymmetricMode": True})
            else:
                lu = spla.splu(K, permc_spec="COLAMD", diag_pivot_thresh=0.1)
            self._solve_reg = lu.solve
            self._mul0 = lambda z: K0 @ z
        self._factored = (Hdiag, Hblocks, reg)

    def _refine(self, r):
        z = self._solve_reg(r)
        nr = np.abs(r).max(initial=0.0) + 1e-300
        for _ in range(5):
            e = r - self._mul0(z)
            if np.abs(e).max(initial=0.0) <= 1e-13 * nr:
                break
            z = z + self._solve_reg(e)
        return z, np.abs(r - self._mul0(z)).max(initial=0.0) / nr

    def ksolve(self, r):
        z, rel = self._refine(r)
        if rel > KKT_RESID_MAX and not self.dense and not self.pivoting:
            # diagonal pivoting lost accuracy: switch to threshold pivoting for
            # the rest of the solve (slower, more fill, but backward stable)
            log.debug("KKT residual %.1e after refinement; enabling pivoting", rel)
            self.pivoting = True
            self.factor(*self._factored)
            z, rel = self._refine(r)
        return z

    def residual_metrics(self, x, y, s, tau, kappa):
        xsc, ysc, ssc, A0, b0, c0 = self.unscale
        xu, yu, su = xsc * x, ysc * y, ssc * s
        nb = 1 + np.abs(b0).max(initial=0.0)
        nc = 1 + np.abs(c0).max(initial=0.0)
        Ax = A0 @ xu
        ATy = A0.T @ yu
        out = {}
        out["pres"] = float(np.abs(Ax / tau - b0).max(initial=0.0)) / nb
        out["dres"] = float(np.abs(ATy / tau + su / tau - c0).max(initial=0.0)) / nc
        out["pobj"] = float(c0 @ xu) / tau
        out["dobj"] = float(b0 @ yu) / tau
        out["compl"] = self.cones.dot(x, s) / tau ** 2
        by = float(b0 @ yu)
        cx = float(c0 @ xu)
        out["pinf"] = (by > 0 and np.abs(ATy + su).max(initial=0.0) / by <= self.opts.infeas_tol)
        out["dinf"] = (cx < 0 and np.abs(Ax).max(initial=0.0) / -cx <= self.opts.infeas_tol)
        return out

    def iterate(self):
        A, b, c, cones, opts = self.A, self.b, self.c, self.cones, self.opts
        n, m = self.n, self.m
        e = cones.unit()
        x = e.copy()
        s = e.copy()
        y = np.zeros(m)
        tau = kappa = 1.0
        nu = cones.degree
        conic = np.zeros(n, bool)
        conic[cones.conic] = True
        reg = opts.regularization
        status = Status.ITER_LIMIT
        stall = 0
        it = 0
        metrics = {}
        best = (np.inf, x, y, s, tau)
        for it in range(opts.max_iter + 1):
            metrics = self.residual_metrics(x, y, s, tau, kappa)
            gap_ok = (abs(metrics["pobj"] - metrics["dobj"]) <= opts.gap_tol * (1 + abs(metrics["pobj"]))
                      and metrics["compl"] <= opts.gap_tol * (1 + abs(metrics["pobj"])))
            log.debug("it %d pres %.2e dres %.2e pobj %.6e dobj %.6e compl %.2e tau %.2e kappa %.2e",
                      it, metrics["pres"], metrics["dres"], metrics["pobj"], metrics["dobj"], metrics["compl"], tau, kappa)
            score = max(metrics["pres"], metrics["dres"],
                        abs(metrics["pobj"] - metrics["dobj"]) / (1 + abs(metrics["pobj"])))
            if score < best[0]:
                best = (score, x, y, s, tau)
            if (log.isEnabledFor(logging.DEBUG) and max(metrics["pres"], metrics["dres"]) < 1e-6
                    and metrics["pobj"] < metrics["dobj"] - 1e-6 * (1 + abs(metrics["pobj"]))):
                log.debug("weak duality violated at iterate %d", it)
            if metrics["pres"] <= opts.feas_tol and metrics["dres"] <= opts.feas_tol and gap_ok:
                status = Status.OPTIMAL
                break
            if metrics["pinf"]:
                status = Status.PRIMAL_INFEASIBLE
                break
            if metrics["dinf"]:
                status = Status.DUAL_INFEASIBLE
                break
            if it == opts.max_iter:
                break

            mu = (cones.dot(x, s) + tau * kappa) / (nu + 1)
            rp = b * tau - A @ x
            rd = c * tau - self.AT @ y - s
            rg = kappa + c @ x - b @ y

            try:
                W = NTScaling(cones, x, s)
                Hdiag, Hblocks = W.hessian_blocks()
                self.factor(Hdiag, Hblocks, reg)
                sol1 = self.ksolve(np.concatenate([c, b]))
            except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
                log.debug("factorization failed: %s", exc)
                if reg < 1e-6:
                    reg *= 100
                    continue
                status = Status.NUMERICAL_ERROR
                break
            x1, y1 = sol1[:n], sol1[n:]
            lam = W.lam

            def direction(eta_, rc, rk):
                ds_t = cones.jdiv(lam, rc)
                Wds = W.W(ds_t)
                rhs = np.concatenate([eta_ * rd - Wds, eta_ * rp])
                sol2 = self.ksolve(rhs)
                x2, y2 = sol2[:n], sol2[n:]
                den = -c @ x1 + b @ y1 + kappa / tau
                dtau = (eta_ * rg + c @ x2 - b @ y2 + rk / tau) / den
                dx = x2 + dtau * x1
                dy = y2 + dtau * y1
                dkappa = (rk - kappa * dtau) / tau
                ds = np.zeros(n)
                ds[conic] = W.W(ds_t - W.W(dx))[conic]
                return dx, dy, ds, dtau, dkappa

            def steplen(dx, ds, dtau, dkappa):
                a = min(cones.max_step(x, dx), cones.max_step(s, ds))
                if dtau < 0:
                    a = min(a, -tau / dtau)
                if dkappa < 0:
                    a = min(a, -kappa / dkappa)
                return a

            # predictor
            rc = -cones.jprod(lam, lam)
            dxa, dya, dsa, dta, dka = direction(1.0, rc, -tau * kappa)
            alpha_a = min(1.0, steplen(dxa, dsa, dta, dka))
            sigma = min(1.0, max(0.0, (1 - alpha_a))) ** 3
            # corrector
            corr = cones.jprod(W.Winv(dsa), W.W(dxa))
            rc = -cones.jprod(lam, lam) - corr + sigma * mu * e
            rk = -tau * kappa - dta * dka + sigma * mu
            dx, dy, ds, dt, dk = direction(1.0 - sigma, rc, rk)
            alpha = min(1.0, 0.99 * steplen(dx, ds, dt, dk))
            if not np.isfinite(alpha) or alpha < 1e-10:
                stall += 1
                if stall >= 3:
                    status = Status.NUMERICAL_ERROR
                    break
                reg = min(reg * 100, 1e-6)
                continue
            stall = 0
            x = x + alpha * dx
            y = y + alpha * dy
            s = s + alpha * ds
            tau = tau + alpha * dt
            kappa = kappa + alpha * dk
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(tau)):
                status = Status.NUMERICAL_ERROR
                break

        out = {"status": status, "iters": it, **metrics}
        if status == Status.PRIMAL_INFEASIBLE:
            out.update(x=np.zeros(n), y=y, s=s)
        elif status == Status.DUAL_INFEASIBLE:
            out.update(x=x, y=np.zeros(m), s=np.zeros(n))
        elif status == Status.OPTIMAL:
            out.update(x=x / tau, y=y / tau, s=s / tau)
        else:
            _, x, y, s, tau = best
            out.update(x=x / tau, y=y / tau, s=s / tau)
        return out
