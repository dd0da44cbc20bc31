"""Vectorized cone arithmetic for the interior-point solver.

Second-order cone blocks of equal size are stacked into 2-D index arrays so
that scaling, Jordan products and step lengths run without Python loops over
blocks.  Rotated cones never reach this module; the solver rotates them into
standard second-order cones first.
"""

from __future__ import annotations

import numpy as np


def soc_det(U: np.ndarray) -> np.ndarray:
    """Row-wise ``u0^2 - |u1|^2`` in factored form (no cancellation near the boundary)."""
    nrm = np.linalg.norm(U[:, 1:], axis=1)
    return (U[:, 0] - nrm) * (U[:, 0] + nrm)


class ConeSet:
    """Cone structure over a variable vector of length ``n``.

    ``free`` and ``nonneg`` are index arrays; ``soc`` maps block size ``k`` to
    an ``(nblocks, k)`` index array whose first column holds the cone heads.
    """

    def __init__(self, n: int, free, nonneg, soc_blocks):
        self.n = n
        self.free = np.asarray(free, dtype=np.int64)
        self.nonneg = np.asarray(nonneg, dtype=np.int64)
        groups: dict[int, list] = {}
        for blk in soc_blocks:
            groups.setdefault(len(blk), []).append(blk)
        self.soc = {k: np.asarray(v, dtype=np.int64) for k, v in sorted(groups.items())}
        self.degree = len(self.nonneg) + sum(g.shape[0] for g in self.soc.values())
        mask = np.ones(n, bool)
        mask[self.free] = False
        self.conic = np.flatnonzero(mask)

    def unit(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[self.nonneg] = 1.0
        for idx in self.soc.values():
            e[idx[:, 0]] = 1.0
        return e

    def dot(self, u, v) -> float:
        return float(u[self.conic] @ v[self.conic])

    def jprod(self, u, v) -> np.ndarray:
        """Jordan product ``u o v`` (zero on free coordinates)."""
        out = np.zeros(self.n)
        L = self.nonneg
        out[L] = u[L] * v[L]
        for idx in self.soc.values():
            U, V = u[idx], v[idx]
            out[idx[:, 0]] = np.einsum("ij,ij->i", U, V)
            out[idx[:, 1:]] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def jdiv(self, lam, r) -> np.ndarray:
        """Solve ``lam o u = r`` for ``u``."""
        out = np.zeros(self.n)
        L = self.nonneg
        out[L] = r[L] / lam[L]
        for idx in self.soc.values():
            Lm, R = lam[idx], r[idx]
            l0, l1 = Lm[:, 0], Lm[:, 1:]
            det = soc_det(Lm)
            u0 = (l0 * R[:, 0] - np.einsum("ij,ij->i", l1, R[:, 1:])) / det
            out[idx[:, 0]] = u0
            out[idx[:, 1:]] = (R[:, 1:] - u0[:, None] * l1) / l0[:, None]
        return out

    def interior_margin(self, u) -> float:
        """Smallest of ``u_i`` (nonneg) and ``u0 - |u1|`` (soc); +inf if no cones."""
        vals = [np.inf]
        if len(self.nonneg):
            vals.append(u[self.nonneg].min())
        for idx in self.soc.values():
            U = u[idx]
            vals.append((U[:, 0] - np.linalg.norm(U[:, 1:], axis=1)).min())
        return float(min(vals))

    def max_step(self, u, du) -> float:
        """Largest ``a`` with ``u + a*du`` in the cone (``u`` interior)."""
        amax = np.inf
        L = self.nonneg
        if len(L):
            neg = du[L] < 0
            if neg.any():
                amax = min(amax, float(np.min(-u[L][neg] / du[L][neg])))
        for idx in self.soc.values():
            U, D = u[idx], du[idx]
            qa = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            qb = U[:, 0] * D[:, 0] - np.einsum("ij,ij->i", U[:, 1:], D[:, 1:])
            qc = soc_det(U)
            amax = min(amax, _soc_root(qa, qb, qc))
        return amax

    def project_dual_violation(self, s) -> float:
        """Distance-like measure of how far ``s`` is outside the (self-dual) cone.

        Free coordinates must be zero in the dual cone, so they count fully.
        """
        viol = 0.0
        if len(self.free):
            viol = max(viol, float(np.abs(s[self.free]).max()))
        if len(self.nonneg):
            viol = max(viol, float(np.maximum(-s[self.nonneg], 0).max()))
        for idx in self.soc.values():
            U = s[idx]
            viol = max(viol, float(np.maximum(np.linalg.norm(U[:, 1:], axis=1) - U[:, 0], 0).max()))
        return viol

    def primal_violation(self, x) -> float:
        viol = 0.0
        if len(self.nonneg):
            viol = max(viol, float(np.maximum(-x[self.nonneg], 0).max()))
        for idx in self.soc.values():
            U = x[idx]
            viol = max(viol, float(np.maximum(np.linalg.norm(U[:, 1:], axis=1) - U[:, 0], 0).max()))
        return viol


def _soc_root(qa, qb, qc) -> float:
    """Smallest positive root over blocks of ``qa a^2 + 2 qb a + qc`` (qc > 0)."""
    disc = qb * qb - qa * qc
    best = np.full(qa.shape, np.inf)
    lin = np.abs(qa) <= 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        m = lin & (qb < 0)
        best[m] = -qc[m] / (2 * qb[m])
        quad = ~lin & (disc >= 0)
        sq = np.sqrt(np.where(quad, disc, 0.0))
        sgn = np.where(qb >= 0, 1.0, -1.0)
        q = -(qb + sgn * sq)
        r1 = np.where(quad, q / qa, np.inf)
        r2 = np.where(quad & (q != 0), qc / q, np.inf)
    for r in (r1, r2):
        r = np.where(np.isfinite(r) & (r > 0), r, np.inf)
        best = np.minimum(best, r)
    return float(best.min()) if best.size else np.inf


class NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W x = W^{-1} s = lam``."""

    def __init__(self, cones: ConeSet, x, s):
        self.cones = cones
        L = cones.nonneg
        self.d = np.sqrt(s[L] / x[L])
        self.lam = np.zeros(cones.n)
        self.lam[L] = np.sqrt(x[L] * s[L])
        self.soc = {}
        for k, idx in cones.soc.items():
            X, S = x[idx], s[idx]
            nx = np.sqrt(np.maximum(soc_det(X), 1e-300))
            ns = np.sqrt(np.maximum(soc_det(S), 1e-300))
            xb = X / nx[:, None]
            sb = S / ns[:, None]
            gam = np.sqrt(np.maximum((1.0 + np.einsum("ij,ij->i", xb, sb)) / 2.0, 1e-300))
            Jxb = xb.copy()
            Jxb[:, 1:] *= -1
            wb = (sb + Jxb) / (2 * gam[:, None])
            v = wb.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2.0 * (wb[:, 0] + 1.0))[:, None]
            eta = np.sqrt(ns / nx)
            self.soc[k] = (v, eta)
            self.lam[idx] = self._apply_soc(v, eta, X)

    @staticmethod
    def _apply_soc(v, eta, U):
        JU = U.copy()
        JU[:, 1:] *= -1
        return eta[:, None] * (2 * v * np.einsum("ij,ij->i", v, U)[:, None] - JU)

    @staticmethod
    def _apply_soc_inv(v, eta, U):
        Jv = v.copy()
        Jv[:, 1:] *= -1
        JU = U.copy()
        JU[:, 1:] *= -1
        return (2 * Jv * np.einsum("ij,ij->i", Jv, U)[:, None] - JU) / eta[:, None]

    def W(self, u) -> np.ndarray:
        out = np.zeros(self.cones.n)
        L = self.cones.nonneg
        out[L] = self.d * u[L]
        for k, idx in self.cones.soc.items():
            v, eta = self.soc[k]
            out[idx] = self._apply_soc(v, eta, u[idx])
        return out

    def Winv(self, u) -> np.ndarray:
        out = np.zeros(self.cones.n)
        L = self.cones.nonneg
        out[L] = u[L] / self.d
        for k, idx in self.cones.soc.items():
            v, eta = self.soc[k]
            out[idx] = self._apply_soc_inv(v, eta, u[idx])
        return out

    def hessian_blocks(self):
        """``W^2`` as (diag indices, diag values) plus dense soc blocks."""
        blocks = {}
        for k, idx in self.cones.soc.items():
            v, eta = self.soc[k]
            vv = np.einsum("ij,ij->i", v, v)
            Jv = v.copy()
            Jv[:, 1:] *= -1
            outer = np.einsum("bi,bj->bij", v, v)
            M = (4 * vv[:, None, None] * outer
                 - 2 * np.einsum("bi,bj->bij", v, Jv)
                 - 2 * np.einsum("bi,bj->bij", Jv, v))
            M += np.eye(k)[None]
            blocks[k] = (eta ** 2)[:, None, None] * M
        return self.d ** 2, blocks
