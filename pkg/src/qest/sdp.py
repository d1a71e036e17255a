"""Small dense semidefinite programs in linear-matrix-inequality form.

Problem::

    minimize    c^T x
    subject to  A0_b + sum_i x_i A_ib  >= 0     for every block b
                E x = f

Dual::

    maximize    -sum_b Tr[A0_b Z_b] + f^T y
    subject to  sum_b Tr[A_ib Z_b] + (E^T y)_i = c_i,   Z_b >= 0

The solver is an infeasible-start primal-dual path-following method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector. Equalities are
eliminated up front through a null-space basis, and directions of ``x`` that
do not move any block are dropped, so the normal equations are positive
definite and factored by Cholesky.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from .config import get_tolerances


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclasses.dataclass
class Block:
    a0: np.ndarray           # (n, n)
    a: np.ndarray            # (m, n, n)

    def __post_init__(self):
        self.a0 = np.asarray(self.a0, dtype=float)
        self.a = np.asarray(self.a, dtype=float).reshape(-1, *self.a0.shape)
        self.a0 = 0.5 * (self.a0 + self.a0.T)
        self.a = 0.5 * (self.a + self.a.transpose(0, 2, 1))

    @property
    def size(self):
        return self.a0.shape[0]


@dataclasses.dataclass
class SdpProblem:
    c: np.ndarray
    blocks: List[Block]
    E: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        m = self.c.size
        for b in self.blocks:
            if b.a.shape[0] != m:
                raise ValueError(f"block has {b.a.shape[0]} coefficient matrices, expected {m}")
        if self.E is not None:
            self.E = np.asarray(self.E, dtype=float).reshape(-1, m)
            self.f = np.asarray(self.f, dtype=float).ravel()
            if self.f.size != self.E.shape[0]:
                raise ValueError("E and f sizes disagree")

    @property
    def n_vars(self):
        return self.c.size

    def slack(self, x):
        return [b.a0 + np.tensordot(x, b.a, axes=1) for b in self.blocks]

    @classmethod
    def from_json(cls, data: dict) -> "SdpProblem":
        blocks = [Block(np.array(b["A0"], float), np.array(b["Ai"], float)) for b in data["blocks"]]
        E = data.get("E")
        f = data.get("f")
        if E is not None and len(E) == 0:
            E = f = None
        return cls(np.array(data["c"], float), blocks,
                   None if E is None else np.array(E, float),
                   None if f is None else np.array(f, float))

    def to_json(self) -> dict:
        out = {"c": self.c.tolist(),
               "blocks": [{"A0": b.a0.tolist(), "Ai": b.a.tolist()} for b in self.blocks]}
        if self.E is not None:
            out["E"] = self.E.tolist()
            out["f"] = self.f.tolist()
        return out


@dataclasses.dataclass
class SdpSolution:
    x: np.ndarray
    objective_value: float
    dual_value: float
    gap: float
    status: Status
    Z: list = dataclasses.field(default_factory=list)
    y: Optional[np.ndarray] = None
    iterations: int = 0
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    min_eig: float = 0.0
    history: list = dataclasses.field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "x": self.x.tolist(),
            "objective_value": self.objective_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
            "min_eig": self.min_eig,
        }


def _vec(mats):
    return np.concatenate([m.ravel() for m in mats])


def _max_step(lam, ds):
    """Largest alpha with diag(lam) + alpha * ds PSD (lam > 0)."""
    r = 1.0 / np.sqrt(lam)
    w = np.linalg.eigvalsh((r[:, None] * ds) * r[None, :])
    return np.inf if w[0] >= 0 else -1.0 / w[0]


def _reduce(p: SdpProblem):
    """Eliminate equalities and block-invisible directions: ``x = x0 + T u``.

    Returns ``None`` when the equalities are inconsistent or the objective
    decreases along a direction that moves neither the blocks nor ``E x``.
    """
    m = p.n_vars
    if p.E is not None and p.E.size:
        x0 = np.linalg.lstsq(p.E, p.f, rcond=None)[0]
        if np.linalg.norm(p.E @ x0 - p.f) > 1e-9 * (1 + np.linalg.norm(p.f)):
            return None
        N = sla.null_space(p.E)
    else:
        x0 = np.zeros(m)
        N = np.eye(m)
    if N.shape[1] == 0:
        return x0, N
    amat = np.stack([_vec([np.tensordot(N[:, j], b.a, axes=1) for b in p.blocks])
                     for j in range(N.shape[1])])
    u, s, _ = np.linalg.svd(amat, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
    P = u[:, :rank]
    cv = N.T @ p.c
    if np.linalg.norm(cv - P @ (P.T @ cv)) > 1e-9 * (1 + np.linalg.norm(p.c)):
        return None
    return x0, N @ P


def solve(p: SdpProblem, tol: Optional[float] = None, max_iter: Optional[int] = None) -> SdpSolution:
    """Solve ``p`` to relative gap ``tol``.

    Primal and dual infeasibilities are driven ten times lower than the gap
    so that the reported dual value never overshoots the primal one by more
    than roundoff. If roundoff stalls the iteration first, the best iterate
    seen is returned; it counts as optimal when within ``10 tol``.

    ``status`` is ``Infeasible`` when the equalities are inconsistent, the
    objective is unbounded along a direction invisible to the constraints, or
    the iterates diverge; ``MaxIter`` when the iteration cap is reached.
    """
    cfg = get_tolerances()
    tol = cfg.sdp_tol if tol is None else tol
    max_iter = cfg.sdp_max_iter if max_iter is None else max_iter

    red = _reduce(p)
    if red is None:
        return _infeasible(p)
    x0, T = red
    blocks = []
    for b in p.blocks:
        a0 = b.a0 + np.tensordot(x0, b.a, axes=1)
        a = np.tensordot(T.T, b.a, axes=1)
        blocks.append((a0, a))
    u, S, Z, hist, it, status = _ipm(T.T @ p.c, blocks, tol, max_iter)
    return _finish(p, x0 + T @ u, Z, hist, it, status)


def _infeasible(p):
    x = np.full(p.n_vars, np.nan)
    return SdpSolution(x, np.inf, -np.inf, np.inf, Status.INFEASIBLE)


def _ipm(c, blocks, tol, max_iter):
    m = c.size
    sizes = [a0.shape[0] for a0, _ in blocks]
    nu = sum(sizes)
    u = np.zeros(m)
    hist = []

    if m == 0:
        S = [a0.copy() for a0, _ in blocks]
        ok = all(np.linalg.eigvalsh(s)[0] >= -1e-8 for s in S)
        Z = [np.zeros_like(s) for s in S]
        return u, S, Z, hist, 0, Status.OPTIMAL if ok else Status.INFEASIBLE

    # initial point: least-norm dual solution and the constant term, both shifted into the cone
    G = sum(np.einsum("iab,jab->ij", a, a) for _, a in blocks)
    w = sla.cho_solve(sla.cho_factor(G), c)
    Z = [np.tensordot(w, a, axes=1) for _, a in blocks]
    S = [a0.copy() for a0, _ in blocks]
    for lst in (S, Z):
        lo = min(np.linalg.eigvalsh(x)[0] for x in lst)
        scale = max(1.0, max(np.linalg.norm(x) for x in lst) / np.sqrt(nu))
        shift = max(0.0, scale - lo) if lo < scale else 0.0
        for k in range(len(lst)):
            lst[k] = lst[k] + shift * np.eye(lst[k].shape[0])

    norm_a0 = np.sqrt(sum(np.sum(a0 ** 2) for a0, _ in blocks))
    norm_c = np.linalg.norm(c)
    status = Status.MAX_ITER
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        rp = [a0 + np.tensordot(u, a, axes=1) - s for (a0, a), s in zip(blocks, S)]
        rd = c - sum(np.einsum("iab,ab->i", a, z) for (_, a), z in zip(blocks, Z))
        sz = sum(np.sum(s * z) for s, z in zip(S, Z))
        mu = sz / nu
        pobj = c @ u
        dobj = -sum(np.sum(a0 * z) for (a0, _), z in zip(blocks, Z))
        pinf = np.sqrt(sum(np.sum(r ** 2) for r in rp)) / (1 + norm_a0)
        dinf = np.linalg.norm(rd) / (1 + norm_c)
        relgap = max(sz, abs(pobj - dobj)) / (1 + abs(pobj))
        hist.append((pobj, dobj, relgap, pinf, dinf))
        merit = max(relgap, 10 * pinf, 10 * dinf)
        if merit <= tol:
            status = Status.OPTIMAL
            break
        if best is None or merit < best[0]:
            best = (merit, u.copy(), [s.copy() for s in S], [z.copy() for z in Z])
        elif best[0] <= 10 * tol and merit > 100 * best[0]:
            # roundoff has taken over; fall back to the best iterate seen
            break
        if np.linalg.norm(u) > 1e12 or sum(np.trace(z) for z in Z) > 1e12:
            status = Status.INFEASIBLE
            break

        # Nesterov-Todd scaling: R^{-1} S R^{-T} = R^T Z R = diag(lam)
        scal = []
        try:
            facs = [(np.linalg.cholesky(s), np.linalg.cholesky(z)) for s, z in zip(S, Z)]
        except np.linalg.LinAlgError:
            # iterates hit the cone boundary in floating point: no further progress possible
            break
        for ls, lz in facs:
            uu, lam, vt = np.linalg.svd(lz.T @ ls)
            r = ls @ vt.T / np.sqrt(lam)
            rinv = (np.sqrt(lam)[:, None] * vt) @ sla.solve_triangular(ls, np.eye(len(lam)), lower=True)
            scal.append((r, rinv, lam))
        at = [np.einsum("ab,ibc,dc->iad", rinv, a, rinv, optimize=True)
              for (_, a), (_, rinv, _) in zip(blocks, scal)]
        M = sum(x.reshape(m, -1) @ x.reshape(m, -1).T for x in at)
        try:
            cf = sla.cho_factor(M)
        except np.linalg.LinAlgError:
            cf = sla.cho_factor(M + 1e-14 * np.trace(M) * np.eye(m))
        rpt = [rinv @ r @ rinv.T for r, (_, rinv, _) in zip(rp, scal)]

        def direction(rct):
            rhs = sum(np.einsum("iab,ab->i", a, rc - r) for a, rc, r in zip(at, rct, rpt)) - rd
            du = sla.cho_solve(cf, rhs)
            dst = [np.tensordot(du, a, axes=1) + r for a, r in zip(at, rpt)]
            dzt = [rc - ds for rc, ds in zip(rct, dst)]
            return du, dst, dzt

        def steps(dst, dzt):
            ap = min(_max_step(lam, ds) for (_, _, lam), ds in zip(scal, dst))
            ad = min(_max_step(lam, dz) for (_, _, lam), dz in zip(scal, dzt))
            return ap, ad

        # predictor
        du_a, ds_a, dz_a = direction([-np.diag(lam) for _, _, lam in scal])
        ap, ad = steps(ds_a, dz_a)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(np.sum((np.diag(lam) + ap * ds) * (np.diag(lam) + ad * dz))
                     for (_, _, lam), ds, dz in zip(scal, ds_a, dz_a)) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        rct = []
        for (_, _, lam), ds, dz in zip(scal, ds_a, dz_a):
            prod = ds @ dz
            t = sigma * mu * np.eye(len(lam)) - np.diag(lam ** 2) - 0.5 * (prod + prod.T)
            rct.append(2.0 * t / (lam[:, None] + lam[None, :]))
        du, dst, dzt = direction(rct)
        ap, ad = steps(dst, dzt)
        ap, ad = min(1.0, 0.98 * ap), min(1.0, 0.98 * ad)

        u = u + ap * du
        for k, ((r, rinv, _), ds, dz) in enumerate(zip(scal, dst, dzt)):
            s_new = S[k] + ap * (r @ ds @ r.T)
            z_new = Z[k] + ad * (rinv.T @ dz @ rinv)
            S[k] = 0.5 * (s_new + s_new.T)
            Z[k] = 0.5 * (z_new + z_new.T)
    if status is Status.MAX_ITER and best is not None:
        merit, u, S, Z = best
        if merit <= 10 * tol:
            status = Status.OPTIMAL
    return u, S, Z, hist, it, status


def _finish(p, x, Z, hist, it, status):
    slack = p.slack(x)
    min_eig = min(float(np.linalg.eigvalsh(s)[0]) for s in slack) if slack else 0.0
    atz = sum(np.einsum("iab,ab->i", b.a, z) for b, z in zip(p.blocks, Z))
    resid = p.c - atz
    if p.E is not None and p.E.size:
        y = np.linalg.lstsq(p.E.T, resid, rcond=None)[0]
        resid = resid - p.E.T @ y
        fy = float(p.f @ y)
        pinf_eq = np.linalg.norm(p.E @ x - p.f)
    else:
        y, fy, pinf_eq = None, 0.0, 0.0
    obj = float(p.c @ x)
    dual = float(-sum(np.sum(b.a0 * z) for b, z in zip(p.blocks, Z)) + fy)
    gap = obj - dual
    pinf = max(max(0.0, -min_eig), pinf_eq)
    dinf = float(np.linalg.norm(resid))
    if status == Status.OPTIMAL:
        if not (abs(gap) <= 1e-7 * (1 + abs(obj)) and min_eig >= -1e-8):
            status = Status.MAX_ITER
    return SdpSolution(x, obj, dual, gap, status, Z, y, it, pinf, dinf, min_eig, hist)
