"""Scalar Cramer-Rao bounds: SLD, RLD, Holevo, the upper-bound chain, nuisance
parameters and a numerical most-informative search for qubits."""

from __future__ import annotations

import dataclasses
import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import sdp
from .config import get_tolerances
from .errors import RldUndefined, SearchDegenerate, SolverFailure
from .information import (
    InfoMatrices,
    Povm,
    check_invertible,
    classical_fi,
    incompatibility_R,
    qfi_matrices,
)
from .model import ModelPoint
from .operators import complex_to_real_embed, default_cutoff, eig_hermitian, trace_norm

log = logging.getLogger(__name__)


def check_weight(W, d=None) -> np.ndarray:
    """Validate a weight matrix (real symmetric positive definite)."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if d is not None and W.shape != (d, d):
        raise ValueError(f"weight matrix must be {d}x{d}, got {W.shape}")
    if np.max(np.abs(W - W.T)) > 1e-12 * (1 + np.max(np.abs(W))):
        raise ValueError("weight matrix must be symmetric")
    if np.linalg.eigvalsh(W)[0] < get_tolerances().weight_min:
        raise ValueError("weight matrix must be positive definite")
    return 0.5 * (W + W.T)


def _sqrtm_pd(W):
    w, v = np.linalg.eigh(W)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


class Chain(NamedTuple):
    c_s_plus_norm: float
    one_plus_R_cs: float
    two_cs: float


@dataclasses.dataclass(frozen=True)
class HolevoCertificate:
    X_ops: tuple
    U: np.ndarray
    sdp_gap: float
    constraint_residual: float
    psd_residual: float
    solution: Optional[sdp.SdpSolution] = dataclasses.field(default=None, repr=False)


@dataclasses.dataclass(frozen=True)
class BoundsReport:
    c_sld: float
    c_rld: Optional[float]
    c_holevo: Optional[float]
    holevo_gap: Optional[float]
    chain: Chain
    R: float

    def to_json(self) -> dict:
        return {
            "c_sld": self.c_sld,
            "c_rld": self.c_rld,
            "c_holevo": self.c_holevo,
            "holevo_gap": self.holevo_gap,
            "chain": self.chain._asdict(),
            "R": self.R,
        }


def scalar_sld_bound(Q, W) -> float:
    """``Tr[W Q^{-1}]``."""
    Q = np.asarray(Q, dtype=float)
    W = check_weight(W, Q.shape[0])
    check_invertible(Q)
    return float(np.trace(W @ np.linalg.inv(Q)))


def scalar_rld_bound(J, W) -> float:
    """``Tr[W Re J^{-1}] + || sqrt(W) Im J^{-1} sqrt(W) ||_1``."""
    if J is None:
        raise RldUndefined("RLD information matrix not available")
    J = np.asarray(J, dtype=complex)
    W = check_weight(W, J.shape[0])
    check_invertible(0.5 * (J + J.conj().T), "J")
    ji = np.linalg.inv(J)
    sw = _sqrtm_pd(W)
    return float(np.trace(W @ ji.real) + trace_norm(sw @ ji.imag @ sw))


def upper_bound_chain(Q, D, W) -> Chain:
    Q = np.asarray(Q, dtype=float)
    W = check_weight(W, Q.shape[0])
    check_invertible(Q)
    qi = np.linalg.inv(Q)
    cs = float(np.trace(W @ qi))
    sw = _sqrtm_pd(W)
    norm_term = trace_norm(sw @ qi @ np.asarray(D, float) @ qi @ sw)
    info = InfoMatrices(Q, None, np.asarray(D, float), None)
    R = incompatibility_R(info)
    return Chain(cs + norm_term, (1.0 + R) * cs, 2.0 * cs)


def nuisance_bound(Q, interest, W_sub=None) -> float:
    """Bound on the parameters ``interest`` when the rest are unknown nuisances:
    ``Tr[W_sub (Q^{-1})_{SS}]``."""
    Q = np.asarray(Q, dtype=float)
    check_invertible(Q)
    idx = np.atleast_1d(np.asarray(interest, dtype=int))
    W_sub = np.eye(idx.size) if W_sub is None else check_weight(W_sub, idx.size)
    qi = np.linalg.inv(Q)
    return float(np.trace(W_sub @ qi[np.ix_(idx, idx)]))


def hermitian_basis(n) -> list:
    """Orthonormal Hermitian basis of n x n matrices: ``I/sqrt(n)`` followed by a
    traceless part obtained by Gram-Schmidt over elementary Hermitian matrices."""
    cands = [np.eye(n, dtype=complex) / np.sqrt(n)]
    for j in range(n):
        e = np.zeros((n, n), complex)
        e[j, j] = 1.0
        cands.append(e)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), complex)
            e[j, k] = e[k, j] = 1 / np.sqrt(2)
            cands.append(e)
            e = np.zeros((n, n), complex)
            e[j, k], e[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            cands.append(e)
    basis = []
    for c in cands:
        v = c - sum(np.vdot(b, c).real * b for b in basis)
        nv = np.linalg.norm(v)
        if nv > 1e-10:
            basis.append(v / nv)
    return basis


def holevo_sdp(pt: ModelPoint, W):
    """Assemble the Holevo minimization as a real SDP.

    Variables are the entries of the symmetric ``U`` followed by the
    coordinates of every ``X_mu`` in :func:`hermitian_basis`. The single block
    is the real embedding of ``[[U, V^dag], [V, 1]]`` where column ``mu`` of
    ``V`` stacks ``sqrt(p_j) X_mu |j>`` over the support of ``rho``; its Schur
    complement is ``U - Z[X]`` with ``Z_mn = Tr[rho X_m X_n]``.
    """
    d, n = pt.d, pt.dim
    W = check_weight(W, d)
    basis = hermitian_basis(n)
    nb = len(basis)
    p, vecs = eig_hermitian(pt.rho)
    on = p > default_cutoff(p)
    sq = np.sqrt(p[on])
    sup = vecs[:, on]
    r = int(on.sum())
    size = d + n * r

    pairs = [(a, b) for a in range(d) for b in range(a, d)]
    n_u = len(pairs)
    m = n_u + d * nb
    c = np.zeros(m)
    mats = np.zeros((m, 2 * size, 2 * size))
    for i, (a, b) in enumerate(pairs):
        h = np.zeros((size, size), complex)
        h[a, b] = h[b, a] = 1.0
        mats[i] = complex_to_real_embed(h)
        c[i] = W[a, a] if a == b else 2.0 * W[a, b]
    # v_k = concat_j sqrt(p_j) E_k |j>
    vk = [(e @ sup * sq).T.reshape(-1) for e in basis]
    for mu in range(d):
        for k in range(nb):
            h = np.zeros((size, size), complex)
            h[d:, mu] = vk[k]
            h[mu, d:] = vk[k].conj()
            mats[n_u + mu * nb + k] = complex_to_real_embed(h)
    a0 = np.zeros((size, size), complex)
    a0[d:, d:] = np.eye(n * r)

    # Tr[d_nu rho X_mu] = delta_{mu nu}
    E = np.zeros((d * d, m))
    f = np.zeros(d * d)
    tr = np.array([[np.trace(dr @ e).real for e in basis] for dr in pt.drho])  # (d, nb)
    for mu in range(d):
        for nu in range(d):
            E[mu * d + nu, n_u + mu * nb: n_u + (mu + 1) * nb] = tr[nu]
            f[mu * d + nu] = 1.0 if mu == nu else 0.0
    prob = sdp.SdpProblem(c, [sdp.Block(complex_to_real_embed(a0), mats)], E, f)
    return prob, basis, pairs


def holevo_bound(pt: ModelPoint, W):
    """Holevo Cramer-Rao bound and a certificate ``(X, U)`` attaining it.

    Raises
    ------
    SolverFailure
        If the SDP does not close its duality gap to the configured tolerance.
    SingularQfi
        If the SLD information matrix is singular.
    """
    info = qfi_matrices(pt, with_rld=False)
    check_invertible(info.Q)
    W = check_weight(W, pt.d)
    prob, basis, pairs = holevo_sdp(pt, W)
    sol = sdp.solve(prob)
    d = pt.d
    if sol.status is not sdp.Status.OPTIMAL and not (
        sol.status is sdp.Status.MAX_ITER and abs(sol.gap) <= get_tolerances().holevo_gap
    ):
        raise SolverFailure(f"Holevo SDP ended with status {sol.status.value}, gap {sol.gap:.3e}")

    U = np.zeros((d, d))
    for i, (a, b) in enumerate(pairs):
        U[a, b] = U[b, a] = sol.x[i]
    nb = len(basis)
    xs = sol.x[len(pairs):].reshape(d, nb)
    X = tuple(sum(xs[mu, k] * basis[k] for k in range(nb)) for mu in range(d))
    Zx = np.array([[np.trace(pt.rho @ X[a] @ X[b]) for b in range(d)] for a in range(d)])
    cons = max(abs(np.trace(pt.drho[nu] @ X[mu]).real - (mu == nu))
               for mu in range(d) for nu in range(d))
    diff = U - Zx
    psd = float(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))[0])
    cert = HolevoCertificate(X, U, float(sol.gap), float(cons), psd, sol)
    return float(sol.objective_value), cert


def holevo_objective(pt: ModelPoint, X, W) -> float:
    """``Tr[W Re Z] + ||sqrt(W) Im Z sqrt(W)||_1`` for a given collection ``X``."""
    d = len(X)
    Zx = np.array([[np.trace(pt.rho @ X[a] @ X[b]) for b in range(d)] for a in range(d)])
    sw = _sqrtm_pd(np.asarray(W, float))
    return float(np.trace(np.asarray(W, float) @ Zx.real) + trace_norm(sw @ Zx.imag @ sw))


def compute_bounds(pt: ModelPoint, W, holevo=True) -> BoundsReport:
    info = qfi_matrices(pt)
    W = check_weight(W, pt.d)
    cs = scalar_sld_bound(info.Q, W)
    cr = scalar_rld_bound(info.J, W) if info.has_rld else None
    chain = upper_bound_chain(info.Q, info.D, W)
    ch = gap = None
    if holevo:
        ch, cert = holevo_bound(pt, W)
        gap = cert.sdp_gap
    return BoundsReport(cs, cr, ch, gap, chain, incompatibility_R(info))


# -- most-informative search over qubit projective measurements ----------------

_PAULI = (
    np.array([[0, 1], [1, 0]], complex),
    np.array([[0, -1j], [1j, 0]], complex),
    np.array([[1, 0], [0, -1]], complex),
)


def bloch_projective(theta, phi) -> Povm:
    n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    ns = sum(c * s for c, s in zip(n, _PAULI))
    eye = np.eye(2)
    return Povm(((eye + ns) / 2, (eye - ns) / 2))


class MostInformativeResult(NamedTuple):
    value: float
    povm: Povm
    directions: np.ndarray   # (K, 2) Bloch angles
    weights: np.ndarray
    upper_bound_only: bool = True


def most_informative_search(pt: ModelPoint, W, n_starts=32, seed=0) -> MostInformativeResult:
    """Minimize ``Tr[W F^{-1}]`` over randomized projective qubit measurements.

    A single projective qubit measurement has rank-one Fisher information, so
    for ``d`` parameters the search runs over mixtures of ``d`` projective
    measurements (Bloch angles plus mixing weights). The result is an upper
    bound on the most-informative bound, never a certified optimum.
    """
    if pt.dim != 2:
        raise ValueError("most-informative search is restricted to qubits")
    d = pt.d
    W = check_weight(W, d)
    k = d

    def unpack(z):
        ang = z[: 2 * k].reshape(k, 2)
        logits = np.concatenate([[0.0], z[2 * k:]])
        wts = np.exp(logits - logits.max())
        return ang, wts / wts.sum()

    def fisher(z):
        ang, wts = unpack(z)
        return sum(w * classical_fi(pt, bloch_projective(*a)) for w, a in zip(wts, ang))

    def objective(z):
        F = fisher(z)
        ev = np.linalg.eigvalsh(F)
        if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
            return 1e300
        return float(np.trace(W @ np.linalg.inv(F)))

    rng = np.random.default_rng(seed)
    starts = []
    # seed with SLD eigenbases: optimal for one parameter
    info = qfi_matrices(pt, with_rld=False)
    sld_angles = []
    for ell in info.sld.operators:
        coef = np.array([np.trace(ell @ s).real for s in _PAULI])
        if np.linalg.norm(coef) > 0:
            coef = coef / np.linalg.norm(coef)
            sld_angles.append((np.arccos(np.clip(coef[2], -1, 1)), np.arctan2(coef[1], coef[0])))
    if len(sld_angles) == k:
        starts.append(np.concatenate([np.ravel(sld_angles), np.zeros(k - 1)]))
    while len(starts) < n_starts:
        starts.append(np.concatenate([
            np.ravel(np.column_stack([np.arccos(rng.uniform(-1, 1, k)), rng.uniform(-np.pi, np.pi, k)])),
            rng.normal(scale=0.5, size=k - 1),
        ]))

    best, best_z = np.inf, None
    for z0 in starts:
        res = minimize(objective, z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000 * k, "maxfev": 8000 * k})
        if res.fun < best:
            best, best_z = float(res.fun), res.x
    if best_z is None or best >= 1e299:
        raise SearchDegenerate("every sampled measurement has singular Fisher information")
    ang, wts = unpack(best_z)
    povm = Povm.mixture([bloch_projective(*a) for a in ang], wts)
    return MostInformativeResult(best, povm, ang, wts)
