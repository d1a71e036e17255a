"""Logarithmic derivatives and the information matrices built from them."""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from .config import get_tolerances
from .errors import RldUndefined, SingularOutcome, SingularQfi
from .model import ModelPoint
from .operators import (
    check_hermitian,
    default_cutoff,
    eig_hermitian,
    inv_sqrt_pd,
    lyapunov_solve,
)


@dataclasses.dataclass(frozen=True)
class SldSet:
    operators: tuple
    residuals: tuple


@dataclasses.dataclass(frozen=True)
class RldSet:
    operators: tuple
    residuals: tuple


@dataclasses.dataclass(frozen=True)
class InfoMatrices:
    """SLD information ``Q``, RLD information ``J`` (``None`` when the RLDs do
    not exist) and the mean Uhlmann curvature ``D``."""

    Q: np.ndarray
    J: Optional[np.ndarray]
    D: np.ndarray
    sld: SldSet
    rld: Optional[RldSet] = None

    @property
    def has_rld(self) -> bool:
        return self.J is not None


@dataclasses.dataclass(frozen=True)
class Povm:
    elements: tuple

    def __post_init__(self):
        tol = get_tolerances()
        elems = tuple(check_hermitian(e, "POVM element") for e in self.elements)
        object.__setattr__(self, "elements", elems)
        if not elems:
            raise ValueError("POVM needs at least one element")
        for e in elems:
            if np.linalg.eigvalsh(0.5 * (e + e.conj().T))[0] < -tol.psd:
                raise ValueError("POVM element is not positive semidefinite")
        total = sum(elems)
        if np.linalg.norm(total - np.eye(total.shape[0])) > tol.povm_completeness:
            raise ValueError("POVM elements do not sum to the identity")

    def __len__(self):
        return len(self.elements)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.elements)

    @classmethod
    def from_basis(cls, u):
        """Projective measurement on the columns of unitary ``u``."""
        u = np.asarray(u, dtype=complex)
        return cls(tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(u.shape[1])))

    @classmethod
    def mixture(cls, povms: Sequence["Povm"], weights):
        """Randomized POVM: pick ``povms[k]`` with probability ``weights[k]``."""
        return cls(tuple(w * e for p, w in zip(povms, weights) for e in p.elements))


def born_probabilities(rho, povm: Povm) -> np.ndarray:
    # Tr[rho P] = sum_ij rho_ij P_ji
    return np.einsum("ij,kji->k", rho, povm.stacked).real


def compute_sld(pt: ModelPoint) -> SldSet:
    ops, res = [], []
    for dr in pt.drho:
        ell = lyapunov_solve(pt.rho, dr)
        ops.append(ell)
        res.append(float(np.linalg.norm(0.5 * (ell @ pt.rho + pt.rho @ ell) - dr)))
    return SldSet(tuple(ops), tuple(res))


def compute_rld(pt: ModelPoint) -> RldSet:
    """RLD operators ``L = rho^+ d rho`` (pseudoinverse on the support).

    Raises
    ------
    RldUndefined
        If some derivative has weight outside the support of ``rho``, as for
        every nontrivial pure-state model.
    """
    p, u = eig_hermitian(pt.rho)
    on = p > default_cutoff(p)
    tol = get_tolerances().rhs_consistency
    pinv = (u[:, on] / p[on]) @ u[:, on].conj().T
    ker = u[:, ~on]
    ops, res = [], []
    for mu, dr in enumerate(pt.drho):
        leak = np.linalg.norm(ker.conj().T @ dr) if ker.size else 0.0
        if leak > tol * max(np.linalg.norm(dr), 1e-300):
            raise RldUndefined(f"d rho[{mu}] leaves the support of rho (weight {leak:.3e})")
        ell = pinv @ dr
        ops.append(ell)
        res.append(float(np.linalg.norm(pt.rho @ ell - dr)))
    return RldSet(tuple(ops), tuple(res))


def qfi_matrices(pt: ModelPoint, with_rld=True) -> InfoMatrices:
    sld = compute_sld(pt)
    d = pt.d
    t = np.empty((d, d), dtype=complex)
    for m in range(d):
        rl = pt.rho @ sld.operators[m]
        for n in range(d):
            t[m, n] = np.trace(rl @ sld.operators[n])
    # Tr[rho L_m L_n] = Q + iD with Q symmetric and D antisymmetric
    Q = 0.5 * (t.real + t.real.T)
    D = 0.5 * (t.imag - t.imag.T)

    J, rld = None, None
    if with_rld:
        try:
            rld = compute_rld(pt)
        except RldUndefined:
            rld = None
        if rld is not None:
            J = np.empty((d, d), dtype=complex)
            for m in range(d):
                for n in range(d):
                    J[m, n] = np.trace(pt.rho @ rld.operators[n] @ rld.operators[m].conj().T)
            J = 0.5 * (J + J.conj().T)
    return InfoMatrices(Q, J, D, sld, rld)


def check_invertible(q, what="Q"):
    w = np.linalg.eigvalsh(q)
    if w[-1] <= 0 or w[0] <= get_tolerances().qfi_condition * w[-1]:
        raise SingularQfi(f"{what} is singular (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})")
    return w


def incompatibility_R(info: InfoMatrices) -> float:
    """Largest eigenvalue of ``i Q^{-1} D``, via the similar Hermitian matrix
    ``i Q^{-1/2} D Q^{-1/2}``. Clamped into [0, 1] when within 1e-10 of it."""
    check_invertible(info.Q)
    s = inv_sqrt_pd(info.Q)
    h = 1j * (s @ info.D @ s)
    r = float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[-1])
    if -1e-10 <= r < 0.0:
        return 0.0
    if 1.0 < r <= 1.0 + 1e-10:
        return 1.0
    return r


def classical_fi(pt: ModelPoint, povm: Povm) -> np.ndarray:
    """Fisher information of the outcome distribution ``p_k = Tr[rho Pi_k]``.

    Outcomes with ``p_k`` below the probability floor are skipped; if such an
    outcome still has a sizeable derivative the point is non-regular and
    :class:`SingularOutcome` is raised.
    """
    tol = get_tolerances()
    p = born_probabilities(pt.rho, povm)
    dp = np.stack([born_probabilities(dr, povm) for dr in pt.drho])  # (d, K)
    live = p > tol.prob_floor
    if np.any(np.abs(dp[:, ~live]) > tol.singular_outcome):
        raise SingularOutcome("outcome with vanishing probability has nonzero derivative")
    g = dp[:, live]
    f = (g / p[live]) @ g.T
    return 0.5 * (f + f.T)


def upsilon(F, Q) -> float:
    """``Tr[F Q^{-1}]``: how much of the quantum information a measurement captures."""
    Q = np.asarray(Q, dtype=float)
    check_invertible(Q)
    return float(np.trace(np.linalg.solve(Q, np.asarray(F, dtype=float))))
