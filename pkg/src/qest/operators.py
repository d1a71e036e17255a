"""Dense Hermitian linear algebra shared by the rest of the package.

Every matrix function here goes through one Hermitian eigendecomposition;
dimensions stay small (tens), so robustness is preferred over speed.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import get_tolerances
from .errors import InconsistentRHS, InvalidState, NonHermitianInput


class EigDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns


def hermiticity_error(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a complex array, raising if it is not Hermitian within tolerance."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonHermitianInput(f"{name} must be square, got shape {a.shape}")
    scale = 1.0 + (np.max(np.abs(a)) if a.size else 0.0)
    if hermiticity_error(a) > get_tolerances().hermitian * scale:
        raise NonHermitianInput(f"{name} is not Hermitian (error {hermiticity_error(a):.3e})")
    return a


def hermitian_part(a) -> np.ndarray:
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def check_density_matrix(rho, name="rho") -> np.ndarray:
    rho = check_hermitian(rho, name)
    tol = get_tolerances()
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol.trace:
        raise InvalidState(f"{name} has trace {tr!r}")
    lo = np.linalg.eigvalsh(hermitian_part(rho))[0]
    if lo < -tol.psd:
        raise InvalidState(f"{name} has negative eigenvalue {lo:.3e}")
    return rho


def eig_hermitian(a) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises
    ------
    NonHermitianInput
        If ``a`` violates the Hermiticity tolerance.
    """
    a = check_hermitian(a)
    w, v = np.linalg.eigh(hermitian_part(a))
    return EigDecomposition(w, v)


def default_cutoff(p) -> float:
    return get_tolerances().cutoff_rel * max(float(np.max(p)), 0.0)


def _pair_solve(rho, b, cutoff, factor):
    p, u = eig_hermitian(rho)
    if cutoff is None:
        cutoff = default_cutoff(p)
    bt = u.conj().T @ np.asarray(b, dtype=complex) @ u
    denom = p[:, None] + p[None, :]
    keep = denom > cutoff
    bnorm = np.linalg.norm(bt)
    if np.linalg.norm(bt[~keep]) > get_tolerances().rhs_consistency * max(bnorm, 1e-300):
        raise InconsistentRHS(
            "right-hand side has weight on the kernel block of rho "
            f"({np.linalg.norm(bt[~keep]):.3e} vs {bnorm:.3e})"
        )
    xt = np.zeros_like(bt)
    xt[keep] = factor * bt[keep] / denom[keep]
    return u @ xt @ u.conj().T


def lyapunov_solve(rho, b, cutoff=None) -> np.ndarray:
    """Solve ``(X rho + rho X) / 2 = B`` for Hermitian ``X``.

    In the eigenbasis of ``rho`` the solution is ``X_ij = 2 B_ij / (p_i + p_j)``;
    entries with ``p_i + p_j <= cutoff`` are set to zero (the kernel block is a
    free gauge for rank-deficient states).

    Raises
    ------
    InconsistentRHS
        If ``B`` has non-negligible weight in the unsolvable block.
    """
    b = check_hermitian(b, "B")
    return hermitian_part(_pair_solve(rho, b, cutoff, 2.0))


def anticommutator_inverse_apply(rho, b, cutoff=None) -> np.ndarray:
    """Solve ``rho Y + Y rho = B`` for a general (not necessarily Hermitian) ``B``."""
    return _pair_solve(rho, b, cutoff, 1.0)


def trace_norm(a) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(a), compute_uv=False)))


def complex_to_real_embed(a) -> np.ndarray:
    """Map Hermitian ``a`` to the real symmetric ``[[Re a, -Im a], [Im a, Re a]]``."""
    a = np.asarray(a)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def psd_sqrt(a, cutoff=None) -> np.ndarray:
    """Square root of a positive semidefinite matrix; eigenvalues below ``cutoff`` are dropped."""
    p, u = eig_hermitian(a)
    if cutoff is None:
        cutoff = default_cutoff(p)
    s = np.where(p > cutoff, np.sqrt(np.clip(p, 0.0, None)), 0.0)
    return (u * s) @ u.conj().T


def inv_sqrt_pd(a) -> np.ndarray:
    p, u = eig_hermitian(a)
    return (u / np.sqrt(p)) @ u.conj().T


def support_projector(rho, cutoff=None):
    """Projectors onto the support and kernel of ``rho``."""
    p, u = eig_hermitian(rho)
    if cutoff is None:
        cutoff = default_cutoff(p)
    on = p > cutoff
    ps = u[:, on] @ u[:, on].conj().T
    return ps, np.eye(len(p)) - ps


def commutator(a, b):
    return a @ b - b @ a


def random_hermitian(n, rng, scale=1.0) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (g + g.conj().T)


def random_density_matrix(n, rng, rank=None) -> np.ndarray:
    """Ginibre-ensemble state of the given rank (full rank by default)."""
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
