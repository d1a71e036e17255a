"""Parametric families of density matrices and their derivatives at a point."""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional, Sequence

import numpy as np

from .config import get_tolerances
from .errors import DerivativeError, DomainError, InvalidState, SingularJacobian
from .operators import check_density_matrix, check_hermitian, hermitian_part


@dataclasses.dataclass(frozen=True)
class StatisticalModel:
    """A family ``lambda -> rho(lambda)`` of ``hilbert_dim``-dimensional states.

    ``derivatives`` holds one callback per parameter returning ``d rho / d lambda_mu``.
    When it is ``None`` the derivatives are taken by central finite differences
    with one Richardson level.

    ``domain`` is a list of closed intervals, one per parameter (``None`` means
    unbounded). ``common_frame`` says whether the matrices at different
    parameter values are expressed in one fixed basis; models assembled in a
    point-dependent basis (the imaging scenes) set it to ``False``.
    """

    param_dim: int
    hilbert_dim: int
    state_fn: Callable[[np.ndarray], np.ndarray]
    derivatives: Optional[Sequence[Callable[[np.ndarray], np.ndarray]]] = None
    domain: Optional[Sequence[tuple]] = None
    fd_step: Optional[float] = None
    name: str = ""
    common_frame: bool = True

    def __post_init__(self):
        if self.param_dim < 1 or self.hilbert_dim < 1:
            raise ValueError("param_dim and hilbert_dim must be positive")
        if self.derivatives is not None and len(self.derivatives) != self.param_dim:
            raise ValueError("need one derivative callback per parameter")
        if self.domain is not None and len(self.domain) != self.param_dim:
            raise ValueError("need one domain interval per parameter")

    @property
    def analytic(self) -> bool:
        return self.derivatives is not None

    def in_domain(self, lam) -> bool:
        if self.domain is None:
            return True
        return all(lo - 1e-15 <= x <= hi + 1e-15 for x, (lo, hi) in zip(lam, self.domain))


@dataclasses.dataclass(frozen=True)
class ModelPoint:
    lam: np.ndarray
    rho: np.ndarray
    drho: tuple

    def __post_init__(self):
        tr_tol = get_tolerances().derivative_trace
        for mu, dr in enumerate(self.drho):
            check_hermitian(dr, f"drho[{mu}]")
            t = abs(np.trace(dr))
            if t > tr_tol * max(1.0, np.linalg.norm(dr)):
                raise DerivativeError(f"drho[{mu}] has trace {t:.3e}")

    @property
    def d(self) -> int:
        return len(self.drho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def _as_lambda(model, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (model.param_dim,):
        raise DomainError(f"expected {model.param_dim} parameters, got {lam.shape}")
    if not model.in_domain(lam):
        raise DomainError(f"lambda={lam.tolist()} outside domain {list(model.domain)}")
    return lam


def _state(model, lam, what):
    try:
        return check_density_matrix(model.state_fn(lam), what)
    except InvalidState as exc:
        raise DerivativeError(f"finite-difference state invalid: {exc}") from exc


def finite_difference(model, lam, mu, h0=None):
    """Central difference with one Richardson level, ``(4 D(h/2) - D(h)) / 3``."""
    if h0 is None:
        h0 = model.fd_step or get_tolerances().fd_step
    h = h0 * (1.0 + abs(lam[mu]))
    e = np.zeros_like(lam)
    e[mu] = 1.0

    def central(step):
        plus = _state(model, lam + step * e, "rho(lambda + h)")
        minus = _state(model, lam - step * e, "rho(lambda - h)")
        return (plus - minus) / (2.0 * step)

    return hermitian_part((4.0 * central(h / 2) - central(h)) / 3.0)


def evaluate(model: StatisticalModel, lam) -> ModelPoint:
    """State and all parameter derivatives of ``model`` at ``lam``.

    Raises
    ------
    DomainError
        ``lam`` lies outside the declared domain.
    DerivativeError
        Finite-difference probes produce invalid states.
    """
    lam = _as_lambda(model, lam)
    rho = check_density_matrix(model.state_fn(lam))
    if model.analytic:
        drho = tuple(np.asarray(f(lam), dtype=complex) for f in model.derivatives)
    else:
        drho = tuple(finite_difference(model, lam, mu) for mu in range(model.param_dim))
    return ModelPoint(lam, rho, drho)


def reparametrize_model(model: StatisticalModel, to_old, jacobian, domain=None, name=None):
    """Express ``model`` in new parameters ``lam_bar`` with ``lam = to_old(lam_bar)``.

    ``jacobian(lam_bar)`` returns ``d lam_nu / d lam_bar_mu`` as a matrix with
    rows indexed by ``nu``; its transpose ``B`` combines the old derivatives as
    ``dbar_mu = sum_nu B[mu, nu] d_nu``, so information matrices transform as
    ``B Q B^T``.
    """

    def b_matrix(lam_bar):
        b = np.asarray(jacobian(np.asarray(lam_bar, dtype=float)), dtype=float).T
        if abs(np.linalg.det(b)) < get_tolerances().jacobian_det:
            raise SingularJacobian(f"reparametrization singular at {np.asarray(lam_bar).tolist()}")
        return b

    def state_fn(lam_bar):
        return model.state_fn(np.asarray(to_old(lam_bar), dtype=float))

    derivatives = None
    if model.analytic:
        def make(mu):
            def deriv(lam_bar):
                b = b_matrix(lam_bar)
                lam = np.asarray(to_old(lam_bar), dtype=float)
                return sum(b[mu, nu] * model.derivatives[nu](lam) for nu in range(model.param_dim))
            return deriv
        derivatives = [make(mu) for mu in range(model.param_dim)]

    return dataclasses.replace(
        model,
        state_fn=state_fn,
        derivatives=derivatives,
        domain=domain,
        name=name or f"{model.name}~reparam",
    )


def reparametrized_point(pt: ModelPoint, b, lam_bar=None) -> ModelPoint:
    """Apply the derivative transformation ``B`` directly to an evaluated point."""
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.det(b)) < get_tolerances().jacobian_det:
        raise SingularJacobian("reparametrization matrix is singular")
    drho = tuple(sum(b[mu, nu] * pt.drho[nu] for nu in range(pt.d)) for mu in range(b.shape[0]))
    return ModelPoint(pt.lam if lam_bar is None else np.asarray(lam_bar, float), pt.rho, drho)
