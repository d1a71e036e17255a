"""Numerical classification of models: classical, quasi-classical, D-invariant,
asymptotically classical.

Every verdict is a conjunction over the supplied sample points and only holds
at those points. Checks are commutator proxies, each compared against
``tau`` times a natural scale.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from .config import get_tolerances
from .information import qfi_matrices
from .model import ModelPoint, StatisticalModel, evaluate
from .operators import anticommutator_inverse_apply, commutator, default_cutoff


@dataclasses.dataclass(frozen=True)
class ClassificationReport:
    """Four flags plus the worst residual behind each one.

    ``witnesses`` maps a check name to its worst normalized residual over the
    sample points (residual divided by its scale, so each verdict is
    ``witness <= tau``).

    For rank-deficient states the SLDs are only fixed on the support; the
    report records this in ``rank_deficient``. Rank-one states are judged
    quasi-classical through the pure-state criterion (a commuting SLD choice
    exists iff ``D = 0``); the zero-gauge SLD commutator is still reported as
    ``sld_commutator_zero_gauge``. ``partial_commutativity`` is informational
    only: SLD commutators vanish when compressed onto the support.
    """

    classical: bool
    quasi_classical: bool
    d_invariant: bool
    asymptotically_classical: bool
    witnesses: dict
    rank_deficient: bool = False
    partial_commutativity: bool = False
    n_points: int = 0
    tau: float = 1e-8
    scope: str = "at tested points"

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _rel(a, scale):
    return float(np.linalg.norm(a)) / max(float(scale), 1e-300)


def _interior(model: StatisticalModel, lam) -> bool:
    if model.domain is None:
        return True
    return all(
        (lo is None or x > lo) and (hi is None or x < hi)
        for x, (lo, hi) in zip(lam, model.domain)
    )


def _d_invariance_residual(pt: ModelPoint, slds) -> float:
    """Worst relative distance of ``D_rho(L_mu)`` from the real span of the SLDs."""
    basis = np.stack([np.concatenate([L.real.ravel(), L.imag.ravel()]) for L in slds], axis=1)
    scale = max(np.linalg.norm(L) for L in slds)
    worst = 0.0
    for L in slds:
        y = anticommutator_inverse_apply(pt.rho, -1j * commutator(pt.rho, L))
        y = 0.5 * (y + y.conj().T)
        v = np.concatenate([y.real.ravel(), y.imag.ravel()])
        coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
        res = np.linalg.norm(basis @ coef - v)
        # guard: Y = 0 (classical directions) must not be compared against a zero scale
        worst = max(worst, res / max(np.linalg.norm(v), 1e-12 * scale, 1e-300))
    return float(worst)


def _point_checks(pt: ModelPoint, others: Sequence[np.ndarray], common_frame: bool):
    info = qfi_matrices(pt, with_rld=False)
    L = info.sld.operators
    d = pt.d
    p = np.linalg.eigvalsh(pt.rho)
    support = p > default_cutoff(p)
    rank = int(np.sum(support))
    n = pt.dim

    w = {}
    c = 0.0
    for dr in pt.drho:
        c = max(c, _rel(commutator(pt.rho, dr), max(1.0, np.linalg.norm(dr))))
    if common_frame:
        for r in others:
            c = max(c, _rel(commutator(pt.rho, r), 1.0))
    else:
        # matrices at other points live in other bases: use derivative commutators instead
        for a in range(d):
            for b in range(a + 1, d):
                s = max(1.0, np.linalg.norm(pt.drho[a]) * np.linalg.norm(pt.drho[b]))
                c = max(c, _rel(commutator(pt.drho[a], pt.drho[b]), s))
    w["classical"] = c

    q = 0.0
    for a in range(d):
        for b in range(a + 1, d):
            s = max(1.0, np.linalg.norm(L[a]) * np.linalg.norm(L[b]))
            q = max(q, _rel(commutator(L[a], L[b]), s))
    w["sld_commutator_zero_gauge"] = q

    w["asymptotically_classical"] = _rel(info.D, np.linalg.norm(info.Q))
    w["quasi_classical"] = w["asymptotically_classical"] if rank == 1 else q

    _, u = np.linalg.eigh(pt.rho)
    P = u[:, np.argsort(p)[::-1][:rank]]
    pc = 0.0
    for a in range(d):
        for b in range(a + 1, d):
            s = max(1.0, np.linalg.norm(L[a]) * np.linalg.norm(L[b]))
            pc = max(pc, _rel(P.conj().T @ commutator(L[a], L[b]) @ P, s))
    w["partial_commutativity"] = pc

    w["d_invariant"] = _d_invariance_residual(pt, L)
    return w, rank < n


def classify(model: StatisticalModel, sample_points, tau: Optional[float] = None) -> ClassificationReport:
    """Classify ``model`` at ``sample_points`` (at least three, inside the domain).

    Raises
    ------
    ValueError
        Fewer than three sample points, or a point not strictly inside the domain.
    """
    tau = get_tolerances().classify if tau is None else float(tau)
    pts = [np.atleast_1d(np.asarray(l, dtype=float)) for l in sample_points]
    if len(pts) < 3:
        raise ValueError("classification needs at least 3 sample points")
    for lam in pts:
        if not _interior(model, lam):
            raise ValueError(f"sample point {lam.tolist()} is not in the domain interior")
    evaluated = [evaluate(model, lam) for lam in pts]
    rhos = [e.rho for e in evaluated]

    worst: dict = {}
    deficient = False
    for i, pt in enumerate(evaluated):
        others = rhos[i + 1:]
        w, dfc = _point_checks(pt, others, model.common_frame)
        deficient |= dfc
        for k, v in w.items():
            worst[k] = max(worst.get(k, 0.0), v)

    return ClassificationReport(
        classical=worst["classical"] <= tau,
        quasi_classical=worst["quasi_classical"] <= tau,
        d_invariant=worst["d_invariant"] <= tau,
        asymptotically_classical=worst["asymptotically_classical"] <= tau,
        witnesses=worst,
        rank_deficient=deficient,
        partial_commutativity=worst["partial_commutativity"] <= tau,
        n_points=len(pts),
        tau=tau,
    )


def containment_violations(r: ClassificationReport) -> list:
    """Names of the inclusion rules a report breaks (empty when consistent)."""
    bad = []
    if r.classical and not (r.quasi_classical and r.d_invariant and r.asymptotically_classical):
        bad.append("classical => quasi-classical, D-invariant, asymptotically classical")
    if r.quasi_classical and not r.asymptotically_classical:
        bad.append("quasi-classical => asymptotically classical")
    return bad
