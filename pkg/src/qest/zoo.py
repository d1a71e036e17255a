"""Named models, addressable by string id.

Ids: ``classical-qubit``, ``qubit-tomography``, ``multiphase:d=_,N=_``,
``two-source:sigma=_``, ``n-source:sigma=_,n=_``, ``two-source-imbalance:w=_``.
"""

from __future__ import annotations

import re
from typing import NamedTuple

import numpy as np

from .imaging import GaussianPsf, Parametrization, scene_statistical_model
from .model import ModelPoint, StatisticalModel
from .multiphase import build_multiphase_model, optimal_probe
from .operators import random_density_matrix, random_hermitian

PAULI = (
    np.array([[0, 1], [1, 0]], complex),
    np.array([[0, -1j], [1j, 0]], complex),
    np.array([[1, 0], [0, -1]], complex),
)


class ZooEntry(NamedTuple):
    model: StatisticalModel
    default_lambda: np.ndarray


def classical_qubit() -> StatisticalModel:
    """``rho = diag(lambda, 1 - lambda)``."""
    return StatisticalModel(
        param_dim=1,
        hilbert_dim=2,
        state_fn=lambda lam: np.diag([lam[0], 1.0 - lam[0]]).astype(complex),
        derivatives=[lambda lam: np.diag([1.0, -1.0]).astype(complex)],
        domain=[(0.0, 1.0)],
        name="classical-qubit",
    )


def qubit_tomography() -> StatisticalModel:
    """``rho = (I + r . sigma) / 2`` with the Bloch vector as parameters."""
    def state(r):
        return 0.5 * (np.eye(2) + sum(x * s for x, s in zip(r, PAULI)))

    return StatisticalModel(
        param_dim=3,
        hilbert_dim=2,
        state_fn=state,
        derivatives=[lambda r, s=s: 0.5 * s for s in PAULI],
        domain=[(-1.0, 1.0)] * 3,
        name="qubit-tomography",
    )


def affine_model(rho0, directions, name="affine") -> StatisticalModel:
    """``rho(lambda) = rho0 + sum_mu lambda_mu H_mu`` for traceless Hermitian ``H_mu``.

    Valid (positive) in a neighbourhood of ``lambda = 0`` when ``rho0`` is full rank.
    """
    rho0 = np.asarray(rho0, complex)
    hs = [np.asarray(h, complex) for h in directions]
    return StatisticalModel(
        param_dim=len(hs),
        hilbert_dim=rho0.shape[0],
        state_fn=lambda lam: rho0 + sum(x * h for x, h in zip(lam, hs)),
        derivatives=[lambda lam, h=h: h for h in hs],
        name=name,
    )


def random_point(dim, d, rng, rank=None, scale=1.0) -> ModelPoint:
    """Random state with ``d`` random traceless Hermitian derivatives."""
    rho = random_density_matrix(dim, rng, rank)
    drho = []
    for _ in range(d):
        h = random_hermitian(dim, rng, scale)
        drho.append(h - np.trace(h) / dim * np.eye(dim))
    return ModelPoint(np.zeros(d), rho, tuple(drho))


_PATTERNS = {
    "multiphase": re.compile(r"^multiphase:d=(\d+),N=(\d+)$"),
    "two-source": re.compile(r"^two-source:sigma=([0-9.eE+-]+)$"),
    "n-source": re.compile(r"^n-source:sigma=([0-9.eE+-]+),n=(\d+)$"),
    "two-source-imbalance": re.compile(r"^two-source-imbalance:w=([0-9.eE+-]+)$"),
}


def model_ids() -> list:
    return ["classical-qubit", "qubit-tomography", "multiphase:d=_,N=_",
            "two-source:sigma=_", "n-source:sigma=_,n=_", "two-source-imbalance:w=_"]


def get_model(model_id: str) -> ZooEntry:
    """Build the model named by ``model_id``.

    Raises
    ------
    KeyError
        Unknown id or malformed parameters.
    """
    if model_id == "classical-qubit":
        return ZooEntry(classical_qubit(), np.array([0.3]))
    if model_id == "qubit-tomography":
        return ZooEntry(qubit_tomography(), np.array([0.2, -0.1, 0.3]))
    m = _PATTERNS["multiphase"].match(model_id)
    if m:
        d, n = int(m.group(1)), int(m.group(2))
        if d < 1 or n < 1:
            raise KeyError(model_id)
        return ZooEntry(build_multiphase_model(optimal_probe(d, n)), np.zeros(d))
    m = _PATTERNS["two-source"].match(model_id)
    if m:
        sig = _positive(m.group(1), model_id)
        model = scene_statistical_model(GaussianPsf(sig), Parametrization.CENTROID_SEPARATION, 2, name=model_id)
        return ZooEntry(model, np.array([0.0, sig]))
    m = _PATTERNS["n-source"].match(model_id)
    if m:
        sig, n = _positive(m.group(1), model_id), int(m.group(2))
        if n < 2:
            raise KeyError(model_id)
        model = scene_statistical_model(GaussianPsf(sig), Parametrization.SEPARATIONS, n, name=model_id)
        return ZooEntry(model, np.concatenate([[0.0], np.full(n - 1, sig)]))
    m = _PATTERNS["two-source-imbalance"].match(model_id)
    if m:
        w = float(m.group(1))
        if not 0.0 < w < 1.0:
            raise KeyError(model_id)
        model = scene_statistical_model(GaussianPsf(1.0), Parametrization.CENTROID_SEPARATION_IMBALANCE, 2, name=model_id)
        return ZooEntry(model, np.array([0.0, 1.0, w]))
    raise KeyError(model_id)


def _positive(text, model_id):
    try:
        v = float(text)
    except ValueError:
        raise KeyError(model_id) from None
    if not v > 0:
        raise KeyError(model_id)
    return v
