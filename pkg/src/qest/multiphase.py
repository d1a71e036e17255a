"""Simultaneous estimation of d phases with an N-photon probe.

The probe is a superposition of "all N photons in mode i" for a reference
mode 0 and d signal modes. The model lives exactly in the (d+1)-dimensional
span of those states, so there is no truncation.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import SingularQfi
from .information import qfi_matrices
from .model import StatisticalModel, evaluate


@dataclasses.dataclass(frozen=True)
class MultiphaseProbe:
    d: int
    N: int
    beta2: float
    alpha2: float

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise ValueError("need d >= 1 phases and N >= 1 photons")
        if self.beta2 < 0 or self.alpha2 < 0:
            raise ValueError("probe weights must be nonnegative")
        if abs(self.beta2 + self.d * self.alpha2 - 1.0) > 1e-12:
            raise ValueError("probe is not normalized: beta^2 + d alpha^2 != 1")

    @property
    def amplitudes(self) -> np.ndarray:
        """Real amplitudes ``(beta, alpha, ..., alpha)`` at zero phase."""
        return np.concatenate([[np.sqrt(self.beta2)], np.full(self.d, np.sqrt(self.alpha2))])


def optimal_probe(d: int, N: int = 1) -> MultiphaseProbe:
    """Reference weight ``beta^2 = 1 / (1 + sqrt(d))``, the rest shared equally."""
    beta2 = 1.0 / (1.0 + np.sqrt(d))
    return MultiphaseProbe(d, N, beta2, (1.0 - beta2) / d)


def optimal_total_variance(d, N) -> float:
    return (1.0 + np.sqrt(d)) ** 2 * d / (4.0 * N ** 2)


def independent_total_variance(d, N) -> float:
    """Total variance when the N photons are split over d separate single-phase probes."""
    return d ** 3 / N ** 2


def build_multiphase_model(probe: MultiphaseProbe) -> StatisticalModel:
    amp = probe.amplitudes
    N = probe.N

    def ket(lam):
        return amp * np.exp(1j * N * np.concatenate([[0.0], lam]))

    def state(lam):
        v = ket(lam)
        return np.outer(v, v.conj())

    def make(mu):
        def deriv(lam):
            v = ket(lam)
            dv = np.zeros_like(v)
            dv[mu + 1] = 1j * N * v[mu + 1]
            out = np.outer(dv, v.conj())
            return out + out.conj().T
        return deriv

    return StatisticalModel(
        param_dim=probe.d,
        hilbert_dim=probe.d + 1,
        state_fn=state,
        derivatives=[make(mu) for mu in range(probe.d)],
        domain=[(-2 * np.pi, 2 * np.pi)] * probe.d,
        name=f"multiphase:d={probe.d},N={N}",
    )


def total_variance_bound(probe: MultiphaseProbe, lam=None) -> float:
    """``Tr[Q^{-1}]`` evaluated numerically on the built model."""
    if probe.alpha2 == 0 or probe.beta2 == 0:
        raise SingularQfi("degenerate probe: some mode carries no amplitude")
    model = build_multiphase_model(probe)
    lam = np.zeros(probe.d) if lam is None else lam
    Q = qfi_matrices(evaluate(model, lam), with_rld=False).Q
    w = np.linalg.eigvalsh(Q)
    if w[0] <= 1e-10 * w[-1]:
        raise SingularQfi("QFI matrix singular for this probe")
    return float(np.trace(np.linalg.inv(Q)))
