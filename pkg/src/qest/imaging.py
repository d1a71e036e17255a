"""Incoherent point sources imaged through a 1D Gaussian point spread function.

Single-photon states are mixtures ``rho = sum_s w_s |psi_s><psi_s|`` of shifted
PSF amplitudes. Position derivatives only bring in ``psi'_s``, so ``rho`` and
every ``d rho`` live exactly in span{psi_s, psi'_s}; the model is built by
orthonormalizing that span through its Gram matrix.
"""

from __future__ import annotations

import dataclasses
import enum
from math import factorial
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import gammaln

from .config import get_tolerances
from .errors import DegenerateScene, GridUnconverged, TailTooLarge
from .information import qfi_matrices
from .model import ModelPoint, StatisticalModel


@dataclasses.dataclass(frozen=True)
class GaussianPsf:
    """Amplitude ``(2 pi sigma^2)^{-1/4} exp(-x^2 / (4 sigma^2))``; intensity has std ``sigma``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def amplitude(self, x):
        s = self.sigma
        return (2 * np.pi * s * s) ** -0.25 * np.exp(-np.asarray(x) ** 2 / (4 * s * s))

    def amplitude_prime(self, x):
        x = np.asarray(x)
        return -x / (2 * self.sigma ** 2) * self.amplitude(x)

    def intensity(self, x):
        return self.amplitude(x) ** 2


class Parametrization(str, enum.Enum):
    CENTROID_SEPARATION = "centroid-separation"
    SEPARATIONS = "separations"
    POSITIONS = "positions"
    CENTROID_SEPARATION_IMBALANCE = "centroid-separation-imbalance"


@dataclasses.dataclass(frozen=True)
class SourceScene:
    """Source positions (strictly increasing), intensity weights and the parameter choice.

    Parameter vectors by parametrization:

    * centroid-separation: ``(c, s)`` with ``X = c -/+ s/2`` (two sources)
    * separations: ``(c, s_1, ..., s_{N-1})``, ``s_mu = X_{mu+1} - X_mu``, ``c`` the mean position
    * positions: ``(X_1, ..., X_N)``
    * centroid-separation-imbalance: ``(c, s, w_1)`` with ``w_2 = 1 - w_1``
    """

    positions: tuple
    weights: tuple
    parametrization: Parametrization = Parametrization.POSITIONS

    def __post_init__(self):
        pos = tuple(float(x) for x in self.positions)
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "parametrization", Parametrization(self.parametrization))
        if len(pos) != len(w) or not pos:
            raise ValueError("need one weight per source")
        if abs(sum(w) - 1.0) > 1e-12 or min(w) < 0:
            raise ValueError("weights must be nonnegative and sum to one")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise DegenerateScene("source positions must be strictly increasing")
        two = (Parametrization.CENTROID_SEPARATION, Parametrization.CENTROID_SEPARATION_IMBALANCE)
        if self.parametrization in two and len(pos) != 2:
            raise ValueError(f"{self.parametrization.value} needs exactly two sources")

    @property
    def n_sources(self):
        return len(self.positions)

    @property
    def param_dim(self):
        kind = self.parametrization
        if kind is Parametrization.CENTROID_SEPARATION:
            return 2
        if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
            return 3
        return self.n_sources

    def parameters(self) -> np.ndarray:
        x = np.array(self.positions)
        kind = self.parametrization
        if kind is Parametrization.POSITIONS:
            return x
        if kind is Parametrization.SEPARATIONS:
            return np.concatenate([[x.mean()], np.diff(x)])
        lam = [0.5 * (x[0] + x[1]), x[1] - x[0]]
        if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
            lam.append(self.weights[0])
        return np.array(lam)

    def jacobians(self):
        """``dX_s / d lambda_mu`` and ``dw_s / d lambda_mu`` as (N, d) arrays."""
        n, d = self.n_sources, self.param_dim
        jx = np.zeros((n, d))
        jw = np.zeros((n, d))
        kind = self.parametrization
        if kind is Parametrization.POSITIONS:
            jx[:] = np.eye(n)
        elif kind is Parametrization.SEPARATIONS:
            jx[:, 0] = 1.0
            # X_s = c + sum_{mu<s} s_mu - mean over sources of the same partial sums
            for mu in range(n - 1):
                jx[mu + 1:, mu + 1] += 1.0
                jx[:, mu + 1] -= (n - 1 - mu) / n
        else:
            jx[:, 0] = 1.0
            jx[:, 1] = (-0.5, 0.5)
            if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
                jw[:, 2] = (1.0, -1.0)
        return jx, jw


def scene_from_parameters(lam, parametrization, weights=None, n_sources=None) -> SourceScene:
    lam = np.asarray(lam, dtype=float)
    kind = Parametrization(parametrization)
    if kind is Parametrization.POSITIONS:
        pos = lam
    elif kind is Parametrization.SEPARATIONS:
        offs = np.concatenate([[0.0], np.cumsum(lam[1:])])
        pos = lam[0] + offs - offs.mean()
    else:
        pos = lam[0] + np.array([-0.5, 0.5]) * lam[1]
    n = len(pos)
    if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
        weights = (lam[2], 1.0 - lam[2])
    elif weights is None:
        weights = (1.0 / n,) * n
    return SourceScene(tuple(pos), tuple(weights), kind)


class Overlaps(NamedTuple):
    psi_psi: float      # <psi_a | psi_b>
    psi_dpsi: float     # <psi_a | psi_b'>
    dpsi_dpsi: float    # <psi_a' | psi_b'>


def gaussian_overlaps(psf: GaussianPsf, xa, xb) -> Overlaps:
    """Closed-form overlaps of shifted PSF amplitudes and their x-derivatives."""
    s2 = psf.sigma ** 2
    delta = xa - xb
    g = np.exp(-delta ** 2 / (8 * s2))
    return Overlaps(g, -delta * g / (4 * s2), g * (1 / (4 * s2) - delta ** 2 / (16 * s2 * s2)))


@dataclasses.dataclass(frozen=True)
class SceneModel:
    """A scene expressed in an orthonormal basis of span{psi_s, psi'_s}."""

    psf: GaussianPsf
    scene: SourceScene
    gram: np.ndarray
    transform: np.ndarray   # rows: orthonormal basis, columns: coordinates of psi_1..psi_N, psi'_1..psi'_N
    point: ModelPoint
    truncation_residual: float = 0.0

    @property
    def basis_dim(self) -> int:
        return self.transform.shape[0]

    @property
    def rho(self):
        return self.point.rho

    @property
    def drho(self):
        return self.point.drho


def _gram(psf, pos):
    n = len(pos)
    G = np.empty((2 * n, 2 * n))
    for a in range(n):
        for b in range(n):
            o = gaussian_overlaps(psf, pos[a], pos[b])
            G[a, b] = o.psi_psi
            G[a, n + b] = o.psi_dpsi
            G[n + b, a] = o.psi_dpsi
            G[n + a, n + b] = o.dpsi_dpsi
    return 0.5 * (G + G.T)


def build_scene_model(psf: GaussianPsf, scene: SourceScene) -> SceneModel:
    """Finite-dimensional state and derivatives for ``scene``.

    Raises
    ------
    DegenerateScene
        Two sources closer than ``1e-12 sigma``.
    """
    pos = np.array(scene.positions)
    w = np.array(scene.weights)
    n = len(pos)
    if n > 1 and np.min(np.diff(pos)) < 1e-12 * psf.sigma:
        raise DegenerateScene("two sources coincide")
    G = _gram(psf, pos)
    g, u = np.linalg.eigh(G)
    keep = g > get_tolerances().gram_drop * g[-1]
    T = np.sqrt(g[keep])[:, None] * u[:, keep].T

    def to_basis(C):
        return T @ C @ T.T

    C = np.zeros((2 * n, 2 * n))
    C[np.arange(n), np.arange(n)] = w
    rho = to_basis(C)
    rho = 0.5 * (rho + rho.T)
    rho = rho / np.trace(rho)

    jx, jw = scene.jacobians()
    # d rho / d X_s = -w_s (|psi'_s><psi_s| + |psi_s><psi'_s|);  d rho / d w_s = |psi_s><psi_s|
    drho = []
    for mu in range(scene.param_dim):
        C = np.zeros((2 * n, 2 * n))
        for s in range(n):
            C[n + s, s] -= w[s] * jx[s, mu]
            C[s, n + s] -= w[s] * jx[s, mu]
            C[s, s] += jw[s, mu]
        dr = to_basis(C)
        drho.append(0.5 * (dr + dr.T))
    drho, resid = _strip_kernel_block(rho, drho)
    pt = ModelPoint(scene.parameters(), rho.astype(complex), tuple(d.astype(complex) for d in drho))
    return SceneModel(psf, scene, G, T, pt, resid)


def _strip_kernel_block(rho, drho):
    """Remove the part of each derivative living where ``p_i + p_j`` is below the
    SLD cutoff. In exact arithmetic that block vanishes; at tiny separations
    ``rho`` has genuine eigenvalues under the cutoff and rounding leaves a
    residue there. The largest removed norm (relative) is reported."""
    p, u = np.linalg.eigh(rho)
    cut = (p[:, None] + p[None, :]) <= get_tolerances().cutoff_rel * p[-1]
    out, worst = [], 0.0
    for dr in drho:
        bt = u.T @ dr @ u
        worst = max(worst, float(np.linalg.norm(bt[cut]) / max(np.linalg.norm(dr), 1e-300)))
        bt[cut] = 0.0
        out.append(u @ bt @ u.T)
    return out, worst


def scene_statistical_model(psf: GaussianPsf, parametrization, n_sources=2, weights=None, name="") -> StatisticalModel:
    """Wrap :func:`build_scene_model` as a :class:`StatisticalModel`.

    The orthonormal basis depends on the parameter point, so matrices at
    different points are not in a common frame and derivatives must come from
    the analytic construction (no finite differences).
    """
    kind = Parametrization(parametrization)
    cache = {}

    def build(lam):
        key = tuple(np.asarray(lam, float))
        hit = cache.get(key)
        if hit is None:
            hit = build_scene_model(psf, scene_from_parameters(lam, kind, weights))
            cache.clear()
            cache[key] = hit
        return hit

    scene0 = scene_from_parameters(
        _default_lambda(kind, n_sources, psf.sigma), kind, weights)
    d = scene0.param_dim
    dim = build(scene0.parameters()).basis_dim

    def deriv(mu):
        return lambda lam: build(lam).drho[mu]

    domain = [(-np.inf, np.inf)] + [(1e-12 * psf.sigma, np.inf)] * (d - 1)
    if kind is Parametrization.POSITIONS:
        domain = [(-np.inf, np.inf)] * d
    if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
        domain[2] = (0.0, 1.0)
    return StatisticalModel(d, dim, lambda lam: build(lam).rho, [deriv(mu) for mu in range(d)],
                            domain=domain, name=name or f"scene:{kind.value}", common_frame=False)


def _default_lambda(kind, n, sigma):
    if kind is Parametrization.POSITIONS:
        return sigma * (np.arange(n) - (n - 1) / 2)
    if kind is Parametrization.SEPARATIONS:
        return np.concatenate([[0.0], np.full(n - 1, sigma)])
    if kind is Parametrization.CENTROID_SEPARATION_IMBALANCE:
        return np.array([0.0, sigma, 0.5])
    return np.array([0.0, sigma])


def scene_qfi(psf: GaussianPsf, scene: SourceScene) -> np.ndarray:
    return qfi_matrices(build_scene_model(psf, scene).point, with_rld=False).Q


# -- direct imaging -------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Grid:
    halfwidth_in_sigma: float = 10.0
    points: int = 2001


def _direct_fi_on_grid(psf, scene, halfwidth, points):
    pos = np.array(scene.positions)
    w = np.array(scene.weights)
    s = psf.sigma
    lo, hi = pos.min() - halfwidth * s, pos.max() + halfwidth * s
    x = np.linspace(lo, hi, points)
    dens = psf.intensity(x[None, :] - pos[:, None])            # (N, P)
    p = w @ dens
    ddx = dens * (x[None, :] - pos[:, None]) / s ** 2           # d dens / d X_s
    jx, jw = scene.jacobians()
    dp = (jx.T * w) @ ddx + jw.T @ dens                         # (d, P)
    integrand = dp[:, None, :] * dp[None, :, :] / np.maximum(p, 1e-300)
    return simpson(integrand, x=x, axis=-1)


def direct_imaging_fi(psf: GaussianPsf, scene: SourceScene, grid: Optional[Grid] = None) -> np.ndarray:
    """Per-photon Fisher information of a position-resolving intensity measurement.

    The integral over the image plane uses composite Simpson on a grid that is
    doubled until every entry changes by less than 1e-8 relative.

    Raises
    ------
    GridUnconverged
        After six refinements without convergence.
    """
    grid = grid or Grid()
    if grid.points < 1001 or grid.points % 2 == 0 or grid.halfwidth_in_sigma < 8:
        raise ValueError("grid needs an odd number of points >= 1001 and halfwidth >= 8 sigma")
    pts = grid.points
    F = _direct_fi_on_grid(psf, scene, grid.halfwidth_in_sigma, pts)
    for _ in range(6):
        pts = 2 * (pts - 1) + 1
        F_new = _direct_fi_on_grid(psf, scene, grid.halfwidth_in_sigma, pts)
        scale = np.maximum(np.abs(F_new), 1e-300)
        if np.all(np.abs(F_new - F) <= 1e-8 * np.maximum(scale, np.max(np.abs(F_new)) * 1e-8)):
            return 0.5 * (F_new + F_new.T)
        F = F_new
    raise GridUnconverged("direct-imaging Fisher information did not converge")


# -- Hermite-Gauss mode sorting -------------------------------------------------

def hg_amplitudes(psf: GaussianPsf, offset, q_max):
    """``<phi_q | psi(. - offset)>`` for q = 0..q_max and their offset derivatives.

    With matched mode width the overlaps are ``exp(-D^2/(8 s^2)) (D/(2 s))^q / sqrt(q!)``.
    """
    s = psf.sigma
    q = np.arange(q_max + 1)
    env = np.exp(-offset ** 2 / (8 * s * s))
    inv_sqrt_fact = np.exp(-0.5 * gammaln(q + 1))
    t = offset / (2 * s)
    a = env * t ** q * inv_sqrt_fact
    # d/dD [env t^q] = env (q t^{q-1} / (2 s) - D t^q / (4 s^2))
    tq1 = np.where(q > 0, t ** np.maximum(q - 1, 0), 0.0)
    da = env * inv_sqrt_fact * (q * tq1 / (2 * s) - offset * t ** q / (4 * s * s))
    return a, da


class HgResult(NamedTuple):
    probabilities: np.ndarray   # p_0 .. p_qmax
    tail: float
    fisher: np.ndarray          # over the scene parameters
    F_separation: float


def hg_mode_distribution(psf: GaussianPsf, scene: SourceScene, axis=0.0, q_max=40):
    """Outcome probabilities of HG sorting about ``axis`` and their parameter derivatives.

    Returns ``(p, dp)`` with ``p`` of length ``q_max + 2`` (the last entry lumps
    every mode above ``q_max``) and ``dp`` of shape ``(d, q_max + 2)``.
    """
    pos = np.array(scene.positions)
    w = np.array(scene.weights)
    jx, jw = scene.jacobians()
    p = np.zeros(q_max + 1)
    dp = np.zeros((scene.param_dim, q_max + 1))
    for s_idx, x in enumerate(pos):
        a, da = hg_amplitudes(psf, x - axis, q_max)
        p += w[s_idx] * a * a
        dp += np.outer(jx[s_idx] * w[s_idx], 2 * a * da) + np.outer(jw[s_idx], a * a)
    tail = max(0.0, 1.0 - p.sum())
    return np.append(p, tail), np.column_stack([dp, -dp.sum(axis=1)])


def _fisher(p, dp, floor):
    live = p > floor
    g = dp[:, live]
    return (g / p[live]) @ g.T


def hg_mode_fi(psf: GaussianPsf, separation, q_max=40, centroid=0.0, axis=None) -> HgResult:
    """SPADE on Hermite-Gauss modes for two equal sources.

    With ``axis`` left at the centroid only the separation is unknown and
    ``fisher`` is 1x1. Passing a different ``axis`` models a misaligned sorter
    and returns the 2x2 information on (centroid, separation).

    Raises
    ------
    TailTooLarge
        When the probability of modes above ``q_max`` exceeds 1e-10.
    """
    if q_max < 8:
        raise ValueError("q_max must be at least 8")
    scene = scene_from_parameters([centroid, separation], Parametrization.CENTROID_SEPARATION)
    aligned = axis is None
    p, dp = hg_mode_distribution(psf, scene, centroid if aligned else axis, q_max)
    if p[-1] > 1e-10:
        raise TailTooLarge(f"tail probability {p[-1]:.3e} above q_max={q_max}")
    floor = get_tolerances().prob_floor
    if aligned:
        F = _fisher(p, dp[1:2], floor)
    else:
        F = _fisher(p, dp, floor)
    F = 0.5 * (F + F.T)
    return HgResult(p[:-1], float(p[-1]), F, float(F[-1, -1]))
