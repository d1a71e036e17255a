"""Monte-Carlo estimation: sample measurement outcomes, fit by maximum likelihood,
and compare the empirical mean-square error with the Cramer-Rao bound.

Randomness comes from a counter-based generator (Philox) keyed by
``(seed, repetition)``, so repetitions can run in any order or in parallel and
still reproduce bit for bit.
"""

from __future__ import annotations

import dataclasses
import numpy as np
from scipy import stats

from .config import get_tolerances
from .errors import NonConvergent
from .information import Povm, born_probabilities, classical_fi
from .model import ModelPoint, StatisticalModel, evaluate
from .parallel import ordered_map


def generator(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclasses.dataclass(frozen=True)
class OutcomeSample:
    counts: np.ndarray
    M: int
    seed: int
    repetition: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.sum() != self.M:
            raise ValueError("counts must add up to M")


@dataclasses.dataclass(frozen=True)
class EstimatorRun:
    """``R`` maximum-likelihood estimates and their mean-square error matrix."""

    estimates: np.ndarray   # (R, d)
    V_hat: np.ndarray
    R: int
    M: int
    lambda_true: np.ndarray
    iterations: np.ndarray  # ascent steps used by the winning start

    @property
    def bias(self) -> np.ndarray:
        return self.estimates.mean(axis=0) - self.lambda_true

    @property
    def bias_se(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1) / np.sqrt(self.R)


def _probabilities(rho, povm):
    p = born_probabilities(rho, povm)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_outcomes(pt: ModelPoint, povm: Povm, M: int, seed: int, repetition: int = 0) -> OutcomeSample:
    """Multinomial draw of ``M`` outcomes from the Born distribution at ``pt``."""
    p = _probabilities(pt.rho, povm)
    counts = generator(seed, repetition).multinomial(int(M), p)
    return OutcomeSample(counts, int(M), int(seed), int(repetition))


def chi_square_pvalue(sample: OutcomeSample, p) -> float:
    """Goodness-of-fit p-value of ``sample`` against probabilities ``p``."""
    p = np.asarray(p, float)
    live = p > 0
    if np.any(sample.counts[~live] > 0):
        return 0.0
    return float(stats.chisquare(sample.counts[live], sample.M * p[live]).pvalue)


# -- maximum likelihood ---------------------------------------------------------

def _box(model: StatisticalModel):
    if model.domain is None:
        n = model.param_dim
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo = np.array([-np.inf if a is None else a for a, _ in model.domain], float)
    hi = np.array([np.inf if b is None else b for _, b in model.domain], float)
    return lo, hi


class _Likelihood:
    def __init__(self, counts, model, povm):
        self.counts = counts
        self.model = model
        self.povm = povm
        self.floor = get_tolerances().prob_floor

    def value(self, lam):
        try:
            rho = self.model.state_fn(lam)
        except Exception:
            return -np.inf
        p = born_probabilities(np.asarray(rho), self.povm)
        if np.any(p[self.counts > 0] <= 0):
            return -np.inf
        return float(self.counts @ np.log(np.maximum(p, self.floor)))

    def score_and_fisher(self, lam):
        pt = evaluate(self.model, lam)
        p = np.maximum(born_probabilities(pt.rho, self.povm), self.floor)
        dp = np.stack([born_probabilities(dr, self.povm) for dr in pt.drho])
        grad = dp @ (self.counts / p)
        fisher = (dp / p) @ dp.T * self.counts.sum()
        return grad, fisher


def _ascend(lik: _Likelihood, lam, lo, hi, max_iter, gtol):
    """Fisher-scoring ascent with Armijo backtracking and projection onto the box."""
    f = lik.value(lam)
    for it in range(max_iter):
        grad, fisher = lik.score_and_fisher(lam)
        free = ~(((lam <= lo) & (grad < 0)) | ((lam >= hi) & (grad > 0)))
        if np.max(np.abs(grad[free]), initial=0.0) <= gtol:
            return lam, f, it
        step = np.zeros_like(lam)
        try:
            sub = fisher[np.ix_(free, free)]
            step[free] = np.linalg.solve(sub + 1e-12 * np.trace(sub) * np.eye(len(sub)), grad[free])
        except np.linalg.LinAlgError:
            step[free] = grad[free]
        if grad @ step <= 0:
            step = grad * free
        t = 1.0
        while True:
            cand = np.clip(lam + t * step, lo, hi)
            fc = lik.value(cand)
            if fc >= f + 1e-4 * (grad @ (cand - lam)):
                break
            t *= 0.5
            if t < 1e-14:
                # no ascent possible along the projected direction
                return lam, f, it
        lam, f = cand, fc
    raise NonConvergent(f"likelihood ascent did not converge in {max_iter} iterations")


def mle(sample: OutcomeSample, model: StatisticalModel, povm: Povm, lambda0, n_starts=5,
        perturbation=0.05, max_iter=500, return_iterations=False):
    """Maximum-likelihood estimate from ``sample``.

    The first start is ``lambda0``; the remaining ``n_starts - 1`` are random
    perturbations of it (relative size ``perturbation``, drawn from the sample's
    own seed). The highest likelihood wins; ties keep the earliest start.

    Raises
    ------
    NonConvergent
        Every start exceeded ``max_iter`` ascent steps.
    ValueError
        The model is not expressed in a fixed basis, so a fixed POVM has no meaning.
    """
    if not model.common_frame:
        raise ValueError(f"model {model.name!r} uses a point-dependent basis; a fixed POVM cannot be applied")
    lam0 = np.atleast_1d(np.asarray(lambda0, float))
    lo, hi = _box(model)
    lik = _Likelihood(sample.counts, model, povm)
    gtol = 1e-9 * sample.M
    rng = generator(sample.seed, sample.repetition, 1)
    starts = [lam0] + [
        np.clip(lam0 + perturbation * (1.0 + np.abs(lam0)) * rng.standard_normal(lam0.shape), lo, hi)
        for _ in range(n_starts - 1)
    ]
    best, best_f, best_it = None, -np.inf, 0
    for s in starts:
        try:
            lam, f, it = _ascend(lik, np.array(s), lo, hi, max_iter, gtol)
        except NonConvergent:
            continue
        if best is None or f > best_f:
            best, best_f, best_it = lam, f, it
    if best is None:
        raise NonConvergent(f"all {n_starts} starts exceeded {max_iter} iterations")
    return (best, best_it) if return_iterations else best


def empirical_mse(model: StatisticalModel, povm: Povm, lambda_true, M: int, R: int, seed: int,
                  threads: int = 1, n_starts=5) -> EstimatorRun:
    """``R`` independent sample-and-fit repetitions at ``lambda_true``."""
    lam_true = np.atleast_1d(np.asarray(lambda_true, float))
    pt = evaluate(model, lam_true)

    def one(r):
        s = sample_outcomes(pt, povm, M, seed, r)
        return mle(s, model, povm, lam_true, n_starts=n_starts, return_iterations=True)

    results = ordered_map(one, range(R), threads)
    est = np.array([r[0] for r in results])
    err = est - lam_true
    V = err.T @ err / R
    return EstimatorRun(est, 0.5 * (V + V.T), R, int(M), lam_true, np.array([r[1] for r in results]))


def bootstrap_se(run: EstimatorRun, weight=None, n_boot=1000, seed=0):
    """Bootstrap standard errors of ``M V_hat`` (entrywise) and of ``M Tr[W V_hat]``."""
    err = run.estimates - run.lambda_true
    d = err.shape[1]
    W = np.eye(d) if weight is None else np.asarray(weight, float)
    rng = generator(seed, 2**32 - 1)
    mats = np.empty((n_boot, d, d))
    for b in range(n_boot):
        e = err[rng.integers(0, run.R, run.R)]
        mats[b] = run.M * (e.T @ e) / run.R
    traces = np.einsum("ij,bji->b", W, mats)
    return mats.std(axis=0, ddof=1), float(traces.std(ddof=1))


@dataclasses.dataclass(frozen=True)
class AttainabilityReport:
    MV: np.ndarray
    F_inverse: np.ndarray
    se: np.ndarray
    z: np.ndarray
    trace_MV: float
    trace_bound: float
    trace_se: float
    within: bool          # every entry within ``k`` standard errors
    no_violation: bool    # Tr[W M V] not below Tr[W F^-1] by more than ``k`` SE

    def to_json(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in dataclasses.asdict(self).items()}


def attainability(run: EstimatorRun, model: StatisticalModel, povm: Povm, weight=None,
                  k=3.0, n_boot=1000, seed=0) -> AttainabilityReport:
    """Compare ``M V_hat`` with the inverse classical Fisher information."""
    d = run.estimates.shape[1]
    W = np.eye(d) if weight is None else np.asarray(weight, float)
    F = classical_fi(evaluate(model, run.lambda_true), povm)
    Finv = np.linalg.inv(F)
    se, tse = bootstrap_se(run, W, n_boot, seed)
    MV = run.M * run.V_hat
    z = (MV - Finv) / np.maximum(se, 1e-300)
    tr, tb = float(np.trace(W @ MV)), float(np.trace(W @ Finv))
    return AttainabilityReport(MV, Finv, se, z, tr, tb, tse,
                               bool(np.all(np.abs(z) <= k)), bool(tr >= tb - k * tse))


def mub_povm(dim: int) -> Povm:
    """Informationally complete POVM from ``dim + 1`` mutually unbiased bases
    (``dim`` prime), each basis chosen with probability ``1 / (dim + 1)``."""
    if dim < 2 or any(dim % q == 0 for q in range(2, int(dim ** 0.5) + 1)):
        raise ValueError("mutually unbiased bases are built here for prime dimensions only")
    bases = [np.eye(dim, dtype=complex)]
    k = np.arange(dim)
    if dim == 2:
        bases.append(np.array([[1, 1], [1, -1]], complex) / np.sqrt(2))
        bases.append(np.array([[1, 1], [1j, -1j]], complex) / np.sqrt(2))
    else:
        w = np.exp(2j * np.pi / dim)
        for a in range(dim):
            bases.append(np.stack([w ** ((a * k * k + j * k) % dim) for j in range(dim)], axis=1) / np.sqrt(dim))
    return Povm.mixture([Povm.from_basis(u) for u in bases], np.full(len(bases), 1.0 / len(bases)))
