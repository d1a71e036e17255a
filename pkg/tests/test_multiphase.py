import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qest.bounds import holevo_bound, scalar_sld_bound
from qest.classify import classify
from qest.errors import SingularQfi
from qest.information import qfi_matrices
from qest.model import evaluate
from qest.multiphase import (
    MultiphaseProbe,
    build_multiphase_model,
    independent_total_variance,
    optimal_probe,
    optimal_total_variance,
    total_variance_bound,
)


def test_optimal_probe_presets():
    p = optimal_probe(4)
    assert p.beta2 == pytest.approx(1 / 3) and p.alpha2 == pytest.approx(1 / 6)
    p = optimal_probe(1)
    assert p.beta2 == pytest.approx(0.5) and p.alpha2 == pytest.approx(0.5)
    for d in range(1, 11):
        p = optimal_probe(d)
        assert abs(p.beta2 + d * p.alpha2 - 1) <= 1e-12


def test_probe_validation():
    with pytest.raises(ValueError):
        MultiphaseProbe(2, 1, 0.5, 0.5)
    with pytest.raises(ValueError):
        MultiphaseProbe(0, 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        MultiphaseProbe(1, 1, 1.5, -0.5)


def test_model_at_zero_and_purity():
    model = build_multiphase_model(optimal_probe(3, 2))
    rho = evaluate(model, np.zeros(3)).rho
    assert np.abs(rho.imag).max() == 0 and np.allclose(rho, rho.T)
    rng = np.random.default_rng(0)
    for _ in range(5):
        rho = evaluate(model, rng.uniform(-2, 2, 3)).rho
        ev = np.linalg.eigvalsh(rho)
        assert ev[-1] == pytest.approx(1.0, abs=1e-10) and np.abs(ev[:-1]).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_weak_commutativity(d, N, seed):
    model = build_multiphase_model(optimal_probe(d, N))
    info = qfi_matrices(evaluate(model, np.random.default_rng(seed).uniform(-2, 2, d)), with_rld=False)
    assert np.abs(info.D).max() <= 1e-14 * max(1.0, np.abs(info.Q).max())


def test_classified_quasi_classical():
    model = build_multiphase_model(optimal_probe(3, 2))
    r = classify(model, [np.full(3, 0.1), np.full(3, -0.2), np.array([0.3, 0.0, -0.1])])
    assert r.quasi_classical and r.asymptotically_classical


def test_total_variance_examples():
    assert total_variance_bound(optimal_probe(2, 2)) == pytest.approx((1 + np.sqrt(2)) ** 2 * 2 / 16, rel=1e-8)
    assert total_variance_bound(optimal_probe(3, 1)) == pytest.approx((1 + np.sqrt(3)) ** 2 * 3 / 4, rel=1e-8)
    assert total_variance_bound(optimal_probe(3, 1)) == pytest.approx(5.598076211353316, rel=1e-8)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
@pytest.mark.parametrize("N", [1, 2, 4])
def test_phase_covariant_exactness(d, N):
    rng = np.random.default_rng(10 * d + N)
    probe = optimal_probe(d, N)
    for _ in range(5):
        lam = rng.uniform(-np.pi, np.pi, d)
        v = total_variance_bound(probe, lam)
        assert abs(v / optimal_total_variance(d, N) - 1) <= 1e-8


def test_simultaneous_beats_independent():
    for d in range(2, 8):
        for N in (1, 3):
            assert total_variance_bound(optimal_probe(d, N)) < independent_total_variance(d, N)
    assert independent_total_variance(1, 2) == pytest.approx(optimal_total_variance(1, 2))


def test_heisenberg_scaling():
    for d in (1, 2, 4):
        lam = np.linspace(-0.3, 0.4, d)
        q1 = qfi_matrices(evaluate(build_multiphase_model(optimal_probe(d, 1)), lam), with_rld=False).Q
        for N in (2, 3, 5):
            qn = qfi_matrices(evaluate(build_multiphase_model(optimal_probe(d, N)), lam), with_rld=False).Q
            assert np.abs(qn - N ** 2 * q1).max() <= 1e-10 * N ** 2 * np.abs(q1).max()


def test_holevo_equals_sld():
    for d, N in [(2, 1), (3, 2)]:
        pt = evaluate(build_multiphase_model(optimal_probe(d, N)), np.full(d, 0.2))
        ch, _ = holevo_bound(pt, np.eye(d))
        assert abs(ch - scalar_sld_bound(qfi_matrices(pt).Q, np.eye(d))) <= 1e-5


def test_degenerate_probe():
    with pytest.raises(SingularQfi):
        total_variance_bound(MultiphaseProbe(2, 1, 1.0, 0.0))
    with pytest.raises(SingularQfi):
        total_variance_bound(MultiphaseProbe(2, 1, 0.0, 0.5))


def test_suboptimal_probe_is_worse():
    d, N = 3, 2
    best = total_variance_bound(optimal_probe(d, N))
    for beta2 in (0.2, 0.5, 0.7):
        assert total_variance_bound(MultiphaseProbe(d, N, beta2, (1 - beta2) / d)) > best
