import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qest.errors import NonConvergent
from qest.information import Povm, classical_fi, qfi_matrices
from qest.model import evaluate
from qest.simulate import (
    OutcomeSample,
    attainability,
    bootstrap_se,
    chi_square_pvalue,
    empirical_mse,
    mle,
    mub_povm,
    sample_outcomes,
)
from qest.zoo import classical_qubit, get_model

Z_BASIS = Povm.from_basis(np.eye(2))


def _pt(lam):
    return evaluate(classical_qubit(), [lam])


def test_deterministic_outcome():
    s = sample_outcomes(_pt(1.0), Z_BASIS, 1000, seed=1)
    assert s.counts.tolist() == [1000, 0]


def test_binomial_concentration():
    M = 10 ** 6
    s = sample_outcomes(_pt(0.5), Z_BASIS, M, seed=7)
    assert abs(s.counts[0] / M - 0.5) <= 5 * np.sqrt(0.25 / M)


def test_seed_reproducibility():
    pt = evaluate(get_model("qubit-tomography").model, [0.2, -0.1, 0.3])
    povm = mub_povm(2)
    a = sample_outcomes(pt, povm, 5000, seed=42)
    b = sample_outcomes(pt, povm, 5000, seed=42)
    assert a.counts.tobytes() == b.counts.tobytes()
    c = sample_outcomes(pt, povm, 5000, seed=42, repetition=1)
    assert c.counts.tobytes() != a.counts.tobytes()


def test_outcome_sample_validation():
    with pytest.raises(ValueError):
        OutcomeSample(np.array([3, 4]), 8, 0)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 42])
def test_sampler_goodness_of_fit(seed):
    e = get_model("multiphase:d=2,N=1")
    povm = mub_povm(3)
    pt = evaluate(e.model, [0.3, -0.2])
    s = sample_outcomes(pt, povm, 20000, seed)
    p = np.real([np.trace(pt.rho @ el) for el in povm.elements])
    assert chi_square_pvalue(s, p) > 1e-4


def test_chi_square_impossible_outcome():
    s = OutcomeSample(np.array([5, 5]), 10, 0)
    assert chi_square_pvalue(s, [1.0, 0.0]) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 999))
def test_binomial_mle_closed_form(k):
    M = 1000
    s = OutcomeSample(np.array([k, M - k]), M, 0)
    est = mle(s, classical_qubit(), Z_BASIS, [0.5])
    assert est[0] == pytest.approx(k / M, abs=1e-9)


def test_boundary_clamp():
    s = OutcomeSample(np.array([100, 0]), 100, 0)
    est = mle(s, classical_qubit(), Z_BASIS, [0.5])
    assert est[0] == 1.0


def test_non_convergence():
    s = OutcomeSample(np.array([30, 70]), 100, 0)
    with pytest.raises(NonConvergent):
        mle(s, classical_qubit(), Z_BASIS, [0.5], max_iter=0)


def test_point_dependent_basis_rejected():
    e = get_model("two-source:sigma=1")
    s = OutcomeSample(np.array([1, 0, 0, 0]), 1, 0)
    with pytest.raises(ValueError):
        mle(s, e.model, Povm.from_basis(np.eye(4)), e.default_lambda)


def test_deterministic_model_zero_error():
    run = empirical_mse(classical_qubit(), Z_BASIS, [1.0], 50, 5, seed=0)
    assert np.all(run.V_hat == 0)


def test_binomial_variance():
    M, R, lam = 10 ** 4, 1000, 0.3
    run = empirical_mse(classical_qubit(), Z_BASIS, [lam], M, R, seed=3, threads=4)
    mv = M * run.V_hat[0, 0]
    assert 0.21 * 0.85 <= mv <= 0.21 * 1.15
    assert np.trace(run.V_hat) >= 0.9 * lam * (1 - lam) / M
    assert np.all(np.abs(run.bias) <= 3 * run.bias_se)
    assert np.allclose(run.V_hat, run.V_hat.T) and np.linalg.eigvalsh(run.V_hat)[0] >= 0


def test_thread_count_does_not_change_results():
    e = get_model("qubit-tomography")
    povm = mub_povm(2)
    a = empirical_mse(e.model, povm, e.default_lambda, 2000, 12, seed=5, threads=1)
    b = empirical_mse(e.model, povm, e.default_lambda, 2000, 12, seed=5, threads=4)
    assert a.estimates.tobytes() == b.estimates.tobytes()


def test_attainability_tomography():
    e = get_model("qubit-tomography")
    povm = mub_povm(2)
    run = empirical_mse(e.model, povm, e.default_lambda, 5000, 300, seed=11, threads=4)
    rep = attainability(run, e.model, povm, n_boot=300, seed=1)
    assert rep.within and rep.no_violation
    F = classical_fi(evaluate(e.model, e.default_lambda), povm)
    assert np.allclose(rep.F_inverse, np.linalg.inv(F))
    assert set(rep.to_json()) >= {"MV", "F_inverse", "z", "within"}


def test_bootstrap_deterministic():
    run = empirical_mse(classical_qubit(), Z_BASIS, [0.4], 500, 40, seed=2)
    a = bootstrap_se(run, n_boot=200, seed=9)
    b = bootstrap_se(run, n_boot=200, seed=9)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


@pytest.mark.parametrize("dim", [2, 3, 5])
def test_mub_povm_informationally_complete(dim):
    povm = mub_povm(dim)
    assert len(povm) == dim * (dim + 1)
    vecs = np.array([np.concatenate([e.real.ravel(), e.imag.ravel()]) for e in povm.elements])
    assert np.linalg.matrix_rank(vecs, tol=1e-10) == dim * dim


def test_mub_bases_unbiased():
    d = 3
    # elements are projectors weighted by 1/(d+1); bases are consecutive groups of d
    proj = [(d + 1) * e for e in mub_povm(d).elements]
    for a in range(d + 1):
        for b in range(a + 1, d + 1):
            for i in range(d):
                for j in range(d):
                    overlap = np.trace(proj[a * d + i] @ proj[b * d + j]).real
                    assert overlap == pytest.approx(1 / d, abs=1e-12)


def test_mub_rejects_composite_dimension():
    with pytest.raises(ValueError):
        mub_povm(4)


def test_mub_fisher_below_qfi():
    e = get_model("multiphase:d=2,N=2")
    pt = evaluate(e.model, [0.3, 0.1])
    F = classical_fi(pt, mub_povm(3))
    Q = qfi_matrices(pt, with_rld=False).Q
    assert np.linalg.eigvalsh(Q - F)[0] >= -1e-10
