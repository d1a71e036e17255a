import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qest.errors import RldUndefined, SingularOutcome, SingularQfi
from qest.information import (
    InfoMatrices,
    Povm,
    classical_fi,
    compute_rld,
    compute_sld,
    incompatibility_R,
    qfi_matrices,
    upsilon,
)
from qest.model import ModelPoint, evaluate
from qest.operators import random_density_matrix
from qest.zoo import PAULI, classical_qubit, get_model, random_point

seeds = st.integers(0, 2**32 - 1)


def _random_povm(dim, rng, k=None):
    k = k or dim + 2
    g = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)) for _ in range(k)]
    a = [x @ x.conj().T for x in g]
    s = sum(a)
    w, v = np.linalg.eigh(s)
    t = (v / np.sqrt(w)) @ v.conj().T
    return Povm(tuple(t @ x @ t for x in a))


def _pure_point(vec, gens, lam=None):
    v = np.asarray(vec, complex) / np.linalg.norm(vec)
    rho = np.outer(v, v.conj())
    drho = tuple(-1j * (g @ rho - rho @ g) for g in gens)
    return ModelPoint(np.zeros(len(gens)) if lam is None else lam, rho, drho)


def test_sld_classical_qubit():
    pt = evaluate(classical_qubit(), [0.3])
    L = compute_sld(pt).operators[0]
    assert np.allclose(L, np.diag([1 / 0.3, -1 / 0.7]), atol=1e-12)


def test_sld_pure_state_is_twice_derivative():
    pt = _pure_point([1, 1j, 0.5], [np.diag([0, 1.0, 0]), np.diag([0, 0, 2.0])])
    for L, dr in zip(compute_sld(pt).operators, pt.drho):
        assert np.allclose(L, 2 * dr, atol=1e-12)


def test_sld_random_qutrit_residuals():
    pt = random_point(3, 2, np.random.default_rng(0))
    assert max(compute_sld(pt).residuals) <= 1e-10


def test_rld_examples():
    pt = evaluate(classical_qubit(), [0.3])
    assert np.allclose(compute_rld(pt).operators[0], compute_sld(pt).operators[0], atol=1e-12)
    tomo = get_model("qubit-tomography")
    r = compute_rld(evaluate(tomo.model, tomo.default_lambda))
    assert max(r.residuals) <= 1e-10
    with pytest.raises(RldUndefined):
        compute_rld(_pure_point([1, 1], [PAULI[2] / 2]))


def test_qfi_single_phase_pure_qubit():
    pt = _pure_point([1, 1], [PAULI[2] / 2])
    info = qfi_matrices(pt)
    # oracle: 4 Var(H) on a pure state
    v = np.array([1, 1]) / np.sqrt(2)
    h = PAULI[2] / 2
    var = (v.conj() @ h @ h @ v - (v.conj() @ h @ v) ** 2).real
    assert info.Q[0, 0] == pytest.approx(4 * var, abs=1e-12)
    assert info.Q[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert not info.has_rld


def test_multiphase_weak_commutativity():
    rng = np.random.default_rng(1)
    for d, n in [(1, 1), (2, 2), (3, 1), (5, 4)]:
        entry = get_model(f"multiphase:d={d},N={n}")
        info = qfi_matrices(evaluate(entry.model, rng.uniform(-1, 1, d)))
        assert np.abs(info.D).max() <= 1e-13 * max(1, np.abs(info.Q).max())


def test_classical_model_matrices():
    pt = evaluate(classical_qubit(), [0.3])
    info = qfi_matrices(pt)
    F = classical_fi(pt, Povm.from_basis(np.eye(2)))
    assert np.allclose(info.Q, F, rtol=1e-12)
    assert np.allclose(info.J.real, F, rtol=1e-12)
    assert np.all(info.D == 0)


@settings(max_examples=100)
@given(seeds, st.sampled_from([2, 3]), st.integers(1, 3))
def test_information_invariants(seed, dim, d):
    rng = np.random.default_rng(seed)
    pt = random_point(dim, d, rng)
    info = qfi_matrices(pt)
    assert max(info.sld.residuals) <= 1e-9
    assert max(info.rld.residuals) <= 1e-9
    assert np.linalg.eigvalsh(info.Q)[0] >= -1e-10
    assert np.linalg.eigvalsh(info.J)[0] >= -1e-10
    assert np.abs(info.D + info.D.T).max() <= 1e-10
    if np.linalg.eigvalsh(info.Q)[0] > 1e-6 * np.linalg.eigvalsh(info.Q)[-1]:
        gap = np.linalg.inv(info.Q) + 1e-8 * np.eye(d) - np.linalg.inv(info.J).real
        assert np.linalg.eigvalsh(gap)[0] >= -1e-8 * np.abs(np.linalg.inv(info.Q)).max()


def test_R_zero_and_two_formulas():
    info = InfoMatrices(np.eye(2), None, np.zeros((2, 2)), None)
    assert incompatibility_R(info) == 0.0
    pt = _pure_point([1, 0], [PAULI[0] / 2, PAULI[1] / 2])
    info = qfi_matrices(pt)
    r_direct = np.max(np.linalg.eigvals(1j * np.linalg.solve(info.Q, info.D)).real)
    assert abs(incompatibility_R(info) - r_direct) <= 1e-10
    assert incompatibility_R(info) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=200)
@given(seeds, st.sampled_from([2, 3]))
def test_R_in_unit_interval(seed, dim):
    info = qfi_matrices(random_point(dim, 2, np.random.default_rng(seed)), with_rld=False)
    assert 0.0 <= incompatibility_R(info) <= 1.0


def test_singular_qfi():
    info = InfoMatrices(np.diag([1.0, 0.0]), None, np.zeros((2, 2)), None)
    with pytest.raises(SingularQfi):
        incompatibility_R(info)
    with pytest.raises(SingularQfi):
        upsilon(np.eye(2), np.diag([1.0, 0.0]))


@settings(max_examples=200)
@given(seeds, st.sampled_from([2, 3, 4]), st.integers(1, 3), st.booleans())
def test_fisher_below_qfi(seed, dim, d, pure):
    rng = np.random.default_rng(seed)
    pt = random_point(dim, d, rng, rank=1 if pure else None)
    if pure:
        # pure states: keep derivatives on the support-touching blocks
        v = np.linalg.eigh(pt.rho)[1][:, -1:]
        P = v @ v.conj().T
        drho = tuple(P @ h @ (np.eye(dim) - P) + (np.eye(dim) - P) @ h @ P for h in pt.drho)
        pt = ModelPoint(pt.lam, pt.rho, drho)
    povm = _random_povm(dim, rng)
    Q = qfi_matrices(pt, with_rld=False).Q
    F = classical_fi(pt, povm)
    assert np.allclose(F, F.T)
    assert np.linalg.eigvalsh(F)[0] >= -1e-10 * max(1, np.abs(F).max())
    assert np.linalg.eigvalsh(Q - F)[0] >= -1e-8 * max(1, np.abs(Q).max())


def test_singular_outcome():
    # outcome |1><1| has zero probability at the boundary but nonzero slope
    pt = ModelPoint(np.array([1.0]), np.diag([1.0, 0.0]).astype(complex), (np.diag([1.0, -1.0]).astype(complex),))
    with pytest.raises(SingularOutcome):
        classical_fi(pt, Povm.from_basis(np.eye(2)))


def test_upsilon_examples():
    Q = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert upsilon(Q, Q) == pytest.approx(2.0)
    F = np.array([[1.0, 0.2], [0.2, 0.5]])
    assert upsilon(F, np.diag([2.0, 4.0])) == pytest.approx(1.0 / 2 + 0.5 / 4)


@settings(max_examples=100)
@given(seeds, st.sampled_from([2, 3, 4]), st.integers(2, 3))
def test_upsilon_bounds(seed, dim, d):
    rng = np.random.default_rng(seed)
    pt = random_point(dim, d, rng)
    Q = qfi_matrices(pt, with_rld=False).Q
    y = upsilon(classical_fi(pt, _random_povm(dim, rng)), Q)
    assert -1e-12 <= y <= min(d, dim - 1) + 1e-8


def test_povm_validation():
    with pytest.raises(ValueError):
        Povm((np.eye(2),) * 2)
    with pytest.raises(ValueError):
        Povm((np.diag([2.0, 1.0]), np.diag([-1.0, 0.0])))
    rho = random_density_matrix(2, np.random.default_rng(0))
    mix = Povm.mixture([Povm.from_basis(np.eye(2)), Povm.from_basis(np.eye(2))], [0.25, 0.75])
    assert len(mix) == 4
    assert np.trace(rho @ sum(mix.elements)).real == pytest.approx(1.0)
