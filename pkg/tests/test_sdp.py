import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qest import sdp
from qest.operators import complex_to_real_embed, random_hermitian, trace_norm

seeds = st.integers(0, 2**32 - 1)


def _inner_holevo(Z):
    """min Tr[U] over real symmetric U with U - Z >= 0 (Z Hermitian, embedded)."""
    d = Z.shape[0]
    pairs = [(a, b) for a in range(d) for b in range(a, d)]
    mats, c = [], []
    for a, b in pairs:
        e = np.zeros((d, d))
        e[a, b] = e[b, a] = 1.0
        mats.append(complex_to_real_embed(e))
        c.append(1.0 if a == b else 0.0)
    return sdp.SdpProblem(c, [sdp.Block(complex_to_real_embed(-Z), mats)])


def _random_feasible(rng, m=4, n=5, blocks=2):
    """Strictly feasible at x = 0 (A0 > 0) with a bounded objective (dual strictly feasible)."""
    bl, zs = [], []
    for _ in range(blocks):
        g = rng.normal(size=(n, n))
        a0 = g @ g.T + np.eye(n)
        a = np.array([random_hermitian(n, rng).real for _ in range(m)])
        bl.append(sdp.Block(a0, a))
        h = rng.normal(size=(n, n))
        zs.append(h @ h.T + 0.1 * np.eye(n))
    # c_i = sum_b Tr[A_ib Z_b] makes Z a strictly feasible dual point
    c = sum(np.einsum("iab,ab->i", b.a, z) for b, z in zip(bl, zs))
    return sdp.SdpProblem(c, bl)


def test_scalar_lmi():
    sol = sdp.solve(sdp.SdpProblem([1.0], [sdp.Block([[-1.0]], [[[1.0]]])]))
    assert sol.status is sdp.Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 4))
def test_inner_holevo_structure(seed, d):
    Z = random_hermitian(d, np.random.default_rng(seed))
    sol = sdp.solve(_inner_holevo(Z))
    oracle = np.trace(Z.real) + trace_norm(Z.imag)
    assert sol.status is sdp.Status.OPTIMAL
    assert abs(sol.objective_value - oracle) <= 1e-7 * (1 + abs(oracle))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_random_problem_brackets_and_invariants(seed):
    p = _random_feasible(np.random.default_rng(seed))
    sol = sdp.solve(p)
    assert sol.status is sdp.Status.OPTIMAL
    assert abs(sol.gap) <= 1e-7 * (1 + abs(sol.objective_value))
    assert sol.dual_value <= sol.objective_value + 1e-9 * (1 + abs(sol.objective_value))
    assert min(np.linalg.eigvalsh(s)[0] for s in p.slack(sol.x)) >= -1e-8
    assert all(np.linalg.eigvalsh(z)[0] >= -1e-8 for z in sol.Z)


def test_equality_constraints():
    # min x0 + 2 x1  s.t. x0 + x1 = 1, x0 >= 0, x1 >= 0  ->  x = (1, 0)
    blk = sdp.Block(np.zeros((2, 2)), [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    sol = sdp.solve(sdp.SdpProblem([1.0, 2.0], [blk], [[1.0, 1.0]], [1.0]))
    assert sol.status is sdp.Status.OPTIMAL
    assert np.allclose(sol.x, [1.0, 0.0], atol=1e-7)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-8)


def test_deterministic():
    p = _random_feasible(np.random.default_rng(3))
    a, b = sdp.solve(p), sdp.solve(p)
    assert np.array_equal(a.x, b.x)
    assert a.objective_value == b.objective_value and a.dual_value == b.dual_value
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_infeasible_cases():
    inconsistent = sdp.SdpProblem([1.0, 1.0], [sdp.Block(np.eye(1), [np.eye(1), np.eye(1)])],
                                  [[1, 1], [2, 2]], [1, 3])
    assert sdp.solve(inconsistent).status is sdp.Status.INFEASIBLE
    # x >= 0 and x <= -1
    empty = sdp.SdpProblem([1.0], [sdp.Block(np.diag([0.0, -1.0]), [np.diag([1.0, -1.0])])])
    assert sdp.solve(empty).status is sdp.Status.INFEASIBLE
    # min x  s.t.  -x >= 0: unbounded below
    unbounded = sdp.SdpProblem([1.0], [sdp.Block([[0.0]], [[[-1.0]]])])
    assert sdp.solve(unbounded).status is sdp.Status.INFEASIBLE
    # objective moves along a direction no constraint sees
    free = sdp.SdpProblem([1.0, 1.0], [sdp.Block([[-1.0]], [[[1.0]], [[0.0]]])])
    assert sdp.solve(free).status is sdp.Status.INFEASIBLE


def test_iteration_cap():
    sol = sdp.solve(_random_feasible(np.random.default_rng(0)), max_iter=2)
    assert sol.status is sdp.Status.MAX_ITER
    assert sol.iterations <= 2


def test_json_round_trip():
    p = _random_feasible(np.random.default_rng(1), m=3, n=3, blocks=1)
    q = sdp.SdpProblem.from_json(json.loads(json.dumps(p.to_json())))
    assert np.array_equal(p.c, q.c)
    assert np.array_equal(p.blocks[0].a0, q.blocks[0].a0)
    assert np.array_equal(sdp.solve(p).x, sdp.solve(q).x)
    js = sdp.solve(p).to_json()
    assert js["status"] == "Optimal"
    assert {"x", "objective_value", "dual_value", "gap"} <= set(js)


def test_problem_validation():
    with pytest.raises(ValueError):
        sdp.SdpProblem([1.0, 2.0], [sdp.Block([[1.0]], [[[1.0]]])])
    with pytest.raises(ValueError):
        sdp.SdpProblem([1.0], [sdp.Block([[1.0]], [[[1.0]]])], [[1.0]], [1.0, 2.0])


def test_blocks_symmetrized():
    b = sdp.Block([[1.0, 2.0], [0.0, 1.0]], [[[0.0, 1.0], [0.0, 0.0]]])
    assert np.array_equal(b.a0, b.a0.T)
    assert np.array_equal(b.a[0], b.a[0].T)
