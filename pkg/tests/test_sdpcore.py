import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabfinetti.config import ResourceError, RunConfig
from stabfinetti.qnum import random_density, transversal_rep
from stabfinetti.sdpcore import (SdpProblem, expand_blocks, from_coords, group_twirl, hcoords,
                                 hmat, invariant_decomposition, kron_lift, reduce_operators,
                                 solve, to_coords)
from stabfinetti.symgroups import enumerate_group


def _rand_herm(n, rng):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G + G.conj().T


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 31 - 1))
def test_hcoords_roundtrip_and_inner_product(n, seed):
    rng = np.random.default_rng(seed)
    A, B = _rand_herm(n, rng), _rand_herm(n, rng)
    assert np.abs(hmat(hcoords(A), n) - A).max() < 1e-12
    assert abs(hcoords(A) @ hcoords(B) - np.trace(A @ B).real) < 1e-9 * (1 + np.abs(A).max() * np.abs(B).max() * n)


def test_block_coords_roundtrip():
    rng = np.random.default_rng(0)
    mats = [_rand_herm(3, rng), _rand_herm(2, rng)]
    back = from_coords(to_coords(mats, [3, 2]), [3, 2])
    assert all(np.abs(a - b).max() < 1e-12 for a, b in zip(mats, back))


def test_lambda_max_sdp():
    rng = np.random.default_rng(1)
    for n in (2, 3, 5, 8):
        C = _rand_herm(n, rng)
        prob = SdpProblem.from_matrices([n], [C], [[np.eye(n)]], [1.0], "max")
        sol = solve(prob)
        assert sol.status == "optimal"
        assert abs(sol.primal_value - np.linalg.eigvalsh(C).max()) < 1e-7
        assert abs(sol.dual_value - np.linalg.eigvalsh(C).max()) < 1e-7


def test_two_block_sdp():
    rng = np.random.default_rng(2)
    C1, C2 = _rand_herm(3, rng), _rand_herm(2, rng) + 5 * np.eye(2)
    prob = SdpProblem.from_matrices([3, 2], [C1, C2], [[np.eye(3), np.eye(2)]], [1.0], "max")
    sol = solve(prob)
    ref = max(np.linalg.eigvalsh(C1).max(), np.linalg.eigvalsh(C2).max())
    assert abs(sol.primal_value - ref) < 1e-7
    assert sol.gap < 1e-7


def test_min_sense_and_equality_rows():
    # minimize <C, X> with X fixed on its diagonal: a correlation-matrix SDP
    rng = np.random.default_rng(3)
    n = 4
    C = _rand_herm(n, rng)
    rows = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1
        rows.append([E])
    sol = solve(SdpProblem.from_matrices([n], [C], rows, np.ones(n), "min"))
    assert sol.status == "optimal"
    X = sol.X[0]
    assert np.abs(np.diag(X).real - 1).max() < 1e-7
    assert np.linalg.eigvalsh(X).min() > -1e-7
    # dual certificate: C - sum y_i E_ii is PSD and b.y equals the value
    S = C - np.diag(sol.y)
    assert np.linalg.eigvalsh(S).min() > -1e-6
    assert abs(sol.y.sum() - sol.primal_value) < 1e-6


def test_infeasible():
    prob = SdpProblem.from_matrices([2], [np.eye(2)], [[np.eye(2)], [np.eye(2)]], [1.0, 2.0])
    assert solve(prob).status == "infeasible"


def test_dim_cap_and_json_roundtrip(tmp_path):
    prob = SdpProblem.from_matrices([3], [np.diag([1.0, 2, 3])], [[np.eye(3)]], [1.0], "max",
                                    name="toy")
    with pytest.raises(ResourceError):
        solve(prob, config=RunConfig(sdp_dim_cap=2))
    p = tmp_path / "toy.json"
    prob.dump(p)
    import json
    back = SdpProblem.from_json(json.loads(p.read_text()))
    assert back.name == "toy" and np.abs(back.A - prob.A).max() == 0
    assert abs(solve(back).primal_value - 3) < 1e-7


def test_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(4)
    n, m = 4, 3
    C = _rand_herm(n, rng)
    As = [_rand_herm(n, rng) for _ in range(m)]
    X0 = random_density(n, rng)
    b = np.array([np.trace(A @ X0).real for A in As] + [1.0])
    rows = [[A] for A in As] + [[np.eye(n)]]
    sol = solve(SdpProblem.from_matrices([n], [C], rows, b, "min"))
    X = cp.Variable((n, n), hermitian=True)
    cons = [X >> 0] + [cp.real(cp.trace(A @ X)) == bi for A, bi in zip(As, b)] + [cp.real(cp.trace(X)) == 1]
    ref = cp.Problem(cp.Minimize(cp.real(cp.trace(C @ X))), cons).solve(solver="CLARABEL")
    assert abs(sol.primal_value - ref) < 1e-5


def test_kron_lift():
    Z = np.diag([1.0, -1.0])
    lifted = kron_lift(Z, [("A", 2), ("B", 3)], "A")
    assert np.abs(lifted - np.kron(Z, np.eye(3))).max() == 0


def _character_average(mats):
    return np.mean([abs(np.trace(g)) ** 2 for g in mats])


@pytest.mark.parametrize("case", [("perm", 3, 2), ("stoch", 3, 3), ("perm", 2, 3)])
def test_invariant_decomposition(case):
    kind, n, d = case
    mats = [transversal_rep(O) for O in enumerate_group(kind, n, d).elements]
    blocks = invariant_decomposition(mats, seed=0)
    assert sum(b.multiplicity ** 2 for b in blocks) == round(_character_average(mats))
    assert sum(b.multiplicity * b.irrep_dim for b in blocks) == mats[0].shape[0]
    rng = np.random.default_rng(5)
    T = group_twirl(mats, _rand_herm(mats[0].shape[0], rng))
    red = reduce_operators(blocks, T)
    back = expand_blocks(blocks, [r / b.irrep_dim for r, b in zip(red, blocks)])
    assert np.abs(back - T).max() < 1e-9
    # isometries of one block span orthogonal copies
    for b in blocks:
        V = np.hstack(b.isometries)
        assert np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() < 1e-9
