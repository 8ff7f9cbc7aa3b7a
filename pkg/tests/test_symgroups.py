import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabfinetti.config import DomainError, ResourceError, RunConfig
from stabfinetti.symgroups import (ModMatrix, ModVector, bilinear_form, closed_form_counts,
                                   closed_form_for, d_factor_check, enumerate_group,
                                   fixed_space_dimension, generating_subset, gram_classifier,
                                   group_from_generators, orbit_count_brute, orbit_count_burnside,
                                   orbit_partition, orbit_report, permutation_rep, rank_mod,
                                   rref_mod, verify_closure)


def _all_matrices(kind, n, d):
    """Independent oracle: filter every n x n matrix over F_d."""
    out = []
    for e in itertools.product(range(d), repeat=n * n):
        a = np.array(e).reshape(n, n)
        if kind == "perm":
            ok = set(e) <= {0, 1} and (a.sum(0) == 1).all() and (a.sum(1) == 1).all()
        else:
            ok = np.array_equal((a.T @ a) % d, np.eye(n, dtype=int))
            if kind == "stoch":
                ok = ok and (a.sum(1) % d == 1).all()
        if ok:
            out.append(a)
    return out


def _naive_orbits(mats, n, d, K):
    pts = set(itertools.product(range(d), repeat=n * K))
    count = 0
    while pts:
        stack = [pts.pop()]
        count += 1
        while stack:
            q = np.array(stack.pop()).reshape(K, n)
            for g in mats:
                im = tuple(((g @ q.T) % d).T.reshape(-1))
                if im in pts:
                    pts.remove(im)
                    stack.append(im)
    return count


@pytest.mark.parametrize("kind", ["perm", "disc", "stoch"])
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("d", [2, 3])
def test_enumeration_matches_exhaustive_filter(kind, n, d):
    ref = _all_matrices(kind, n, d)
    g = enumerate_group(kind, n, d)
    assert g.order == len(ref)
    assert {m.tobytes() for m in (np.asarray(x, dtype=np.int64) for x in ref)} == \
        {e.a.tobytes() for e in g.elements}


@pytest.mark.parametrize("kind", ["perm", "disc", "stoch"])
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("K", [1, 2])
def test_orbit_counts_match_naive_search(kind, n, d, K):
    g = enumerate_group(kind, n, d)
    ref = _naive_orbits([e.a for e in g.elements], n, d, K)
    assert orbit_count_brute(g, K) == ref
    assert orbit_count_burnside(g, K) == ref


# n = 4 counts, brute force and Burnside agree (frozen)
N4 = {("perm", 2): (24, 5, 35), ("perm", 3): (24, 15, 495),
      ("disc", 2): (48, 4, 23), ("disc", 3): (1152, 4, 40),
      ("stoch", 2): (48, 4, 23), ("stoch", 3): (48, 12, 315)}


@pytest.mark.parametrize("key", sorted(N4))
def test_n4_counts(key):
    kind, d = key
    g = enumerate_group(kind, 4, d)
    order, k1, k2 = N4[key]
    assert g.order == order
    assert orbit_report(g, 1).brute_count == k1
    assert orbit_report(g, 2).brute_count == k2


def test_orbits_cli_example():
    rep = orbit_report(enumerate_group("discrete-orthogonal", 3, 3), 1).to_json()
    assert rep["counts"] == {"brute": 4, "burnside": 4, "closed_form": 4, "realized": True,
                             "within_bound": True}


def test_closed_forms():
    for d in (2, 3, 5, 7):
        cf = closed_form_counts(d, K=3)
        assert cf["D"][0] == d + 1
        assert cf["D"][1] == d ** 3 + d ** 2 + d + 1
        assert cf["D"][2] == (d ** 3 + 1) * cf["D"][1]
        assert cf["g_stoch"] == d ** 4 + d ** 3 + d ** 2 + d
    assert closed_form_counts(3)["g_stoch"] == 120
    assert closed_form_counts(3)["D"] == [4, 40]
    cf = closed_form_counts(2, N=1, n=2)
    assert cf["g_perm_binomial"] == 10
    assert cf["g_perm_power"] == 3 ** 3
    assert closed_form_for("perm", 3, 3, 2) == 165


def test_closed_form_realized_on_large_enough_groups():
    # the qutrit groups where the counts are attained
    assert orbit_report(enumerate_group("disc", 4, 3), 2).realized
    assert orbit_report(enumerate_group("disc", 3, 3), 1).realized


def test_characteristic_two_exceeds_disc_closed_form():
    # x.x = parity(x) is linear over F_2, so norms do not separate orbits as for odd d
    rep = orbit_report(enumerate_group("disc", 3, 2), 2)
    assert rep.brute_count == 20 and rep.closed_form == 15 and not rep.within_bound


def test_d_factor_counts():
    r = d_factor_check(2, 3)
    assert (r["stoch_count"], r["disc_count"]) == (45, 5)
    assert r["stoch_count"] == 9 * r["disc_count"]
    r = d_factor_check(4, 3)
    assert (r["stoch_count"], r["disc_count"]) == (315, 35)
    assert r["stoch_count"] == 9 * r["disc_count"]
    assert d_factor_check(3, 2)["holds"]


def test_fixed_space_equals_orbit_count():
    for kind, n, d in (("perm", 2, 2), ("perm", 3, 3), ("stoch", 3, 3), ("disc", 2, 3)):
        g = enumerate_group(kind, n, d)
        assert fixed_space_dimension(permutation_rep(g, 2)) == orbit_count_brute(g, 2)


def test_perm_fixed_space_binomial():
    for n in (1, 2, 3):
        for d in (2, 3):
            g = enumerate_group("perm", n, d)
            assert fixed_space_dimension(permutation_rep(g, 2)) == comb(n + d * d - 1, n)


def test_fixed_space_numeric_path_and_closure():
    g = enumerate_group("perm", 3, 2)
    rep = permutation_rep(g, 1)
    Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((8, 8)))
    conj = [Q @ m @ Q.T for m in rep]
    assert fixed_space_dimension(conj) == 4
    # a 3-cycle alone closes to Z_3; with a transposition it closes to S_3
    cyc = [e.a.tolist() for e in g.elements].index([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    swap = [e.a.tolist() for e in g.elements].index([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    assert fixed_space_dimension([conj[cyc]], close=True) == 4
    assert fixed_space_dimension([conj[cyc], conj[swap]], close=True) == 4
    assert fixed_space_dimension([conj[swap]], close=True) == 6


def test_generating_subset_and_closure():
    g = enumerate_group("disc", 3, 3)
    gens = generating_subset(g)
    assert len(gens) < g.order
    h = group_from_generators(gens, 3)
    assert h.order == g.order
    assert verify_closure([e.a for e in g.elements], 3)
    assert not verify_closure([e.a for e in g.elements[:5]], 3)


def test_gram_classifier_constant_on_orbits():
    g = enumerate_group("disc", 3, 3)
    pts, labels = orbit_partition(g, 2)
    classes = {}
    for p, lab in zip(pts, labels):
        key = gram_classifier([ModVector(p[0], 3), ModVector(p[1], 3)])
        classes.setdefault(lab, set()).add(key)
    assert all(len(v) == 1 for v in classes.values())
    # and distinct orbits have distinct invariants for this odd-d group
    assert len({next(iter(v)) for v in classes.values()}) == len(classes)


def test_budgets_raise():
    cfg = RunConfig(orbit_point_budget=100)
    with pytest.raises(ResourceError):
        orbit_count_brute(enumerate_group("perm", 4, 2), 2, cfg)
    with pytest.raises(ResourceError):
        enumerate_group("disc", 6, 3, RunConfig(matrix_budget=1000))


def test_domain_errors():
    with pytest.raises(DomainError):
        enumerate_group("disc", 2, 4)
    with pytest.raises(DomainError):
        bilinear_form(ModVector([1, 0], 3), ModVector([1, 0, 0], 3))
    with pytest.raises(DomainError):
        ModMatrix([[1, 0]], 3)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_mod_arithmetic_properties(d, n, seed):
    rng = np.random.default_rng(seed)
    a = ModMatrix(rng.integers(0, d, (n, n)), d)
    b = ModMatrix(rng.integers(0, d, (n, n)), d)
    x = ModVector(rng.integers(0, d, n), d)
    y = ModVector(rng.integers(0, d, n), d)
    assert (a @ b).T == b.T @ a.T
    assert bilinear_form(a @ x, y) == bilinear_form(x, a.T @ y)
    R, piv = rref_mod(a.a, d)
    assert len(piv) == rank_mod(a.a, d)
    assert a.nullity_minus_identity() == n - rank_mod(a.a - np.eye(n, dtype=np.int64), d)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([("disc", 3, 3), ("stoch", 4, 3), ("disc", 3, 2)]), st.integers(0, 2 ** 31 - 1))
def test_group_elements_preserve_form(case, seed):
    kind, n, d = case
    g = enumerate_group(kind, n, d)
    rng = np.random.default_rng(seed)
    O = g.elements[rng.integers(g.order)]
    x = ModVector(rng.integers(0, d, n), d)
    y = ModVector(rng.integers(0, d, n), d)
    assert bilinear_form(O @ x, O @ y) == bilinear_form(x, y)
    assert O.is_orthogonal() and O.is_invertible()
    if kind == "stoch":
        assert O.is_stochastic()
