from math import log2, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabfinetti.bounds import (TABLE_COLUMNS, BoundQuery, big_int_str, definetti_bounds, eps_ortho, eps_perm,
                                eps_qubit, overhead_table, table_csv, table_json)
from stabfinetti.config import DomainError
from stabfinetti.symgroups import closed_form_counts


def test_formulas():
    assert eps_perm(2, 1, 1, 100) == 2 * 4 * 1 / 100
    assert abs(eps_ortho(3, 1, 1, 41) - 2 * 3 ** 8 * 3 ** -20) < 1e-15
    assert abs(eps_qubit(1, 6, 600) - 6 * sqrt(2) * 2 * sqrt(0.01)) < 1e-15
    assert abs(eps_qubit(1, 6, 600, 12 * sqrt(2)) - 2 * eps_qubit(1, 6, 600)) < 1e-15


def test_all_symmetries_filtered_by_hypotheses():
    out = definetti_bounds(BoundQuery(3, 1, 100, 1))
    assert set(out) == {"query", "eps_perm", "eps_ortho"}
    out = definetti_bounds(BoundQuery(2, 1, 600, 6))
    assert set(out) == {"query", "eps_perm", "eps_qubit"}
    assert out["eps_qubit"]["comparison"]["raw"] == 2 * out["eps_qubit"]["theorem"]["raw"]
    assert set(definetti_bounds(BoundQuery(2, 1, 600, 5))) == {"query", "eps_perm"}


def test_clamping():
    out = definetti_bounds(BoundQuery(3, 1, 10, 1))
    assert out["eps_ortho"]["raw"] > 1 and out["eps_ortho"]["clamped"] == 1.0
    small = definetti_bounds(BoundQuery(2, 1, 10 ** 6, 1))["eps_perm"]
    assert small["raw"] == small["clamped"] < 1


def test_domain_errors():
    with pytest.raises(DomainError):
        BoundQuery(4, 1, 10, 1)
    with pytest.raises(DomainError):
        BoundQuery(2, 1, 10, 11)
    with pytest.raises(DomainError):
        BoundQuery(2, 1, 10, 1, symmetry="cyclic")
    with pytest.raises(DomainError, match="odd"):
        definetti_bounds(BoundQuery(2, 1, 10, 1, symmetry="stoch-orth"))
    with pytest.raises(DomainError, match="d = 2"):
        definetti_bounds(BoundQuery(3, 1, 12, 6, symmetry="perm+anti-identity"))
    with pytest.raises(DomainError, match="six"):
        definetti_bounds(BoundQuery(2, 1, 12, 4, symmetry="perm+anti-identity"))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.integers(1, 3), st.integers(1, 200), st.integers(1, 20))
def test_bounds_monotone_in_n(d, r, n, k):
    k = min(k, n)
    assert eps_perm(d, r, k, n + 1) <= eps_perm(d, r, k, n)
    assert eps_ortho(d, r, k, n + 1) <= eps_ortho(d, r, k, n)
    assert eps_qubit(r, k, n + 1) <= eps_qubit(r, k, n)


def test_ortho_beats_perm_eventually():
    # exponential versus 1/n decay: at large n the orthogonal bound is smaller
    assert eps_ortho(3, 1, 1, 200) < eps_perm(3, 1, 1, 200)
    assert eps_ortho(3, 1, 1, 10) > eps_perm(3, 1, 1, 10)


def test_overhead_table_delegates_to_closed_forms():
    rows = overhead_table([3], [2, 3, 10], N=1)
    for row in rows:
        cf = closed_form_counts(3, K=2, N=1, n=row["n"])
        assert row["g_perm_binomial"] == cf["g_perm_binomial"]
        assert row["g_perm_power"] == cf["g_perm_power"]
        assert row["g_stoch"] == cf["g_stoch_N"] == 120
        assert abs(row["key_shortening_stoch"] - 2 * log2(120)) < 1e-12
    by_n = {r["n"]: r for r in rows}
    # brute stochastic counts at d = 3 (frozen): 45 at n = 2, 165 at n = 3, out of reach at n = 10
    assert by_n[2]["brute_stoch"] == 45 and by_n[3]["brute_stoch"] == 165
    assert by_n[10]["brute_stoch"] is None and by_n[10]["caveat"]


def test_table_serialization():
    rows = overhead_table([3], [100], N=4)
    js = table_json(rows)
    assert isinstance(js[0]["g_perm_binomial"], str)
    assert int(js[0]["g_perm_binomial"]) == rows[0]["g_perm_binomial"]
    # (n+1)^(d^(2N)-1) has about 13000 digits: reported approximately
    power = js[0]["g_perm_power"]
    assert power.startswith("~") and int(power.split("e+")[1]) == int((3 ** 8 - 1) * np.log10(101))
    text = table_csv(rows)
    assert text.splitlines()[0] == ",".join(TABLE_COLUMNS)
    assert big_int_str(10 ** 20) == "1" + "0" * 20
