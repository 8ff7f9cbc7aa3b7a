"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one PASS/FAIL line (collected again in the terminal
summary) before asserting.
"""
import subprocess
import sys
import time
from math import comb, log, log2, sqrt

import numpy as np

from stabfinetti.config import ResourceError
from stabfinetti.entropy import (KeyBudget, definetti_chain_probe, general_attack_budget,
                                 min_entropy, purification_penalty_check, random_chain_state)
from stabfinetti.fidelity import (ChannelSpec, FidelityInstance, exact_clifford_decoder,
                                  hierarchy_level)
from stabfinetti.qnum import (anti_identity_rep, clifford_group, dimension_bound_gap,
                              max_entangled, random_cq, random_density, stabilizer_states,
                              twirl_hw)
from stabfinetti.symgroups import (closed_form_counts, d_factor_check, enumerate_group,
                                   fixed_space_dimension, orbit_report, permutation_rep)


def test_criterion_01_orbit_dimension_cross_check(acceptance):
    t0 = time.time()
    burnside_bad, bound_bad, dfactor_bad, skipped = [], [], [], []
    for kind in ("perm", "discrete-orthogonal", "stochastic-orthogonal"):
        for n in (1, 2, 3, 4):
            for d in (2, 3):
                try:
                    g = enumerate_group(kind, n, d)
                except ResourceError:
                    skipped.append((kind, n, d))
                    continue
                for K in (1, 2):
                    try:
                        rep = orbit_report(g, K)
                    except ResourceError:
                        skipped.append((kind, n, d, K))
                        continue
                    if rep.brute_count != rep.burnside_count:
                        burnside_bad.append((kind, n, d, K, rep.brute_count, rep.burnside_count))
                    if not rep.within_bound:
                        bound_bad.append((kind, n, d, K, rep.brute_count, rep.closed_form))
    # d does not divide n; n = 1 has no smaller discrete group to compare with
    for n in (2, 3, 4):
        for d in (2, 3):
            if n % d:
                r = d_factor_check(n, d)
                if not r["holds"]:
                    dfactor_bad.append((n, d, r["stoch_count"], r["disc_count"]))
    elapsed = time.time() - t0
    passed = not burnside_bad and not bound_bad and not dfactor_bad and elapsed <= 300
    acceptance(1, passed, f"burnside mismatches={burnside_bad} count>closed_form={bound_bad} "
                          f"d-factor failures={dfactor_bad} skipped={skipped} time={elapsed:.1f}s")
    assert not burnside_bad, burnside_bad
    assert not bound_bad, f"orbit counts above the closed form: {bound_bad}"
    assert not dfactor_bad, f"d-factor relation fails: {dfactor_bad}"
    assert elapsed <= 300


def test_criterion_02_permutation_fixed_space(acceptance):
    bad = []
    for n in (1, 2, 3):
        for d in (2, 3):
            dim = fixed_space_dimension(permutation_rep(enumerate_group("perm", n, d), 2))
            if dim != comb(n + d * d - 1, n):
                bad.append((n, d, dim))
    ex = fixed_space_dimension(permutation_rep(enumerate_group("perm", 2, 2), 2))
    passed = not bad and ex == 10
    acceptance(2, passed, f"mismatches={bad} n=2,d=2 -> {ex}")
    assert passed


def test_criterion_03_closed_forms(acceptance):
    bad = []
    for d in (2, 3, 5, 7, 11):
        cf = closed_form_counts(d)
        if cf["D"] != [d + 1, d ** 3 + d ** 2 + d + 1] or cf["g_stoch"] != d ** 4 + d ** 3 + d ** 2 + d:
            bad.append(d)
    g3 = closed_form_counts(3)["g_stoch"]
    passed = not bad and g3 == 120
    acceptance(3, passed, f"bad d={bad} g_stoch(3)={g3}")
    assert passed


def test_criterion_04_twirling(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(0)
    dev = 0.0
    for d in (2, 3, 5):
        for _ in range(100):
            dev = max(dev, float(np.abs(twirl_hw(random_density(d, rng)) - np.eye(d) / d).max()))
    worst = min(dimension_bound_gap(random_density(8, rng), [2, 2, 2], 2) for _ in range(100))
    tight = dimension_bound_gap(max_entangled(4), [2, 2, 4], 2)
    elapsed = time.time() - t0
    passed = dev < 1e-12 and worst >= -1e-9 and abs(tight) <= 1e-9 and elapsed <= 60
    acceptance(4, passed, f"max twirl deviation={dev:.2e} min eig={worst:.3e} tight={tight:.1e} time={elapsed:.1f}s")
    assert passed


def test_criterion_05_stabilizer_census(acceptance):
    t0 = time.time()
    counts = {(r, d): stabilizer_states(r, d).count for r, d in ((1, 2), (1, 3), (2, 2))}
    R = anti_identity_rep(1)
    fix_err = 0.0
    for v in stabilizer_states(1, 2).states:
        v6 = v
        for _ in range(5):
            v6 = np.kron(v6, v)
        fix_err = max(fix_err, float(np.abs(R @ v6 - v6).max()))
    cl = clifford_group(1, 2)
    rng = np.random.default_rng(0)
    comm_err = 0.0
    for i in rng.choice(len(cl), 20, replace=False):
        U6 = cl[i].matrix
        for _ in range(5):
            U6 = np.kron(U6, cl[i].matrix)
        comm_err = max(comm_err, float(np.abs(R @ U6 - U6 @ R).max()))
    elapsed = time.time() - t0
    passed = (counts == {(1, 2): 6, (1, 3): 12, (2, 2): 60} and fix_err < 1e-10 and comm_err < 1e-10
              and elapsed <= 120)
    acceptance(5, passed, f"counts={counts} fix err={fix_err:.1e} commutator err={comm_err:.1e} time={elapsed:.1f}s")
    assert passed


def test_criterion_06_min_entropy(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(0)
    gaps, errs = [], []
    res = min_entropy(np.kron(np.eye(2) / 2, random_density(2, rng)), (2, 2))
    gaps.append(res.gap)
    errs.append(abs(res.value_bits - 1))
    res = min_entropy(max_entangled(2), (2, 2))
    gaps.append(res.gap)
    errs.append(abs(res.value_bits + 1))
    for _ in range(5):
        p = rng.dirichlet(np.ones(3))
        res = min_entropy(np.diag(p).astype(complex), (3, 1))
        gaps.append(res.gap)
        errs.append(abs(res.value_bits + log2(p.max())))
    for _ in range(5):
        gaps.append(min_entropy(random_cq(2, 3, rng), (2, 3)).gap)
    slack = min(purification_penalty_check(random_density(8, rng), (2, 2, 2))["slack"] for _ in range(50))
    elapsed = time.time() - t0
    passed = max(gaps) <= 1e-7 and max(errs) < 1e-6 and slack >= -1e-6 and elapsed <= 120
    acceptance(6, passed, f"max gap={max(gaps):.1e} max value err={max(errs):.1e} "
                          f"min purification slack={slack:.3e} time={elapsed:.1f}s")
    assert passed


def test_criterion_07_hierarchy(acceptance):
    t0 = time.time()
    problems = []
    for name, p, analytic in (("identity", None, 1.0), ("depolarizing", 1.0, 0.25), ("bitflip", 0.1, None)):
        inst = FidelityInstance(ChannelSpec.named(name, p), d_M=2)
        F_exact = exact_clifford_decoder(inst)["F_exact"]
        for sym in ("perm", "stoch-orth"):
            recs = {n: hierarchy_level(inst, n, sym) for n in (1, 2)}
            if recs[2].primal > recs[1].primal + 1e-6:
                problems.append((name, sym, "not monotone"))
            for n, rec in recs.items():
                if rec.dual_certificate < rec.primal - 1e-5:
                    problems.append((name, sym, n, "dual below primal"))
                if rec.primal < F_exact - 1e-5:
                    problems.append((name, sym, n, "below oracle"))
                if name == "identity" and abs(rec.primal - 1) > 1e-6:
                    problems.append((name, sym, n, rec.primal))
                if name == "depolarizing" and abs(rec.primal - analytic) > 1e-4:
                    problems.append((name, sym, n, rec.primal))
    elapsed = time.time() - t0
    passed = not problems and elapsed <= 600
    acceptance(7, passed, f"problems={problems} time={elapsed:.1f}s")
    assert passed


def test_criterion_08_overhead_calculus(acceptance):
    b = general_attack_budget(KeyBudget(1000, 120, 1e-9), "both")
    e1 = abs(b["l_general"] - 986.186)
    e2 = abs(b["eps_general_thesis"] - 1.2e-7)
    e3 = abs(b["eps_general_erratum"] - 4 * 120 * sqrt(2e-9))
    shortening = abs((b["l_collective"] - b["l_general"]) - 2 * log2(120))
    passed = e1 <= 1e-3 and e2 <= 1e-12 and e3 <= 1e-9 and shortening < 1e-12
    acceptance(8, passed, f"l'={b['l_general']:.6f} eps'_thesis={b['eps_general_thesis']:.6e} "
                          f"eps'_erratum={b['eps_general_erratum']:.6e}")
    assert passed


def test_criterion_09_chain_probe(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(0)
    bound = 2 * log(2) * log(2) / 4
    worst = max(definetti_chain_probe(random_chain_state(2, 2, 4, rng), 2, 2, 4)["min_gap"] for _ in range(30))
    elapsed = time.time() - t0
    passed = worst <= bound and elapsed <= 60
    acceptance(9, passed, f"max min-over-m gap={worst:.4e} bound={bound:.4e} time={elapsed:.1f}s")
    assert passed


def test_criterion_10_determinism(acceptance):
    cmd = [sys.executable, "-m", "stabfinetti", "verify", "--suite", "all", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    passed = a.stdout == b.stdout and len(a.stdout) > 0 and a.returncode == b.returncode == 0
    acceptance(10, passed, f"identical={a.stdout == b.stdout} bytes={len(a.stdout)} exit codes={a.returncode},{b.returncode}")
    assert passed
