"""
Min-entropy and key length against general attacks
===================================================

Solve the guessing-probability SDP for a few states, then turn a
collective-attack key length into a general-attack one using the
symmetric-subspace overhead g.
"""

from math import log2

import numpy as np

from stabfinetti.entropy import (KeyBudget, definetti_chain_probe, general_attack_budget,
                                 min_entropy, purification_penalty_check, random_chain_state)
from stabfinetti.qnum import max_entangled, random_cq, random_density

rng = np.random.default_rng(1)

# H_min(X|E) = -1 when E holds a maximally entangled partner
res = min_entropy(max_entangled(2), (2, 2))
print(f"maximally entangled: H_min = {res.value_bits:.6f}, gap = {res.gap:.1e}")

# With trivial E the min-entropy is -log2 of the largest probability
p = np.array([0.6, 0.3, 0.1])
print("classical:", min_entropy(np.diag(p).astype(complex), (3, 1)).value_bits, -log2(0.6))

# A random cq state lies between 0 and log2 d_X
print("random cq:", min_entropy(random_cq(2, 2, rng), (2, 2)).value_bits)

# Adding a system N costs at most 2 log2 dim N
chk = purification_penalty_check(random_density(8, rng), (2, 2, 2))
print(f"H_min(X|EN) = {chk['lhs']:.4f} >= {chk['rhs']:.4f}")

# g = 120 for the qutrit stochastic group: about 13.8 bits are lost
b = general_attack_budget(KeyBudget(1000, 120, 1e-9), "both")
print(f"l' = {b['l_general']:.3f}  eps' = {b['eps_general_thesis']:.2e} (g eps) "
      f"or {b['eps_general_erratum']:.2e} (4 g sqrt(2 eps))")

# Conditioning on a few classical outcomes makes the next one nearly independent
out = definetti_chain_probe(random_chain_state(2, 2, 4, rng), 2, 2, 4)
print("chain gaps:", np.round(out["per_m"], 5), "bound", round(out["bound"], 5))
