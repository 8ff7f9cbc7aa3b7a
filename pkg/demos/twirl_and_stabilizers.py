"""
Twirls, stabilizer states and the anti-identity
===============================================

The Heisenberg-Weyl twirl depolarizes completely, stabilizer states are
the Clifford orbit of |0...0>, and the anti-identity operator fixes
six-fold tensor powers of qubit stabilizer states.
"""

import numpy as np

from stabfinetti.qnum import (anti_identity_rep, clifford_group, dimension_bound_gap,
                              max_entangled, random_density, stabilizer_states, twirl_hw)

rng = np.random.default_rng(0)

# Twirling any qutrit state gives I/3
rho = random_density(3, rng)
print("twirl deviation:", np.abs(twirl_hw(rho) - np.eye(3) / 3).max())

# omega_XEN <= dim(N) omega_XE (x) 1_N, tight on a maximally entangled state
print("random state gap:", dimension_bound_gap(random_density(8, rng), [2, 2, 2], 2))
print("maximally entangled gap:", dimension_bound_gap(max_entangled(4), [2, 2, 4], 2))

# Census: d^r prod_k (d^k + 1)
for r, d in ((1, 2), (1, 3), (2, 2)):
    print(f"r={r} d={d}: {stabilizer_states(r, d).count} stabilizer states")
print("single-qubit Clifford group modulo phase:", len(clifford_group(1, 2)))

# The anti-identity operator on six qubits
R = anti_identity_rep(1)
v = stabilizer_states(1, 2).states[3]
v6 = v
for _ in range(5):
    v6 = np.kron(v6, v)
print("R |s>^6 = |s>^6 error:", np.abs(R @ v6 - v6).max())
print("R^2 = 1 error:", np.abs(R @ R - np.eye(64)).max())
