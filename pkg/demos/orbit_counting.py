"""
Orbit counting for orthogonal groups over F_d
=============================================

Enumerate the permutation, discrete-orthogonal and stochastic-orthogonal
groups, count orbits of vector tuples three ways and compare with the
closed forms.
"""

from stabfinetti.symgroups import (closed_form_counts, d_factor_check, enumerate_group,
                                   orbit_report)

# The qutrit discrete orthogonal group on three copies has 48 elements
g = enumerate_group("discrete-orthogonal", 3, 3)
print("order of the discrete orthogonal group, n=3, d=3:", g.order)

# Brute force, Burnside and the Gram-class closed form agree on single vectors
rep = orbit_report(g, 1)
print("K=1 orbits:", rep.brute_count, rep.burnside_count, rep.closed_form)

# For pairs the closed form D_2 = d^3+d^2+d+1 needs a large enough group
for n in (3, 4):
    rep = orbit_report(enumerate_group("disc", n, 3), 2)
    print(f"n={n} pairs: count={rep.brute_count} closed form={rep.closed_form} realized={rep.realized}")

# Over F_2 the norm x.x equals the parity of x, so norms carry less
# information and the count exceeds the odd-d closed form
rep = orbit_report(enumerate_group("disc", 3, 2), 2)
print("d=2, n=3 pairs:", rep.brute_count, "vs closed form", rep.closed_form)

# The stochastic group's overhead is independent of n, unlike the
# permutation count which grows polynomially
for n in (2, 10, 1000):
    cf = closed_form_counts(3, K=2, N=1, n=n)
    print(f"n={n}: g_perm={cf['g_perm_binomial']} g_stoch={cf['g_stoch']}")

# The predicted factor d between O_n and the discrete group one size down
for n, d in ((3, 2), (2, 3), (4, 3)):
    r = d_factor_check(n, d)
    print(f"n={n} d={d}: stoch={r['stoch_count']} disc={r['disc_count']} ratio={r['ratio']}")
