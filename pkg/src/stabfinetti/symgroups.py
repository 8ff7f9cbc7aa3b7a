"""Matrix groups over F_d and orbit counting on K-tuples of vectors.

Three groups act on F_d^n by matrix multiplication:

* ``permutation``: the n x n permutation matrices P_n,
* ``discrete-orthogonal``: O^T O = 1 (mod d),
* ``stochastic-orthogonal``: additionally O 1 = 1 (mod d).

For each group the number of orbits on (F_d^n)^K is computed twice,
by connected components over all points and by Burnside averaging, and
compared with closed-form dimension formulas.
"""
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, log2

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import DEFAULT, DomainError, ResourceError

KINDS = ("permutation", "discrete-orthogonal", "stochastic-orthogonal", "custom")
_ALIASES = {
    "perm": "permutation",
    "disc": "discrete-orthogonal",
    "discrete-orth": "discrete-orthogonal",
    "stoch": "stochastic-orthogonal",
    "stoch-orth": "stochastic-orthogonal",
}


def canonical_kind(kind):
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise DomainError(f"unknown group kind {kind!r}")
    return kind


def is_prime(d):
    d = int(d)
    if d < 2:
        return False
    return all(d % p for p in range(2, int(d ** 0.5) + 1))


def _check_prime(d):
    if not is_prime(d):
        raise DomainError(f"d={d} is not prime")


def rank_mod(a, d):
    """Rank of an integer matrix over F_d (d prime)."""
    return len(rref_mod(a, d)[1])


def rref_mod(a, d):
    """Reduced row echelon form over F_d.  Returns (R, pivot_columns)."""
    m = np.array(a, dtype=np.int64) % d
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if len(nz) == 0:
            continue
        p = r + nz[0]
        m[[r, p]] = m[[p, r]]
        m[r] = (m[r] * pow(int(m[r, c]), -1, d)) % d
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        if len(others):
            m[others] = (m[others] - np.outer(m[others, c], m[r])) % d
        pivots.append(c)
        r += 1
    return m, pivots


class ModMatrix:
    """n x n matrix with entries in F_d."""

    __slots__ = ("a", "d")

    def __init__(self, entries, d):
        _check_prime(d)
        a = np.array(entries, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DomainError("ModMatrix needs a square, nonempty array")
        self.a = a % d
        self.a.flags.writeable = False
        self.d = int(d)

    @property
    def n(self):
        return self.a.shape[0]

    @classmethod
    def identity(cls, n, d):
        return cls(np.eye(n, dtype=np.int64), d)

    def __matmul__(self, other):
        if isinstance(other, ModVector):
            if other.n != self.n or other.d != self.d:
                raise DomainError("dimension mismatch")
            return ModVector(self.a @ other.v, self.d)
        if other.n != self.n or other.d != self.d:
            raise DomainError("dimension mismatch")
        return ModMatrix(self.a @ other.a, self.d)

    @property
    def T(self):
        return ModMatrix(self.a.T, self.d)

    def __eq__(self, other):
        return isinstance(other, ModMatrix) and self.d == other.d and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash((self.d, self.a.tobytes()))

    def __repr__(self):
        return f"ModMatrix({self.a.tolist()}, d={self.d})"

    def is_orthogonal(self):
        return np.array_equal((self.a.T @ self.a) % self.d, np.eye(self.n, dtype=np.int64))

    def is_stochastic(self):
        return np.all(self.a.sum(axis=1) % self.d == 1)

    def is_invertible(self):
        return rank_mod(self.a, self.d) == self.n

    def nullity_minus_identity(self):
        """dim ker(O - 1) over F_d, i.e. log_d of the number of fixed vectors."""
        return self.n - rank_mod(self.a - np.eye(self.n, dtype=np.int64), self.d)

    def tolist(self):
        return self.a.tolist()


class ModVector:
    """Vector in F_d^n."""

    __slots__ = ("v", "d")

    def __init__(self, entries, d):
        _check_prime(d)
        self.v = np.array(entries, dtype=np.int64).reshape(-1) % d
        self.d = int(d)

    @property
    def n(self):
        return len(self.v)

    def __eq__(self, other):
        return isinstance(other, ModVector) and self.d == other.d and np.array_equal(self.v, other.v)

    def __hash__(self):
        return hash((self.d, self.v.tobytes()))

    def __repr__(self):
        return f"ModVector({self.v.tolist()}, d={self.d})"


def bilinear_form(x, y):
    """Standard form sum_i x_i y_i mod d."""
    if x.n != y.n or x.d != y.d:
        raise DomainError(f"mismatched vectors: n={x.n},{y.n} d={x.d},{y.d}")
    return int(np.dot(x.v, y.v) % x.d)


@dataclass
class GroupTable:
    kind: str
    n: int
    d: int
    elements: list = field(repr=False)

    @property
    def order(self):
        return len(self.elements)

    def stack(self):
        """All elements as an int array of shape (order, n, n)."""
        return np.stack([g.a for g in self.elements])

    def to_json(self, with_elements=False):
        out = {"kind": self.kind, "n": self.n, "d": self.d, "order": self.order}
        if with_elements:
            out["elements"] = [g.tolist() for g in self.elements]
        return out


def _keys(mats, d):
    """Hashable integer key per matrix in an (m, n, n) stack."""
    m = mats.reshape(len(mats), -1)
    if m.shape[1] * log2(d) < 62:
        w = d ** np.arange(m.shape[1], dtype=np.int64)
        return m @ w
    return np.array([row.tobytes() for row in m], dtype=object)


def verify_closure(mats, d):
    """True if the stack is exactly a group.

    Elements are added greedily as generators; the set is a group iff every
    generated subgroup stays inside it and the last one exhausts it.
    """
    mats = np.asarray(mats, dtype=np.int64) % d
    n = mats.shape[1]
    members = {m.tobytes() for m in mats}
    if np.eye(n, dtype=np.int64).tobytes() not in members:
        return False
    sub = set()
    gens = []
    for m in mats:
        if m.tobytes() in sub:
            continue
        gens.append(m)
        sub = _closure_keys(gens, d, n, members)
        if sub is None:
            return False
        if len(sub) == len(members):
            return True
    return len(sub) == len(members)


def _closure_keys(gens, d, n, inside=None, limit=None):
    """Keys of the subgroup generated by ``gens``; None if it leaves ``inside``."""
    eye = np.eye(n, dtype=np.int64)
    seen = {eye.tobytes()}
    frontier = [eye]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = (g @ a) % d
                k = b.tobytes()
                if k not in seen:
                    if inside is not None and k not in inside:
                        return None
                    seen.add(k)
                    nxt.append(b)
                    if limit is not None and len(seen) > limit:
                        raise ResourceError("matrix_budget", len(seen), limit)
        frontier = nxt
    return seen


def _orthogonal_stack(n, d, stochastic, budget):
    vecs = np.array(list(itertools.product(range(d), repeat=n)), dtype=np.int64)
    ok = (vecs * vecs).sum(1) % d == 1
    if stochastic:
        ok &= vecs.sum(1) % d == 1
    cols = vecs[ok]
    gram = (cols @ cols.T) % d == 0
    found = []
    visited = 0

    def extend(chosen, allowed):
        nonlocal visited
        if len(chosen) == n:
            found.append(cols[chosen].T.copy())
            return
        for j in np.nonzero(allowed)[0]:
            visited += 1
            if visited > budget:
                raise ResourceError("matrix_budget", visited, budget)
            extend(chosen + [j], allowed & gram[j])

    extend([], np.ones(len(cols), dtype=bool))
    return np.array(found, dtype=np.int64).reshape(-1, n, n)


def enumerate_group(kind, n, d, config=DEFAULT):
    """All elements of the requested group, with closure verified.

    Orthogonal groups are built column by column: each new column must have
    unit norm (and unit coordinate sum in the stochastic case) and be
    orthogonal to the columns already placed.  ``config.matrix_budget`` caps
    the number of partial matrices visited.
    """
    kind = canonical_kind(kind)
    _check_prime(d)
    if n < 1:
        raise DomainError("n must be positive")
    if kind == "custom":
        raise DomainError("custom groups are built with group_from_generators")
    if kind == "permutation":
        perms = list(itertools.permutations(range(n)))
        if len(perms) > config.matrix_budget:
            raise ResourceError("matrix_budget", len(perms), config.matrix_budget)
        eye = np.eye(n, dtype=np.int64)
        mats = np.array([eye[:, list(p)] for p in perms])
    else:
        mats = _orthogonal_stack(n, d, kind == "stochastic-orthogonal", config.matrix_budget)
    order = np.argsort(_keys(mats, d), kind="stable")
    mats = mats[order]
    if not verify_closure(mats, d):
        raise RuntimeError(f"enumerated {kind} set for n={n}, d={d} is not a group")
    return GroupTable(kind, n, d, [ModMatrix(m, d) for m in mats])


def group_from_generators(gens, d, config=DEFAULT):
    """Closure of a list of invertible ModMatrix (or arrays) as a custom group."""
    gens = [g.a if isinstance(g, ModMatrix) else np.asarray(g, dtype=np.int64) % d for g in gens]
    n = gens[0].shape[0]
    eye = np.eye(n, dtype=np.int64)
    seen = {eye.tobytes(): eye}
    frontier = [eye]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = (g @ a) % d
                k = b.tobytes()
                if k not in seen:
                    seen[k] = b
                    nxt.append(b)
                    if len(seen) > config.matrix_budget:
                        raise ResourceError("matrix_budget", len(seen), config.matrix_budget)
        frontier = nxt
    mats = np.array(list(seen.values()))
    mats = mats[np.argsort(_keys(mats, d), kind="stable")]
    return GroupTable("custom", n, d, [ModMatrix(m, d) for m in mats])


def generating_subset(group):
    """A small generating subset, chosen greedily in element order."""
    d, n = group.d, group.n
    sub = set()
    gens = []
    for g in group.elements:
        if g.a.tobytes() in sub:
            continue
        gens.append(g)
        sub = _closure_keys([h.a for h in gens], d, n)
        if len(sub) == group.order:
            break
    return gens


def _points(n, d, K):
    """All K-tuples as an (d^(nK), K, n) array; index = base-d digits."""
    idx = np.arange(d ** (n * K), dtype=np.int64)
    digits = (idx[:, None] // d ** np.arange(n * K - 1, -1, -1, dtype=np.int64)) % d
    return digits.reshape(-1, K, n)


def _point_index(pts, d):
    flat = pts.reshape(len(pts), -1)
    w = d ** np.arange(flat.shape[1] - 1, -1, -1, dtype=np.int64)
    return flat @ w


def orbit_count_brute(group, K, config=DEFAULT):
    """Number of orbits on (F_d^n)^K, from connected components of the action graph."""
    n, d = group.n, group.d
    npts = d ** (n * K)
    if npts > config.orbit_point_budget:
        raise ResourceError("orbit_point_budget", npts, config.orbit_point_budget)
    pts = _points(n, d, K)
    src = np.arange(npts)
    rows, cols = [], []
    for g in generating_subset(group):
        img = np.einsum("ij,pkj->pki", g.a, pts) % d
        rows.append(src)
        cols.append(_point_index(img, d))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(npts, npts))
    ncomp, _ = connected_components(graph, directed=True, connection="weak")
    return int(ncomp)


def orbit_partition(group, K, config=DEFAULT):
    """Orbit label of every K-tuple (same indexing as the brute count)."""
    n, d = group.n, group.d
    npts = d ** (n * K)
    if npts > config.orbit_point_budget:
        raise ResourceError("orbit_point_budget", npts, config.orbit_point_budget)
    pts = _points(n, d, K)
    src = np.arange(npts)
    rows, cols = [], []
    for g in generating_subset(group):
        rows.append(src)
        cols.append(_point_index(np.einsum("ij,pkj->pki", g.a, pts) % d, d))
    graph = coo_matrix((np.ones(npts * len(rows), dtype=np.int8),
                        (np.concatenate(rows), np.concatenate(cols))), shape=(npts, npts))
    return pts, connected_components(graph, directed=True, connection="weak")[1]


def orbit_count_burnside(group, K):
    """(1/|G|) sum_O (d^nullity(O-1))^K, checked to be an integer."""
    total = sum(group.d ** (g.nullity_minus_identity() * K) for g in group.elements)
    avg = Fraction(total, group.order)
    if avg.denominator != 1:
        raise RuntimeError(f"Burnside average {avg} is not an integer; input is not a group")
    return int(avg)


def D_values(d, K):
    """[D_1, ..., D_K] with D_1 = d+1 and D_k = (d^k + 1) D_{k-1}."""
    out = [d + 1]
    for k in range(2, K + 1):
        out.append((d ** k + 1) * out[-1])
    return out[:K]


def closed_form_counts(d, K=2, N=1, n=None):
    """Closed-form orbit and dimension counts.

    ``g_stoch_N`` follows the rule "one extra factor d" for the all-ones
    direction, ``g_stoch_N_product`` is the literal product
    prod_{k=0}^{2N} d (d^k + 1).  ``g_stoch_tuple_N`` is d^(2N) D_{2N}, which
    accounts for one all-ones coefficient per tensor copy.  The permutation
    counts need ``n``.
    """
    _check_prime(d)
    if K < 1 or N < 1:
        raise DomainError("K and N must be positive")
    D = D_values(d, max(K, 2 * N))
    out = {
        "d": d,
        "K": K,
        "N": N,
        "D": D[:K],
        "g_stoch": d * D[1],
        "g_stoch_N": d * D[2 * N - 1],
        "g_stoch_N_product": _prod(d * (d ** k + 1) for k in range(0, 2 * N + 1)),
        "g_stoch_tuple_N": d ** (2 * N) * D[2 * N - 1],
    }
    if n is not None:
        out["n"] = n
        out["g_perm_binomial"] = comb(n + d ** (2 * N) - 1, n)
        out["g_perm_power"] = (n + 1) ** (d ** (2 * N) - 1)
    return out


def _prod(it):
    p = 1
    for v in it:
        p *= v
    return p


def closed_form_for(kind, n, d, K):
    """The closed form matched against an orbit count of (kind, n, d, K).

    permutation: multisets of n rows from F_d^K, C(n + d^K - 1, n);
    discrete-orthogonal: D_K; stochastic-orthogonal: d D_K.
    """
    kind = canonical_kind(kind)
    if kind == "permutation":
        return comb(n + d ** K - 1, n)
    if kind == "discrete-orthogonal":
        return D_values(d, K)[-1]
    if kind == "stochastic-orthogonal":
        return d * D_values(d, K)[-1]
    return None


@dataclass
class OrbitReport:
    kind: str
    n: int
    d: int
    order: int
    K: int
    brute_count: int
    burnside_count: int
    closed_form: int
    realized: bool

    @property
    def within_bound(self):
        return self.closed_form is None or self.brute_count <= self.closed_form

    def to_json(self):
        return {
            "kind": self.kind, "n": self.n, "d": self.d, "order": self.order, "K": self.K,
            "counts": {
                "brute": self.brute_count,
                "burnside": self.burnside_count,
                "closed_form": self.closed_form,
                "realized": self.realized,
                "within_bound": self.within_bound,
            },
        }


def orbit_report(group, K, config=DEFAULT):
    brute = orbit_count_brute(group, K, config)
    burn = orbit_count_burnside(group, K)
    if brute != burn:
        raise RuntimeError(f"brute {brute} != Burnside {burn} for {group.kind} n={group.n} d={group.d} K={K}")
    cf = closed_form_for(group.kind, group.n, group.d, K)
    return OrbitReport(group.kind, group.n, group.d, group.order, K, brute, burn, cf, brute == cf)


def gram_classifier(vectors):
    """Orbit invariant of a tuple: Gram matrix and column-relation pattern.

    Returns (gram, rref) as tuples of tuples.  ``rref`` is the reduced row
    echelon form of the n x K matrix with the vectors as columns, nonzero
    rows only; it is unchanged by left multiplication with any invertible O
    and so encodes the linear relations among the vectors.
    """
    if not vectors:
        return ((), ())
    d = vectors[0].d
    if any(v.d != d or v.n != vectors[0].n for v in vectors):
        raise DomainError("vectors must share n and d")
    X = np.stack([v.v for v in vectors], axis=1)
    gram = (X.T @ X) % d
    R, piv = rref_mod(X, d)
    return tuple(map(tuple, gram.tolist())), tuple(map(tuple, R[:len(piv)].tolist()))


def permutation_rep(group, K=1):
    """Basis-permutation matrices |x> -> |O x> on (C^d)^{n K}, one per element."""
    n, d = group.n, group.d
    pts = _points(n, d, K)
    N = len(pts)
    out = []
    for g in group.elements:
        img = _point_index(np.einsum("ij,pkj->pki", g.a, pts) % d, d)
        P = np.zeros((N, N))
        P[img, np.arange(N)] = 1.0
        out.append(P)
    return out


def _close_matrices(mats, limit, atol=1e-9):
    """Closure of a set of matrices under multiplication.

    Rounded keys catch most repeats; a key miss is confirmed against every
    element found so far, since rounding can split two nearly equal matrices.
    """
    found = []
    seen = set()

    def add(b):
        k = np.round(b, 8).tobytes()
        if k in seen:
            return False
        if found and np.abs(np.asarray(found) - b).max(axis=(1, 2)).min() < 1e3 * atol:
            return False
        seen.add(k)
        found.append(b)
        if len(found) > limit:
            raise DomainError(f"set not closed within {limit} elements")
        return True

    frontier = [np.asarray(m) for m in mats if add(np.asarray(m))]
    while frontier:
        nxt = []
        for a in frontier:
            for g in mats:
                b = g @ a
                if add(b):
                    nxt.append(b)
        frontier = nxt
    return found


def fixed_space_dimension(rep, close=False, limit=100_000, tol=1e-9):
    """Rank of the group-average projector (1/|G|) sum_s s.

    For 0/1 permutation matrices the rank equals the average trace and is
    computed exactly; otherwise the projector is formed numerically and its
    eigenvalues above 1/2 are counted (each must be within ``tol`` of 0 or 1).
    """
    mats = [np.asarray(m) for m in rep]
    if close:
        mats = _close_matrices(mats, limit)
    if all(np.isin(m, (0, 1)).all() and np.all(m.sum(0) == 1) and np.all(m.sum(1) == 1) for m in mats):
        avg = Fraction(int(sum(int(np.trace(m)) for m in mats)), len(mats))
        if avg.denominator != 1:
            raise DomainError("trace average is not an integer; set is not closed")
        return int(avg)
    P = sum(mats) / len(mats)
    if np.abs(P @ P - P).max() > 1e3 * tol:
        raise DomainError("group average is not a projector; set is not closed")
    ev = np.linalg.eigvalsh((P + P.conj().T) / 2)
    return int(np.sum(ev > 0.5))


def d_factor_check(n, d, K=2, config=DEFAULT):
    """Compare orbit counts of O_n(d) with those of the discrete group one size down.

    Returns the two counts and the ratio; when d does not divide n the all-ones
    vector is anisotropic and the ratio is predicted to be d.
    """
    big = orbit_count_brute(enumerate_group("stochastic-orthogonal", n, d, config), K, config)
    small = orbit_count_brute(enumerate_group("discrete-orthogonal", n - 1, d, config), K, config)
    return {"n": n, "d": d, "K": K, "stoch_count": big, "disc_count": small,
            "ratio": Fraction(big, small), "predicted": d * small, "holds": big == d * small}
