"""Dense quantum numerics: states, Heisenberg-Weyl and Clifford operators,
stabilizer states, twirls and the invariant purification.

Operators are plain complex numpy arrays.  Multipartite layouts are given as
a list of factor dimensions, ordered as in the Kronecker product.
"""
from collections import deque
from dataclasses import dataclass, field
from itertools import permutations, product
from math import comb

import numpy as np

from .config import DEFAULT, DomainError, ResourceError


# ---------------------------------------------------------------------------
# tensor plumbing

def _prod(dims):
    p = 1
    for d in dims:
        p *= int(d)
    return p


def partial_trace(mat, dims, keep):
    """Trace out every factor not in ``keep`` (indices into ``dims``).

    The kept factors stay in their original order.
    """
    dims = [int(d) for d in dims]
    keep = sorted(keep)
    k = len(dims)
    if any(i < 0 or i >= k for i in keep):
        raise DomainError(f"factor index out of range: {keep} for {k} factors")
    t = np.asarray(mat).reshape(dims + dims)
    traced = [i for i in range(k) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:k])
    col = list(letters[k:2 * k])
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = _prod(dims[i] for i in keep)
    return res.reshape(dk, dk)


def permute_systems(mat, dims, perm):
    """Reorder tensor factors: factor perm[j] of the input becomes factor j."""
    dims = [int(d) for d in dims]
    k = len(dims)
    t = np.asarray(mat).reshape(dims + dims)
    t = t.transpose(list(perm) + [k + p for p in perm])
    n = _prod(dims)
    return t.reshape(n, n)


def partial_transpose(mat, dims, systems):
    """Transpose the listed tensor factors."""
    dims = [int(d) for d in dims]
    k = len(dims)
    axes = list(range(2 * k))
    for s in systems:
        axes[s], axes[k + s] = axes[k + s], axes[s]
    return np.asarray(mat).reshape(dims + dims).transpose(axes).reshape(mat.shape)


def permute_vector(vec, dims, perm):
    dims = [int(d) for d in dims]
    return np.asarray(vec).reshape(dims).transpose(perm).reshape(-1)


def embed(op, dims, targets):
    """Lift ``op`` acting on factors ``targets`` (in that order) to the full space."""
    dims = [int(d) for d in dims]
    targets = list(targets)
    if len(set(targets)) != len(targets) or any(t < 0 or t >= len(dims) for t in targets):
        raise DomainError(f"bad target factors {targets}")
    rest = [i for i in range(len(dims)) if i not in targets]
    dt = _prod(dims[t] for t in targets)
    if op.shape != (dt, dt):
        raise DomainError(f"operator shape {op.shape} does not match factors of total dim {dt}")
    full = np.kron(op, np.eye(_prod(dims[i] for i in rest)))
    order = targets + rest
    inv = np.argsort(order)
    return permute_systems(full, [dims[i] for i in order], list(inv))


def trace_norm(m):
    return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def hermitize(m):
    return (m + m.conj().T) / 2


def ket(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def max_entangled(d):
    """Normalized projector onto (1/sqrt d) sum_i |ii>."""
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# typed carriers

@dataclass
class DensityMatrix:
    """Complex density matrix over labelled tensor factors."""

    data: np.ndarray = field(repr=False)
    dims: tuple
    labels: tuple = None
    normalized: bool = True

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        self.dims = tuple(int(d) for d in self.dims)
        if self.labels is None:
            self.labels = tuple(f"S{i}" for i in range(len(self.dims)))
        self.labels = tuple(self.labels)
        if len(self.labels) != len(self.dims) or len(set(self.labels)) != len(self.labels):
            raise DomainError("labels must be unique and match dims")
        n = _prod(self.dims)
        if self.data.shape != (n, n):
            raise DomainError(f"matrix shape {self.data.shape} does not match dims {self.dims}")
        tol = DEFAULT.tol
        if np.abs(self.data - self.data.conj().T).max() > max(tol.herm, 1e-12 * np.abs(self.data).max()) * 10:
            raise DomainError("matrix is not Hermitian")
        self.data = hermitize(self.data)
        if np.linalg.eigvalsh(self.data).min() < -tol.psd:
            raise DomainError("matrix is not positive semidefinite")
        if self.normalized and abs(np.trace(self.data).real - 1) > tol.trace:
            raise DomainError(f"trace {np.trace(self.data).real} != 1")

    @property
    def dim(self):
        return self.data.shape[0]

    def index(self, label):
        if label not in self.labels:
            raise DomainError(f"unknown factor label {label!r}")
        return self.labels.index(label)

    def ptrace(self, keep):
        """Reduced state on the labelled factors ``keep``."""
        idx = sorted(self.index(l) for l in keep)
        return DensityMatrix(partial_trace(self.data, self.dims, idx),
                             [self.dims[i] for i in idx], [self.labels[i] for i in idx],
                             self.normalized)

    def reorder(self, labels):
        perm = [self.index(l) for l in labels]
        if len(perm) != len(self.labels):
            raise DomainError("reorder needs every label exactly once")
        return DensityMatrix(permute_systems(self.data, self.dims, perm),
                             [self.dims[i] for i in perm], list(labels), self.normalized)

    def to_json(self):
        return {"dims": list(self.dims), "labels": list(self.labels),
                "re": self.data.real.tolist(), "im": self.data.imag.tolist()}

    @classmethod
    def from_json(cls, rec):
        data = np.array(rec["re"]) + 1j * np.array(rec["im"])
        return cls(data, rec["dims"], rec.get("labels"))


@dataclass
class UnitaryOp:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise DomainError("unitary must be square")
        if np.abs(u.conj().T @ u - np.eye(len(u))).max() > DEFAULT.tol.unitary:
            raise DomainError("matrix is not unitary")
        self.matrix = u

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass
class ChoiState:
    """Normalized Choi matrix (id_in (x) N)(Phi), input factor first."""

    d_in: int
    d_out: int
    data: np.ndarray = field(repr=False)
    check_tp: bool = True

    def __post_init__(self):
        J = np.asarray(self.data, dtype=complex)
        n = self.d_in * self.d_out
        if J.shape != (n, n):
            raise DomainError(f"Choi matrix shape {J.shape} != ({n}, {n})")
        if np.abs(J - J.conj().T).max() > 1e-10:
            raise DomainError("Choi matrix is not Hermitian")
        J = hermitize(J)
        if np.linalg.eigvalsh(J).min() < -1e-9:
            raise DomainError("Choi matrix is not positive semidefinite")
        if self.check_tp:
            marg = partial_trace(J, [self.d_in, self.d_out], [0])
            if np.abs(marg - np.eye(self.d_in) / self.d_in).max() > 1e-10:
                raise DomainError("input marginal of the Choi state is not maximally mixed")
        self.data = J

    @classmethod
    def from_kraus(cls, kraus, d_in):
        phi = max_entangled(d_in)
        J = sum(np.kron(np.eye(d_in), K) @ phi @ np.kron(np.eye(d_in), K).conj().T for K in kraus)
        return cls(d_in, kraus[0].shape[0], J)

    def apply(self, rho):
        """Channel action N(rho) = d_in tr_in[(rho^T (x) 1) J]."""
        J = self.data.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        return self.d_in * np.einsum("ij,iajb->ab", rho, J)

    def to_json(self):
        return {"dims": [self.d_in, self.d_out], "re": self.data.real.tolist(),
                "im": self.data.imag.tolist()}


@dataclass
class StabilizerSet:
    r: int
    d: int
    states: list = field(repr=False)

    @property
    def count(self):
        return len(self.states)

    def projectors(self):
        return [np.outer(v, v.conj()) for v in self.states]

    def to_json(self, with_states=False):
        out = {"r": self.r, "d": self.d, "count": self.count}
        if with_states:
            out["states"] = [DensityMatrix(p, [self.d] * self.r).to_json() for p in self.projectors()]
        return out


def stabilizer_count(r, d):
    c = d ** r
    for k in range(1, r + 1):
        c *= d ** k + 1
    return c


# ---------------------------------------------------------------------------
# Heisenberg-Weyl and Clifford

def shift_clock(d):
    w = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d), 1, axis=0).astype(complex)
    Z = np.diag(w ** np.arange(d))
    return X, Z


def heisenberg_weyl(d):
    """The d^2 operators X^i Z^j, index i*d + j."""
    if d < 2:
        raise DomainError("d must be at least 2")
    X, Z = shift_clock(d)
    out = []
    for i in range(d):
        Xi = np.linalg.matrix_power(X, i)
        for j in range(d):
            out.append(Xi @ np.linalg.matrix_power(Z, j))
    return out


def heisenberg_weyl_multi(r, d):
    """All d^(2r) tensor products of single-qudit X^i Z^j."""
    single = heisenberg_weyl(d)
    out = [np.ones((1, 1), dtype=complex)]
    for _ in range(r):
        out = [np.kron(a, w) for a in out for w in single]
    return out


def twirl_hw(rho):
    """(1/d^2) sum_k W_k rho W_k^dagger over single-factor Heisenberg-Weyl operators."""
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    d = data.shape[0]
    if isinstance(rho, DensityMatrix) and len(rho.dims) != 1:
        raise DomainError("twirl_hw acts on a single tensor factor")
    W = np.array(heisenberg_weyl(d))
    out = np.einsum("kab,bc,kdc->ad", W, data, W.conj()) / d ** 2
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, rho.dims, rho.labels, rho.normalized)
    return out


def twirl_hw_factor(mat, dims, target):
    """Heisenberg-Weyl twirl of one factor of a multipartite operator."""
    d = dims[target]
    out = np.zeros_like(mat, dtype=complex)
    for W in heisenberg_weyl(d):
        U = embed(W, dims, [target])
        out += U @ mat @ U.conj().T
    return out / d ** 2


def clifford_generators(r, d):
    """Fourier and phase gate on each qudit, CZ on neighbouring pairs."""
    w = np.exp(2j * np.pi / d)
    j = np.arange(d)
    F = w ** np.outer(j, j) / np.sqrt(d)
    if d == 2:
        S = np.diag([1, 1j])
    else:
        S = np.diag(w ** ((j * (j - 1) // 2) % d))
    CZ = np.diag(w ** (np.outer(j, j) % d).reshape(-1))
    dims = [d] * r
    gens = []
    for q in range(r):
        gens.append(embed(F, dims, [q]))
        gens.append(embed(S, dims, [q]))
    for q in range(r - 1):
        gens.append(embed(CZ, dims, [q, q + 1]))
    return gens


def canonical_phase(m, atol=1e-9):
    """Multiply by a phase so that the first nonzero entry is real positive."""
    flat = m.reshape(-1)
    k = np.argmax(np.abs(flat) > atol)
    return m * (abs(flat[k]) / flat[k])


def _key(m):
    return (np.round(m.real, 7) + 0.0).tobytes() + (np.round(m.imag, 7) + 0.0).tobytes()


def _bfs(seed, gens, act, limit, what):
    seed = canonical_phase(seed)
    seen = {_key(seed): seed}
    queue = deque([seed])
    while queue:
        a = queue.popleft()
        for g in gens:
            b = canonical_phase(act(g, a))
            k = _key(b)
            if k not in seen:
                seen[k] = b
                queue.append(b)
                if len(seen) > limit:
                    raise ResourceError(what, len(seen), limit)
    return list(seen.values())


def hw_image(M, hw):
    """Index of the Heisenberg-Weyl operator proportional to M, or -1."""
    D = M.shape[0]
    coef = np.einsum("kab,ab->k", hw.conj(), M) / D
    hit = np.nonzero(np.abs(np.abs(coef) - 1) < 1e-8)[0]
    return int(hit[0]) if len(hit) == 1 else -1


def clifford_group(r, d, config=DEFAULT):
    """Projective Clifford group on r qudits, phase-canonicalized.

    Every element is checked to map the X and Z generators on each qudit
    to Heisenberg-Weyl operators up to phase.
    """
    gens = clifford_generators(r, d)
    elems = _bfs(np.eye(d ** r, dtype=complex), gens, lambda g, a: g @ a,
                 config.clifford_budget, "clifford_budget")
    hw = np.array(heisenberg_weyl_multi(r, d))
    X, Z = shift_clock(d)
    paulis = [embed(P, [d] * r, [q]) for q in range(r) for P in (X, Z)]
    stack = np.array(elems)
    for P in paulis:
        conj = stack @ P @ stack.conj().transpose(0, 2, 1)
        coef = np.einsum("kab,mab->mk", hw.conj(), conj) / d ** r
        if not np.all(np.sum(np.abs(np.abs(coef) - 1) < 1e-8, axis=1) == 1):
            raise RuntimeError("a generated element is not Clifford")
    return [UnitaryOp(u) for u in elems]


def stabilizer_states(r, d, config=DEFAULT):
    """Orbit of |0...0> under the Clifford generators, as unit vectors."""
    zero = ket(0, d ** r)
    states = _bfs(zero, clifford_generators(r, d), lambda g, v: g @ v,
                  config.clifford_budget, "clifford_budget")
    expect = stabilizer_count(r, d)
    if len(states) != expect:
        raise RuntimeError(f"found {len(states)} stabilizer states, expected {expect}")
    return StabilizerSet(r, d, states)


# ---------------------------------------------------------------------------
# representations of F_d matrix groups

def transversal_rep(O, r=1):
    """R(O): |x_1 ... x_n> -> |O x> applied to each of the r qudit positions.

    The space is ((C^d)^{(x) r})^{(x) n} in block-major order: block i holds
    the r qudits of copy i.
    """
    a = O.a if hasattr(O, "a") else np.asarray(O)
    d = O.d
    n = a.shape[0]
    N = d ** (n * r)
    if N > 4096:
        raise ResourceError("transversal_rep_dim", N, 4096)
    idx = np.arange(N)
    digits = (idx[:, None] // d ** np.arange(n * r - 1, -1, -1)) % d
    x = digits.reshape(N, n, r)
    y = np.einsum("ij,pjr->pir", a, x) % d
    img = y.reshape(N, -1) @ (d ** np.arange(n * r - 1, -1, -1))
    P = np.zeros((N, N))
    P[img, idx] = 1.0
    return P


def anti_identity_rep(r):
    """(1/2^r)(1 + X^{(x)6} + Y^{(x)6} + Z^{(x)6})^{(x)r}, block-major order."""
    if r not in (1, 2):
        raise ResourceError("anti_identity_r", r, 2)
    I = np.eye(2)
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0 + 0j, -1.0])

    def pow6(P):
        out = np.ones((1, 1), dtype=complex)
        for _ in range(6):
            out = np.kron(out, P)
        return out

    one = (pow6(I) + pow6(X) + pow6(Y) + pow6(Z)) / 2
    R = one
    for _ in range(r - 1):
        R = np.kron(R, one)
    # factor (j, i): qubit j of block i, j-major; move to block-major (i, j)
    perm = [j * 6 + i for i in range(6) for j in range(r)]
    return permute_systems(R, [2] * (6 * r), perm)


def symmetric_projector(D, n):
    """Projector onto Sym^n(C^D) as the average of factor permutations."""
    dims = [D] * n
    N = D ** n
    P = np.zeros((N, N))
    perms = list(permutations(range(n)))
    eye = np.eye(N).reshape(dims + [N])
    for p in perms:
        P += eye.transpose(list(p) + [n]).reshape(N, N)
    return P / len(perms)


# ---------------------------------------------------------------------------
# random objects

def haar_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim, rng, rank=None):
    """Density matrix from a Ginibre matrix (Haar purification when rank = dim)."""
    rank = rank or dim
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def haar_unitary(dim, rng):
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_cq(d_x, d_e, rng, probs=None):
    """Classical-quantum state sum_x p(x) |x><x| (x) rho_x."""
    p = rng.dirichlet(np.ones(d_x)) if probs is None else np.asarray(probs, float)
    out = np.zeros((d_x * d_e, d_x * d_e), dtype=complex)
    for x in range(d_x):
        blk = slice(x * d_e, (x + 1) * d_e)
        out[blk, blk] = p[x] * random_density(d_e, rng)
    return out


# ---------------------------------------------------------------------------
# auxiliary constructions

def invariant_purification(rho, rep, tol=None):
    """Purification |Phi> = (sqrt(rho) (x) 1) sum_i |ii>, invariant under s (x) conj(s).

    ``rho`` is a DensityMatrix or array on T; ``rep`` a list of unitaries on T.
    Returns the vector on T (x) E with E a copy of T.
    """
    tol = DEFAULT.tol.invariance if tol is None else tol
    data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    for k, s in enumerate(rep):
        s = s.matrix if isinstance(s, UnitaryOp) else np.asarray(s)
        err = np.abs(s @ data @ s.conj().T - data).max()
        if err > tol:
            raise DomainError(f"state is not invariant under element {k}: residual {err:.3e}")
    lam, V = np.linalg.eigh(hermitize(data))
    lam = np.clip(lam, 0, None)
    root = (V * np.sqrt(lam)) @ V.conj().T
    phi = root.reshape(-1)
    D = data.shape[0]
    if np.abs(partial_trace(np.outer(phi, phi.conj()), [D, D], [0]) - data).max() > tol:
        raise RuntimeError("purification does not reproduce the state")
    for k, s in enumerate(rep):
        s = s.matrix if isinstance(s, UnitaryOp) else np.asarray(s)
        if np.abs(np.kron(s, s.conj()) @ phi - phi).max() > tol:
            raise RuntimeError(f"purification not invariant under element {k}")
    return phi


def haar_moment_check(n, D, samples, rng, budget=4096):
    """Operator-norm distance between the sample mean of |psi><psi|^{(x) n}
    and Pi_sym / C(D+n-1, n)."""
    if D ** n > budget:
        raise ResourceError("haar_moment_dim", D ** n, budget)
    acc = np.zeros((D ** n, D ** n), dtype=complex)
    batch = 4096
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        V = rng.standard_normal((m, D)) + 1j * rng.standard_normal((m, D))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        T = V
        for _ in range(n - 1):
            T = np.einsum("pa,pb->pab", T, V).reshape(m, -1)
        acc += T.T @ T.conj()
        done += m
    target = symmetric_projector(D, n) / comb(D + n - 1, n)
    return float(np.linalg.norm(acc / samples - target, 2))


def dimension_bound_gap(omega, dims, n_factor):
    """Smallest eigenvalue of dim(N) (omega_rest (x) 1_N) - omega.

    ``n_factor`` is the index of N in ``dims``; the operator inequality
    omega <= dim(N) omega_rest (x) 1_N holds iff the result is >= 0.
    """
    dims = list(dims)
    dN = dims[n_factor]
    rest = [i for i in range(len(dims)) if i != n_factor]
    red = partial_trace(omega, dims, rest)
    lifted = np.kron(red, np.eye(dN))
    order = rest + [n_factor]
    lifted = permute_systems(lifted, [dims[i] for i in order], list(np.argsort(order)))
    return float(np.linalg.eigvalsh(hermitize(dN * lifted - omega)).min())


def design_povm(d):
    """Single-qudit stabilizer-state POVM {P_z / (d+1)}, a state 2-design."""
    states = stabilizer_states(1, d).projectors()
    return [P * d / len(states) for P in states]


def measure_both(xi, povm_a, povm_b):
    """Outcome distribution (signed) of (M_A (x) M_B) applied to xi."""
    E = np.array([np.kron(a, b) for a in povm_a for b in povm_b])
    return np.einsum("kab,ba->k", E, xi).real


def measure_second(xi, d_a, povm_b):
    """Blocks tr_B[(1 (x) E_z) xi] of (1 (x) M_B) applied to xi."""
    d_b = povm_b[0].shape[0]
    t = xi.reshape(d_a, d_b, d_a, d_b)
    return [np.einsum("ibjc,cb->ij", t, E) for E in povm_b]


def distortion_ratios(xi, d_a, d_b):
    """Return (||(M_A (x) M_B) xi|| / ||xi||, ||(1 (x) M_B) xi|| / ||xi||) in trace norm."""
    pa, pb = design_povm(d_a), design_povm(d_b)
    base = trace_norm(xi)
    both = np.abs(measure_both(xi, pa, pb)).sum()
    one = sum(trace_norm(b) for b in measure_second(xi, d_a, pb))
    return both / base, one / base
