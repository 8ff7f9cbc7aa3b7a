"""Maximum channel fidelity: exact Clifford-decoder oracle, seesaw lower
bound, and the level-n SDP hierarchy with its dual certificate.

Systems: message A (dim d_M) is encoded into the channel input At, the
channel maps At -> B, and the decoder maps B -> Bt (dim d_M).  Choi states
are normalized with the input factor first, so E lives on A At and D on
B Bt.  Block size r means B consists of r qudits of prime dimension d_B.

The entanglement fidelity of the chain is

    F = d_At d_B^r tr( W (E (x) D) ),  W = J^T_{At B} (x) Phi_{A Bt}

on the layout [A, At, B, Bt].  The transpose J^T = conj(J) is what makes
the trace formula agree with composing the three channels directly when
all Choi states use the same input-first convention; for the real Choi
matrices of the named channels it changes nothing.
"""
import csv
import io
from dataclasses import dataclass, field
from itertools import permutations
from math import log, sqrt

import numpy as np

from .config import DEFAULT, DomainError, ResourceError
from .qnum import (ChoiState, anti_identity_rep, heisenberg_weyl_multi, hermitize,
                   max_entangled, partial_trace, permute_systems,
                   stabilizer_states, transversal_rep)
from .sdpcore import (SdpProblem, _herm, expand_blocks, group_twirl, hcoords, hmat,
                      invariant_decomposition, reduce_operators, solve)
from .symgroups import enumerate_group, generating_subset


SYMMETRIES = ("perm", "stoch-orth", "perm+anti-identity")


# ---------------------------------------------------------------------------
# channels

def _prime_base(n):
    """(p, k) with n = p^k for the smallest prime p dividing n, else None."""
    for p in range(2, n + 1):
        if n % p == 0:
            k, m = 0, n
            while m % p == 0:
                m //= p
                k += 1
            return (p, k) if m == 1 else None
    return None


def _kron_channels(chois):
    """Choi state of a tensor product of channels, inputs first."""
    J = np.ones((1, 1), dtype=complex)
    dims = []
    for c in chois:
        J = np.kron(J, c.data)
        dims += [c.d_in, c.d_out]
    k = len(chois)
    order = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
    J = permute_systems(J, dims, order)
    d_in = int(np.prod([c.d_in for c in chois]))
    d_out = int(np.prod([c.d_out for c in chois]))
    return ChoiState(d_in, d_out, J)


@dataclass
class ChannelSpec:
    name: str
    choi: ChoiState = field(repr=False)
    params: dict = field(default_factory=dict)

    @property
    def d_in(self):
        return self.choi.d_in

    @property
    def d_out(self):
        return self.choi.d_out

    @classmethod
    def named(cls, name, p=None, d=2):
        """identity, depolarizing(p), bitflip(p), dephasing(p), bitflip3(p)."""
        if p is not None and not (0.0 <= p <= 1.0):
            raise DomainError("channel parameter p must lie in [0, 1]")
        X = np.roll(np.eye(d), 1, axis=0)
        Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
        if name == "identity":
            return cls(name, ChoiState(d, d, max_entangled(d)), {"d": d})
        if p is None:
            raise DomainError(f"channel {name!r} needs a parameter p")
        if name == "depolarizing":
            J = (1 - p) * max_entangled(d) + p * np.eye(d * d) / d ** 2
            return cls(name, ChoiState(d, d, J), {"p": p, "d": d})
        if name in ("bitflip", "dephasing"):
            P = X if name == "bitflip" else Z
            kraus = [sqrt(1 - p) * np.eye(d), sqrt(p) * P]
            return cls(name, ChoiState.from_kraus(kraus, d), {"p": p, "d": d})
        if name == "bitflip3":
            one = cls.named("bitflip", p, 2).choi
            return cls(name, _kron_channels([one] * 3), {"p": p, "d": 2})
        raise DomainError(f"unknown channel {name!r}")

    @classmethod
    def custom(cls, J, d_in, d_out, name="custom"):
        return cls(name, ChoiState(d_in, d_out, J), {})

    @classmethod
    def from_json(cls, rec):
        """{name, params} or an explicit Choi record {dims, re, im}."""
        if "re" in rec or "choi" in rec:
            c = rec.get("choi", rec)
            J = np.array(c["re"], dtype=float) + 1j * np.array(c.get("im", np.zeros_like(c["re"])), dtype=float)
            d_in, d_out = c["dims"]
            return cls.custom(J, d_in, d_out, rec.get("name", "custom"))
        params = dict(rec.get("params", {}))
        return cls.named(rec["name"], params.get("p"), params.get("d", 2))

    def to_json(self, with_choi=False):
        out = {"name": self.name, "params": self.params, "dims": [self.d_in, self.d_out]}
        if with_choi:
            out["choi"] = self.choi.to_json()
        return out


@dataclass
class FidelityInstance:
    channel: ChannelSpec
    d_M: int = 2
    decoder_class: str = "arbitrary"
    encoder_class: str = "arbitrary"
    d_B: int = None
    r: int = None

    def __post_init__(self):
        if self.d_M < 2:
            raise DomainError("message dimension d_M must be at least 2")
        for cls_ in (self.decoder_class, self.encoder_class):
            if cls_ not in ("arbitrary", "clifford"):
                raise DomainError(f"unknown coding class {cls_!r}")
        if self.d_B is None:
            base = _prime_base(self.channel.d_out)
            if base is None:
                raise DomainError("channel output dimension is not a prime power")
            self.d_B, self.r = base
        if self.r is None:
            base = _prime_base(self.channel.d_out)
            self.r = base[1] if base and base[0] == self.d_B else None
        if self.r is None or self.d_B ** self.r != self.channel.d_out:
            raise DomainError("channel output dimension must equal d_B^r")

    @property
    def d_At(self):
        return self.channel.d_in

    @property
    def d_Bout(self):
        return self.channel.d_out

    @property
    def layout(self):
        """Factor dimensions of [A, At, B, Bt]."""
        return [self.d_M, self.d_At, self.d_Bout, self.d_M]

    def qudits_of(self, dim):
        """Number of d_B-qudits making up a factor of dimension dim."""
        base = _prime_base(dim)
        if dim == 1:
            return 0
        if base is None or base[0] != self.d_B:
            raise DomainError(f"dimension {dim} is not a power of d_B = {self.d_B}")
        return base[1]

    def to_json(self):
        return {"channel": self.channel.to_json(), "d_M": self.d_M, "d_B": self.d_B, "r": self.r,
                "decoder_class": self.decoder_class, "encoder_class": self.encoder_class}


# ---------------------------------------------------------------------------
# objective

def objective_matrix(inst):
    """W on [A, At, B, Bt] with F = tr(W (E (x) D))."""
    dm, dt, db, _ = inst.layout
    M = np.kron(inst.channel.choi.data.conj(), max_entangled(dm))
    return dt * db * permute_systems(M, [dt, db, dm, dm], [2, 0, 1, 3])


def _choi_data(x):
    return x.data if isinstance(x, ChoiState) else np.asarray(x)


def fidelity_objective(J, E, D, d_M):
    """d_At d_B tr((J^T (x) Phi)(E (x) D)), reordered to [A, At, B, Bt]."""
    if not isinstance(J, ChoiState):
        raise DomainError("J must be a ChoiState")
    e, dd = _choi_data(E), _choi_data(D)
    if e.shape != (d_M * J.d_in,) * 2 or dd.shape != (J.d_out * d_M,) * 2:
        raise DomainError("encoder/decoder dimensions do not chain A -> At -> B -> Bt")
    inst = FidelityInstance(ChannelSpec("custom", J), d_M)
    return float(np.vdot(objective_matrix(inst), np.kron(e, dd)).real)


def compose_fidelity(J, E, D, d_M):
    """Entanglement fidelity by composing the three channels directly."""
    E = E if isinstance(E, ChoiState) else ChoiState(d_M, J.d_in, E)
    D = D if isinstance(D, ChoiState) else ChoiState(J.d_out, d_M, D)
    total = 0.0
    for i in range(d_M):
        for j in range(d_M):
            e = np.zeros((d_M, d_M))
            e[i, j] = 1
            total += D.apply(J.apply(E.apply(e)))[i, j]
    return float(np.real(total)) / d_M ** 2


def _encoder_cost(W, D, nE, nD):
    return hermitize(np.einsum("iajb,ba->ij", W.reshape(nE, nD, nE, nD), D))


def _decoder_cost(W, E, nE, nD):
    return hermitize(np.einsum("aibj,ba->ij", W.reshape(nE, nD, nE, nD), E))


def channel_sdp_problem(cost, d_in, d_out):
    """max tr(cost X) over Choi states X on [in, out] with tr_out X = 1/d_in."""
    basis = hmat(np.eye(d_in * d_in), d_in)
    rows = hcoords(np.kron(basis, np.eye(d_out)))
    b = hcoords(np.eye(d_in) / d_in)
    return SdpProblem([d_in * d_out], [cost], rows, b, "max", name="channel",
                      meta={"d_in": d_in, "d_out": d_out})


def channel_sdp(cost, d_in, d_out, tol=None, config=DEFAULT):
    prob = channel_sdp_problem(cost, d_in, d_out)
    sol = solve(prob, tol=tol, config=config)
    return sol.primal_value, hermitize(sol.X[0]), sol


# ---------------------------------------------------------------------------
# stabilizer (Clifford) extreme points

def stabilizer_chois(d_in, d_out, d, config=DEFAULT):
    """Pure stabilizer states on [in, out] whose input marginal is maximally mixed."""
    base_in, base_out = _prime_base(d_in), _prime_base(d_out)
    if base_in is None or base_out is None or base_in[0] != d or base_out[0] != d:
        raise DomainError("stabilizer Choi states need factor dimensions that are powers of d")
    q = base_in[1] + base_out[1]
    states = stabilizer_states(q, d, config).states
    target = np.eye(d_in) / d_in
    out = []
    for v in states:
        P = np.outer(v, v.conj())
        if np.abs(partial_trace(P, [d_in, d_out], [0]) - target).max() < 1e-9:
            out.append(P)
    if not out:
        raise DomainError("no stabilizer Choi with maximally mixed marginal at these dims")
    return out


def _best_vertex(cost, verts):
    vals = np.array([np.vdot(cost, v).real for v in verts])
    k = int(np.argmax(vals))
    return float(vals[k]), verts[k], k


def _best_encoder(inst, W, D, candidates=None, config=DEFAULT):
    nE = inst.d_M * inst.d_At
    cost = _encoder_cost(W, D, nE, inst.d_Bout * inst.d_M)
    if inst.encoder_class == "clifford":
        v, E, _ = _best_vertex(cost, candidates)
        return v, E
    v, E, _ = channel_sdp(cost, inst.d_M, inst.d_At, config=config)
    return v, E


def _best_decoder(inst, W, E, candidates=None, config=DEFAULT):
    nE = inst.d_M * inst.d_At
    cost = _decoder_cost(W, E, nE, inst.d_Bout * inst.d_M)
    if inst.decoder_class == "clifford":
        v, D, _ = _best_vertex(cost, candidates)
        return v, D
    v, D, _ = channel_sdp(cost, inst.d_Bout, inst.d_M, config=config)
    return v, D


def exact_clifford_decoder(inst, config=DEFAULT):
    """Maximum fidelity over Clifford decoders, by sweeping the extreme points.

    Decoders range over the pure stabilizer states on B Bt with maximally
    mixed B marginal; the objective is linear in D, so the best extreme
    point is optimal over their convex hull.  The encoder is optimized
    exactly for each decoder (SDP, or a vertex sweep for Clifford encoders).
    """
    W = objective_matrix(inst)
    decs = stabilizer_chois(inst.d_Bout, inst.d_M, inst.d_B, config)
    encs = None
    if inst.encoder_class == "clifford":
        encs = stabilizer_chois(inst.d_M, inst.d_At, inst.d_B, config)
    vals = []
    best = (-np.inf, None, None)
    for D in decs:
        v, E = _best_encoder(inst, W, D, encs, config)
        vals.append(v)
        if v > best[0] + 1e-12:
            best = (v, D, E)
    return {"F_exact": float(best[0]), "decoder": best[1], "encoder": best[2],
            "num_decoders": len(decs), "values": vals}


def _random_choi(d_in, d_out, rng):
    G = rng.standard_normal((d_in * d_out, d_in * d_out)) + 1j * rng.standard_normal((d_in * d_out, d_in * d_out))
    X = G @ G.conj().T
    m = partial_trace(X, [d_in, d_out], [0])
    w, U = np.linalg.eigh(m)
    s = np.kron(U @ np.diag(w ** -0.5) @ U.conj().T, np.eye(d_out))
    return hermitize(s @ X @ s) / d_in


def seesaw(inst, iters=20, restarts=3, seed=0, tol=1e-9, config=DEFAULT):
    """Alternating encoder/decoder optimization; a lower bound on the maximum."""
    rng = np.random.default_rng(seed)
    W = objective_matrix(inst)
    decs = stabilizer_chois(inst.d_Bout, inst.d_M, inst.d_B, config) if inst.decoder_class == "clifford" else None
    encs = stabilizer_chois(inst.d_M, inst.d_At, inst.d_B, config) if inst.encoder_class == "clifford" else None
    runs = []
    best = {"value": -np.inf}
    for _ in range(restarts):
        if decs is not None:
            D = decs[rng.integers(len(decs))]
        else:
            D = _random_choi(inst.d_Bout, inst.d_M, rng)
        hist = []
        E = None
        for _ in range(iters):
            _, E = _best_encoder(inst, W, D, encs, config)
            v, D = _best_decoder(inst, W, E, decs, config)
            hist.append(v)
            if len(hist) > 1 and hist[-1] - hist[-2] < tol:
                break
        runs.append(hist)
        if hist[-1] > best["value"]:
            best = {"value": hist[-1], "encoder": E, "decoder": D}
    mono = all(h[i + 1] >= h[i] - 1e-7 for h in runs for i in range(len(h) - 1))
    return {"value": float(best["value"]), "encoder": best["encoder"], "decoder": best["decoder"],
            "history": runs, "monotone": mono}


# ---------------------------------------------------------------------------
# hierarchy

def level_dims(inst, n):
    """Factor dimensions of [A, At, B_1, Bt_1, ..., B_n, Bt_n]."""
    return [inst.d_M, inst.d_At] + [inst.d_Bout, inst.d_M] * n


def _check_cap(D, config):
    if D > config.sdp_dim_cap:
        raise ResourceError("sdp_dim_cap", D, config.sdp_dim_cap)


def _block_perm_matrix(prefix, blk, n, perm):
    """Permutation of n blocks of dimension blk behind a fixed prefix factor."""
    dims = [prefix] + [blk] * n
    N = prefix * blk ** n
    idx = np.arange(N).reshape(dims).transpose([0] + [1 + p for p in perm]).reshape(-1)
    P = np.zeros((N, N))
    P[np.arange(N), idx] = 1.0
    return P


def _closure(gens, limit):
    """All products of the generators (unitary matrices), by breadth-first search."""
    def key(m):
        return (np.round(m.real, 8) + 0.0).tobytes() + (np.round(m.imag, 8) + 0.0).tobytes()
    N = gens[0].shape[0]
    start = np.eye(N, dtype=complex)
    seen = {key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for g in frontier:
            for h in gens:
                m = h @ g
                k = key(m)
                if k not in seen:
                    seen[k] = m
                    nxt.append(m)
                    if len(seen) > limit:
                        raise ResourceError("group_closure", len(seen), limit)
        frontier = nxt
    return list(seen.values())


def block_symmetry(inst, n, symmetry, prefix, config=DEFAULT):
    """(elements, generators) of the block symmetry group on prefix (x) (B Bt)^n."""
    blk = inst.d_Bout * inst.d_M
    if symmetry == "perm":
        elems = [_block_perm_matrix(prefix, blk, n, p) for p in permutations(range(n))]
        gens = []
        for i in range(n - 1):
            p = list(range(n))
            p[i], p[i + 1] = p[i + 1], p[i]
            gens.append(_block_perm_matrix(prefix, blk, n, p))
        return elems, gens
    r_tot = inst.r + inst.qudits_of(inst.d_M)
    eye = np.eye(prefix)
    if symmetry == "stoch-orth":
        group = enumerate_group("stoch", n, inst.d_B, config)
        elems = [np.kron(eye, transversal_rep(O, r_tot)) for O in group.elements]
        gens = [np.kron(eye, transversal_rep(O, r_tot)) for O in generating_subset(group)]
        return elems, gens
    if symmetry == "perm+anti-identity":
        if inst.d_B != 2 or n != 6:
            raise DomainError("the anti-identity symmetry needs qubits and n = 6")
        _, gens = block_symmetry(inst, n, "perm", prefix, config)
        gens = gens + [np.kron(eye, anti_identity_rep(r_tot))]
        return _closure(gens, config.matrix_budget), gens
    raise DomainError(f"unknown symmetry {symmetry!r}")


def _hw_twirl_minus_id(H, pre, d_t, post, ops):
    """C(h) = (1/|W|) sum_W W h W^dagger - h on the middle factor of pre (x) d_t (x) post."""
    m = H.shape[0]
    h = H.reshape(m, pre, d_t, post, pre, d_t, post)
    T = np.einsum("wab,mpbqrcs,wdc->mpaqrds", ops, h, ops.conj(), optimize=True) / len(ops)
    return (T - h).reshape(H.shape)


def _hw_ops(inst, dim):
    return np.array(heisenberg_weyl_multi(inst.qudits_of(dim), inst.d_B))


def marginal_functionals(inst, n, both_sides=False):
    """Linear functionals F_i with tr(F_i rho) = 0 encoding the marginal constraints.

    One-sided: C_A(tr_At rho) = 0 and C_{B_n}(tr_{Bt_n} rho) = 0, with C the
    Heisenberg-Weyl twirl minus the identity; rows are indexed by a Hermitian
    basis h of the reduced space and F = C(h) (x) 1 (C is self-adjoint).
    Returns (labels, stacks of full-space matrices, basis dims).
    """
    dm, dt, db = inst.d_M, inst.d_At, inst.d_Bout
    blk = db * dm
    if both_sides:
        rest_a = (dm * dt) ** (n - 1) * blk ** n
    else:
        rest_a = blk ** n
    # A constraint: space A (x) rest, At traced out (At sits right after A)
    na = dm * rest_a
    h = hmat(np.eye(na * na), na)
    CA = _hw_twirl_minus_id(h, 1, dm, rest_a, _hw_ops(inst, dm))
    FA = np.einsum("maibj,tu->matibuj", CA.reshape(-1, dm, rest_a, dm, rest_a), np.eye(dt))
    FA = FA.reshape(len(h), dm * dt * rest_a, dm * dt * rest_a)
    # B constraint: space (everything before B_n) (x) B_n, Bt_n last
    pre = (dm * dt) ** (n if both_sides else 1) * blk ** (n - 1)
    nb = pre * db
    h = hmat(np.eye(nb * nb), nb)
    CB = _hw_twirl_minus_id(h, pre, db, 1, _hw_ops(inst, db))
    FB = np.einsum("mij,tu->mitju", CB, np.eye(dm)).reshape(len(h), nb * dm, nb * dm)
    return {"A": (FA, na), "B": (FB, nb)}


@dataclass
class LevelRecord:
    n: int
    symmetry: str
    primal: float
    dual: float
    dual_certificate: float
    status: str
    gap: float
    dim: int
    reduced: bool
    both_sides: bool = False
    blocks: list = field(default_factory=list)
    num_constraints: int = 0
    iterations: int = 0
    sdp: dict = field(default_factory=dict, repr=False)
    rho: np.ndarray = field(default=None, repr=False)
    dual_vars: dict = field(default_factory=dict, repr=False)

    def to_json(self):
        return {"n": self.n, "symmetry": self.symmetry, "primal": self.primal, "dual": self.dual,
                "dual_certificate": self.dual_certificate, "status": self.status, "gap": self.gap,
                "dim": self.dim, "reduced": self.reduced, "both_sides": self.both_sides,
                "blocks": self.blocks, "num_constraints": self.num_constraints,
                "iterations": self.iterations, "sdp": self.sdp}


def _level_objective(inst, n, both_sides):
    """Objective on the full level-n layout: W on the first blocks, identity elsewhere."""
    W = objective_matrix(inst)
    dm, dt, db = inst.d_M, inst.d_At, inst.d_Bout
    blk = db * dm
    if not both_sides:
        return np.kron(W, np.eye(blk ** (n - 1)))
    # layout (A At)_1..n (B Bt)_1..n: move (A At)_1 next to (B Bt)_1
    ea = dm * dt
    full = np.kron(np.kron(W, np.eye(ea ** (n - 1))), np.eye(blk ** (n - 1)))
    dims = [ea, blk, ea ** (n - 1), blk ** (n - 1)]
    return permute_systems(full, dims, [0, 2, 1, 3])


def _character_average(elems):
    """(1/|G|) sum_g |tr g|^2, the dimension of the commutant."""
    return float(np.mean([abs(np.trace(g)) ** 2 for g in elems]))


def _solve_level(inst, n, symmetry, reduced, both_sides, config, dump, tol):
    dims = level_dims(inst, n) if not both_sides else [inst.d_M * inst.d_At] * n + [inst.d_Bout * inst.d_M] * n
    D = int(np.prod(dims))
    _check_cap(D, config)
    # the marginal functionals are materialized as full-space matrices
    ea, eb = inst.d_M * inst.d_At, inst.d_Bout * inst.d_M
    na_est = inst.d_M * (D // ea)
    nb_est = D // inst.d_M
    work = (na_est ** 2 + nb_est ** 2 + (0 if reduced else D * D)) * D * D
    if work > config.matrix_budget:
        raise ResourceError("matrix_budget", work, config.matrix_budget)
    C = _level_objective(inst, n, both_sides)
    funcs = marginal_functionals(inst, n, both_sides)
    FA, na = funcs["A"]
    FB, nb = funcs["B"]
    if both_sides:
        inst_a = _mirror(inst)
        ea_el, ea_gen = block_symmetry(inst_a, n, symmetry, 1, config)
        eb_el, eb_gen = block_symmetry(inst, n, symmetry, 1, config)
        elems = [np.kron(a, b) for a in ea_el for b in eb_el]
        gens = [np.kron(a, np.eye(eb ** n)) for a in ea_gen] + [np.kron(np.eye(ea ** n), b) for b in eb_gen]
    else:
        elems, gens = block_symmetry(inst, n, symmetry, inst.d_M * inst.d_At, config)
    funcs_all = [np.eye(D)[None], FA, FB]
    b = np.zeros(1 + len(FA) + len(FB))
    b[0] = 1.0
    meta = {"n": n, "symmetry": symmetry, "dims": dims, "both_sides": both_sides,
            "rows": {"trace": 1, "A": len(FA), "B": len(FB)}}
    if reduced:
        blocks = invariant_decomposition(elems, seed=config.seed)
        comm = sum(bl.multiplicity ** 2 for bl in blocks)
        expect = _character_average(elems)
        if abs(comm - expect) > 1e-6:
            raise RuntimeError(f"commutant dimension {comm} != character average {expect}")
        sizes = [bl.multiplicity for bl in blocks]
        rows = []
        for F in funcs_all:
            for s in range(0, len(F), 256):
                parts = reduce_operators(blocks, F[s:s + 256])
                rows.append(np.hstack([hcoords(_herm(p)) for p in parts]))
        A = np.vstack(rows)
        Cred = [hermitize(c) for c in reduce_operators(blocks, C)]
        prob = SdpProblem(sizes, Cred, A, b, "max", name="hierarchy-reduced", meta=meta)
    else:
        blocks = None
        sizes = [D]
        rows = [hcoords(F) for F in funcs_all]
        hb = hmat(np.eye(D * D), D)
        for g in gens:
            G = np.einsum("ba,mbc,cd->mad", g.conj(), hb, g, optimize=True) - hb
            rows.append(hcoords(_herm(G)))
        A = np.vstack(rows)
        b = np.concatenate([b, np.zeros(len(A) - len(b))])
        meta["rows"]["invariance"] = len(A) - 1 - len(FA) - len(FB)
        prob = SdpProblem(sizes, [hermitize(C)], A, b, "max", name="hierarchy", meta=meta)
    if dump:
        prob.dump(dump)
    sol = solve(prob, tol=tol, config=config)
    rho = expand_blocks(blocks, sol.X) if reduced else sol.X[0]
    # dual certificate: multipliers of the marginal rows give Y, Z; the
    # invariance multipliers P^O are fixed by the group-average identity
    y = sol.y
    ya = y[1:1 + len(FA)]
    yb = y[1 + len(FA):1 + len(FA) + len(FB)]
    Mp = C - np.einsum("m,mij->ij", ya, FA) - np.einsum("m,mij->ij", yb, FB)
    TM = hermitize(group_twirl(elems, Mp))
    lam = float(np.linalg.eigvalsh(TM).max())
    P = (Mp - TM) / len(elems)
    lhs = Mp + sum(g @ P @ g.conj().T - P for g in elems)
    check = float(np.linalg.eigvalsh(hermitize(lam * np.eye(D) - lhs)).min())
    dual_vars = {"lambda": lam, "Y": -hmat(ya, na), "Z": -hmat(yb, nb), "P": P,
                 "constraint_min_eig": check}
    return LevelRecord(n, symmetry, sol.primal_value, sol.dual_value, lam, sol.status, sol.gap, D,
                       reduced, both_sides, sizes, prob.num_constraints, sol.iterations,
                       sol.summary(), rho, dual_vars)


def _mirror(inst):
    """Instance whose 'B Bt' block is the encoder side (A At), for A-side symmetry."""
    class _Side:
        pass
    side = _Side()
    side.d_Bout, side.d_M = inst.d_M, inst.d_At
    side.d_B = inst.d_B
    side.r = inst.qudits_of(inst.d_M)
    side.qudits_of = inst.qudits_of
    return side


def hierarchy_level(inst, n, symmetry="perm", reduced=True, config=DEFAULT, dump=None, tol=None):
    """Level-n relaxation of the maximum fidelity (an upper bound).

    ``reduced=False`` imposes invariance as the linear equalities
    O rho O^dagger = rho over a generating set; ``reduced=True`` instead
    parameterizes rho on the commutant blocks of the full group.
    """
    if n < 1:
        raise DomainError("level n must be positive")
    if symmetry not in SYMMETRIES:
        raise DomainError(f"unknown symmetry {symmetry!r}")
    return _solve_level(inst, n, symmetry, reduced, False, config, dump, tol)


def hierarchy_dual(inst, n, symmetry="perm", reduced=True, config=DEFAULT, tol=None):
    """Dual of the level-n problem: minimize lambda subject to

        W (x) 1 + sum_O U_O(P^O) + C_A(Y) (x) 1_At + C_{B_n}(Z) (x) 1_{Bt_n} <= lambda 1.

    Y and Z come from the solver multipliers; with P^O = (M - T(M))/|G| the
    left side collapses to the group average T(M), so the smallest feasible
    lambda is its largest eigenvalue.  The returned record carries lambda and
    the minimum eigenvalue of lambda 1 - lhs as an explicit feasibility check.
    """
    rec = hierarchy_level(inst, n, symmetry, reduced, config, tol=tol)
    dv = rec.dual_vars
    return {"n": n, "symmetry": symmetry, "lambda": dv["lambda"], "primal": rec.primal,
            "solver_dual": rec.dual, "constraint_min_eig": dv["constraint_min_eig"],
            "weak_duality": bool(dv["lambda"] >= rec.primal - 1e-6), "record": rec}


def both_sides_level(inst, n, symmetry="perm", reduced=True, config=DEFAULT, dump=None, tol=None):
    """Level n with the encoder side replicated too: variable on (A At)^n (B Bt)^n."""
    if n < 1:
        raise DomainError("level n must be positive")
    if symmetry not in SYMMETRIES:
        raise DomainError(f"unknown symmetry {symmetry!r}")
    return _solve_level(inst, n, symmetry, reduced, True, config, dump, tol)


def product_extension(E, D, n):
    """E (x) D^{(x) n}, feasible for level n whenever (E, D) is a coding pair."""
    out = np.asarray(E)
    for _ in range(n):
        out = np.kron(out, D)
    return out


def constraint_residuals(inst, n, rho):
    """Largest violation of the level-n marginal constraints by rho."""
    funcs = marginal_functionals(inst, n)
    res = {}
    for k, (F, _) in funcs.items():
        res[k] = float(np.abs(np.einsum("mij,ji->m", F, rho)).max())
    res["trace"] = float(abs(np.trace(rho) - 1))
    return res


# ---------------------------------------------------------------------------
# de Finetti error budget

def eps_linear(d_b, d_a, n):
    """min{d_B^2 (d_B + 1), 18 sqrt(d_A d_B)} sqrt(2 ln2 ln(d_A) / n)."""
    return min(d_b ** 2 * (d_b + 1), 18 * sqrt(d_a * d_b)) * sqrt(2 * log(2) * log(d_a) / n)


def eps_bar(d_b, r, n):
    """2 d_B^{2(r+1)^2} d_B^{-(n-1)/2}."""
    return 2.0 * d_b ** (2 * (r + 1) ** 2) * d_b ** (-(n - 1) / 2)


def eps_tilde(d_b, r, n):
    """6 sqrt(2) 2^r sqrt(1/n)."""
    return 6 * sqrt(2) * 2 ** r * sqrt(1.0 / n)


def definetti_gap_report(inst, n, symmetry="perm", observed=None):
    """Proven level-n vs exact gap budget for the instance (values may exceed 1)."""
    dbr = inst.d_Bout
    out = {"n": n, "symmetry": symmetry, "eps": eps_linear(dbr, inst.d_M, n),
           "eps_bar": eps_bar(inst.d_B, inst.r, n), "eps_tilde": eps_tilde(inst.d_B, inst.r, n),
           "eps_bar_applicable": bool(symmetry == "stoch-orth" and inst.d_B % 2 == 1),
           "eps_tilde_applicable": bool(symmetry == "perm+anti-identity" and inst.d_B == 2 and n % 6 == 0)}
    budget = out["eps"]
    if out["eps_bar_applicable"]:
        budget += out["eps_bar"]
    if out["eps_tilde_applicable"]:
        budget += out["eps_tilde"]
    out["eps_budget"] = budget
    out["fidelity_gap_bound"] = inst.d_At * dbr * budget
    if observed is not None:
        out["observed_gap"] = observed
        out["observed_within_bound"] = bool(observed <= out["fidelity_gap_bound"] + 1e-9)
    return out


@dataclass
class HierarchyResult:
    instance: FidelityInstance
    levels: list
    oracle: float = None
    reports: list = field(default_factory=list)

    @property
    def monotone(self):
        by_sym = {}
        for rec in self.levels:
            by_sym.setdefault(rec.symmetry, []).append(rec)
        ok = True
        for recs in by_sym.values():
            recs = sorted(recs, key=lambda r: r.n)
            ok &= all(b.primal <= a.primal + 1e-6 for a, b in zip(recs, recs[1:]))
        return bool(ok)

    @property
    def dual_ok(self):
        return bool(all(r.dual_certificate >= r.primal - 1e-6 for r in self.levels))

    @property
    def above_oracle(self):
        if self.oracle is None:
            return None
        return bool(all(r.primal >= self.oracle - 1e-5 for r in self.levels))

    def to_json(self):
        return {"instance": self.instance.to_json(), "oracle": self.oracle,
                "levels": [r.to_json() for r in self.levels], "reports": self.reports,
                "monotone": self.monotone, "dual_ok": self.dual_ok, "above_oracle": self.above_oracle}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "symmetry", "primal", "dual", "oracle", "eps_budget"])
        for rec, rep in zip(self.levels, self.reports):
            w.writerow([rec.n, rec.symmetry, f"{rec.primal:.10g}", f"{rec.dual_certificate:.10g}",
                        "" if self.oracle is None else f"{self.oracle:.10g}", f"{rep['eps_budget']:.10g}"])
        return buf.getvalue()


def encoder_problem(inst, D):
    """Encoder SDP for a fixed decoder Choi state D."""
    cost = _encoder_cost(objective_matrix(inst), D, inst.d_M * inst.d_At, inst.d_Bout * inst.d_M)
    return channel_sdp_problem(cost, inst.d_M, inst.d_At)


def run_hierarchy(inst, levels=(1, 2), symmetry="perm", reduced=True, oracle=True,
                  both_sides=False, dump=None, config=DEFAULT):
    """Solve the listed levels; ``dump`` may contain "{n}" for one file per level."""
    F = exact_clifford_decoder(inst, config)["F_exact"] if oracle else None
    recs, reps = [], []
    for n in levels:
        path = None
        if dump:
            path = dump.replace("{n}", str(n)) if "{n}" in dump else (dump if len(levels) == 1 else f"{dump}.n{n}")
        solver = both_sides_level if both_sides else hierarchy_level
        rec = solver(inst, n, symmetry, reduced, config, dump=path)
        recs.append(rec)
        obs = None if F is None else rec.primal - F
        reps.append(definetti_gap_report(inst, n, symmetry, obs))
    return HierarchyResult(inst, recs, F, reps)
