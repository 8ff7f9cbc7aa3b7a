"""Conditional min-entropy, the purification penalty and key-length formulas.

Entropies and key lengths are in bits.  The de Finetti chain probe keeps
its bound in natural logarithms, 2 ln(2) ln(d_A) / n.
"""
from dataclasses import dataclass, field
from math import log, log2, sqrt

import numpy as np

from .config import DEFAULT, DomainError
from .qnum import DensityMatrix, hermitize, partial_trace, trace_norm
from .sdpcore import SdpProblem, from_coords, hcoords, hmat, solve


@dataclass
class EntropyResult:
    value_bits: float
    primal: float
    dual: float
    gap: float
    status: str
    sigma_E: np.ndarray = field(repr=False)
    Lambda: np.ndarray = field(repr=False)
    feasibility: float = 0.0
    sdp: dict = field(default_factory=dict, repr=False)
    dims: tuple = ()

    def to_json(self):
        return {"h_min_bits": self.value_bits, "primal_min_tr_sigma": self.primal,
                "dual_max_tr_lambda_rho": self.dual, "gap": self.gap, "status": self.status,
                "dims": list(self.dims), "sigma_feasibility_min_eig": self.feasibility, "sdp": self.sdp}


def _as_xe(rho, dims=None):
    """(matrix, d_X, d_E) from a DensityMatrix labelled X,E or an array with dims."""
    if isinstance(rho, DensityMatrix):
        if set(rho.labels) >= {"X", "E"} and len(rho.labels) == 2:
            rho = rho.reorder(["X", "E"])
        elif len(rho.dims) != 2:
            raise DomainError("min_entropy needs exactly two factors X, E")
        return rho.data, rho.dims[0], rho.dims[1]
    if dims is None:
        raise DomainError("dims (d_X, d_E) required for a raw array")
    rho = DensityMatrix(rho, dims)
    return rho.data, rho.dims[0], rho.dims[1]


def min_entropy_problem(rho, d_x, d_e):
    """Guessing SDP: maximize tr(Lambda rho) s.t. tr_X Lambda + T = 1_E, Lambda, T >= 0.

    Its dual is min tr(sigma_E) s.t. 1_X (x) sigma_E >= rho, sigma_E >= 0.
    """
    ne = d_e * d_e
    eye_x = np.eye(d_x)
    basis = hmat(np.eye(ne), d_e)
    rows = np.hstack([hcoords(np.kron(eye_x, basis)), np.eye(ne)])
    b = hcoords(np.eye(d_e))
    C = [rho, np.zeros((d_e, d_e))]
    return SdpProblem([d_x * d_e, d_e], C, rows, b, "max", name="min-entropy",
                      meta={"d_X": d_x, "d_E": d_e})


def min_entropy(rho, dims=None, tol=None, config=DEFAULT, dump=None):
    """H_min(X|E) = -log2 min{tr sigma : 1 (x) sigma >= rho}."""
    data, d_x, d_e = _as_xe(rho, dims)
    prob = min_entropy_problem(data, d_x, d_e)
    if dump:
        prob.dump(dump)
    sol = solve(prob, tol=tol, config=config)
    sigma = hermitize(from_coords(prob.A.T @ sol.y, prob.blocks)[1])
    feas = float(np.linalg.eigvalsh(hermitize(np.kron(np.eye(d_x), sigma) - data)).min())
    primal = float(np.trace(sigma).real)
    dual = sol.primal_value
    value = -log2(primal) if primal > 0 else float("inf")
    gap = abs(primal - dual) / (1 + abs(primal))
    return EntropyResult(value, primal, dual, gap, sol.status, sigma, sol.X[0], feas,
                         sol.summary(), (d_x, d_e))


def purification_penalty_check(omega, dims=None, slack=1e-6, config=DEFAULT):
    """Compare H_min(X|EN) with H_min(X|E) - 2 log2 dim(N).

    ``omega`` is a DensityMatrix labelled X, E, N (any order) or an array
    with ``dims = (d_X, d_E, d_N)``.
    """
    if isinstance(omega, DensityMatrix):
        omega = omega.reorder(["X", "E", "N"])
        data, dims = omega.data, omega.dims
    else:
        data = np.asarray(omega)
        DensityMatrix(data, dims)
    d_x, d_e, d_n = dims
    full = min_entropy(data, (d_x, d_e * d_n), config=config)
    reduced = min_entropy(partial_trace(data, dims, [0, 1]), (d_x, d_e), config=config)
    lhs = full.value_bits
    rhs = reduced.value_bits - 2 * log2(d_n)
    return {"lhs": lhs, "rhs": rhs, "slack": lhs - rhs, "holds": bool(lhs >= rhs - slack),
            "h_min_X_given_E": reduced.value_bits, "h_min_X_given_EN": lhs, "dim_N": d_n}


@dataclass
class KeyBudget:
    l_collective: float
    g: int
    eps_collective: float
    eps_tilde: float = 0.0

    def __post_init__(self):
        if self.l_collective <= 0 or self.g < 1 or not (0 < self.eps_collective <= 1) or self.eps_tilde < 0:
            raise DomainError("key budget needs l > 0, g >= 1, 0 < eps <= 1, eps_tilde >= 0")


def general_attack_budget(kb, scaling="thesis"):
    """Key length and security parameter against general attacks.

    l' = l - 2 log2 g in both cases; eps' = g eps (thesis) or 4 g sqrt(2 eps)
    (erratum).  ``scaling="both"`` returns the two figures side by side.
    """
    l_general = kb.l_collective - 2 * log2(kb.g)
    eps = {"thesis": kb.g * kb.eps_collective,
           "erratum": 4 * kb.g * sqrt(2 * kb.eps_collective)}
    if scaling not in ("thesis", "erratum", "both"):
        raise DomainError(f"unknown scaling {scaling!r}")
    out = {"l_collective": kb.l_collective, "g": kb.g, "eps_collective": kb.eps_collective,
           "l_general": l_general, "key_exhausted": l_general <= 0}
    if scaling == "both":
        out["eps_general_thesis"] = eps["thesis"]
        out["eps_general_erratum"] = eps["erratum"]
    else:
        out["scaling"] = scaling
        out["eps_general"] = eps[scaling]
    return out


def leftover_hash_bound(h_min, l, eps_tilde=0.0):
    """(1/2) 2^{-(h_min - l)/2} + 2 eps_tilde."""
    if eps_tilde < 0:
        raise DomainError("eps_tilde must be nonnegative")
    return 0.5 * 2.0 ** (-(h_min - l) / 2) + 2 * eps_tilde


def chain_bound(d_a, n):
    return 2 * log(2) * log(d_a) / n


def definetti_chain_probe(rho, d_a, d_z, n, tol=1e-12):
    """Conditional-independence gaps along a chain of classical systems.

    ``rho`` lives on A (x) Z_1 (x) ... (x) Z_n with every Z diagonal.  For each
    m = 0..n-1 returns E_{z_1^m} || rho_{A Z_{m+1}|z} - rho_{A|z} (x) rho_{Z_{m+1}|z} ||_1^2.
    """
    rho = np.asarray(rho)
    dims = [d_a] + [d_z] * n
    if rho.shape != (d_a * d_z ** n,) * 2:
        raise DomainError("state does not match dims")
    t = rho.reshape(dims + dims)
    # Z factors must be classical: no coherences between different z values
    for i in range(1, n + 1):
        red = partial_trace(rho, dims, [0, i]).reshape(d_a, d_z, d_a, d_z)
        mask = ~np.eye(d_z, dtype=bool)
        if np.abs(red[:, mask.nonzero()[0], :, mask.nonzero()[1]]).max() > 1e-10:
            raise DomainError(f"factor Z_{i} is not classical")
    gaps = []
    for m in range(n):
        red = partial_trace(rho, dims, list(range(m + 2)))
        # blocks indexed by prefix z_1..z_m, each on A (x) Z_{m+1}
        r = red.reshape([d_a] + [d_z] * (m + 1) + [d_a] + [d_z] * (m + 1))
        total = 0.0
        for z in np.ndindex(*([d_z] * m)):
            blk = r[(slice(None),) + z + (slice(None), slice(None)) + z + (slice(None),)]
            blk = blk.reshape(d_a * d_z, d_a * d_z)
            p = np.trace(blk).real
            if p <= tol:
                continue
            cond = blk / p
            ra = partial_trace(cond, [d_a, d_z], [0])
            rz = partial_trace(cond, [d_a, d_z], [1])
            total += p * trace_norm(cond - np.kron(ra, rz)) ** 2
        gaps.append(float(total))
    bound = chain_bound(d_a, n)
    return {"per_m": gaps, "min_gap": min(gaps), "bound": bound, "holds": bool(min(gaps) <= bound + 1e-9)}


def random_chain_state(d_a, d_z, n, rng):
    """Random cq state on A Z_1..Z_n: Dirichlet weights over z, random rho_A^z."""
    from .qnum import random_density
    nz = d_z ** n
    p = rng.dirichlet(np.ones(nz))
    out = np.zeros((d_a * nz, d_a * nz), dtype=complex)
    for z in range(nz):
        e = np.zeros(nz)
        e[z] = 1
        out += p[z] * np.kron(random_density(d_a, rng), np.diag(e))
    return out
