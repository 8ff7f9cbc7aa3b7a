"""Small dense semidefinite programs over block-diagonal Hermitian matrices.

Standard form::

    minimize   <C, X>            maximize  b^T y
    subject to <A_i, X> = b_i    subject to  sum_i y_i A_i + S = C,  S >= 0
               X >= 0

(``sense="max"`` flips the objective).  Constraint matrices are stored as
rows of real coordinates: for an n x n Hermitian block the n^2 coordinates
are the diagonal, then sqrt(2) Re and sqrt(2) Im of the strict upper
triangle, so that the Euclidean dot product of coordinate vectors equals
the trace inner product tr(A X).

The solver is a primal-dual infeasible interior-point method with the
HKM search direction and Mehrotra predictor-corrector, working directly
in complex Hermitian arithmetic.
"""
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT, DomainError, ResourceError
from .qnum import embed

SQ2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Hermitian coordinates

_TRIU = {}


def _triu(n):
    if n not in _TRIU:
        _TRIU[n] = np.triu_indices(n, 1)
    return _TRIU[n]


def hcoords(m):
    """Real coordinates of a Hermitian matrix or a stack (..., n, n)."""
    m = np.asarray(m)
    n = m.shape[-1]
    iu, ju = _triu(n)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    up = m[..., iu, ju]
    return np.concatenate([diag, SQ2 * up.real, SQ2 * np.imag(up)], axis=-1)


def hmat(c, n):
    """Inverse of hcoords for one block (accepts a stack (..., n^2))."""
    c = np.asarray(c, dtype=float)
    iu, ju = _triu(n)
    k = len(iu)
    out = np.zeros(c.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n)
    out[..., idx, idx] = c[..., :n]
    up = (c[..., n:n + k] + 1j * c[..., n + k:]) / SQ2
    out[..., iu, ju] = up
    out[..., ju, iu] = up.conj()
    return out


def _offsets(blocks):
    off = [0]
    for n in blocks:
        off.append(off[-1] + n * n)
    return off


def to_coords(mats, blocks):
    return np.concatenate([hcoords(m) for m in mats]) if blocks else np.zeros(0)


def from_coords(vec, blocks):
    off = _offsets(blocks)
    return [hmat(vec[off[k]:off[k + 1]], n) for k, n in enumerate(blocks)]


def kron_lift(op, layout, targets):
    """Embed an operator on the labelled factors ``targets`` into the full space.

    ``layout`` is a list of (label, dim) pairs in Kronecker order.
    """
    labels = [l for l, _ in layout]
    dims = [d for _, d in layout]
    if isinstance(targets, str):
        targets = [targets]
    for t in targets:
        if t not in labels:
            raise DomainError(f"unknown factor label {t!r}")
    return embed(np.asarray(op), dims, [labels.index(t) for t in targets])


# ---------------------------------------------------------------------------
# problem and solution records

class SdpProblem:
    """Block-diagonal Hermitian SDP with equality constraints."""

    def __init__(self, blocks, C, A, b, sense="min", name="", meta=None):
        self.blocks = [int(n) for n in blocks]
        self.C = [np.asarray(c, dtype=complex) for c in C]
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if sense not in ("min", "max"):
            raise DomainError("sense must be 'min' or 'max'")
        self.sense = sense
        self.name = name
        self.meta = meta or {}
        N = sum(n * n for n in self.blocks)
        if self.A.shape != (len(self.b), N):
            raise DomainError(f"constraint array {self.A.shape} does not match ({len(self.b)}, {N})")
        for c, n in zip(self.C, self.blocks):
            if c.shape != (n, n):
                raise DomainError("objective block shape mismatch")
            if np.abs(c - c.conj().T).max() > 1e-12 * max(1, np.abs(c).max()):
                raise DomainError("objective is not Hermitian")

    @classmethod
    def from_matrices(cls, blocks, C, constraints, b, sense="min", **kw):
        """``constraints`` is a list; each entry is a list of per-block matrices (None = zero)."""
        blocks = [int(n) for n in blocks]
        rows = []
        for con in constraints:
            parts = []
            for n, m in zip(blocks, con):
                if m is None:
                    parts.append(np.zeros(n * n))
                else:
                    m = np.asarray(m)
                    if np.abs(m - m.conj().T).max() > 1e-12 * max(1, np.abs(m).max()):
                        raise DomainError("constraint matrix is not Hermitian")
                    parts.append(hcoords(m))
            rows.append(np.concatenate(parts))
        A = np.array(rows) if rows else np.zeros((0, sum(n * n for n in blocks)))
        return cls(blocks, C, A, b, sense, **kw)

    @property
    def dim(self):
        return sum(self.blocks)

    @property
    def num_constraints(self):
        return len(self.b)

    def constraint_matrices(self, i):
        return from_coords(self.A[i], self.blocks)

    def objective(self, X):
        return float(sum(np.vdot(c, x).real for c, x in zip(self.C, X)))

    def to_json(self):
        return {
            "name": self.name,
            "sense": self.sense,
            "blocks": self.blocks,
            "coordinates": "diag, sqrt2*Re(upper), sqrt2*Im(upper) per block, row-major upper triangle",
            "C": [{"re": c.real.tolist(), "im": c.imag.tolist()} for c in self.C],
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, rec):
        C = [np.array(c["re"]) + 1j * np.array(c["im"]) for c in rec["C"]]
        return cls(rec["blocks"], C, rec["A"], rec["b"], rec["sense"], rec.get("name", ""), rec.get("meta"))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


@dataclass
class SdpSolution:
    primal_value: float
    dual_value: float
    X: list = field(repr=False)
    y: np.ndarray = field(repr=False)
    S: list = field(repr=False)
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    min_eig_X: float
    min_eig_S: float

    @property
    def gap(self):
        return abs(self.primal_value - self.dual_value) / (1 + abs(self.primal_value))

    def summary(self):
        return {
            "status": self.status,
            "primal": self.primal_value,
            "dual": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "min_eig_X": self.min_eig_X,
            "min_eig_S": self.min_eig_S,
        }

    def to_json(self, with_matrices=False):
        out = self.summary()
        if with_matrices:
            out["X"] = [{"re": x.real.tolist(), "im": x.imag.tolist()} for x in self.X]
            out["y"] = self.y.tolist()
        return out


class SolverError(RuntimeError):
    def __init__(self, message, problem=None):
        super().__init__(message)
        self.problem = problem


# ---------------------------------------------------------------------------
# interior point

def _reduce_rows(A, b, rtol=1e-11):
    """Orthonormal independent rows Q with A x = b  <=>  Q x = c.

    Returns (Q, c, back, consistency residual) where y = back @ y_reduced
    maps multipliers of the reduced system to the original one.
    """
    if A.shape[0] == 0:
        return A, b, np.zeros((0, 0)), 0.0
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > rtol * max(A.shape) * s[0]
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    proj = U.T @ b
    resid = np.linalg.norm(b - U @ proj) / (1 + np.linalg.norm(b))
    return Vt, proj / s, U / s, resid


def _inv_chol(m):
    L = np.linalg.cholesky(m)
    Li = sla.solve_triangular(L, np.eye(len(m)), lower=True)
    return Li.conj().T @ Li, L


def _max_step(L, dM):
    """Largest t with L L^H + t dM >= 0 (inf if dM >= 0 along L)."""
    W = sla.solve_triangular(L, dM, lower=True)
    W = sla.solve_triangular(L, W.conj().T, lower=True)
    lam = np.linalg.eigvalsh((W + W.conj().T) / 2).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _herm(m):
    return (m + np.swapaxes(m.conj(), -1, -2)) / 2


def solve(problem, tol=None, max_iter=100, config=DEFAULT, verbose=False):
    """Primal-dual interior-point solve.  Returns an SdpSolution.

    Status is ``optimal`` when relative gap, primal residual and dual
    residual are all below ``tol``; ``infeasible`` when the iterates
    diverge (a heuristic, not a certificate); ``max-iter`` otherwise, with
    the best iterate found.
    """
    tol = config.tol.sdp_gap if tol is None else tol
    feas_tol = config.tol.sdp_feas
    if problem.dim > config.sdp_dim_cap:
        raise ResourceError("sdp_dim_cap", problem.dim, config.sdp_dim_cap)
    blocks = problem.blocks
    off = _offsets(blocks)
    sign = -1.0 if problem.sense == "max" else 1.0
    Cb = [sign * c for c in problem.C]
    cvec = to_coords(Cb, blocks)
    A0, b0 = problem.A, problem.b

    Q, c, back, cons = _reduce_rows(A0, b0)
    if cons > 1e-9:
        n0 = sum(blocks)
        eye = [np.eye(n) for n in blocks]
        return SdpSolution(np.nan, np.nan, eye, np.zeros(len(b0)), eye, "infeasible", 0,
                           cons, np.nan, np.nan, np.nan)
    m = Q.shape[0]
    Ablk = [hmat(Q[:, off[k]:off[k + 1]], n) for k, n in enumerate(blocks)]

    def A_of(Xs):
        return Q @ to_coords(Xs, blocks)

    def At_of(y):
        return from_coords(Q.T @ y, blocks)

    nrm_b = 1 + np.linalg.norm(c)
    nrm_C = 1 + np.linalg.norm(cvec)
    ntot = sum(blocks)
    scale_x = max(10.0, np.sqrt(ntot), ntot * np.max((1 + np.abs(c)) / (1 + np.linalg.norm(Q, axis=1))) if m else 1.0)
    scale_s = max(10.0, np.sqrt(ntot), np.linalg.norm(cvec))
    X = [scale_x * np.eye(n, dtype=complex) for n in blocks]
    S = [scale_s * np.eye(n, dtype=complex) for n in blocks]
    y = np.zeros(m)

    best = None
    status = "max-iter"
    it = 0
    for it in range(1, max_iter + 1):
        Ax = A_of(X)
        rp = c - Ax
        AtY = At_of(y)
        Rd = [Cb[k] - AtY[k] - S[k] for k in range(len(blocks))]
        pobj = float(np.dot(cvec, to_coords(X, blocks)))
        dobj = float(np.dot(c, y))
        mu = sum(np.vdot(X[k], S[k]).real for k in range(len(blocks))) / ntot
        pinf = np.linalg.norm(rp) / nrm_b
        dinf = np.linalg.norm(to_coords(Rd, blocks)) / nrm_C
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        score = max(pinf, dinf, relgap)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in X], y.copy(), [s.copy() for s in S])
        if verbose:
            print(f"{it:3d} p={pobj: .9e} d={dobj: .9e} gap={relgap:.1e} pinf={pinf:.1e} dinf={dinf:.1e} mu={mu:.1e}")
        if relgap < tol * 1e-2 and pinf < feas_tol * 1e-2 and dinf < feas_tol * 1e-2:
            status = "optimal"
            break
        if max(abs(pobj), abs(dobj)) > 1e12 or max(np.abs(x).max() for x in X) > 1e12:
            status = "infeasible"
            break

        Sinv, Ls, Lx = [], [], []
        try:
            for k in range(len(blocks)):
                si, ls = _inv_chol(S[k])
                Sinv.append(si)
                Ls.append(ls)
                Lx.append(np.linalg.cholesky(X[k]))
        except np.linalg.LinAlgError:
            break

        # Schur complement M_ij = <A_i, X A_j S^-1>
        M = np.zeros((m, m))
        for k, n in enumerate(blocks):
            G = _herm(X[k] @ Ablk[k] @ Sinv[k])
            M += Q[:, off[k]:off[k + 1]] @ hcoords(G).T
        M = (M + M.T) / 2
        try:
            cf = sla.cho_factor(M + 1e-14 * np.trace(M) / max(m, 1) * np.eye(m))

            def schur_solve(r):
                return sla.cho_solve(cf, r)
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(M + 1e-12 * np.trace(M) / max(m, 1) * np.eye(m))

            def schur_solve(r):
                return sla.lu_solve(lu, r)

        def direction(sigma_mu, corr):
            H = []
            for k in range(len(blocks)):
                t = sigma_mu * Sinv[k] - X[k] - X[k] @ Rd[k] @ Sinv[k]
                if corr is not None:
                    t = t - corr[k] @ Sinv[k]
                H.append(_herm(t))
            rhs = rp - A_of(H)
            dy = schur_solve(rhs) if m else np.zeros(0)
            AtD = At_of(dy)
            dS = [Rd[k] - AtD[k] for k in range(len(blocks))]
            dX = [_herm(H[k] + X[k] @ AtD[k] @ Sinv[k]) for k in range(len(blocks))]
            return dX, dy, dS

        def steps(dX, dS, gamma):
            ap = min(_max_step(Lx[k], dX[k]) for k in range(len(blocks)))
            ad = min(_max_step(Ls[k], dS[k]) for k in range(len(blocks)))
            return min(1.0, gamma * ap), min(1.0, gamma * ad)

        dX, dy, dS = direction(0.0, None)
        ap, ad = steps(dX, dS, 1.0)
        mu_aff = sum(np.vdot(X[k] + ap * dX[k], S[k] + ad * dS[k]).real for k in range(len(blocks))) / ntot
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
        corr = [dX[k] @ dS[k] for k in range(len(blocks))]
        dX, dy, dS = direction(sigma * mu, corr)
        gamma = 0.9 + 0.09 * min(ap, ad)
        ap, ad = steps(dX, dS, gamma)
        X = [X[k] + ap * dX[k] for k in range(len(blocks))]
        y = y + ad * dy
        S = [S[k] + ad * dS[k] for k in range(len(blocks))]
        X = [_herm(x) for x in X]
        S = [_herm(s) for s in S]
        if max(ap, ad) < 1e-10:
            break

    if status != "optimal":
        _, X, y, S = best
    y_orig = back @ y if m else np.zeros(len(b0))
    Xc = to_coords(X, blocks)
    pres = np.linalg.norm(A0 @ Xc - b0) / (1 + np.linalg.norm(b0))
    Sfull = from_coords(cvec - A0.T @ y_orig, blocks)
    dres = np.linalg.norm(to_coords([Sfull[k] - S[k] for k in range(len(blocks))], blocks)) / nrm_C
    pval = sign * float(np.dot(cvec, Xc))
    dval = sign * float(np.dot(b0, y_orig))
    sol = SdpSolution(
        primal_value=pval, dual_value=dval, X=X, y=sign * y_orig, S=Sfull, status=status,
        iterations=it, primal_residual=float(pres), dual_residual=float(dres),
        min_eig_X=float(min(np.linalg.eigvalsh(x).min() for x in X)),
        min_eig_S=float(min(np.linalg.eigvalsh(_herm(s)).min() for s in Sfull)),
    )
    if status == "max-iter" and sol.gap <= tol and pres <= feas_tol and dres <= feas_tol:
        sol.status = "optimal"
    return sol


# ---------------------------------------------------------------------------
# symmetry reduction

@dataclass
class IsotypicBlock:
    multiplicity: int
    irrep_dim: int
    isometries: list = field(repr=False)  # irrep_dim arrays of shape (D, multiplicity)


def group_twirl(mats, M):
    """(1/|G|) sum_g g M g^dagger."""
    G = np.asarray(mats)
    return np.einsum("gab,bc,gdc->ad", G, M, G.conj(), optimize=True) / len(G)


def invariant_decomposition(mats, seed=0, tol=1e-8):
    """Block structure of the commutant of a finite unitary group.

    Every G-invariant operator is sum_lam sum_k V_{lam,k} X_lam V_{lam,k}^dagger
    with X_lam of size multiplicity x multiplicity.  Found from the
    eigenspaces of a random twirled Hermitian matrix, grouped into isotypic
    components by a second random commutant element which also fixes
    consistent bases across copies.
    """
    rng = np.random.default_rng(seed)
    D = np.asarray(mats[0]).shape[0]
    R = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    H = group_twirl(mats, R + R.conj().T)
    K = group_twirl(mats, rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D)))
    w, U = np.linalg.eigh(H)
    scale = max(1.0, np.abs(w).max())
    cuts = np.nonzero(np.diff(w) > tol * scale)[0] + 1
    spaces = [U[:, idx] for idx in np.split(np.arange(D), cuts)]
    ns = len(spaces)
    parent = list(range(ns))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(ns):
        for j in range(i + 1, ns):
            if spaces[i].shape[1] == spaces[j].shape[1]:
                if np.linalg.norm(spaces[j].conj().T @ K @ spaces[i]) > 1e-6:
                    parent[find(j)] = find(i)
    groups = {}
    for i in range(ns):
        groups.setdefault(find(i), []).append(i)
    blocks = []
    for members in groups.values():
        base = spaces[members[0]]
        dl = base.shape[1]
        cols = [base]
        for j in members[1:]:
            Sj = spaces[j]
            T = Sj.conj().T @ K @ base
            c = np.sqrt(np.trace(T.conj().T @ T).real / dl)
            cols.append(Sj @ (T / c))
        isos = [np.stack([c[:, k] for c in cols], axis=1) for k in range(dl)]
        blocks.append(IsotypicBlock(len(members), dl, isos))
    blocks.sort(key=lambda b: (-b.multiplicity, b.irrep_dim))
    return blocks


def reduce_operators(blocks, F):
    """Per-block reduced matrices sum_k V_k^dagger F V_k for a stack F (m, D, D)."""
    F = np.asarray(F)
    single = F.ndim == 2
    if single:
        F = F[None]
    out = []
    for blk in blocks:
        acc = 0
        for V in blk.isometries:
            acc = acc + np.einsum("ai,mab,bj->mij", V.conj(), F, V, optimize=True)
        out.append(acc[0] if single else acc)
    return out


def expand_blocks(blocks, X):
    """Full-space operator sum_lam sum_k V X_lam V^dagger."""
    D = blocks[0].isometries[0].shape[0]
    out = np.zeros((D, D), dtype=complex)
    for blk, x in zip(blocks, X):
        for V in blk.isometries:
            out += V @ x @ V.conj().T
    return out
