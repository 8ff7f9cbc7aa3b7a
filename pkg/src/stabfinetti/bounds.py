"""Closed-form de Finetti error bounds and postselection overhead tables.

Every bound is reported raw and clamped to 1; at desk-scale parameters
several of them exceed 1 and say nothing.
"""
import csv
import io
from dataclasses import dataclass
from math import log10, log2, sqrt

from .config import DEFAULT, DomainError, ResourceError
from .symgroups import closed_form_counts, enumerate_group, is_prime, orbit_report


BOUND_SYMMETRIES = ("all", "perm", "stoch-orth", "perm+anti-identity")


@dataclass(frozen=True)
class BoundQuery:
    d: int
    r: int
    n: int
    k: int
    N: int = 1
    symmetry: str = "all"

    def __post_init__(self):
        if not is_prime(self.d):
            raise DomainError(f"d = {self.d} is not prime")
        if self.r < 1 or self.N < 1:
            raise DomainError("r and N must be positive")
        if not (1 <= self.k <= self.n):
            raise DomainError("need 1 <= k <= n")
        if self.symmetry not in BOUND_SYMMETRIES:
            raise DomainError(f"unknown symmetry {self.symmetry!r}")


def _entry(value):
    return {"raw": value, "clamped": min(value, 1.0)}


def eps_perm(d, r, k, n):
    """2 d^{2r} k / n."""
    return 2.0 * d ** (2 * r) * k / n


def eps_ortho(d, r, k, n):
    """2 d^{2(r+1)^2} d^{-(n-k)/2}."""
    return 2.0 * d ** (2 * (r + 1) ** 2) * d ** (-(n - k) / 2)


def eps_qubit(r, k, n, prefactor=6 * sqrt(2)):
    """prefactor 2^r sqrt(k/n); 6 sqrt 2 in the theorem, 12 sqrt 2 in the comparison."""
    return prefactor * 2 ** r * sqrt(k / n)


def definetti_bounds(q):
    """Applicable bounds for the query, each as {raw, clamped}.

    With ``symmetry="all"`` the bounds whose hypotheses fail are omitted;
    asking for one of them explicitly raises a DomainError instead.
    """
    out = {"query": {"d": q.d, "r": q.r, "n": q.n, "k": q.k, "N": q.N, "symmetry": q.symmetry}}
    sym = q.symmetry
    if sym in ("all", "perm"):
        out["eps_perm"] = _entry(eps_perm(q.d, q.r, q.k, q.n))
    if sym in ("all", "stoch-orth"):
        if q.d % 2 == 1:
            out["eps_ortho"] = _entry(eps_ortho(q.d, q.r, q.k, q.n))
        elif sym == "stoch-orth":
            raise DomainError("stochastic-orthogonal de Finetti bound needs an odd prime d")
    if sym in ("all", "perm+anti-identity"):
        if q.d == 2 and q.k % 6 == 0:
            out["eps_qubit"] = {"theorem": _entry(eps_qubit(q.r, q.k, q.n, 6 * sqrt(2))),
                                "comparison": _entry(eps_qubit(q.r, q.k, q.n, 12 * sqrt(2)))}
        elif sym == "perm+anti-identity":
            if q.d != 2:
                raise DomainError("anti-identity de Finetti bound needs d = 2")
            raise DomainError("anti-identity de Finetti bound needs k to be a multiple of six")
    return out


def _verify_stoch(n, d, K, config, max_enum_n):
    """Brute stochastic-orthogonal count for K tuples, or None when out of reach."""
    if n > max_enum_n or d ** (n * K) > config.orbit_point_budget:
        return None
    try:
        return orbit_report(enumerate_group("stoch", n, d, config), K, config).brute_count
    except ResourceError:
        return None


def overhead_table(d_range, n_range, N=1, config=DEFAULT, max_enum_n=4):
    """Rows comparing the permutation and stochastic-orthogonal overheads.

    ``caveat`` is set when the n-independent stochastic count is not
    confirmed by brute-force enumeration at this (n, d): either enumeration
    is out of reach or the enumerated count differs.
    """
    rows = []
    for d in d_range:
        for n in n_range:
            cf = closed_form_counts(d, K=2, N=N, n=n)
            g_stoch = cf["g_stoch_N"]
            brute = _verify_stoch(n, d, 2 * N, config, max_enum_n)
            rows.append({
                "d": d, "n": n, "N": N,
                "g_perm_binomial": cf["g_perm_binomial"],
                "g_perm_power": cf["g_perm_power"],
                "g_stoch": g_stoch,
                "key_shortening_perm": 2 * log2(cf["g_perm_binomial"]),
                "key_shortening_stoch": 2 * log2(g_stoch),
                "brute_stoch": brute,
                "caveat": bool(brute is None or brute != g_stoch),
            })
    return rows


TABLE_COLUMNS = ["d", "n", "N", "g_perm_binomial", "g_perm_power", "g_stoch",
                 "key_shortening_perm", "key_shortening_stoch", "brute_stoch", "caveat"]


def table_csv(rows, columns=TABLE_COLUMNS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        rec = {}
        for k in columns:
            v = row.get(k)
            if v is None:
                v = ""
            elif isinstance(v, int) and not isinstance(v, bool) and abs(v) > 2 ** 53:
                v = big_int_str(v)
            rec[k] = v
        w.writerow(rec)
    return buf.getvalue()


MAX_EXACT_DIGITS = 4000


def big_int_str(v):
    """Decimal string of an integer; beyond MAX_EXACT_DIGITS digits an approximate "~m.mmmmmmmmme+E"."""
    if v.bit_length() * 0.30103 < MAX_EXACT_DIGITS:
        return str(v)
    e = log10(v)
    k = int(e)
    return f"~{10 ** (e - k):.9f}e+{k}"


def table_json(rows):
    """JSON-safe rows: integers too large for doubles are kept as decimal strings."""
    out = []
    for row in rows:
        rec = {}
        for k, v in row.items():
            big = isinstance(v, int) and not isinstance(v, bool) and abs(v) > 2 ** 53
            rec[k] = big_int_str(v) if big else v
        out.append(rec)
    return out
