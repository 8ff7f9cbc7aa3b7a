"""Command-line entry point.

Every subcommand prints one JSON document (or CSV for tables) that embeds
the run configuration.  Exit codes: 0 success, 1 verification failure,
2 usage or domain error, 3 a configured resource cap was hit.
"""
import argparse
import json
import sys
from math import comb, log2, sqrt

import numpy as np

from . import bounds, entropy, fidelity, qnum, symgroups
from .config import DomainError, ResourceError, load_config


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, int) and not isinstance(x, bool) and x.bit_length() * 0.30103 >= bounds.MAX_EXACT_DIGITS:
        return bounds.big_int_str(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# subcommands

def cmd_groups(args, cfg):
    g = symgroups.enumerate_group(args.kind, args.n, args.d, cfg)
    return g.to_json(with_elements=args.with_elements)


def cmd_orbits(args, cfg):
    g = symgroups.enumerate_group(args.kind, args.n, args.d, cfg)
    return symgroups.orbit_report(g, args.K, cfg).to_json()


def cmd_counts(args, cfg):
    return symgroups.closed_form_counts(args.d, args.K, args.N, args.n)


def _twirl_report(ds, samples, rng):
    out = {}
    for d in ds:
        dev = 0.0
        for _ in range(samples):
            rho = qnum.random_density(d, rng)
            dev = max(dev, float(np.abs(qnum.twirl_hw(rho) - np.eye(d) / d).max()))
        out[str(d)] = dev
    return out


def _dimension_bound_report(samples, rng):
    worst = np.inf
    for _ in range(samples):
        omega = qnum.random_density(8, rng)
        worst = min(worst, qnum.dimension_bound_gap(omega, [2, 2, 2], 2))
    d = 2
    tight = qnum.dimension_bound_gap(np.kron(np.diag([1.0, 0.0]), qnum.max_entangled(d)), [2, d, d], 2)
    return {"min_eig": float(worst), "tight_min_eig": float(tight)}


def cmd_twirl(args, cfg):
    rng = np.random.default_rng(cfg.seed)
    return {"max_abs_deviation": _twirl_report(args.d, args.samples, rng),
            "dimension_bound": _dimension_bound_report(args.samples, rng)}


def cmd_stabilizers(args, cfg):
    s = qnum.stabilizer_states(args.r, args.d, cfg)
    out = s.to_json(with_states=args.with_states)
    out["expected"] = qnum.stabilizer_count(args.r, args.d)
    return out


def _load_state(args, rng):
    if args.input:
        with open(args.input) as fh:
            return qnum.DensityMatrix.from_json(json.load(fh))
    kind = args.state
    if kind == "maxent":
        return qnum.DensityMatrix(qnum.max_entangled(2), [2, 2], ["X", "E"])
    if kind == "uniform":
        return qnum.DensityMatrix(np.eye(4) / 4, [2, 2], ["X", "E"])
    if kind == "cq":
        probs = np.array(args.probs) if args.probs else None
        data = qnum.random_cq(len(probs) if probs is not None else 2, 2, rng, probs)
        return qnum.DensityMatrix(data, [len(probs) if probs is not None else 2, 2], ["X", "E"])
    raise DomainError(f"unknown state {kind!r}")


def cmd_minentropy(args, cfg):
    rng = np.random.default_rng(cfg.seed)
    rho = _load_state(args, rng)
    return entropy.min_entropy(rho, config=cfg, dump=args.dump_sdp).to_json()


def cmd_budget(args, cfg):
    kb = entropy.KeyBudget(args.l, args.g, args.eps, args.eps_tilde)
    return entropy.general_attack_budget(kb, args.scaling)


def cmd_bounds(args, cfg):
    if args.table:
        rows = bounds.overhead_table(args.d_range, args.n_range, args.N, cfg)
        if cfg.output == "csv":
            return bounds.table_csv(rows)
        return {"rows": bounds.table_json(rows)}
    if args.n is None or args.k is None:
        raise DomainError("bounds needs -n and -k (or --table)")
    q = bounds.BoundQuery(args.d, args.r, args.n, args.k, args.N, args.symmetry)
    return bounds.definetti_bounds(q)


def _instance(args):
    if args.channel_file:
        with open(args.channel_file) as fh:
            ch = fidelity.ChannelSpec.from_json(json.load(fh))
    else:
        ch = fidelity.ChannelSpec.named(args.channel, args.p, args.channel_dim)
    return fidelity.FidelityInstance(ch, args.d_M, args.decoder_class, args.encoder_class)


def cmd_fidelity(args, cfg):
    inst = _instance(args)
    ex = fidelity.exact_clifford_decoder(inst, cfg)
    ss = fidelity.seesaw(inst, args.iters, args.restarts, cfg.seed, config=cfg)
    if args.dump_sdp:
        fidelity.encoder_problem(inst, ex["decoder"]).dump(args.dump_sdp)
    direct = fidelity.compose_fidelity(inst.channel.choi, ex["encoder"], ex["decoder"], inst.d_M)
    return {"instance": inst.to_json(), "exact_clifford": ex["F_exact"],
            "num_decoders": ex["num_decoders"], "composition_check": direct,
            "seesaw": ss["value"], "seesaw_monotone": ss["monotone"]}


def cmd_hierarchy(args, cfg):
    inst = _instance(args)
    res = fidelity.run_hierarchy(inst, args.levels, args.symmetry, not args.unreduced,
                                 not args.no_oracle, args.both_sides, args.dump_sdp, cfg)
    if cfg.output == "csv":
        return res.to_csv()
    return res.to_json()


# ---------------------------------------------------------------------------
# verify

def _check(checks, name, passed, **detail):
    checks.append({"name": name, "passed": bool(passed), "detail": detail})


def _suite_groups(cfg, checks, findings):
    for kind in ("perm", "disc", "stoch"):
        for n in range(1, 5):
            for d in (2, 3):
                try:
                    g = symgroups.enumerate_group(kind, n, d, cfg)
                except ResourceError:
                    continue
                for K in (1, 2):
                    rep = symgroups.orbit_report(g, K, cfg)
                    tag = f"{rep.kind}/n={n}/d={d}/K={K}"
                    _check(checks, f"burnside {tag}", rep.brute_count == rep.burnside_count,
                           brute=rep.brute_count, burnside=rep.burnside_count)
                    findings.append({"name": f"closed form {tag}", "agrees": rep.within_bound,
                                     "count": rep.brute_count, "closed_form": rep.closed_form})
    for n in range(2, 5):
        for d in (2, 3):
            if n % d:
                r = symgroups.d_factor_check(n, d, 2, cfg)
                findings.append({"name": f"d-factor n={n}/d={d}", "agrees": r["holds"],
                                 "stoch_count": r["stoch_count"], "disc_count": r["disc_count"]})


def _suite_counts(cfg, checks, findings):
    for d in (2, 3, 5):
        cf = symgroups.closed_form_counts(d)
        _check(checks, f"D_1, D_2 at d={d}", cf["D"] == [d + 1, d ** 3 + d ** 2 + d + 1], D=cf["D"])
    _check(checks, "g_stoch(3) = 120", symgroups.closed_form_counts(3)["g_stoch"] == 120)
    for n in range(1, 4):
        for d in (2, 3):
            g = symgroups.enumerate_group("perm", n, d, cfg)
            dim = symgroups.fixed_space_dimension(symgroups.permutation_rep(g, 2))
            _check(checks, f"perm fixed space n={n}/d={d}", dim == comb(n + d * d - 1, n), dim=dim)


def _suite_twirl(cfg, checks, findings, rng):
    dev = _twirl_report((2, 3, 5), 20, rng)
    _check(checks, "twirl to maximally mixed", max(dev.values()) < 1e-12, deviation=dev)
    db = _dimension_bound_report(20, rng)
    _check(checks, "dimension bound", db["min_eig"] >= -1e-9 and abs(db["tight_min_eig"]) < 1e-9, **db)


def _suite_stabilizers(cfg, checks, findings, rng):
    for r, d, expect in ((1, 2, 6), (1, 3, 12), (2, 2, 60)):
        c = qnum.stabilizer_states(r, d, cfg).count
        _check(checks, f"stabilizer census r={r}/d={d}", c == expect, count=c)
    R = qnum.anti_identity_rep(1)
    err = 0.0
    for v in qnum.stabilizer_states(1, 2, cfg).states:
        s6 = v
        for _ in range(5):
            s6 = np.kron(s6, v)
        err = max(err, float(np.abs(R @ s6 - s6).max()))
    _check(checks, "anti-identity fixes stabilizer tensor powers", err < 1e-10, error=err)


def _suite_minentropy(cfg, checks, findings, rng):
    me = entropy.min_entropy(qnum.max_entangled(2), (2, 2), config=cfg)
    un = entropy.min_entropy(np.eye(4) / 4, (2, 2), config=cfg)
    cq = entropy.min_entropy(np.diag([0.75, 0.25]), (2, 1), config=cfg)
    _check(checks, "H_min maximally entangled = -1", abs(me.value_bits + 1) < 1e-6 and me.gap <= 1e-7,
           value=me.value_bits, gap=me.gap)
    _check(checks, "H_min uniform product = 1", abs(un.value_bits - 1) < 1e-6 and un.gap <= 1e-7,
           value=un.value_bits, gap=un.gap)
    _check(checks, "H_min cq = -log2 max p", abs(cq.value_bits + log2(0.75)) < 1e-6, value=cq.value_bits)
    worst = np.inf
    for _ in range(5):
        res = entropy.purification_penalty_check(qnum.random_density(8, rng), (2, 2, 2), config=cfg)
        worst = min(worst, res["slack"])
    _check(checks, "purification penalty", worst >= -1e-6, min_slack=worst)


def _suite_budget(cfg, checks, findings, rng):
    b = entropy.general_attack_budget(entropy.KeyBudget(1000, 120, 1e-9), "both")
    ok = (abs(b["l_general"] - 986.186) < 1e-3 and abs(b["eps_general_thesis"] - 1.2e-7) < 1e-12
          and abs(b["eps_general_erratum"] - 4 * 120 * sqrt(2e-9)) < 1e-9)
    _check(checks, "key budget", ok, **b)
    worst = np.inf
    for _ in range(10):
        res = entropy.definetti_chain_probe(entropy.random_chain_state(2, 2, 4, rng), 2, 2, 4)
        worst = min(worst, res["bound"] - res["min_gap"])
    _check(checks, "chain probe", worst >= 0, min_margin=worst)


def _suite_hierarchy(cfg, checks, findings, rng):
    cases = (("identity", None, 1.0), ("depolarizing", 1.0, 0.25), ("bitflip", 0.1, None))
    for name, p, analytic in cases:
        inst = fidelity.FidelityInstance(fidelity.ChannelSpec.named(name, p))
        res = fidelity.run_hierarchy(inst, (1, 2), config=cfg)
        vals = [r.primal for r in res.levels]
        _check(checks, f"hierarchy {name}", res.monotone and res.dual_ok and res.above_oracle,
               levels=vals, duals=[r.dual_certificate for r in res.levels], oracle=res.oracle)
        if analytic is not None:
            _check(checks, f"hierarchy {name} analytic value",
                   all(abs(v - analytic) < 1e-6 for v in vals), levels=vals, expected=analytic)


SUITES = {
    "groups": _suite_groups,
    "counts": _suite_counts,
    "twirl": _suite_twirl,
    "stabilizers": _suite_stabilizers,
    "minentropy": _suite_minentropy,
    "budget": _suite_budget,
    "hierarchy": _suite_hierarchy,
}


def cmd_verify(args, cfg):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    checks, findings = [], []
    rng = np.random.default_rng(cfg.seed)
    for name in names:
        fn = SUITES[name]
        if name in ("groups", "counts"):
            fn(cfg, checks, findings)
        else:
            fn(cfg, checks, findings, rng)
    passed = all(c["passed"] for c in checks)
    return {"suite": args.suite, "passed": passed, "checks": checks, "findings": findings,
            "num_checks": len(checks), "num_failed": sum(not c["passed"] for c in checks),
            "findings_disagreeing": sum(not f["agrees"] for f in findings)}


# ---------------------------------------------------------------------------
# parser

def _ints(text):
    return [int(t) for t in text.split(",") if t]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand's copy from overwriting a value given before it
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML config file")
    common.add_argument("--output", choices=["json", "csv", "pretty"], default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="stabfinetti", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("groups", parents=[common], help="enumerate a matrix group over F_d")
    s.add_argument("--kind", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("-d", type=int, required=True)
    s.add_argument("--with-elements", action="store_true")

    s = sub.add_parser("orbits", parents=[common], help="orbit counts of K-tuples")
    s.add_argument("--kind", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("-d", type=int, required=True)
    s.add_argument("-K", type=int, default=2)

    s = sub.add_parser("counts", parents=[common], help="closed-form counts")
    s.add_argument("-d", type=int, required=True)
    s.add_argument("-K", type=int, default=2)
    s.add_argument("-N", type=int, default=1)
    s.add_argument("-n", type=int, default=None)

    s = sub.add_parser("twirl", parents=[common], help="Heisenberg-Weyl twirl and dimension bound checks")
    s.add_argument("-d", type=_ints, default=[2, 3, 5])
    s.add_argument("--samples", type=int, default=100)

    s = sub.add_parser("stabilizers", parents=[common], help="stabilizer state census")
    s.add_argument("-r", type=int, default=1)
    s.add_argument("-d", type=int, default=2)
    s.add_argument("--with-states", action="store_true")

    s = sub.add_parser("minentropy", parents=[common], help="conditional min-entropy SDP")
    s.add_argument("--state", choices=["maxent", "uniform", "cq"], default="maxent")
    s.add_argument("--probs", type=lambda t: [float(v) for v in t.split(",")], default=None)
    s.add_argument("--input", default=None, help="DensityMatrix JSON labelled X, E")
    s.add_argument("--dump-sdp", default=None)

    s = sub.add_parser("budget", parents=[common], help="key length against general attacks")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--g", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--eps-tilde", type=float, default=0.0)
    s.add_argument("--scaling", choices=["thesis", "erratum", "both"], default="both")

    s = sub.add_parser("bounds", parents=[common], help="de Finetti bounds and overhead tables")
    s.add_argument("-d", type=int, default=3)
    s.add_argument("-r", type=int, default=1)
    s.add_argument("-n", type=int, default=None)
    s.add_argument("-k", type=int, default=None)
    s.add_argument("-N", type=int, default=1)
    s.add_argument("--symmetry", choices=bounds.BOUND_SYMMETRIES, default="all")
    s.add_argument("--table", action="store_true")
    s.add_argument("--d-range", type=_ints, default=[2, 3])
    s.add_argument("--n-range", type=_ints, default=[1, 2, 3, 4, 1000000])

    for name, helptext in (("fidelity", "exact Clifford-decoder value and seesaw"),
                           ("hierarchy", "level-n SDP hierarchy")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--channel", default="bitflip",
                       choices=["identity", "depolarizing", "bitflip", "dephasing", "bitflip3"])
        s.add_argument("--p", type=float, default=0.1)
        s.add_argument("--channel-dim", type=int, default=2)
        s.add_argument("--channel-file", default=None, help="ChannelSpec JSON")
        s.add_argument("--d-M", type=int, default=2)
        s.add_argument("--decoder-class", choices=["arbitrary", "clifford"], default="arbitrary")
        s.add_argument("--encoder-class", choices=["arbitrary", "clifford"], default="arbitrary")
        s.add_argument("--dump-sdp", default=None)
        if name == "fidelity":
            s.add_argument("--iters", type=int, default=20)
            s.add_argument("--restarts", type=int, default=3)
        else:
            s.add_argument("--levels", type=_ints, default=[1, 2])
            s.add_argument("--symmetry", choices=fidelity.SYMMETRIES, default="perm")
            s.add_argument("--unreduced", action="store_true")
            s.add_argument("--both-sides", action="store_true")
            s.add_argument("--no-oracle", action="store_true")

    s = sub.add_parser("verify", parents=[common], help="cross-check suite")
    s.add_argument("--suite", choices=["all"] + list(SUITES), default="all")
    return p


COMMANDS = {
    "groups": cmd_groups, "orbits": cmd_orbits, "counts": cmd_counts, "twirl": cmd_twirl,
    "stabilizers": cmd_stabilizers, "minentropy": cmd_minentropy, "budget": cmd_budget,
    "bounds": cmd_bounds, "fidelity": cmd_fidelity, "hierarchy": cmd_hierarchy, "verify": cmd_verify,
}


def _pretty(obj, indent=0):
    pad = "  " * indent
    lines = []
    for k, v in sorted(obj.items()):
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.extend(_pretty(v, indent + 1))
        else:
            lines.append(f"{pad}{k}: {v}")
    return lines


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        kw = {}
        if getattr(args, "seed", None) is not None:
            kw["seed"] = args.seed
        if getattr(args, "output", None) is not None:
            kw["output"] = args.output
        cfg = cfg.updated(**kw)
        result = COMMANDS[args.command](args, cfg)
    except ResourceError as e:
        print(dumps({"command": args.command, "error": "resource", "cap": e.cap,
                     "value": e.value, "limit": e.limit}))
        print(str(e), file=sys.stderr)
        return 3
    except (DomainError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if isinstance(result, str):
        sys.stdout.write("# config " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n" + result)
        return 0
    result = {"command": args.command, "config": cfg.to_dict(), "result": result}
    if cfg.output == "pretty":
        print("\n".join(_pretty(_jsonable(result))))
    else:
        print(dumps(result))
    if args.command == "verify" and not result["result"]["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
