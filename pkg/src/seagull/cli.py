"""``seagull`` command-line driver.

Exit codes: 0 property holds / success, 1 property violated, 2 invalid input,
3 unknown destination or AS, 4 query rejected by the waypoint budget,
5 invariant violation (benchmark disagreement, audit mismatch), 6 session abort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .field import InvalidConfigurationError, ProtocolAbort
from .fib import (CannotInjectError, FibError, TopologyParseError, UnknownDestinationError, build_fib,
                  inject_loop, parse_topology, read_fib_csv, write_fib_csv)
from .oracle import (generate_instances, random_tree_fib, report_csv, report_table,
                     run_benchmark, benchmark_scale_graphs)
from .runtime import AuditError, Cluster, IngestError, SessionConfig
from .shareio import ShareFileError, read_share_dir, reconstruct_fib, share_fib, write_share_dir
from .verifier import EARLY, FIXED, QueryRejected

OK, VIOLATED, INVALID, UNKNOWN, REJECTED, INVARIANT, ABORTED = range(7)
BUDGET_FILE = "budget.json"


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(INVALID, f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _asn(text: str) -> int:
    try:
        v = int(text.upper().removeprefix("AS"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an AS number: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("AS numbers are non-negative")
    return v


# ------------------------------------------------------------------ gen

def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.topology:
        if args.dest is None:
            raise CliError(INVALID, "--dest is required with a topology")
        try:
            topo = parse_topology(_read(args.topology))
        except TopologyParseError as exc:
            raise CliError(INVALID, str(exc)) from None
        fib = build_fib(topo, args.dest)
    else:
        fib = random_tree_fib(args.nodes, args.shape, rng)
    cycle = None
    if args.inject_loop:
        try:
            fib, cycle = inject_loop(fib, rng)
        except CannotInjectError as exc:
            raise CliError(INVALID, str(exc)) from None
    _write(args.out, write_fib_csv(fib))
    if cycle is not None:
        _write(args.out + ".cycle", "\n".join(str(a) for a in sorted(cycle)) + "\n")
    print(json.dumps({"fib": args.out, "rows": len(fib.entries), "n": fib.n,
                      "destination": fib.destination,
                      "cycle": sorted(cycle) if cycle is not None else None}, sort_keys=True))
    return OK


# ------------------------------------------------------------------ share

def _load_fib(path: str):
    try:
        return read_fib_csv(_read(path))
    except FibError as exc:
        raise CliError(INVALID, f"{path}: {exc}") from None


def cmd_share(args) -> int:
    if args.t < 3:
        raise CliError(INVALID, f"need at least 3 verifier parties, got t={args.t}")
    fib = _load_fib(args.fib)
    rng = np.random.default_rng(args.seed)
    session = args.session or os.path.splitext(os.path.basename(args.fib))[0]
    meta, parts = share_fib(fib, args.t, rng, session)
    paths = write_share_dir(args.out, meta, parts)
    print(json.dumps({"meta": os.path.join(args.out, "meta.json"), "shares": paths,
                      "rows": meta["rows"], "n": meta["n"]}, sort_keys=True))
    return OK


def cmd_reconstruct(args) -> int:
    meta, parts = read_share_dir(args.shares)
    fib = reconstruct_fib(meta, parts)
    text = write_fib_csv(fib)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return OK


# ------------------------------------------------------------------ verify / query / audit

def _config(args) -> SessionConfig:
    loop_cap = args.bound if args.check == "loop_free" else None
    hop = args.bound if (args.bound is not None and args.check != "loop_free") else 15
    return SessionConfig(t=3, mode=args.mode, hop_bound=hop, budget_limit=args.budget,
                         loop_bound=loop_cap, revisit_guard=not args.no_revisit_guard)


def _budget_state(directory: str) -> dict:
    path = os.path.join(directory, BUDGET_FILE)
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    return {}


def _run_check(args, audit: bool = False):
    meta, parts = read_share_dir(args.shares)
    cfg = _config(args)
    cfg.t = meta["t"]
    cfg.__post_init__()
    query = {}
    if args.check in ("reachability", "waypoint"):
        if args.s is None:
            raise CliError(INVALID, f"{args.check} needs --s")
        query["s"] = args.s
        if args.d is not None:
            query["d"] = args.d
        if args.check == "waypoint":
            if args.w is None:
                raise CliError(INVALID, "waypoint needs --w")
            query["w"] = args.w
    elif args.check == "origin":
        query["registry_owner"] = args.registry if args.registry is not None else meta["destination"]
    elif args.check == "incremental":
        if args.source is None or args.next_hop is None:
            raise CliError(INVALID, "incremental needs --source and --next-hop")
        query.update(source=args.source, next_hop=args.next_hop, commit=args.commit)
    with Cluster(cfg, transport=args.transport, seed=args.seed) as cl:
        if args.check == "waypoint":
            used = _budget_state(args.shares)
            key = f"{args.principal}|{meta['destination']}"
            cl.budget.used[(args.principal, meta["destination"])] = used.get(key, 0)
        cl.ingest_shares(meta["session"], parts, meta)
        verdict = cl.run_verification(meta["session"], args.check, principal=args.principal, **query)
        if args.check == "waypoint":
            used[key] = cl.budget.used[(args.principal, meta["destination"])]
            _write(os.path.join(args.shares, BUDGET_FILE), json.dumps(used, sort_keys=True) + "\n")
        report = cl.audit_transcript(meta["session"], strict=False) if audit else None
        if args.check == "incremental" and args.commit and verdict.result:
            st = [p.store.get(meta["session"]) for p in cl.parties]
            write_share_dir(args.shares, st[0].meta, [(s.src, s.dst) for s in st])
    return verdict, report


def cmd_verify(args) -> int:
    verdict, _ = _run_check(args)
    print(verdict.to_json())
    return OK if verdict.result else VIOLATED


def cmd_query(args) -> int:
    args.check = "incremental"
    return cmd_verify(args)


def cmd_audit(args) -> int:
    verdict, report = _run_check(args, audit=True)
    report["verdict"] = verdict.record()
    print(json.dumps(report, sort_keys=True))
    return OK if report["match"] else INVARIANT


# ------------------------------------------------------------------ bench

def _bench_graphs(args, rng):
    graphs = []
    for spec in args.graphs:
        if os.path.exists(spec):
            graphs.append(_load_fib(spec))
            continue
        shape, _, n = spec.partition(":")
        loop = shape.endswith("+loop")
        shape = shape.removesuffix("+loop")
        try:
            fib = random_tree_fib(int(n), shape, rng)
        except ValueError as exc:
            raise CliError(INVALID, f"bad graph spec {spec!r}: {exc}") from None
        if loop:
            fib, _ = inject_loop(fib, rng)
        graphs.append(fib)
    if args.random:
        graphs += [inst.fib for inst in generate_instances(args.random, entropy=rng, shape="mixed")]
    if args.scale_graphs:
        graphs += benchmark_scale_graphs(rng)
    return graphs


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    graphs = _bench_graphs(args, rng)
    rows = run_benchmark(graphs, repetitions=args.reps, full_johnson=args.full_johnson)
    if args.csv:
        _write(args.csv, report_csv(rows))
    sys.stdout.write(report_table(rows))
    bad = [r for r in rows if not r.agree]
    for r in bad:
        print(f"disagreement on {r.edge_count}-edge graph: {r.verdicts}", file=sys.stderr)
    return INVARIANT if bad else OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        parser.add_argument("--seed", type=int, help="64-bit seed for every random choice",
                            **(kw or {"default": 0}))
        parser.add_argument("--mode", choices=(FIXED, EARLY), **(kw or {"default": FIXED}))
        parser.add_argument("--bound", type=int, help="hop bound for walks; round cap for loop_free",
                            **(kw or {"default": None}))
        parser.add_argument("--budget", type=int, help="waypoint queries per (principal, destination)",
                            **(kw or {"default": 100}))

    # the flags are accepted before or after the subcommand; argparse shares
    # Action objects between parents, so the two copies are built separately
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)
    p = argparse.ArgumentParser(prog="seagull", description=__doc__.splitlines()[0])
    global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="build a FIB from a topology or at random")
    g.add_argument("--topology", help="AS-link file (a|b lines or CAIDA as-rel)")
    g.add_argument("--dest", type=_asn)
    g.add_argument("--nodes", type=int, default=20, help="random tree size without --topology")
    g.add_argument("--shape", default="caida-like", choices=("chain", "star", "caida-like", "random"))
    g.add_argument("--inject-loop", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("share", parents=[common], help="split a FIB into per-party share files")
    s.add_argument("fib")
    s.add_argument("--t", type=int, default=3)
    s.add_argument("--out", required=True)
    s.add_argument("--session")
    s.set_defaults(func=cmd_share)

    def check_args(q, with_check=True):
        q.add_argument("shares", help="share directory written by 'share'")
        if with_check:
            q.add_argument("check", choices=("loop_free", "reachability", "waypoint", "origin", "incremental"))
        q.add_argument("--s", type=_asn)
        q.add_argument("--d", type=_asn)
        q.add_argument("--w", type=_asn)
        q.add_argument("--registry", type=_asn, help="authorized origin AS (default: destination)")
        q.add_argument("--source", type=_asn)
        q.add_argument("--next-hop", type=_asn)
        q.add_argument("--commit", action="store_true", help="adopt a passing update")
        q.add_argument("--principal", default="operator")
        q.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
        q.add_argument("--no-revisit-guard", action="store_true")

    v = sub.add_parser("verify", parents=[common], help="run a secure check on shared tables")
    check_args(v)
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("query", parents=[common], help="incremental update check")
    check_args(q, with_check=False)
    q.set_defaults(func=cmd_query, check="incremental")

    a = sub.add_parser("audit", parents=[common], help="run a check and print its leakage report")
    check_args(a)
    a.set_defaults(func=cmd_audit)

    b = sub.add_parser("bench", parents=[common], help="six-detector agreement and timing report")
    b.add_argument("graphs", nargs="*", help="FIB files or shape:n specs (shape+loop:n injects a loop)")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--random", type=int, default=0, help="add this many generated instances")
    b.add_argument("--scale-graphs", action="store_true", help="add graphs at the benchmark edge counts")
    b.add_argument("--full-johnson", action="store_true", help="enumerate every cycle")
    b.add_argument("--csv")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("reconstruct", parents=[common], help="recover a FIB from all share files")
    r.add_argument("shares")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INVALID if exc.code else OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"seagull: {exc}", file=sys.stderr)
        return exc.code
    except QueryRejected as exc:
        print(f"seagull: query rejected: {exc}", file=sys.stderr)
        return REJECTED
    except UnknownDestinationError as exc:
        print(f"seagull: {exc}", file=sys.stderr)
        return UNKNOWN
    except (FibError, ShareFileError, IngestError, InvalidConfigurationError, ValueError) as exc:
        print(f"seagull: invalid input: {exc}", file=sys.stderr)
        return INVALID
    except AuditError as exc:
        print(f"seagull: {exc}", file=sys.stderr)
        return INVARIANT
    except ProtocolAbort as exc:
        print(f"seagull: session aborted: {exc}", file=sys.stderr)
        return ABORTED


if __name__ == "__main__":
    sys.exit(main())
