"""Command line: generate workloads, replay them, measure scaling, audit."""

from __future__ import annotations

import argparse
import sys
import time
from typing import List, Optional

from .api import Config, create
from .audit import AUDITS
from .bench import parse_grid, run_scaling, run_verify
from .oracle import Delete, Insert, dump_workload, generate, load_workload


def _config(args) -> Config:
    return Config(B=args.block_size, f=args.fanout_exp, pinned_limit=args.mem_blocks,
                  seed=args.seed, leaf_factor=args.leaf_factor)


def cmd_generate(args) -> int:
    w = generate(args.n, args.dist, args.seed, ops=args.ops, query_every=args.query_every,
                 universe=args.universe, selectivity=args.selectivity)
    dump_workload(w, args.out)
    print(f"wrote {len(w.ops)} ops to {args.out}")
    return 0


def cmd_run(args) -> int:
    w = load_workload(args.workload)
    cfg = _config(args)
    t0 = time.perf_counter()
    if args.verify:
        rep = run_verify(w, cfg, audit_every=args.audit_every)
        sys.stdout.write(rep.text())
        print(f"elapsed {time.perf_counter() - t0:.2f}s")
        return 0 if rep.passed else 1
    k = 0
    while k < len(w.ops) and isinstance(w.ops[k], Insert):
        k += 1
    idx = create(cfg, [op.point for op in w.ops[:k]])
    built = idx.io_stats()
    answered = 0
    for op in w.ops[k:]:
        if isinstance(op, Insert):
            idx.insert(op.point)
        elif isinstance(op, Delete):
            idx.delete(op.id)
        else:
            answered += len(idx.query(op.box))
    st = idx.io_stats()
    print(f"build reads={built.reads} writes={built.writes}")
    print(f"ops reads={st.reads - built.reads} writes={st.writes - built.writes} "
          f"reported={answered} live={len(idx)}")
    print(f"elapsed {time.perf_counter() - t0:.2f}s")
    return 0


def cmd_scaling(args) -> int:
    cfg = Config(pinned_limit=args.mem_blocks, seed=args.seed, f=args.fanout_exp,
                 leaf_factor=args.leaf_factor)
    _cells, text = run_scaling(parse_grid(args.grid), cfg, queries=args.queries,
                               updates=args.updates, seed=args.seed, out=args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {args.out}")
    return 0


def cmd_audit(args) -> int:
    names = list(AUDITS) if args.structure == "all" else [args.structure]
    bad = 0
    for name in names:
        kw = {"seed": args.seed}
        if args.block_size:
            kw["block_capacity"] = args.block_size
        res = AUDITS[name](**kw)
        print(res.line())
        for v in res.violations[:10]:
            print("  " + v)
        bad += not res.ok
    return 1 if bad else 0


def cmd_kernels(args) -> int:
    from .kernel_bench import compare
    for line in compare(args.n, args.repeat):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xmrange", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a random workload file")
    g.add_argument("--n", type=int, required=True, help="initial inserts")
    g.add_argument("--dist", choices=["uniform", "clustered"], default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--ops", type=int, default=0, help="mixed operations after the inserts")
    g.add_argument("--query-every", type=int, default=10)
    g.add_argument("--universe", type=int, default=1 << 20)
    g.add_argument("--selectivity", type=float, default=0.001)
    g.set_defaults(fn=cmd_generate)

    def structure_opts(q):
        q.add_argument("--block-size", type=int, default=32)
        q.add_argument("--fanout-exp", type=float, default=1.0 / 6.0)
        q.add_argument("--mem-blocks", type=int, default=None, help="pinned block limit")
        q.add_argument("--leaf-factor", type=int, default=4)
        q.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="replay a workload file")
    r.add_argument("--workload", required=True)
    structure_opts(r)
    r.add_argument("--verify", action="store_true", help="check every query against the oracle")
    r.add_argument("--audit-every", type=int, default=0)
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("scaling", help="I/O scaling report as CSV")
    s.add_argument("--grid", default="2^12,2^14;32,64", help="'N1,N2,...;B1,B2,...'")
    s.add_argument("--out", default=None)
    s.add_argument("--queries", type=int, default=60)
    s.add_argument("--updates", type=int, default=0)
    s.add_argument("--fanout-exp", type=float, default=1.0 / 6.0)
    s.add_argument("--mem-blocks", type=int, default=None)
    s.add_argument("--leaf-factor", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_scaling)

    a = sub.add_parser("audit", help="randomized structural self-check")
    a.add_argument("--structure", choices=sorted(AUDITS) + ["all"], default="all")
    a.add_argument("--block-size", type=int, default=None)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(fn=cmd_audit)

    k = sub.add_parser("kernels", help="compiled vs pure-Python kernel timings")
    k.add_argument("--n", type=int, default=100_000)
    k.add_argument("--repeat", type=int, default=5)
    k.set_defaults(fn=cmd_kernels)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
