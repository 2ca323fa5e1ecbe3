"""Randomized self-checks for each structure, shared by the CLI and tests.

Each ``audit_*`` function builds a structure from a seed, runs a batch of
random mutations, checks invariants after every batch, and returns an
:class:`AuditResult`.  None of the checks are charged I/O.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

from .block_io import BlockStore
from .boundary import (TApproxBoundary, build_boundary, build_dominance_lists,
                       dominated_by_surface, dominates_corner, z_top)
from .geom import Point3, QueryBox, enc
from .oracle import oracle_query


@dataclass
class AuditResult:
    structure: str
    operations: int = 0
    checks: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def line(self) -> str:
        return (f"{self.structure}: {'ok' if self.ok else 'FAIL'} ops={self.operations} "
                f"checks={self.checks} violations={len(self.violations)}")


# -- boundary --------------------------------------------------------------------


def rank_points(n: int, rng: random.Random) -> List[Point3]:
    """``n`` points whose coordinates are permutations of ``1..n``."""
    xs, ys, zs = (rng.sample(range(1, n + 1), n) for _ in range(3))
    return [Point3(xs[i], ys[i], zs[i], i) for i in range(n)]


def corner_counts(bd: TApproxBoundary, points: Sequence) -> List[int]:
    """Brute-force number of points dominating each inward corner."""
    return [sum(1 for p in points if p[0] >= c.x and p[1] >= c.y and p[2] >= c.z)
            for c in bd.corners]


def count_violations(bd: TApproxBoundary, points: Sequence) -> List[str]:
    t = bd.t
    return [f"corner {c.pos} dominated by {k} points, outside [{t}, {3 * t}]"
            for c, k in zip(bd.corners, corner_counts(bd, points))
            if not t <= k <= 3 * t]


def separation_violations(bd: TApproxBoundary, points: Sequence, probes: int,
                          rng: random.Random) -> List[str]:
    """A probe must either dominate an inward corner or be dominated by the
    surface, never both and never neither.  Probes sit at half-integers so
    they avoid the grid the corners live on."""
    n = len(points)
    zmax = z_top(points)
    out = []
    for _ in range(probes):
        q = tuple(rng.randint(0, n + 1) + 0.5 for _ in range(3))
        if dominates_corner(bd, q) == dominated_by_surface(bd, q, zmax):
            out.append(f"probe {q} on both sides or neither")
    return out


def audit_boundary(block_capacity: int = 64, seed: int = 0, probes: int = 1000) -> AuditResult:
    rng = random.Random(seed)
    b = block_capacity
    n = round(b ** (4.0 / 3.0))
    pts = rank_points(n, rng)
    st = BlockStore(b)
    bd = build_boundary(st, pts, b)
    build_dominance_lists(st, bd, pts)
    res = AuditResult("boundary", operations=1, checks=len(bd.corners) + probes)
    res.violations += count_violations(bd, pts)
    res.violations += separation_violations(bd, pts, probes, rng)
    return res


# -- dynamic structures ---------------------------------------------------------------


def _churn(rng, live: Dict[int, tuple], nid: int, universe: int, ins, dele):
    if not live or rng.random() < 0.5:
        p = (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), nid)
        ins(p)
        live[nid] = p
        return nid + 1
    pid = rng.choice(list(live))
    dele(live.pop(pid))
    return nid


def audit_full(block_capacity: int = 8, n: int = 300, ops: int = 600, batch: int = 50,
               seed: int = 0, universe: int = 1000) -> AuditResult:
    from .api import Config, create
    rng = random.Random(seed)
    live = {i: (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), i)
            for i in range(n)}
    b = block_capacity
    idx = create(Config(B=b, seed=seed, leaf_factor=1), list(live.values()))
    from .full3d import query_tiling_ok
    res = AuditResult("full")
    nid = n
    for k in range(ops):
        nid = _churn(rng, live, nid, universe, idx.insert, lambda p: idx.delete(p[3]))
        lo = [rng.randrange(universe) for _ in range(3)]
        box = QueryBox(lo[0], lo[0] + universe // 3, lo[1], lo[1] + universe // 3,
                       lo[2], lo[2] + universe // 3)
        got = sorted(p.id for p in idx.query(box))
        if got != sorted(p.id for p in oracle_query(live.values(), box)):
            res.violations.append(f"op {k}: query mismatch on {box}")
        if not query_tiling_ok(idx.store, idx.tree, box):
            res.violations.append(f"op {k}: z decomposition does not tile")
        res.operations += 1
        res.checks += 2
        if (k + 1) % batch == 0:
            res.violations += idx.audit(deep=True)
            res.checks += 1
    return res


def audit_zrange(block_capacity: int = 8, n: int = 400, ops: int = 600, batch: int = 50,
                 seed: int = 0, sign: int = 1, universe: int = 1000) -> AuditResult:
    from .zrange import tiling_ok, zt_audit, zt_build, zt_delete, zt_insert, zt_query
    rng = random.Random(seed)
    st = BlockStore(block_capacity)
    key = lambda p: (enc(p[0], p[3]), enc(p[1], p[3]), enc(p[2], p[3]), p[3])  # noqa: E731
    live = {i: (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), i)
            for i in range(n)}
    zt = zt_build(st, [key(p) for p in live.values()], sign=sign)
    res = AuditResult(f"zrange(sign={sign})")
    nid = n
    for k in range(ops):
        nid = _churn(rng, live, nid, universe, lambda p: zt_insert(st, zt, key(p)),
                     lambda p: zt_delete(st, zt, key(p)))
        a, c, d = (rng.randrange(universe) for _ in range(3))
        A, Bx = enc(a, 0), enc(a + universe // 3, (1 << 32) - 1)
        C = sign * enc(c, 0) if sign > 0 else -enc(c, (1 << 32) - 1)
        D, E = enc(d, 0), enc(d + universe // 3, (1 << 32) - 1)
        got = sorted(r[3] for r in zt_query(st, zt, A, Bx, C, D, E))
        want = sorted(p[3] for p in live.values()
                      if A <= key(p)[0] <= Bx and sign * key(p)[1] >= C and D <= key(p)[2] <= E)
        if got != want:
            res.violations.append(f"op {k}: query mismatch")
        if not tiling_ok(st, zt, D, E):
            res.violations.append(f"op {k}: z decomposition does not tile")
        res.operations += 1
        res.checks += 2
        if (k + 1) % batch == 0:
            res.violations += zt_audit(st, zt)
            res.checks += 1
    return res


def audit_pst(block_capacity: int = 8, n: int = 400, ops: int = 800, batch: int = 50,
              seed: int = 0, slots: int = 3, universe: int = 10 ** 6) -> AuditResult:
    from .pst import pst_audit, pst_build, pst_delete, pst_insert, pst_query
    rng = random.Random(seed)
    st = BlockStore(block_capacity)

    def rec(pid):
        return (rng.randrange(universe) * 4096 + pid, rng.randrange(universe) * 4096 + pid,
                rng.randint(1, slots), pid, rng.randrange(universe))

    live = {i: rec(i) for i in range(n)}
    T = pst_build(st, list(live.values()), slots)
    T.instrument = True
    res = AuditResult("pst")
    nid = n
    for k in range(ops):
        if not live or rng.random() < 0.5:
            r = rec(nid)
            pst_insert(st, T, r)
            live[nid] = r
            nid += 1
        else:
            pst_delete(st, T, live.pop(rng.choice(list(live))))
        a = rng.randrange(universe * 4096)
        b = a + universe * 4096 // 3
        c = rng.randrange(universe * 4096)
        d = rng.randint(1, slots)
        e = rng.randint(d, slots)
        got = sorted(r[3] for r in pst_query(st, T, a, b, c, d, e))
        want = sorted(r[3] for r in live.values() if a <= r[0] <= b and r[1] >= c and d <= r[2] <= e)
        if got != want:
            res.violations.append(f"op {k}: query mismatch")
        if T.last_trace.fact1_violations:
            res.violations.append(f"op {k}: off-path node without a full slot")
        res.operations += 1
        res.checks += 2
        if (k + 1) % batch == 0:
            res.violations += pst_audit(st, T)
            res.checks += 1
    return res


def audit_sided(block_capacity: int = 8, n: int = 300, ops: int = 600, seed: int = 0,
                sidedness=(2, 1, 2), universe: int = 1000) -> AuditResult:
    from .sided_small import iter_records, ss_build, ss_delete, ss_insert, ss_query
    rng = random.Random(seed)
    st = BlockStore(block_capacity)
    live = {i: (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), i)
            for i in range(n)}
    s = ss_build(st, list(live.values()), sidedness)
    res = AuditResult(f"sided{tuple(sidedness)}")
    nid = n
    for k in range(ops):
        nid = _churn(rng, live, nid, universe, lambda p: ss_insert(st, s, p),
                     lambda p: ss_delete(st, s, p))
        b = []
        for a in range(3):
            lo, hi = sorted(rng.randrange(universe) for _ in range(2))
            b += [lo if sidedness[a] >= 1 else None, hi if sidedness[a] == 2 else None]
        box = QueryBox(*b)
        got = sorted(r[3] for r in ss_query(st, s, box))
        if got != sorted(p.id for p in oracle_query(live.values(), box)):
            res.violations.append(f"op {k}: query mismatch")
        if sorted(iter_records(st, s)) != sorted(live.values()):
            res.violations.append(f"op {k}: stored set differs")
        res.operations += 1
        res.checks += 2
    return res


def audit_ladder(block_capacity: int = 16, ops: int = 600, seed: int = 0,
                 universe: int = 1000) -> AuditResult:
    from .small_dominance import iter_live, sd_build, sd_delete, sd_insert, sd_query
    rng = random.Random(seed)
    b = block_capacity
    n = int(2 * b ** (4.0 / 3.0))
    st = BlockStore(b)
    live = {i: (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), i)
            for i in range(n)}
    lad = sd_build(st, list(live.values()))
    res = AuditResult("ladder")
    nid = n
    cap = lad.alpha * b ** (4.0 / 3.0)
    for k in range(ops):
        if len(live) + 1 > cap or (live and rng.random() < 0.5):
            pid = rng.choice(list(live))
            sd_delete(st, lad, pid)
            del live[pid]
        else:
            p = (rng.randrange(universe), rng.randrange(universe), rng.randrange(universe), nid)
            sd_insert(st, lad, p)
            live[nid] = p
            nid += 1
        q = tuple(rng.randrange(universe) for _ in range(3))
        got = sorted(r[3] for r in sd_query(st, lad, q))
        if got != sorted(p[3] for p in live.values() if all(p[a] >= q[a] for a in range(3))):
            res.violations.append(f"op {k}: query mismatch")
        if sorted(iter_live(st, lad)) != sorted(live.values()):
            res.violations.append(f"op {k}: stored set differs")
        res.operations += 1
        res.checks += 2
    return res


AUDITS: Dict[str, Callable[..., AuditResult]] = {
    "boundary": audit_boundary,
    "ladder": audit_ladder,
    "sided": audit_sided,
    "pst": audit_pst,
    "zrange": audit_zrange,
    "full": audit_full,
}
