"""In-memory reference answers and workload files.

Nothing here touches a block store: these functions define what a correct
answer is, not what it costs.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .geom import Point3, QueryBox, contains


def oracle_query(points: Iterable, box: QueryBox) -> List[Point3]:
    """Linear filter."""
    return [Point3(*p[:4]) for p in points if contains(box, p)]


def oracle_query_sorted(points: Sequence, box: QueryBox) -> List[Point3]:
    """Second opinion: sort on every axis, cut each axis to its interval with
    binary search, intersect the id sets of the three slices."""
    pts = [Point3(*p[:4]) for p in points]
    slices = []
    for a, (lo, hi) in enumerate(box.axes()):
        order = sorted(pts, key=lambda p: p[a])
        vals = [p[a] for p in order]
        i = 0 if lo is None else bisect.bisect_left(vals, lo)
        j = len(vals) if hi is None else bisect.bisect_right(vals, hi)
        slices.append({p.id for p in order[i:j]})
    keep = slices[0] & slices[1] & slices[2]
    return [p for p in pts if p.id in keep]


# -- workloads -------------------------------------------------------------------


@dataclass(frozen=True)
class Insert:
    point: Point3


@dataclass(frozen=True)
class Delete:
    id: int


@dataclass(frozen=True)
class Query:
    box: QueryBox


Op = Union[Insert, Delete, Query]


@dataclass
class Workload:
    ops: List[Op]
    seed: int = 0
    params: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ops)


def random_point(rng: random.Random, pid: int, dist: str, universe: int,
                 centers: Sequence[Tuple[int, int, int]] = ()) -> Point3:
    if dist == "uniform":
        return Point3(rng.randrange(universe), rng.randrange(universe),
                      rng.randrange(universe), pid)
    if dist == "clustered":
        cx, cy, cz = rng.choice(centers)
        s = max(1, universe // 50)
        clip = lambda v: min(universe - 1, max(0, int(v)))  # noqa: E731
        return Point3(clip(rng.gauss(cx, s)), clip(rng.gauss(cy, s)),
                      clip(rng.gauss(cz, s)), pid)
    raise ValueError(f"unknown distribution {dist!r}")


def random_box(rng: random.Random, universe: int, selectivity: float = 0.05,
               open_prob: float = 0.1) -> QueryBox:
    """Box whose side lengths give expected volume ``selectivity`` of the
    cube; each side is left open with probability ``open_prob``."""
    w = max(1, int(universe * selectivity ** (1.0 / 3.0)))
    b: List[Optional[int]] = []
    for _ in range(3):
        lo = rng.randrange(universe - w + 1)
        b += [None if rng.random() < open_prob else lo,
              None if rng.random() < open_prob else lo + w - 1]
    return QueryBox(*b)


def generate(n: int, dist: str = "uniform", seed: int = 0, ops: int = 0,
             query_every: int = 10, universe: int = 1 << 20,
             selectivity: float = 0.001, delete_frac: float = 0.5) -> Workload:
    """``n`` inserts, then ``ops`` mixed operations where every
    ``query_every``-th one is a query and the rest split between inserts
    and deletes of random live ids."""
    rng = random.Random(seed)
    centers = [tuple(rng.randrange(universe) for _ in range(3)) for _ in range(8)]
    out: List[Op] = []
    live: List[int] = []
    where: Dict[int, int] = {}
    nid = 0

    def ins():
        nonlocal nid
        out.append(Insert(random_point(rng, nid, dist, universe, centers)))
        where[nid] = len(live)
        live.append(nid)
        nid += 1

    for _ in range(n):
        ins()
    for k in range(1, ops + 1):
        if query_every and k % query_every == 0:
            out.append(Query(random_box(rng, universe, selectivity)))
        elif live and rng.random() < delete_frac:
            j = rng.randrange(len(live))
            pid = live[j]
            live[j] = live[-1]
            where[live[j]] = j
            live.pop()
            del where[pid]
            out.append(Delete(pid))
        else:
            ins()
    params = dict(n=n, dist=dist, ops=ops, query_every=query_every,
                  universe=universe, selectivity=selectivity, delete_frac=delete_frac)
    return Workload(out, seed, params)


# -- text format ----------------------------------------------------------------------


def _bound(tok: str) -> Optional[int]:
    return None if tok == "*" else int(tok)


def _tok(v: Optional[int]) -> str:
    return "*" if v is None else str(v)


def format_op(op: Op) -> str:
    if isinstance(op, Insert):
        return "I {} {} {} {}".format(*op.point)
    if isinstance(op, Delete):
        return f"D {op.id}"
    b = op.box
    return "Q " + " ".join(_tok(v) for v in (b.xlo, b.xhi, b.ylo, b.yhi, b.zlo, b.zhi))


def parse_op(line: str) -> Op:
    f = line.split()
    if f[0] == "I" and len(f) == 5:
        return Insert(Point3(*map(int, f[1:])))
    if f[0] == "D" and len(f) == 2:
        return Delete(int(f[1]))
    if f[0] == "Q" and len(f) == 7:
        return Query(QueryBox(*map(_bound, f[1:])))
    raise ValueError(f"bad workload line: {line!r}")


def dump_workload(w: Workload, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# seed={w.seed} " + " ".join(f"{k}={v}" for k, v in w.params.items()) + "\n")
        for op in w.ops:
            fh.write(format_op(op) + "\n")


def load_workload(path: str) -> Workload:
    ops: List[Op] = []
    seed, params = 0, {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for kv in line[1:].split():
                    k, _, v = kv.partition("=")
                    if k == "seed":
                        seed = int(v)
                    elif k:
                        params[k] = v
                continue
            ops.append(parse_op(line))
    return Workload(ops, seed, params)
