"""Priority search tree for queries ``[a, b] x [c, +inf) x [d, e]`` whose third
coordinate is a small slot number ``1..Z``.

The base tree is a weight-balanced tree over x.  Every node ``v`` owns, for
each slot ``j``, a set ``S_v[j]`` of at most ``B`` points (leaves: all
remaining points) chosen so that points owned by an ancestor have larger y
than points owned by a descendant, slot by slot.  Three sided-small
structures per node index the owned points:

* ``E``  -- the points owned by the node itself,
* ``D``  -- the points owned by its children,
* ``Dp`` -- one witness per (internal child, full slot): the lowest point of
  the slot, tagged with the child's uid.

A query walks the two boundary paths, reports from ``E`` on the paths and
uses ``D``/``Dp`` to sweep the subtrees hanging off them, descending into a
child only when one of its slots is full and entirely above ``c``.

Records are ``(x, y, slot, id, *payload)``; x values must be distinct among
live points, ties in y are broken by id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .block_io import BlockStore, read_run, write_run
from .geom import INT_MAX, INT_MIN
from .sided_small import (BOTH, GE, SidedSmallSet, iter_records, ss_build,
                          ss_delete, ss_insert, ss_query)

ORIENT = (BOTH, GE, BOTH)


def fanout(block_capacity: int, f: float) -> int:
    return max(2, round(block_capacity ** f))


def leaf_parameter(block_capacity: int, f: float) -> int:
    return max(2, math.ceil(block_capacity ** (1.0 + f) - 1e-9))


def _yk(r):
    return (r[1], r[3])


class PSTNode:
    __slots__ = ("uid", "level", "parent", "children", "lo", "hi", "weight",
                 "dead", "cnt", "mn", "mx", "wit", "E", "D", "Dp", "vals", "block")

    def __init__(self, uid: int, level: int, z: int):
        self.uid = uid
        self.level = level
        self.parent: Optional[PSTNode] = None
        self.children: List[PSTNode] = []
        self.lo = INT_MAX
        self.hi = INT_MIN
        self.weight = 0
        self.dead = 0
        self.cnt = [0] * (z + 1)
        self.mn: List[Optional[tuple]] = [None] * (z + 1)
        self.mx: List[Optional[tuple]] = [None] * (z + 1)
        self.wit: List[Optional[tuple]] = [None] * (z + 1)
        self.E: Optional[SidedSmallSet] = None
        self.D: Optional[SidedSmallSet] = None
        self.Dp: Optional[SidedSmallSet] = None
        self.vals: List[int] = []
        self.block: List[int] = []

    @property
    def is_leaf(self) -> bool:
        return self.level == 0


@dataclass
class QueryTrace:
    """Per-query instrumentation."""

    path_nodes: int = 0
    offpath_nodes: int = 0
    fact1_checks: int = 0
    fact1_violations: int = 0


@dataclass
class PSTree:
    block_capacity: int
    slots: int
    f: float
    branch: int
    leaf_param: int
    ss_leaf: int
    root: Optional[PSTNode] = None
    nodes: Dict[int, PSTNode] = field(default_factory=dict)
    next_uid: int = 0
    live: int = 0
    dead: int = 0
    rebuilds: int = 0
    splits: int = 0
    instrument: bool = False
    last_trace: QueryTrace = field(default_factory=QueryTrace)
    dirty: set = field(default_factory=set)

    def target(self, level: int) -> int:
        return self.leaf_param * self.branch ** level

    def height(self) -> int:
        return self.root.level + 1 if self.root else 0

    def blocks(self) -> int:
        n = 0
        for v in self.nodes.values():
            n += len(v.block) + len(v.vals) + v.E.blocks()
            if v.D is not None:
                n += v.D.blocks() + v.Dp.blocks()
        return n


# -- small helpers --------------------------------------------------------------------


def _ss(store: BlockStore, T: PSTree, recs) -> SidedSmallSet:
    return ss_build(store, recs, orient=ORIENT, leaf_size=T.ss_leaf)


def _slot_box(j: int):
    return (INT_MIN, INT_MAX, INT_MIN, INT_MAX, j, j)


def _new_node(store: BlockStore, T: PSTree, level: int) -> PSTNode:
    v = PSTNode(T.next_uid, level, T.slots)
    T.next_uid += 1
    T.nodes[v.uid] = v
    v.block = []
    return v


def _meta(T: PSTree, v: PSTNode) -> list:
    recs = [(0, c.uid, c.lo, c.hi, c.weight) for c in v.children]
    for j in range(1, T.slots + 1):
        if v.cnt[j]:
            recs.append((1, j, v.cnt[j], v.mn[j][1], v.mx[j][1]))
    recs.append((2, v.level, v.lo, v.hi, v.weight))
    return recs


def _visit(store: BlockStore, v: PSTNode) -> None:
    # one block unless B is tiny compared with fan-out plus slots
    for a in v.block:
        store.read_block(a)


def _flush(store: BlockStore, T: PSTree) -> None:
    b = T.block_capacity
    for v in T.dirty:
        if v.uid not in T.nodes:
            continue
        recs = _meta(T, v)
        need = -(-len(recs) // b)
        while len(v.block) > need:
            store.free(v.block.pop())
        for k in range(need):
            part = recs[k * b:(k + 1) * b]
            if k < len(v.block):
                store.write_block(v.block[k], part)
            else:
                v.block.append(store.allocate(part))
    T.dirty.clear()


def _free_node(store: BlockStore, T: PSTree, v: PSTNode) -> None:
    for s in (v.E, v.D, v.Dp):
        if s is not None:
            s.free(store)
    store.free_all(v.vals)
    store.free_all(v.block)
    del T.nodes[v.uid]


def _set_meta(T: PSTree, v: PSTNode, recs) -> None:
    z = T.slots
    v.cnt = [0] * (z + 1)
    v.mn = [None] * (z + 1)
    v.mx = [None] * (z + 1)
    for r in recs:
        j = r[2]
        v.cnt[j] += 1
        if v.mn[j] is None or _yk(r) < _yk(v.mn[j]):
            v.mn[j] = r
        if v.mx[j] is None or _yk(r) > _yk(v.mx[j]):
            v.mx[j] = r


def _witness(T: PSTree, v: PSTNode, j: int) -> Optional[tuple]:
    if v.is_leaf or v.cnt[j] != T.block_capacity:
        return None
    m = v.mn[j]
    return (m[0], m[1], j, m[3], v.uid)


# -- construction ---------------------------------------------------------------------


def pst_build(store: BlockStore, recs: Sequence, slots: int, f: float = 1.0 / 6.0,
              ss_leaf: Optional[int] = None, branch: Optional[int] = None) -> PSTree:
    b = store.block_capacity
    T = PSTree(b, slots, f, branch or fanout(b, f), leaf_parameter(b, f), ss_leaf or b)
    _bulk(store, T, [tuple(r) for r in recs])
    return T


def _check_records(T: PSTree, recs) -> None:
    xs = set()
    for r in recs:
        if not 1 <= r[2] <= T.slots:
            raise ValueError(f"slot {r[2]} outside 1..{T.slots}")
        if r[0] in xs:
            raise ValueError(f"duplicate x value {r[0]}")
        xs.add(r[0])


def _bulk(store: BlockStore, T: PSTree, recs: List[tuple]) -> None:
    _check_records(T, recs)
    recs.sort()
    n = len(recs)
    h = 0
    if n >= T.leaf_param:
        h = max(0, round(math.log(n / T.leaf_param, T.branch)))
    T.root = _shape(store, T, recs, h, None)
    T.live, T.dead = n, 0
    # owned sets, top-down, slot by slot in descending y
    by_y = sorted(recs, key=_yk, reverse=True)
    owned: Dict[int, List[tuple]] = {}
    _assign(T, T.root, by_y, owned)
    _materialize(store, T, T.root, owned)
    _flush(store, T)


def _shape(store: BlockStore, T: PSTree, recs: List[tuple], level: int, parent) -> PSTNode:
    v = _new_node(store, T, level)
    v.parent = parent
    v.weight = len(recs)
    if recs:
        v.lo, v.hi = recs[0][0], recs[-1][0]
    if level == 0:
        v.vals = write_run(store, [(r[0], r[3], 1) for r in recs])
    else:
        k = T.branch
        n = len(recs)
        for i in range(k):
            part = recs[i * n // k:(i + 1) * n // k]
            v.children.append(_shape(store, T, part, level - 1, v))
    T.dirty.add(v)
    return v


def _assign(T: PSTree, v: PSTNode, cand: List[tuple], owned) -> None:
    """``cand`` holds the points in v's range not owned above, by y descending."""
    if v.is_leaf:
        owned[v.uid] = cand
        return
    taken = [0] * (T.slots + 1)
    mine, rest = [], []
    for r in cand:
        j = r[2]
        if taken[j] < T.block_capacity:
            taken[j] += 1
            mine.append(r)
        else:
            rest.append(r)
    owned[v.uid] = mine
    parts: List[List[tuple]] = [[] for _ in v.children]
    his = [c.hi for c in v.children]
    for r in rest:
        parts[_child_index_his(his, r[0])].append(r)
    for c, part in zip(v.children, parts):
        _assign(T, c, part, owned)


def _child_index_his(his, x) -> int:
    for i, h in enumerate(his):
        if x <= h:
            return i
    return len(his) - 1


def _materialize(store: BlockStore, T: PSTree, v: PSTNode, owned) -> None:
    mine = owned[v.uid]
    v.E = _ss(store, T, mine)
    _set_meta(T, v, mine)
    if not v.is_leaf:
        for c in v.children:
            _materialize(store, T, c, owned)
        v.D = _ss(store, T, [r for c in v.children for r in owned[c.uid]])
        wits = []
        for c in v.children:
            for j in range(1, T.slots + 1):
                c.wit[j] = _witness(T, c, j)
                if c.wit[j] is not None:
                    wits.append(c.wit[j])
        v.Dp = _ss(store, T, wits)


def _free_all_nodes(store: BlockStore, T: PSTree) -> None:
    for v in list(T.nodes.values()):
        _free_node(store, T, v)
    T.root = None


def pst_records(store: BlockStore, T: PSTree, counted: bool = True) -> List[tuple]:
    """All live records, read from the nodes' own structures."""
    out: List[tuple] = []
    for v in T.nodes.values():
        if counted:
            out.extend(ss_query(store, v.E, (INT_MIN, INT_MAX, INT_MIN, INT_MAX, INT_MIN, INT_MAX)))
        else:
            out.extend(iter_records(store, v.E))
    return out


def _global_rebuild(store: BlockStore, T: PSTree) -> None:
    recs = pst_records(store, T)
    _free_all_nodes(store, T)
    T.dirty.clear()
    _bulk(store, T, recs)
    T.rebuilds += 1


def pst_free(store: BlockStore, T: PSTree) -> None:
    _free_all_nodes(store, T)
    T.dirty.clear()


# -- query ------------------------------------------------------------------------------


def _first_ge(v: PSTNode, a) -> Optional[int]:
    for i, c in enumerate(v.children):
        if c.weight and c.hi >= a:
            return i
    return None


def _last_le(v: PSTNode, b) -> Optional[int]:
    for i in range(len(v.children) - 1, -1, -1):
        c = v.children[i]
        if c.weight and c.lo <= b:
            return i
    return None


def pst_query(store: BlockStore, T: PSTree, a=None, b=None, c=None, d=None, e=None) -> list:
    """Records with ``a <= x <= b``, ``y >= c`` and ``d <= slot <= e``.

    ``None`` leaves a side open.
    """
    a = INT_MIN if a is None else a
    b = INT_MAX if b is None else b
    c = INT_MIN if c is None else c
    d = 1 if d is None else max(1, d)
    e = T.slots if e is None else min(T.slots, e)
    tr = QueryTrace()
    T.last_trace = tr
    out: list = []
    if T.root is None or a > b or d > e:
        return out
    q = (a, b, c, INT_MAX, d, e)
    v = T.root
    while True:
        _on_path(store, T, v, q, out, tr)
        if v.is_leaf:
            return out
        ia, ib = _first_ge(v, a), _last_le(v, b)
        if ia is None or ib is None or ia > ib:
            return out
        if ia == ib:
            v = v.children[ia]
            continue
        _sweep(store, T, v, ia + 1, ib - 1, q, out, tr)
        u = v.children[ia]
        while True:
            _on_path(store, T, u, q, out, tr)
            if u.is_leaf:
                break
            i = _first_ge(u, a)
            _sweep(store, T, u, i + 1, len(u.children) - 1, q, out, tr)
            u = u.children[i]
        u = v.children[ib]
        while True:
            _on_path(store, T, u, q, out, tr)
            if u.is_leaf:
                break
            i = _last_le(u, b)
            _sweep(store, T, u, 0, i - 1, q, out, tr)
            u = u.children[i]
        return out


def _on_path(store, T, v, q, out, tr) -> None:
    _visit(store, v)
    tr.path_nodes += 1
    out.extend(ss_query(store, v.E, q))


def _sweep(store, T, v, i, k, q, out, tr) -> None:
    """Report everything owned strictly below ``v`` in children ``i..k``."""
    kids = [c for c in v.children[i:k + 1] if c.weight] if i <= k else []
    if not kids:
        return
    qv = (kids[0].lo, kids[-1].hi, q[2], INT_MAX, q[4], q[5])
    _report_below(store, T, v, qv, out, tr, False)


def _report_below(store, T, v, qv, out, tr, v_offpath: bool) -> None:
    out.extend(ss_query(store, v.D, qv))
    targets = {w[4] for w in ss_query(store, v.Dp, qv)}
    for child in v.children:
        if child.uid in targets:
            _visit(store, child)
            tr.offpath_nodes += 1
            if T.instrument:
                _check_fact1(store, T, v, child, qv, tr, v_offpath)
            _report_below(store, T, child, qv, out, tr, True)


def _owned_in(store, T, v, qv) -> List[int]:
    """Uncounted per-slot counts of points owned by ``v`` inside ``qv``."""
    cnt = [0] * (T.slots + 1)
    for r in iter_records(store, v.E):
        if qv[0] <= r[0] <= qv[1] and r[1] >= qv[2] and qv[4] <= r[2] <= qv[5]:
            cnt[r[2]] += 1
    return cnt


def _check_fact1(store, T, parent, w, qv, tr, parent_offpath: bool) -> None:
    B = T.block_capacity
    own = _owned_in(store, T, w, qv)
    tr.fact1_checks += 1
    if not any(n == B for n in own):
        tr.fact1_violations += 1
    if parent_offpath:
        par = _owned_in(store, T, parent, qv)
        for j in range(1, T.slots + 1):
            if own[j] and par[j] != B:
                tr.fact1_violations += 1


# -- updates -----------------------------------------------------------------------------


def _add(store: BlockStore, T: PSTree, v: PSTNode, r: tuple) -> None:
    ss_insert(store, v.E, r)
    if v.parent is not None:
        ss_insert(store, v.parent.D, r)
    j = r[2]
    v.cnt[j] += 1
    if v.mn[j] is None or _yk(r) < _yk(v.mn[j]):
        v.mn[j] = r
    if v.mx[j] is None or _yk(r) > _yk(v.mx[j]):
        v.mx[j] = r
    T.dirty.add(v)


def _remove(store: BlockStore, T: PSTree, v: PSTNode, r: tuple) -> None:
    ss_delete(store, v.E, r)
    if v.parent is not None:
        ss_delete(store, v.parent.D, r)
    j = r[2]
    v.cnt[j] -= 1
    if v.cnt[j] == 0:
        v.mn[j] = v.mx[j] = None
    elif r[3] == v.mn[j][3] or r[3] == v.mx[j][3]:
        rest = ss_query(store, v.E, _slot_box(j))
        v.mn[j] = min(rest, key=_yk)
        v.mx[j] = max(rest, key=_yk)
    T.dirty.add(v)


def _sync_witness(store: BlockStore, T: PSTree, v: PSTNode, j: int) -> None:
    if v.parent is None:
        v.wit[j] = None
        return
    want = _witness(T, v, j)
    have = v.wit[j]
    if want == have:
        return
    if have is not None:
        ss_delete(store, v.parent.Dp, have)
    if want is not None:
        ss_insert(store, v.parent.Dp, want)
    v.wit[j] = want


def _route(v: PSTNode, x) -> PSTNode:
    i = _child_index_his([c.hi for c in v.children], x)
    return v.children[i]


def pst_insert(store: BlockStore, T: PSTree, rec) -> None:
    rec = tuple(rec)
    if not 1 <= rec[2] <= T.slots:
        raise ValueError(f"slot {rec[2]} outside 1..{T.slots}")
    x = rec[0]
    path = []
    v = T.root
    while True:
        _visit(store, v)
        path.append(v)
        v.weight += 1
        v.lo, v.hi = min(v.lo, x), max(v.hi, x)
        T.dirty.add(v)
        if v.is_leaf:
            break
        v = _route(v, x)
    leaf = path[-1]
    _append_value(store, leaf, (x, rec[3], 1))
    T.live += 1
    _place(store, T, rec)
    for v in reversed(path):
        if v.uid in T.nodes and v.weight >= 2 * T.target(v.level):
            _split(store, T, v)
    _flush(store, T)


def _append_value(store: BlockStore, leaf: PSTNode, val) -> None:
    b = store.block_capacity
    if leaf.vals:
        blk = store.read_block(leaf.vals[-1])
        if len(blk) < b:
            store.write_block(leaf.vals[-1], blk + (val,))
            return
    leaf.vals.append(store.allocate([val]))


def _place(store: BlockStore, T: PSTree, cur: tuple) -> None:
    B = T.block_capacity
    v = T.root
    while True:
        j = cur[2]
        if v.is_leaf or v.cnt[j] < B:
            _add(store, T, v, cur)
            _sync_witness(store, T, v, j)
            return
        if _yk(cur) > _yk(v.mn[j]):
            low = v.mn[j]
            _add(store, T, v, cur)
            _remove(store, T, v, low)
            _sync_witness(store, T, v, j)
            cur = low
        v = _route(v, cur[0])
        _visit(store, v)


def _holder(store: BlockStore, T: PSTree, rec):
    """``(node, stored record)`` for ``rec``; ``KeyError`` if it is not stored."""
    x, j = rec[0], rec[2]
    v = T.root
    while True:
        _visit(store, v)
        if v.cnt[j] and (v.is_leaf or _yk(rec) >= _yk(v.mn[j])):
            box = (x, x, rec[1], rec[1], j, j)
            for r in ss_query(store, v.E, box):
                if r[3] == rec[3]:
                    return v, r
            raise KeyError(rec[3])
        if v.is_leaf or v.cnt[j] < T.block_capacity:
            raise KeyError(rec[3])
        v = _route(v, x)


def pst_delete(store: BlockStore, T: PSTree, rec) -> None:
    rec = tuple(rec)
    if T.root is None:
        raise KeyError(rec[3])
    v, stored = _holder(store, T, rec)
    leaf = T.root
    while not leaf.is_leaf:
        leaf = _route(leaf, rec[0])
    _kill_value(store, leaf, rec[0])
    T.dirty.add(leaf)
    _remove(store, T, v, stored)
    _refill(store, T, v, rec[2])
    _sync_witness(store, T, v, rec[2])
    T.live -= 1
    T.dead += 1
    _flush(store, T)
    if 2 * T.dead >= T.live + T.dead:
        _global_rebuild(store, T)


def _kill_value(store: BlockStore, leaf: PSTNode, x) -> None:
    for addr in leaf.vals:
        blk = list(store.read_block(addr))
        for k, val in enumerate(blk):
            if val[0] == x and val[2]:
                blk[k] = (val[0], val[1], 0)
                store.write_block(addr, blk)
                leaf.dead += 1
                return
    raise KeyError(x)


def _refill(store: BlockStore, T: PSTree, v: PSTNode, j: int) -> None:
    """Pull the highest slot-j points of the children up until S_v[j] is full."""
    if v.is_leaf:
        return
    B = T.block_capacity
    while v.cnt[j] < B:
        best = None
        for u in v.children:
            _visit(store, u)
            if u.cnt[j] and (best is None or _yk(u.mx[j]) > _yk(best.mx[j])):
                best = u
        if best is None:
            break
        r = best.mx[j]
        _remove(store, T, best, r)
        _add(store, T, v, r)
        _refill(store, T, best, j)
        _sync_witness(store, T, best, j)


# -- splits -----------------------------------------------------------------------------


def _split(store: BlockStore, T: PSTree, v: PSTNode) -> None:
    T.splits += 1
    w = _new_node(store, T, v.level)
    parent = v.parent
    # owned points of v are divided by x
    own = iter_records_counted(store, v.E)
    v.E.free(store)
    if v.is_leaf:
        vals = sorted(read_run(store, v.vals))
        store.free_all(v.vals)
        half = len(vals) // 2
        left, right = vals[:half], vals[half:]
        v.vals = write_run(store, left)
        w.vals = write_run(store, right)
        for node, part in ((v, left), (w, right)):
            node.weight = len(part)
            node.dead = sum(1 for val in part if not val[2])
            node.lo, node.hi = part[0][0], part[-1][0]
        cut = v.hi
    else:
        kids = v.children
        total = sum(c.weight for c in kids)
        acc, k, best = 0, 1, None
        for i in range(1, len(kids)):
            acc += kids[i - 1].weight
            gap = abs(2 * acc - total)
            if best is None or gap < best:
                best, k = gap, i
        v.children, w.children = kids[:k], kids[k:]
        for c in w.children:
            c.parent = w
        for node in (v, w):
            node.weight = sum(c.weight for c in node.children)
            node.lo, node.hi = node.children[0].lo, node.children[-1].hi
        cut = v.hi
        below = iter_records_counted(store, v.D)
        v.D.free(store)
        v.D = _ss(store, T, [r for r in below if r[0] <= cut])
        w.D = _ss(store, T, [r for r in below if r[0] > cut])
        wits = iter_records_counted(store, v.Dp)
        v.Dp.free(store)
        w_ids = {c.uid for c in w.children}
        v.Dp = _ss(store, T, [r for r in wits if r[4] not in w_ids])
        w.Dp = _ss(store, T, [r for r in wits if r[4] in w_ids])
    mine = [r for r in own if r[0] <= cut]
    theirs = [r for r in own if r[0] > cut]
    v.E = _ss(store, T, mine)
    w.E = _ss(store, T, theirs)
    _set_meta(T, v, mine)
    _set_meta(T, w, theirs)
    T.dirty.update((v, w))

    if parent is None:
        root = _new_node(store, T, v.level + 1)
        root.children = [v, w]
        root.weight = v.weight + w.weight
        root.lo, root.hi = v.lo, w.hi
        root.E = _ss(store, T, [])
        root.D = _ss(store, T, own)
        root.Dp = _ss(store, T, [])
        v.parent = w.parent = root
        v.wit = [None] * (T.slots + 1)
        T.root = root
        parent = root
    else:
        idx = parent.children.index(v)
        parent.children.insert(idx + 1, w)
        w.parent = parent
        for j in range(1, T.slots + 1):
            if v.wit[j] is not None:
                ss_delete(store, parent.Dp, v.wit[j])
                v.wit[j] = None
    T.dirty.add(parent)
    for node in (v, w):
        for j in range(1, T.slots + 1):
            _refill(store, T, node, j)
            _sync_witness(store, T, node, j)
    if parent is T.root and parent.parent is None:
        for j in range(1, T.slots + 1):
            _refill(store, T, parent, j)


def iter_records_counted(store: BlockStore, s: SidedSmallSet) -> List[tuple]:
    return ss_query(store, s, (INT_MIN, INT_MAX, INT_MIN, INT_MAX, INT_MIN, INT_MAX))


# -- audits ----------------------------------------------------------------------------------


def pst_audit(store: BlockStore, T: PSTree) -> List[str]:
    """Uncounted structural check; returns a list of violation messages."""
    errs: List[str] = []
    B = T.block_capacity
    if T.root is None:
        return errs
    owned = {uid: iter_records(store, v.E) for uid, v in T.nodes.items()}
    live_x = set()
    reach = []

    def walk(v: PSTNode):
        reach.append(v)
        for c in v.children:
            if c.parent is not v:
                errs.append(f"node {c.uid}: bad parent link")
            walk(c)

    walk(T.root)
    if len(reach) != len(T.nodes):
        errs.append("unreachable nodes")
    for v in reach:
        mine = owned[v.uid]
        per = [[] for _ in range(T.slots + 1)]
        for r in mine:
            per[r[2]].append(r)
            if v.weight and not v.lo <= r[0] <= v.hi:
                errs.append(f"node {v.uid}: point {r[3]} outside range")
        for j in range(1, T.slots + 1):
            if len(per[j]) != v.cnt[j]:
                errs.append(f"node {v.uid} slot {j}: count {v.cnt[j]} != {len(per[j])}")
            if per[j]:
                if min(per[j], key=_yk) != v.mn[j] or max(per[j], key=_yk) != v.mx[j]:
                    errs.append(f"node {v.uid} slot {j}: stale min/max")
            if not v.is_leaf and len(per[j]) > B:
                errs.append(f"node {v.uid} slot {j}: {len(per[j])} > B points")
        if v.is_leaf:
            vals = [val for a in v.vals for val in store.peek(a)]
            if len(vals) != v.weight:
                errs.append(f"leaf {v.uid}: weight {v.weight} != {len(vals)} values")
            live_x.update(val[0] for val in vals if val[2])
            if vals and (min(val[0] for val in vals) != v.lo or max(val[0] for val in vals) != v.hi):
                errs.append(f"leaf {v.uid}: range mismatch")
            continue
        # heap property per slot and child ordering
        prev_hi = None
        for c in v.children:
            if prev_hi is not None and c.weight and c.lo <= prev_hi:
                errs.append(f"node {v.uid}: overlapping child ranges")
            if c.weight:
                prev_hi = c.hi
            for j in range(1, T.slots + 1):
                if c.cnt[j]:
                    if v.cnt[j] != B:
                        errs.append(f"node {v.uid} slot {j}: child {c.uid} nonempty under a non-full slot")
                    elif _yk(v.mn[j]) <= _yk(c.mx[j]):
                        errs.append(f"node {v.uid} slot {j}: heap order broken by child {c.uid}")
        if v.weight != sum(c.weight for c in v.children):
            errs.append(f"node {v.uid}: weight mismatch")
        d_have = sorted(iter_records(store, v.D))
        d_want = sorted(r for c in v.children for r in owned[c.uid])
        if d_have != d_want:
            errs.append(f"node {v.uid}: D content mismatch")
        dp_have = sorted(iter_records(store, v.Dp))
        dp_want = sorted(w for c in v.children for j in range(1, T.slots + 1)
                         if (w := _witness(T, c, j)) is not None)
        if dp_have != dp_want:
            errs.append(f"node {v.uid}: Dp content mismatch")
        for c in v.children:
            for j in range(1, T.slots + 1):
                if c.wit[j] != _witness(T, c, j):
                    errs.append(f"node {c.uid} slot {j}: witness mirror stale")
        # weight balance
        if v is not T.root:
            t = T.target(v.level)
            if not t / 2 <= v.weight < 2 * t:
                errs.append(f"node {v.uid}: weight {v.weight} outside [{t / 2}, {2 * t})")
        if not (T.branch / 4 <= len(v.children) <= 4 * T.branch):
            errs.append(f"node {v.uid}: fan-out {len(v.children)}")
    for v in reach:
        if v.is_leaf and v is not T.root:
            t = T.target(0)
            if not t / 2 <= v.weight < 2 * t:
                errs.append(f"leaf {v.uid}: weight {v.weight} outside [{t / 2}, {2 * t})")
    all_x = {r[0] for recs in owned.values() for r in recs}
    if all_x != live_x:
        errs.append("live leaf values differ from owned points")
    if len(all_x) != T.live:
        errs.append(f"live count {T.live} != {len(all_x)}")
    return errs
