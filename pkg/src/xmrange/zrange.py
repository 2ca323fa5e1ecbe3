"""Range tree over z with a slot priority search tree in every internal node.

Keys are composite (see :func:`xmrange.geom.enc`), so x, y and z are
distinct integers.  Leaves hold up to ``leaf_size`` points in a plain
bucket; an internal node with children ``v_1..v_k`` keeps ``F_v``, a
:class:`~xmrange.pst.PSTree` over its points with z replaced by the index of
the child that holds them.  A query ``[a, b] x [c, +inf) x [d, e]`` splits
``[d, e]`` into runs of whole children (one ``F_v`` query each) plus at most
two partially covered leaves that are scanned.

``sign = -1`` stores ``-y`` so the same code answers ``y <= c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .block_io import BlockStore, read_run, write_run
from .geom import INT_MAX, INT_MIN
from .kernels import filter_bounds
from .pst import (PSTree, fanout, pst_audit, pst_build, pst_delete, pst_free,
                  pst_insert, pst_query, pst_records)


class ZNode:
    __slots__ = ("uid", "children", "lo", "hi", "count", "built", "F", "bucket", "block")

    def __init__(self, uid: int):
        self.uid = uid
        self.children: List[ZNode] = []
        self.lo = INT_MAX
        self.hi = INT_MIN
        self.count = 0
        self.built = 0
        self.F: Optional[PSTree] = None
        self.bucket: List[int] = []
        self.block: int = -1

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ZTrace:
    pieces: List[Tuple[int, int, int]] = field(default_factory=list)  # (uid, gi, gj)
    fringe: List[int] = field(default_factory=list)                   # leaf uids
    spans: List[Tuple[int, int]] = field(default_factory=list)
    fact1_checks: int = 0
    fact1_violations: int = 0
    offpath_nodes: int = 0


@dataclass
class ZRangeTree:
    block_capacity: int
    sign: int
    f: float
    branch: int
    leaf_size: int
    ss_leaf: int
    root: Optional[ZNode] = None
    next_uid: int = 0
    rebuilds: int = 0
    instrument: bool = False
    last_trace: ZTrace = field(default_factory=ZTrace)

    @property
    def size(self) -> int:
        return self.root.count if self.root else 0

    def height(self) -> int:
        h, v = 1, self.root
        while v is not None and not v.is_leaf:
            v = v.children[0]
            h += 1
        return h


# records ------------------------------------------------------------------------
#
# bucket:  (X, sY, Z, id)
# F_v:     (X, sY, slot, id, Z)


def _bucket_rec(X, Y, Z, pid, sign):
    return (X, sign * Y, Z, pid)


def zt_build(store: BlockStore, keys: Sequence, sign: int = 1, f: float = 1.0 / 6.0,
             leaf_size: Optional[int] = None, ss_leaf: Optional[int] = None,
             branch: Optional[int] = None) -> ZRangeTree:
    """Build over composite key tuples ``(X, Y, Z, id)``."""
    b = store.block_capacity
    zt = ZRangeTree(b, sign, f, branch or fanout(b, f), leaf_size or b, ss_leaf or b)
    recs = sorted((_bucket_rec(k[0], k[1], k[2], k[3], sign) for k in keys), key=_zkey)
    zt.root = _make(store, zt, recs)
    return zt


def _zkey(r):
    return r[2]


def _make(store: BlockStore, zt: ZRangeTree, recs: List[tuple]) -> ZNode:
    """Subtree over bucket records sorted by Z."""
    v = ZNode(zt.next_uid)
    zt.next_uid += 1
    v.count = v.built = len(recs)
    if recs:
        v.lo, v.hi = recs[0][2], recs[-1][2]
    if len(recs) <= zt.leaf_size:
        v.bucket = write_run(store, recs)
    else:
        k = zt.branch
        n = len(recs)
        parts = [recs[i * n // k:(i + 1) * n // k] for i in range(k)]
        v.children = [_make(store, zt, p) for p in parts]
        frecs = [(r[0], r[1], i + 1, r[3], r[2]) for i, p in enumerate(parts) for r in p]
        v.F = pst_build(store, frecs, k, zt.f, ss_leaf=zt.ss_leaf, branch=zt.branch)
    v.block = store.allocate(_summary(v))
    return v


def _summary(v: ZNode) -> list:
    return [(c.uid, c.lo, c.hi, c.count) for c in v.children] or [(v.uid, v.lo, v.hi, v.count)]


def _free(store: BlockStore, v: ZNode) -> None:
    for c in v.children:
        _free(store, c)
    if v.F is not None:
        pst_free(store, v.F)
    store.free_all(v.bucket)
    store.free(v.block)


def zt_free(store: BlockStore, zt: ZRangeTree) -> None:
    if zt.root is not None:
        _free(store, zt.root)
    zt.root = None


def _subtree_records(store: BlockStore, v: ZNode) -> List[tuple]:
    if v.is_leaf:
        return list(read_run(store, v.bucket))
    out: List[tuple] = []
    for c in v.children:
        out.extend(_subtree_records(store, c))
    return out


# -- query -------------------------------------------------------------------------


def zt_query(store: BlockStore, zt: ZRangeTree, a: int, b: int, c: int, d: int, e: int) -> list:
    """Composite-key query: ``a <= X <= b``, ``sign*Y >= c``, ``d <= Z <= e``.

    Returns bucket-shaped records ``(X, sign*Y, Z, id)``.
    """
    tr = ZTrace()
    zt.last_trace = tr
    out: list = []
    if zt.root is None or a > b or d > e or zt.root.count == 0:
        return out
    _decompose(store, zt, zt.root, a, b, c, d, e, out, tr)
    return out


def _decompose(store, zt, v: ZNode, a, b, c, d, e, out, tr) -> None:
    store.read_block(v.block)
    if v.is_leaf:
        tr.fringe.append(v.uid)
        tr.spans.append((max(d, v.lo), min(e, v.hi)))
        box = (a, b, c, INT_MAX, d, e)
        for addr in v.bucket:
            out.extend(filter_bounds(store.read_block(addr), box))
        return
    kids = v.children
    run: List[int] = []

    def flush():
        if run:
            gi, gj = run[0], run[-1]
            tr.pieces.append((v.uid, gi, gj))
            tr.spans.append((kids[gi - 1].lo, kids[gj - 1].hi))
            v.F.instrument = zt.instrument
            for r in pst_query(store, v.F, a, b, c, gi, gj):
                out.append((r[0], r[1], r[4], r[3]))
            t = v.F.last_trace
            tr.fact1_checks += t.fact1_checks
            tr.fact1_violations += t.fact1_violations
            tr.offpath_nodes += t.offpath_nodes
            run.clear()

    for i, ch in enumerate(kids, start=1):
        if ch.count == 0 or ch.hi < d or ch.lo > e:
            continue
        if d <= ch.lo and ch.hi <= e:
            run.append(i)
            continue
        flush()
        _decompose(store, zt, ch, a, b, c, d, e, out, tr)
    flush()


# -- updates ----------------------------------------------------------------------


def _child_for(v: ZNode, z: int) -> int:
    for i, ch in enumerate(v.children):
        if z <= ch.hi:
            return i
    return len(v.children) - 1


def zt_insert(store: BlockStore, zt: ZRangeTree, key) -> None:
    X, Y, Z, pid = key[0], key[1], key[2], key[3]
    rec = _bucket_rec(X, Y, Z, pid, zt.sign)
    path = []
    v = zt.root
    while True:
        store.read_block(v.block)
        path.append(v)
        v.count += 1
        v.lo, v.hi = min(v.lo, Z), max(v.hi, Z)
        if v.is_leaf:
            _bucket_append(store, v, rec)
            break
        i = _child_for(v, Z)
        pst_insert(store, v.F, (rec[0], rec[1], i + 1, pid, Z))
        v = v.children[i]
    _write_path(store, path)
    _rebalance(store, zt, path)


def zt_delete(store: BlockStore, zt: ZRangeTree, key) -> None:
    X, Y, Z, pid = key[0], key[1], key[2], key[3]
    sy = zt.sign * Y
    path = []
    v = zt.root
    while True:
        store.read_block(v.block)
        path.append(v)
        if v.is_leaf:
            _bucket_remove(store, v, pid)
            break
        i = _child_for(v, Z)
        pst_delete(store, v.F, (X, sy, i + 1, pid, Z))
        v = v.children[i]
    for u in path:
        u.count -= 1
    _write_path(store, path)
    _rebalance(store, zt, path)


def _write_path(store: BlockStore, path) -> None:
    for u in path:
        store.write_block(u.block, _summary(u))


def _bucket_append(store: BlockStore, v: ZNode, rec) -> None:
    if v.bucket:
        blk = store.read_block(v.bucket[-1])
        if len(blk) < store.block_capacity:
            store.write_block(v.bucket[-1], blk + (rec,))
            return
    v.bucket.append(store.allocate([rec]))


def _bucket_remove(store: BlockStore, v: ZNode, pid: int) -> None:
    last = v.bucket[-1]
    for addr in v.bucket:
        blk = list(store.read_block(addr))
        for k, r in enumerate(blk):
            if r[3] != pid:
                continue
            if addr == last:
                blk[k] = blk[-1]
                blk.pop()
            else:
                tail = list(store.read_block(last))
                blk[k] = tail.pop()
                if tail:
                    store.write_block(last, tail)
                else:
                    store.free(last)
                    v.bucket.pop()
            if blk:
                store.write_block(addr, blk)
            else:
                store.free(addr)
                v.bucket.remove(addr)
            return
    raise KeyError(pid)


def _unbalanced(zt: ZRangeTree, v: ZNode) -> bool:
    if v.is_leaf:
        return v.count > 2 * zt.leaf_size
    return v.count >= 2 * v.built or 2 * v.count < v.built


def _rebalance(store: BlockStore, zt: ZRangeTree, path: List[ZNode]) -> None:
    """Rebuild the highest subtree on ``path`` that drifted too far from its
    build size; the parent keeps the same child, so nothing above changes."""
    for depth, v in enumerate(path):
        if _unbalanced(zt, v):
            recs = sorted(_subtree_records(store, v), key=_zkey)
            _free(store, v)
            new = _make(store, zt, recs)
            if depth == 0:
                zt.root = new
            else:
                par = path[depth - 1]
                par.children[par.children.index(v)] = new
                store.write_block(par.block, _summary(par))
            zt.rebuilds += 1
            return


# -- audits --------------------------------------------------------------------------


def zt_records(store: BlockStore, zt: ZRangeTree) -> List[tuple]:
    """Uncounted list of bucket records."""
    r0, w0 = store.reads, store.writes
    out = _subtree_records(store, zt.root) if zt.root else []
    store.reads, store.writes = r0, w0
    return out


def zt_audit(store: BlockStore, zt: ZRangeTree) -> List[str]:
    """Uncounted structural check of the z-tree and every ``F_v``."""
    errs: List[str] = []
    r0, w0 = store.reads, store.writes

    def walk(v: ZNode) -> List[tuple]:
        if v.is_leaf:
            recs = [r for a in v.bucket for r in store.peek(a)]
        else:
            parts = [walk(c) for c in v.children]
            prev = None
            for c in v.children:
                if c.count:
                    if prev is not None and c.lo <= prev:
                        errs.append(f"z-node {v.uid}: overlapping children")
                    prev = c.hi
            recs = [r for p in parts for r in p]
            want = sorted((r[0], r[1], i + 1, r[3], r[2])
                          for i, p in enumerate(parts) for r in p)
            have = sorted(pst_records(store, v.F, counted=False))
            if have != want:
                errs.append(f"z-node {v.uid}: F_v content mismatch")
            errs.extend(f"z-node {v.uid}: {m}" for m in pst_audit(store, v.F))
            for i, (c, p) in enumerate(zip(v.children, parts)):
                if any(not c.lo <= r[2] <= c.hi for r in p):
                    errs.append(f"z-node {c.uid}: point outside range")
        if len(recs) != v.count:
            errs.append(f"z-node {v.uid}: count {v.count} != {len(recs)}")
        return recs

    if zt.root is not None:
        walk(zt.root)
    store.reads, store.writes = r0, w0
    return errs


def tiling_ok(store: BlockStore, zt: ZRangeTree, d: int, e: int,
              trace: Optional[ZTrace] = None) -> bool:
    """Uncounted: do the spans of the last decomposition cover every stored
    z in ``[d, e]`` exactly once?"""
    tr = trace or zt.last_trace
    zs = [r[2] for r in zt_records(store, zt) if d <= r[2] <= e]
    spans = sorted(tr.spans)
    for (l1, h1), (l2, _h2) in zip(spans, spans[1:]):
        if l2 <= h1:
            return False
    for z in zs:
        if sum(1 for lo, hi in spans if lo <= z <= hi) != 1:
            return False
    return True


def level_count(store: BlockStore, zt: ZRangeTree, pid: int) -> int:
    """Uncounted: in how many ``F_v`` (plus its bucket) does ``pid`` appear?"""
    n = 0

    def walk(v: ZNode):
        nonlocal n
        if v.is_leaf:
            n += sum(1 for a in v.bucket for r in store.peek(a) if r[3] == pid)
            return
        n += sum(1 for r in pst_records(store, v.F, counted=False) if r[3] == pid)
        for c in v.children:
            walk(c)

    if zt.root is not None:
        walk(zt.root)
    return n
