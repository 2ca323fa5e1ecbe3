"""General 3D orthogonal range reporting on top of :mod:`xmrange.zrange`.

A binary tree over y sits above the z-range trees.  Every internal node
``v`` with split key ``s`` keeps two of them: ``lo_zt`` over the points of
its left subtree (answers ``y >= ylo``) and ``hi_zt`` over its right subtree
stored with negated y (answers ``y <= yhi``).  A query walks down to the
first node whose split separates ``ylo`` from ``yhi`` and asks one question
of each side; if the walk reaches a leaf the leaf bucket is scanned.

The tree nodes are grouped into pages of ``floor(log2 B)`` levels, one block
per page, so locating the split node costs ``O(log_B N)`` reads.

Deletes arrive as bare ids; an external hash table maps them back to
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .block_io import BlockStore, read_run, write_run
from .geom import (INT_MAX, INT_MIN, Point3, QueryBox, check_point, dec, enc,
                   enc_hi, enc_lo)
from .kernels import filter_bounds
from .zrange import (ZRangeTree, ZTrace, tiling_ok, zt_audit, zt_build,
                     zt_delete, zt_free, zt_insert, zt_query, zt_records)


def _clamp(v: int) -> int:
    return INT_MIN if v < INT_MIN else INT_MAX if v > INT_MAX else v


# -- id index ----------------------------------------------------------------------


class IdIndex:
    """Hash table on disk: ``nb`` bucket runs of ``(id, X, Y, Z)`` records.

    The table doubles or halves when the load leaves ``[B/8, B]`` records per
    bucket, so a lookup reads one block on average.
    """

    def __init__(self, store: BlockStore, seed: int = 0):
        self.seed = seed
        self.n = 0
        self.buckets: List[List[int]] = [[]]
        self.rehashes = 0

    def _slot(self, pid: int) -> int:
        return hash((self.seed, pid)) % len(self.buckets)

    def get(self, store: BlockStore, pid: int) -> Optional[tuple]:
        for addr in self.buckets[self._slot(pid)]:
            for r in store.read_block(addr):
                if r[0] == pid:
                    return r
        return None

    def put(self, store: BlockStore, rec: tuple) -> None:
        run = self.buckets[self._slot(rec[0])]
        if run:
            blk = store.read_block(run[-1])
            if len(blk) < store.block_capacity:
                store.write_block(run[-1], blk + (rec,))
                self._added(store, 1)
                return
        run.append(store.allocate([rec]))
        self._added(store, 1)

    def remove(self, store: BlockStore, pid: int) -> tuple:
        run = self.buckets[self._slot(pid)]
        for k, addr in enumerate(run):
            blk = list(store.read_block(addr))
            for j, r in enumerate(blk):
                if r[0] != pid:
                    continue
                last = run[-1]
                if addr == last:
                    blk[j] = blk[-1]
                    blk.pop()
                else:
                    tail = list(store.read_block(last))
                    blk[j] = tail.pop()
                    if tail:
                        store.write_block(last, tail)
                    else:
                        store.free(last)
                        run.pop()
                if blk:
                    store.write_block(addr, blk)
                else:
                    store.free(addr)
                    run.remove(addr)
                self._added(store, -1)
                return r
        raise KeyError(pid)

    def bulk(self, store: BlockStore, recs: Sequence[tuple]) -> None:
        self.free(store)
        nb = max(1, math.ceil(2 * len(recs) / store.block_capacity))
        parts: List[List[tuple]] = [[] for _ in range(nb)]
        for r in recs:
            parts[hash((self.seed, r[0])) % nb].append(r)
        self.buckets = [write_run(store, p) for p in parts]
        self.n = len(recs)

    def _added(self, store: BlockStore, d: int) -> None:
        self.n += d
        b, nb = store.block_capacity, len(self.buckets)
        if self.n > b * nb or (nb > 1 and 8 * self.n < b * nb):
            recs = [r for run in self.buckets for r in read_run(store, run)]
            self.bulk(store, recs)
            self.rehashes += 1

    def blocks(self) -> int:
        return sum(len(r) for r in self.buckets)

    def free(self, store: BlockStore) -> None:
        for run in self.buckets:
            store.free_all(run)
        self.buckets = [[]]
        self.n = 0

    def records(self, store: BlockStore) -> List[tuple]:
        return [r for run in self.buckets for a in run for r in store.peek(a)]


# -- y layer -------------------------------------------------------------------------


class YNode:
    __slots__ = ("uid", "split", "left", "right", "lo_zt", "hi_zt", "count",
                 "built", "bucket", "page")

    def __init__(self, uid: int):
        self.uid = uid
        self.split = 0
        self.left: Optional[YNode] = None
        self.right: Optional[YNode] = None
        self.lo_zt: Optional[ZRangeTree] = None
        self.hi_zt: Optional[ZRangeTree] = None
        self.count = 0
        self.built = 0
        self.bucket: List[int] = []
        self.page = -1

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class QueryStats:
    depth: int = 0
    split_uid: int = -1
    z_traces: List[ZTrace] = field(default_factory=list)


@dataclass
class Full3D:
    block_capacity: int
    f: float
    leaf_size: int
    z_leaf: int
    ss_leaf: int
    branch: Optional[int]
    page_height: int
    root: Optional[YNode] = None
    ids: Optional[IdIndex] = None
    next_uid: int = 0
    rebuilds: int = 0
    instrument: bool = False
    last_stats: QueryStats = field(default_factory=QueryStats)

    @property
    def size(self) -> int:
        return self.root.count if self.root else 0

    def height(self) -> int:
        def h(v):
            return 1 if v.is_leaf else 1 + max(h(v.left), h(v.right))
        return h(self.root) if self.root else 0


def page_height(block_capacity: int) -> int:
    return max(1, int(math.log2(block_capacity)))


def _key(p) -> tuple:
    """Composite ``(X, Y, Z, id)`` for a plain ``(x, y, z, id)`` point."""
    return (enc(p[0], p[3]), enc(p[1], p[3]), enc(p[2], p[3]), p[3])


def _ykey(k):
    return k[1]


def full_build(store: BlockStore, points: Iterable, f: float = 1.0 / 6.0,
               leaf_size: Optional[int] = None, z_leaf: Optional[int] = None,
               ss_leaf: Optional[int] = None, branch: Optional[int] = None,
               seed: int = 0) -> Full3D:
    """Bulk-load from ``(x, y, z, id)`` tuples (ids unique)."""
    b = store.block_capacity
    pts = [tuple(p) for p in points]
    for p in pts:
        check_point(p)
    if len({p[3] for p in pts}) != len(pts):
        raise KeyError("duplicate id")
    t = Full3D(b, f, leaf_size or 4 * b, z_leaf or 4 * b, ss_leaf or 4 * b,
               branch, page_height(b))
    keys = sorted((_key(p) for p in pts), key=_ykey)
    t.root = _make(store, t, keys)
    _paginate(store, t, t.root, 0)
    t.ids = IdIndex(store, seed)
    t.ids.bulk(store, [(k[3], k[0], k[1], k[2]) for k in keys])
    return t


def _zt(store: BlockStore, t: Full3D, keys, sign: int) -> ZRangeTree:
    return zt_build(store, keys, sign=sign, f=t.f, leaf_size=t.z_leaf,
                    ss_leaf=t.ss_leaf, branch=t.branch)


def _make(store: BlockStore, t: Full3D, keys: List[tuple]) -> YNode:
    """Subtree over composite keys sorted by Y."""
    v = YNode(t.next_uid)
    t.next_uid += 1
    v.count = v.built = len(keys)
    if len(keys) <= t.leaf_size:
        v.bucket = write_run(store, keys)
        return v
    m = len(keys) // 2
    v.split = keys[m - 1][1]
    v.left = _make(store, t, keys[:m])
    v.right = _make(store, t, keys[m:])
    v.lo_zt = _zt(store, t, keys[:m], 1)
    v.hi_zt = _zt(store, t, keys[m:], -1)
    return v


def _page_records(t: Full3D, v: YNode) -> list:
    out, frontier = [], [v]
    for _ in range(t.page_height):
        nxt = []
        for u in frontier:
            out.append((u.uid, u.split, u.count, int(u.is_leaf)))
            if not u.is_leaf:
                nxt += [u.left, u.right]
        frontier = nxt
    return out


def _paginate(store: BlockStore, t: Full3D, v: YNode, depth: int) -> None:
    """(Re)write page blocks for every page root in ``v``'s subtree."""
    if depth % t.page_height == 0:
        recs = _page_records(t, v)
        if v.page < 0:
            v.page = store.allocate(recs)
        else:
            store.write_block(v.page, recs)
    if not v.is_leaf:
        _paginate(store, t, v.left, depth + 1)
        _paginate(store, t, v.right, depth + 1)


def _free(store: BlockStore, v: YNode) -> None:
    if v.is_leaf:
        store.free_all(v.bucket)
    else:
        _free(store, v.left)
        _free(store, v.right)
        zt_free(store, v.lo_zt)
        zt_free(store, v.hi_zt)
    if v.page >= 0:
        store.free(v.page)


def full_free(store: BlockStore, t: Full3D) -> None:
    if t.root is not None:
        _free(store, t.root)
    t.root = None
    if t.ids is not None:
        t.ids.free(store)


def _subtree_keys(store: BlockStore, v: YNode) -> List[tuple]:
    if v.is_leaf:
        return list(read_run(store, v.bucket))
    return _subtree_keys(store, v.left) + _subtree_keys(store, v.right)


# -- query ---------------------------------------------------------------------------


def full_query(store: BlockStore, t: Full3D, box) -> List[Point3]:
    """Points inside ``box`` (a :class:`QueryBox` or six bounds, ``None`` open)."""
    if not isinstance(box, QueryBox):
        box = QueryBox(*box)
    X0, X1 = enc_lo(box.xlo), enc_hi(box.xhi)
    Y0, Y1 = enc_lo(box.ylo), enc_hi(box.yhi)
    Z0, Z1 = enc_lo(box.zlo), enc_hi(box.zhi)
    st = QueryStats()
    t.last_stats = st
    if t.root is None or t.root.count == 0 or X0 > X1 or Y0 > Y1 or Z0 > Z1:
        return []
    v, depth = t.root, 0
    while True:
        if depth % t.page_height == 0:
            store.read_block(v.page)
        if v.is_leaf:
            st.depth, st.split_uid = depth, v.uid
            keys = []
            for addr in v.bucket:
                keys.extend(filter_bounds(store.read_block(addr), (X0, X1, Y0, Y1, Z0, Z1)))
            return [_point(k) for k in keys]
        if Y1 <= v.split:
            v = v.left
        elif Y0 > v.split:
            v = v.right
        else:
            break
        depth += 1
    st.depth, st.split_uid = depth, v.uid
    out = []
    for zt, c, sign in ((v.lo_zt, Y0, 1), (v.hi_zt, _clamp(-Y1), -1)):
        if zt.size == 0:
            continue
        zt.instrument = t.instrument
        for r in zt_query(store, zt, X0, X1, c, Z0, Z1):
            out.append(Point3(dec(r[0]), dec(sign * r[1]), dec(r[2]), r[3]))
        st.z_traces.append(zt.last_trace)
    return out


def _point(k) -> Point3:
    return Point3(dec(k[0]), dec(k[1]), dec(k[2]), k[3])


# -- updates ---------------------------------------------------------------------------


def full_insert(store: BlockStore, t: Full3D, p) -> None:
    p = tuple(p)
    check_point(p)
    if t.ids.get(store, p[3]) is not None:
        raise KeyError(f"id {p[3]} already present")
    k = _key(p)
    t.ids.put(store, (k[3], k[0], k[1], k[2]))
    if t.root is None:
        t.root = _make(store, t, [k])
        _paginate(store, t, t.root, 0)
        return
    path = _walk(store, t, k[1])
    for d, v in enumerate(path):
        v.count += 1
        if v.is_leaf:
            _bucket_append(store, v, k)
        elif k[1] <= v.split:
            zt_insert(store, v.lo_zt, k)
        else:
            zt_insert(store, v.hi_zt, k)
    _rebalance(store, t, path)


def full_delete(store: BlockStore, t: Full3D, pid: int) -> Point3:
    rec = t.ids.remove(store, pid)
    k = (rec[1], rec[2], rec[3], rec[0])
    path = _walk(store, t, k[1])
    for v in path:
        v.count -= 1
        if v.is_leaf:
            _bucket_remove(store, v, pid)
        elif k[1] <= v.split:
            zt_delete(store, v.lo_zt, k)
        else:
            zt_delete(store, v.hi_zt, k)
    _rebalance(store, t, path)
    return _point(k)


def _walk(store: BlockStore, t: Full3D, Y: int) -> List[YNode]:
    path, v, depth = [], t.root, 0
    while True:
        if depth % t.page_height == 0:
            store.read_block(v.page)
        path.append(v)
        if v.is_leaf:
            return path
        v = v.left if Y <= v.split else v.right
        depth += 1


def _bucket_append(store: BlockStore, v: YNode, k) -> None:
    if v.bucket:
        blk = store.read_block(v.bucket[-1])
        if len(blk) < store.block_capacity:
            store.write_block(v.bucket[-1], blk + (k,))
            return
    v.bucket.append(store.allocate([k]))


def _bucket_remove(store: BlockStore, v: YNode, pid: int) -> None:
    last = v.bucket[-1]
    for addr in v.bucket:
        blk = list(store.read_block(addr))
        for j, r in enumerate(blk):
            if r[3] != pid:
                continue
            if addr == last:
                blk[j] = blk[-1]
                blk.pop()
            else:
                tail = list(store.read_block(last))
                blk[j] = tail.pop()
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


def _unbalanced(t: Full3D, v: YNode) -> bool:
    if v.is_leaf:
        return v.count > 2 * t.leaf_size
    return v.count >= 2 * v.built or 2 * v.count < v.built


def _rebalance(store: BlockStore, t: Full3D, path: List[YNode]) -> None:
    """Rebuild the highest drifted subtree on ``path``.

    The rebuilt subtree holds the same points, so the split keys above it
    and the z-trees of its ancestors stay valid.
    """
    h = t.page_height
    for depth, v in enumerate(path):
        if not _unbalanced(t, v):
            continue
        keys = sorted(_subtree_keys(store, v), key=_ykey)
        _free(store, v)
        new = _make(store, t, keys)
        if depth == 0:
            t.root = new
        else:
            par = path[depth - 1]
            if par.left is v:
                par.left = new
            else:
                par.right = new
        _paginate(store, t, new, depth)
        t.rebuilds += 1
        path = path[:depth]
        break
    # page blocks carry node counts; refresh the pages along the path
    for d in range(0, len(path), h):
        store.write_block(path[d].page, _page_records(t, path[d]))


# -- audit ---------------------------------------------------------------------------


def full_records(store: BlockStore, t: Full3D) -> List[Point3]:
    """Uncounted list of live points."""
    r0, w0 = store.reads, store.writes
    out = [_point(k) for k in _subtree_keys(store, t.root)] if t.root else []
    store.reads, store.writes = r0, w0
    return out


def full_audit(store: BlockStore, t: Full3D, deep: bool = True) -> List[str]:
    """Uncounted structural check; ``deep`` also audits every z-tree."""
    errs: List[str] = []
    r0, w0 = store.reads, store.writes

    def walk(v: YNode, lo, hi, depth) -> List[tuple]:
        if depth % t.page_height == 0:
            if v.page < 0:
                errs.append(f"y-node {v.uid}: page root without block")
            elif list(store.peek(v.page)) != _page_records(t, v):
                errs.append(f"y-node {v.uid}: stale page block")
        if v.is_leaf:
            keys = [r for a in v.bucket for r in store.peek(a)]
        else:
            left = walk(v.left, lo, v.split, depth + 1)
            right = walk(v.right, v.split, hi, depth + 1)
            keys = left + right
            for zt, part, sign in ((v.lo_zt, left, 1), (v.hi_zt, right, -1)):
                want = sorted((k[0], sign * k[1], k[2], k[3]) for k in part)
                if sorted(zt_records(store, zt)) != want:
                    errs.append(f"y-node {v.uid}: z-tree content mismatch (sign {sign})")
                if deep:
                    errs.extend(f"y-node {v.uid}: {m}" for m in zt_audit(store, zt))
        for k in keys:
            if not (lo is None or k[1] > lo) or not (hi is None or k[1] <= hi):
                errs.append(f"y-node {v.uid}: key {k[3]} outside y range")
                break
        if len(keys) != v.count:
            errs.append(f"y-node {v.uid}: count {v.count} != {len(keys)}")
        return keys

    keys = walk(t.root, None, None, 0) if t.root else []
    idx = sorted((r[0], r[1], r[2], r[3]) for r in t.ids.records(store))
    if idx != sorted((k[3], k[0], k[1], k[2]) for k in keys):
        errs.append("id index disagrees with stored points")
    store.reads, store.writes = r0, w0
    return errs


def full_blocks(store: BlockStore) -> int:
    return store.block_count


def query_tiling_ok(store: BlockStore, t: Full3D, box) -> bool:
    """Uncounted: did the last query's z-decompositions tile the z range?"""
    if not isinstance(box, QueryBox):
        box = QueryBox(*box)
    st = t.last_stats
    if not st.z_traces:
        return True
    v = _find(t.root, st.split_uid)
    Z0, Z1 = enc_lo(box.zlo), enc_hi(box.zhi)
    zts = [zt for zt in (v.lo_zt, v.hi_zt) if zt.size]
    return all(tiling_ok(store, zt, Z0, Z1, tr) for zt, tr in zip(zts, st.z_traces))


def _find(v: Optional[YNode], uid: int) -> Optional[YNode]:
    if v is None or v.uid == uid:
        return v
    return _find(v.left, uid) or _find(v.right, uid)
