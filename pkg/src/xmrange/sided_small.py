"""Small-set structures for queries bounded on both sides of some axes.

Each axis has an orientation: ``"ge"`` (only a lower bound), ``"le"`` (only
an upper bound) or ``"both"``.  A doubled axis is handled with a binary tree
over that axis: an internal node keeps one structure over its left subtree
that only looks at the lower bound and one over its right subtree that only
looks at the upper bound, each with one doubled axis fewer.  With no doubled
axis left the coordinates are reflected so that every query is a dominance
query on a :class:`~xmrange.small_dominance.BoundaryLadder`.  Nodes holding at
most ``leaf_size`` points are plain buckets that are scanned.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

from .block_io import BlockStore, read_run, write_run
from .geom import INT_MAX, INT_MIN, QueryBox
from .kernels import filter_bounds
from .small_dominance import (BoundaryLadder, iter_live, sd_build, sd_delete,
                              sd_insert, sd_query)

GE, LE, BOTH = "ge", "le", "both"


class SidednessError(ValueError):
    pass


def orientation(sidedness: Sequence[int]) -> Tuple[str, str, str]:
    """Default orientation for a sidedness triple: one-sided axes look up."""
    out = []
    for b in sidedness:
        if b not in (1, 2):
            raise SidednessError(f"sidedness components must be 1 or 2, got {b}")
        out.append(BOTH if b == 2 else GE)
    return tuple(out)


def _key(r, a):
    return (r[a], r[3])


# -- node kinds --------------------------------------------------------------------


class _Bucket:
    __slots__ = ("addrs", "count", "built")

    def __init__(self, store: BlockStore, recs: List[tuple]):
        self.addrs = write_run(store, recs)
        self.count = len(recs)
        self.built = len(recs)

    def records(self, store: BlockStore) -> List[tuple]:
        return list(read_run(store, self.addrs))

    def query(self, store: BlockStore, bounds, out: list) -> None:
        for a in self.addrs:
            out.extend(filter_bounds(store.read_block(a), bounds))

    def insert(self, store: BlockStore, rec) -> None:
        b = store.block_capacity
        if self.count % b == 0 or not self.addrs:
            self.addrs.append(store.allocate([rec]))
        else:
            blk = store.read_block(self.addrs[-1])
            store.write_block(self.addrs[-1], blk + (tuple(rec),))
        self.count += 1

    def delete(self, store: BlockStore, pid: int) -> tuple:
        last_addr = self.addrs[-1]
        for addr in self.addrs:
            blk = list(store.read_block(addr))
            for k, r in enumerate(blk):
                if r[3] != pid:
                    continue
                if addr == last_addr:
                    blk[k] = blk[-1]
                    blk.pop()
                else:
                    last = list(store.read_block(last_addr))
                    blk[k] = last.pop()
                    self._put(store, last_addr, last)
                self._put(store, addr, blk)
                self.count -= 1
                return r
        raise KeyError(pid)

    def _put(self, store: BlockStore, addr: int, recs: list) -> None:
        if recs:
            store.write_block(addr, recs)
        else:
            store.free(addr)
            self.addrs.remove(addr)

    def blocks(self) -> int:
        return len(self.addrs)

    def free(self, store: BlockStore) -> None:
        store.free_all(self.addrs)
        self.addrs = []


class _Base:
    """Dominance ladder over reflected records ``(fx, fy, fz, id) + rec``."""

    __slots__ = ("signs", "ladder")

    def __init__(self, store: BlockStore, recs: List[tuple], orient):
        self.signs = tuple(-1 if o == LE else 1 for o in orient)
        self.ladder: BoundaryLadder = sd_build(
            store, [self._reflect(r) for r in recs], alpha=math.inf)

    @property
    def count(self) -> int:
        return self.ladder.size

    def _reflect(self, r) -> tuple:
        sx, sy, sz = self.signs
        return (sx * r[0], sy * r[1], sz * r[2], r[3]) + tuple(r)

    def records(self, store: BlockStore) -> List[tuple]:
        return [r[4:] for r in iter_live(store, self.ladder)]

    def query(self, store: BlockStore, bounds, out: list) -> None:
        q = []
        for a, s in enumerate(self.signs):
            v = bounds[2 * a] if s > 0 else bounds[2 * a + 1]
            if s > 0:
                q.append(v)
            else:
                q.append(INT_MIN if v >= -INT_MIN - 1 else -v)
        for r in sd_query(store, self.ladder, q):
            out.append(r[4:])

    def insert(self, store: BlockStore, rec) -> None:
        sd_insert(store, self.ladder, self._reflect(rec))

    def delete(self, store: BlockStore, pid: int) -> None:
        sd_delete(store, self.ladder, pid)

    def blocks(self) -> int:
        return self.ladder.blocks

    def free(self, store: BlockStore) -> None:
        self.ladder.free(store)


class _Split:
    """Internal node of the tree over ``axis``; ``key`` is the largest
    (coordinate, id) of the left subtree."""

    __slots__ = ("axis", "key", "left", "right", "lo_side", "hi_side", "count", "built")

    def blocks(self) -> int:
        return (self.left.blocks() + self.right.blocks()
                + self.lo_side.blocks() + self.hi_side.blocks())

    def free(self, store: BlockStore) -> None:
        for n in (self.left, self.right, self.lo_side, self.hi_side):
            n.free(store)


def _make(store: BlockStore, recs: List[tuple], orient, leaf_size: int):
    if BOTH not in orient:
        if orient == (GE, GE, GE) or len(recs) > leaf_size:
            return _Base(store, recs, orient)
        return _Bucket(store, recs)
    if len(recs) <= leaf_size:
        return _Bucket(store, recs)
    a = orient.index(BOTH)
    recs = sorted(recs, key=lambda r: _key(r, a))
    mid = (len(recs) + 1) // 2
    left, right = recs[:mid], recs[mid:]
    node = _Split()
    node.axis = a
    node.key = _key(left[-1], a)
    lo_or, hi_or = _side_orients(orient, a)
    node.left = _make(store, left, orient, leaf_size)
    node.right = _make(store, right, orient, leaf_size)
    node.lo_side = _make(store, left, lo_or, leaf_size)
    node.hi_side = _make(store, right, hi_or, leaf_size)
    node.count = node.built = len(recs)
    return node


# -- the set ------------------------------------------------------------------------


class SidedSmallSet:
    """A (b_x, b_y, b_z)-sided structure over records ``(x, y, z, id, ...)``."""

    __slots__ = ("orient", "leaf_size", "root", "directory", "base_updates")

    def __init__(self, orient, leaf_size):
        self.orient = tuple(orient)
        self.leaf_size = leaf_size
        self.root = None
        self.directory: List[int] = []
        self.base_updates = 0

    @property
    def sidedness(self) -> Tuple[int, int, int]:
        return tuple(2 if o == BOTH else 1 for o in self.orient)

    @property
    def size(self) -> int:
        return self.root.count

    @property
    def doubled(self) -> int:
        return sum(o == BOTH for o in self.orient)

    def blocks(self) -> int:
        return self.root.blocks() + len(self.directory)

    def free(self, store: BlockStore) -> None:
        self.root.free(store)
        store.free_all(self.directory)
        self.directory = []


def ss_build(store: BlockStore, recs: Sequence, sidedness=(2, 1, 2), orient=None,
             leaf_size: Optional[int] = None) -> SidedSmallSet:
    """Build over ``recs``.  ``orient`` overrides the default orientation
    derived from ``sidedness`` (one-sided axes default to ``"ge"``)."""
    orient = tuple(orient) if orient is not None else orientation(sidedness)
    for o in orient:
        if o not in (GE, LE, BOTH):
            raise SidednessError(f"bad orientation {o!r}")
    s = SidedSmallSet(orient, leaf_size or store.block_capacity)
    ids = [r[3] for r in recs]
    if len(set(ids)) != len(ids):
        raise KeyError("duplicate id")
    s.root = _make(store, [tuple(r) for r in recs], s.orient, s.leaf_size)
    _write_directory(store, s)
    return s


def _write_directory(store: BlockStore, s: SidedSmallSet) -> None:
    store.free_all(s.directory)
    keys: list = []

    def walk(n):
        if isinstance(n, _Split):
            keys.append((n.axis, n.key[0], n.key[1], n.count))
            walk(n.left)
            walk(n.right)

    walk(s.root)
    s.directory = write_run(store, keys) if keys else []


def _read_directory(store: BlockStore, s: SidedSmallSet) -> None:
    for a in s.directory:
        store.read_block(a)


# -- queries -----------------------------------------------------------------------


def _bounds(box) -> list:
    if isinstance(box, QueryBox):
        return list(box.as_bounds())
    return list(box)


def _check(orient, box) -> None:
    if not isinstance(box, QueryBox):
        return
    for o, (lo, hi), name in zip(orient, box.axes(), "xyz"):
        if (o == GE and hi is not None) or (o == LE and lo is not None):
            raise SidednessError(f"axis {name} is {o}-oriented; box bounds it on the other side")


def ss_query(store: BlockStore, s: SidedSmallSet, box) -> list:
    """Records inside ``box`` (a :class:`QueryBox` or six closed bounds).

    Bounds on a side the orientation does not support are rejected for a
    QueryBox and ignored for raw bounds.
    """
    _check(s.orient, box)
    b = _bounds(box)
    for a, o in enumerate(s.orient):
        if o == GE:
            b[2 * a + 1] = INT_MAX
        elif o == LE:
            b[2 * a] = INT_MIN
    out: list = []
    _read_directory(store, s)
    _query(store, s.root, b, out)
    return out


def _query(store: BlockStore, node, b, out: list) -> None:
    while isinstance(node, _Split):
        a = node.axis
        lo, hi = b[2 * a], b[2 * a + 1]
        kc = node.key[0]
        if hi < kc:
            node = node.left
        elif lo > kc:
            node = node.right
        else:
            _query(store, node.lo_side, b, out)
            _query(store, node.hi_side, b, out)
            return
    node.query(store, b, out)


# -- updates ----------------------------------------------------------------------


def ss_insert(store: BlockStore, s: SidedSmallSet, rec) -> None:
    _read_directory(store, s)
    s.root = _update(store, s, s.root, s.orient, tuple(rec), True)


def ss_delete(store: BlockStore, s: SidedSmallSet, rec) -> None:
    """Delete a record; ``rec`` may be the full record or just its id (the
    latter is resolved with a scan)."""
    if isinstance(rec, int):
        rec = _find(store, s, rec)
    _read_directory(store, s)
    s.root = _update(store, s, s.root, s.orient, tuple(rec), False)


def ss_update(store: BlockStore, s: SidedSmallSet, op) -> None:
    kind, arg = op
    if kind == "insert":
        ss_insert(store, s, arg)
    elif kind == "delete":
        ss_delete(store, s, arg)
    else:
        raise ValueError(f"unknown update {kind!r}")


def _find(store: BlockStore, s: SidedSmallSet, pid: int) -> tuple:
    for r in _leaf_records(store, s.root):
        if r[3] == pid:
            return r
    raise KeyError(pid)


def _leaf_records(store: BlockStore, node) -> List[tuple]:
    if isinstance(node, _Split):
        return _leaf_records(store, node.left) + _leaf_records(store, node.right)
    return node.records(store)


def _side_orients(orient, a):
    return orient[:a] + (GE,) + orient[a + 1:], orient[:a] + (LE,) + orient[a + 1:]


def _update(store: BlockStore, s: SidedSmallSet, node, orient, rec, ins: bool):
    """Apply one update below ``node``; returns the (possibly rebuilt) node."""
    if isinstance(node, _Split):
        goes_left = _key(rec, node.axis) <= node.key
        lo_or, hi_or = _side_orients(orient, node.axis)
        if goes_left:
            node.lo_side = _update(store, s, node.lo_side, lo_or, rec, ins)
            node.left = _update(store, s, node.left, orient, rec, ins)
        else:
            node.hi_side = _update(store, s, node.hi_side, hi_or, rec, ins)
            node.right = _update(store, s, node.right, orient, rec, ins)
        node.count += 1 if ins else -1
        if node.count >= 2 * node.built or 2 * node.count < node.built:
            return _rebuild(store, s, node, orient)
        return node
    s.base_updates += 1
    if ins:
        node.insert(store, rec)
    else:
        node.delete(store, rec[3])
    if isinstance(node, _Bucket) and node.count > 2 * s.leaf_size:
        return _rebuild(store, s, node, orient)
    return node


def _rebuild(store: BlockStore, s: SidedSmallSet, node, orient):
    recs = _leaf_records(store, node)
    node.free(store)
    new = _make(store, recs, orient, s.leaf_size)
    _write_directory(store, s)
    return new


# -- audits ----------------------------------------------------------------------


def iter_records(store: BlockStore, s: SidedSmallSet) -> List[tuple]:
    """Uncounted copy of the live records."""
    r0, w0 = store.reads, store.writes
    out = _leaf_records(store, s.root)
    store.reads, store.writes = r0, w0
    return out


def tree_height(s: SidedSmallSet) -> int:
    def h(n):
        if isinstance(n, _Split):
            return 1 + max(h(n.left), h(n.right))
        return 0

    return h(s.root)


def count_structures(s: SidedSmallSet) -> int:
    """Number of leaf-level structures (buckets and ladders)."""
    def c(n):
        if isinstance(n, _Split):
            return c(n.left) + c(n.right) + c(n.lo_side) + c(n.hi_side)
        return 1

    return c(s.root)
