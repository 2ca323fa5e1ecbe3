"""Dynamic dominance reporting for sets of O(B**(4/3)) points.

A :class:`BoundaryLadder` keeps a few t-approximate boundaries with growing
``t`` over a rank-reduced snapshot of the set, plus one shared insert buffer
and one shared delete buffer.  Every level remembers how far into each buffer
its snapshot reaches; a level is rebuilt when its unseen suffix grows past a
threshold proportional to ``t``, and everything is rebuilt from scratch after
``ceil(B * log2 B)`` updates.

Records are tuples ``(x, y, z, id, *payload)``; coordinates may repeat and may
be negative.  Queries return the stored records unchanged.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

from .block_io import BlockStore, CapacityError, read_run, write_run
from .boundary import (DEFAULT_ALPHA, TApproxBoundary, build_boundary,
                       build_dominance_lists, locate, report_corner)
from .geom import RankMap
from .kernels import filter_dominating


def ladder_height(block_capacity: int) -> int:
    return max(1, math.ceil(math.log2(block_capacity) / 6 - 1e-9) + 1)


def level_t(block_capacity: int, i: int) -> int:
    return block_capacity * 4 ** i


def rebuild_period(block_capacity: int) -> int:
    return max(1, math.ceil(block_capacity * math.log2(block_capacity)))


class RankIndex:
    """Block-resident copy of a :class:`RankMap`: three sorted coordinate runs
    and one directory run holding the first coordinate of every block."""

    __slots__ = ("runs", "directory")

    def __init__(self, store: BlockStore, rm: RankMap):
        self.runs = [write_run(store, [(c,) for c in rm.coords[a]]) for a in range(3)]
        dir_recs = []
        for a in range(3):
            for k, addr in enumerate(self.runs[a]):
                dir_recs.append((a, store.peek(addr)[0][0], k, addr))
        self.directory = write_run(store, dir_recs)

    def lower_ranks(self, store: BlockStore, q) -> tuple:
        """``1 + #{coords < q[a]}`` for each axis (4 reads when the
        directory fits one block)."""
        firsts: List[List[int]] = [[], [], []]
        addrs: List[List[int]] = [[], [], []]
        for a, c, _k, addr in read_run(store, self.directory):
            firsts[a].append(c)
            addrs[a].append(addr)
        b = store.block_capacity
        out = []
        for a in range(3):
            k = bisect.bisect_left(firsts[a], q[a])
            if k == 0:
                out.append(1)
                continue
            blk = store.read_block(addrs[a][k - 1])
            out.append((k - 1) * b + bisect.bisect_left([r[0] for r in blk], q[a]) + 1)
        return tuple(out)

    def blocks(self) -> int:
        return sum(len(r) for r in self.runs) + len(self.directory)

    def free(self, store: BlockStore) -> None:
        for r in self.runs:
            store.free_all(r)
        store.free_all(self.directory)
        self.runs, self.directory = [[], [], []], []


@dataclass
class Level:
    i: int
    t: int
    active: bool = False
    bd: Optional[TApproxBoundary] = None
    ranks: Optional[RankIndex] = None
    ins_ptr: int = 0
    del_ptr: int = 0
    rebuilds: int = 0

    def free(self, store: BlockStore) -> None:
        if self.bd is not None:
            self.bd.free(store)
            self.bd = None
        if self.ranks is not None:
            self.ranks.free(store)
            self.ranks = None


class _Buffer:
    """Append-only block list; the last block is the open tail."""

    __slots__ = ("addrs", "length")

    def __init__(self):
        self.addrs: List[int] = []
        self.length = 0

    def append(self, store: BlockStore, rec) -> int:
        b = store.block_capacity
        pos = self.length
        if pos % b == 0:
            self.addrs.append(store.allocate([rec]))
        else:
            addr = self.addrs[-1]
            blk = store.read_block(addr)
            store.write_block(addr, blk + (rec,))
        self.length += 1
        return pos

    def suffix(self, store: BlockStore, start: int):
        b = store.block_capacity
        for k in range(start // b, len(self.addrs)):
            blk = store.read_block(self.addrs[k])
            lo = start - k * b if k == start // b else 0
            yield from blk[lo:]

    def rewrite(self, store: BlockStore, pos: int, fn) -> None:
        b = store.block_capacity
        addr = self.addrs[pos // b]
        blk = list(store.read_block(addr))
        blk[pos % b] = fn(blk[pos % b])
        store.write_block(addr, blk)

    def free(self, store: BlockStore) -> None:
        store.free_all(self.addrs)
        self.addrs, self.length = [], 0


@dataclass
class BoundaryLadder:
    block_capacity: int
    alpha: float
    levels: List[Level]
    base: List[int] = field(default_factory=list)
    ins: _Buffer = field(default_factory=_Buffer)
    dels: _Buffer = field(default_factory=_Buffer)
    ins_pos: Dict[int, int] = field(default_factory=dict)
    live: Set[int] = field(default_factory=set)
    since_global: int = 0
    global_rebuilds: int = 0

    @property
    def size(self) -> int:
        return len(self.live)

    @property
    def blocks(self) -> int:
        n = len(self.base) + len(self.ins.addrs) + len(self.dels.addrs)
        for lv in self.levels:
            if lv.bd is not None:
                n += lv.bd.blocks
            if lv.ranks is not None:
                n += lv.ranks.blocks()
        return n

    def free(self, store: BlockStore) -> None:
        for lv in self.levels:
            lv.free(store)
        store.free_all(self.base)
        self.base = []
        self.ins.free(store)
        self.dels.free(store)


# -- construction ---------------------------------------------------------------


def sd_build(store: BlockStore, points: Sequence, alpha: float = DEFAULT_ALPHA) -> BoundaryLadder:
    b = store.block_capacity
    if len(points) > alpha * b ** (4.0 / 3.0):
        raise CapacityError(f"|S|={len(points)} exceeds {alpha} * B^(4/3)")
    ids = [p[3] for p in points]
    if len(set(ids)) != len(ids):
        raise KeyError("duplicate id")
    s = ladder_height(b)
    lad = BoundaryLadder(b, alpha, [Level(i, level_t(b, i)) for i in range(1, s + 1)])
    _install(store, lad, [tuple(p) for p in points])
    return lad


def _install(store: BlockStore, lad: BoundaryLadder, recs: List[tuple]) -> None:
    lad.base = write_run(store, recs)
    lad.live = {r[3] for r in recs}
    lad.ins_pos = {}
    lad.since_global = 0
    for lv in lad.levels:
        lv.free(store)
        lv.active = lv.t <= len(recs)
        lv.ins_ptr = lv.del_ptr = 0
        if lv.active:
            _build_level(store, lad, lv, recs)


def _build_level(store: BlockStore, lad: BoundaryLadder, lv: Level, recs: List[tuple]) -> None:
    lv.free(store)
    rm = RankMap(recs)
    reduced = [tuple(rp) + r for rp, r in zip(rm.reduce(recs), recs)]
    # rank reduction already guarantees the shape; sizes are bounded at sd_build
    lv.bd = build_boundary(store, reduced, lv.t, alpha=math.inf)
    build_dominance_lists(store, lv.bd, reduced)
    lv.ranks = RankIndex(store, rm)
    lv.ins_ptr = lad.ins.length
    lv.del_ptr = lad.dels.length
    lv.rebuilds += 1


def _live_records(store: BlockStore, lad: BoundaryLadder) -> List[tuple]:
    gone = {r[0] for r in lad.dels.suffix(store, 0)}
    out = [r for r in read_run(store, lad.base) if r[3] not in gone]
    out.extend(e[1:] for e in lad.ins.suffix(store, 0) if e[0])
    return out


def _global_rebuild(store: BlockStore, lad: BoundaryLadder) -> None:
    recs = _live_records(store, lad)
    store.free_all(lad.base)
    lad.ins.free(store)
    lad.dels.free(store)
    _install(store, lad, recs)
    lad.global_rebuilds += 1


# -- queries ------------------------------------------------------------------------


def sd_query(store: BlockStore, lad: BoundaryLadder, q) -> list:
    """Records dominating ``q`` (every coordinate >=)."""
    for lv in lad.levels:
        if not lv.active or lv.bd is None or not lv.bd.corners:
            continue
        rq = lv.ranks.lower_ranks(store, q)
        c = locate(store, lv.bd, rq)
        if c is None:
            continue
        found = [r[4:] for r in report_corner(store, lv.bd, c, rq)]
        return _apply_buffers(store, lad, found, q, lv.ins_ptr, lv.del_ptr)
    return _scan(store, lad, q)


def _apply_buffers(store, lad, found, q, ins_ptr, del_ptr) -> list:
    gone = {r[0] for r in lad.dels.suffix(store, del_ptr)}
    out = [r for r in found if r[3] not in gone]
    out.extend(filter_dominating([e[1:] for e in lad.ins.suffix(store, ins_ptr) if e[0]], q))
    return out


def _scan(store: BlockStore, lad: BoundaryLadder, q) -> list:
    gone = {r[0] for r in lad.dels.suffix(store, 0)}
    out = [r for r in filter_dominating(list(read_run(store, lad.base)), q)
           if r[3] not in gone]
    out.extend(filter_dominating([e[1:] for e in lad.ins.suffix(store, 0) if e[0]], q))
    return out


# -- updates -----------------------------------------------------------------------


def sd_insert(store: BlockStore, lad: BoundaryLadder, p) -> None:
    p = tuple(p)
    if p[3] in lad.live:
        raise KeyError(f"id {p[3]} already present")
    lad.ins_pos[p[3]] = lad.ins.append(store, (1,) + p)
    lad.live.add(p[3])
    _after_update(store, lad)


def sd_delete(store: BlockStore, lad: BoundaryLadder, pid: int) -> None:
    if pid not in lad.live:
        raise KeyError(f"id {pid} not present")
    lad.live.discard(pid)
    pos = lad.ins_pos.pop(pid, None)
    if pos is not None:
        lad.ins.rewrite(store, pos, _tombstone)
        absorbed = any(lv.active and lv.ins_ptr > pos for lv in lad.levels)
        if not absorbed:
            _after_update(store, lad)
            return
    lad.dels.append(store, (pid,))
    _after_update(store, lad)


def _tombstone(e):
    return (0,) + e[1:]


def _after_update(store: BlockStore, lad: BoundaryLadder) -> None:
    lad.since_global += 1
    if lad.since_global >= rebuild_period(lad.block_capacity):
        _global_rebuild(store, lad)
        return
    recs = None
    for lv in lad.levels:
        if not lv.active:
            continue
        limit = 2 ** (2 * lv.i - 1) * lad.block_capacity
        if (lad.ins.length - lv.ins_ptr >= limit
                or lad.dels.length - lv.del_ptr >= limit):
            if recs is None:
                recs = _live_records(store, lad)
            _build_level(store, lad, lv, recs)


def pending(lad: BoundaryLadder, lv: Level) -> tuple:
    """(unseen insert entries, unseen delete entries) for a level."""
    return lad.ins.length - lv.ins_ptr, lad.dels.length - lv.del_ptr


def iter_live(store: BlockStore, lad: BoundaryLadder) -> List[tuple]:
    """Uncounted copy of the live records (audits)."""
    r0, w0 = store.reads, store.writes
    out = _live_records(store, lad)
    store.reads, store.writes = r0, w0
    return out
