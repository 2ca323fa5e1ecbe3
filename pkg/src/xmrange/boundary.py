"""Static t-approximate boundaries for small point sets.

Points are records ``(x, y, z, id, *payload)`` whose coordinates are distinct
on every axis (rank-reduced, values >= 1).  The boundary is a stack of
staircase ridges built top-down in z by a sweep over the points; each ridge is
described by its inner corners, the lower-left turning points of the
staircase.  An inward corner is a corner of a lowered ridge that the next
ridge does not pass through.  Every inward corner keeps a slice of one shared
list of dominating points, and the slices of a corner's neighbourhood in a
fixed traversal order together hold every point that dominates it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .batch import build_batchsets, batch_query_many, free_batchset
from .block_io import (BlockStore, CapacityError, external_sort, read_run,
                       write_run)
from .geom import INT_MAX
from .kernels import filter_dominating


class BoundaryError(ValueError):
    pass


NEIGHBOURS = 3
DEFAULT_ALPHA = 4.0


@dataclass
class Ridge:
    """Ridge ``R'_i`` (the previous ridge lowered to ``z``) and ridge ``R_i``.

    ``corners`` are the inner corners of ``R'_i`` in ascending x, with the
    number of points dominating each one at height ``z``.  ``next_corners``
    are those of ``R_i`` (``None`` for the floor ridge at z = 0).
    """

    index: int
    z: int
    corners: List[Tuple[int, int]]
    counts: List[int]
    next_corners: Optional[List[Tuple[int, int]]] = None
    next_counts: Optional[List[int]] = None
    inward: List[bool] = field(default_factory=list)


@dataclass
class InwardCorner:
    x: int
    y: int
    z: int
    ridge: int
    count: int
    order: int = 0          # processing order: ridges by ascending z, then x
    index: int = 0          # traversal (preorder) index
    last: int = 0           # last traversal index inside the subtree
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)
    lo: int = 0             # traversal-index range read on reporting
    hi: int = 0

    @property
    def pos(self) -> Tuple[int, int, int]:
        return (self.x, self.y, self.z)


@dataclass
class TApproxBoundary:
    t: int
    size: int
    ridges: List[Ridge]
    corners: List[InwardCorner]          # indexed by traversal index
    locator: List[int] = field(default_factory=list)   # leaf block addrs
    locator_root: Optional[List[int]] = None
    dom_run: List[int] = field(default_factory=list)
    dom_start: List[int] = field(default_factory=list)  # by traversal index
    dom_end: List[int] = field(default_factory=list)
    lists_built: bool = False

    @property
    def blocks(self) -> int:
        return len(self.locator) + len(self.dom_run) + len(self.locator_root or ())

    def free(self, store: BlockStore) -> None:
        store.free_all(self.locator)
        store.free_all(self.dom_run)
        store.free_all(self.locator_root or ())
        self.locator, self.dom_run, self.locator_root = [], [], None


# -- streams ---------------------------------------------------------------------


class _Stream:
    """Sequential reader over a run holding one block in memory."""

    __slots__ = ("store", "addrs", "bi", "buf", "pos")

    def __init__(self, store: BlockStore, addrs: Sequence[int]):
        self.store = store
        self.addrs = addrs
        self.bi = 0
        self.buf: tuple = ()
        self.pos = 0

    def peek(self):
        if self.pos >= len(self.buf):
            if self.bi >= len(self.addrs):
                return None
            self.store._held -= 1
            try:
                self.buf = self.store.read_block(self.addrs[self.bi])
            finally:
                self.store._held += 1
            self.bi += 1
            self.pos = 0
            if not self.buf:
                return self.peek()
        return self.buf[self.pos]

    def pop(self):
        r = self.peek()
        self.pos += 1
        return r


class _Writer:
    """Buffered run writer holding one block in memory."""

    def __init__(self, store: BlockStore):
        self.store = store
        self.addrs: List[int] = []
        self.buf: list = []

    def add(self, r) -> None:
        self.buf.append(r)
        if len(self.buf) == self.store.block_capacity:
            self.addrs.append(self.store.allocate(self.buf))
            self.buf = []

    def close(self) -> List[int]:
        if self.buf:
            self.addrs.append(self.store.allocate(self.buf))
            self.buf = []
        return self.addrs


def _merge_runs(store: BlockStore, a: List[int], b: List[int], key) -> List[int]:
    out = _Writer(store)
    with store.pinned(3):
        sa, sb = _Stream(store, a), _Stream(store, b)
        ra, rb = sa.peek(), sb.peek()
        while ra is not None or rb is not None:
            if rb is None or (ra is not None and key(ra) <= key(rb)):
                out.add(sa.pop())
                ra = sa.peek()
            else:
                out.add(sb.pop())
                rb = sb.peek()
        res = out.close()
    store.free_all(a)
    store.free_all(b)
    return res


def _neg_x(r):
    return -r[0]


def _by_y(r):
    return r[1]


def _neg_z(r):
    return -r[2]


# -- construction -------------------------------------------------------------------


def check_input(points: Sequence, t: int, block_capacity: int,
                alpha: float = DEFAULT_ALPHA) -> None:
    if t < block_capacity:
        raise BoundaryError(f"t={t} must be >= B={block_capacity}")
    cap = alpha * block_capacity ** (4.0 / 3.0)
    if len(points) > cap:
        raise CapacityError(f"|S|={len(points)} exceeds {cap:.0f}")
    for axis in range(3):
        vals = [p[axis] for p in points]
        if len(set(vals)) != len(vals):
            raise BoundaryError(f"duplicate coordinate on axis {'xyz'[axis]}")
        if vals and min(vals) < 1:
            raise BoundaryError("coordinates must be >= 1 (rank-reduced)")


def build_boundary(store: BlockStore, points: Sequence, t: int,
                   alpha: float = DEFAULT_ALPHA) -> TApproxBoundary:
    """Sweep the ridges of a t-approximate boundary and build its corner locator."""
    check_input(points, t, store.block_capacity, alpha)
    if not points:
        return TApproxBoundary(t, 0, [], [])
    run = write_run(store, list(points))
    L = external_sort(store, run, key=_neg_z, free_input=True)

    ridges: List[Ridge] = []
    gx: List[int] = []          # processed points, descending x
    gy: List[int] = []          # processed points, ascending y
    cur = [(0, 0)]              # corners of the ridge being lowered
    cnt = [0]
    three_t = 3 * t
    # frames: corner lists of the current and next ridge, lookahead block of L
    with store.pinned(3):
        lstream = _Stream(store, L)
        while True:
            fresh = _Writer(store)
            z_new = 0
            with store.pinned(1):   # output frame of the fresh run
                while True:
                    p = lstream.pop()
                    if p is None:
                        break
                    fresh.add(p)
                    px, py = p[0], p[1]
                    hit = False
                    for k, (cx, cy) in enumerate(cur):
                        if px >= cx and py >= cy:
                            cnt[k] += 1
                            if cnt[k] >= three_t:
                                hit = True
                    if hit:
                        z_new = p[2]
                        break
                fresh_run = fresh.close()
            ridge = Ridge(len(ridges) + 1, z_new, sorted(cur), [c for _, c in sorted(zip(cur, cnt))])
            ridges.append(ridge)
            if z_new == 0:
                store.free_all(fresh_run)
                break
            fx = external_sort(store, fresh_run, key=_neg_x)
            fy = external_sort(store, fresh_run, key=_by_y, free_input=True)
            gx = _merge_runs(store, gx, fx, _neg_x)
            gy = _merge_runs(store, gy, fy, _by_y)
            new, new_cnt = _sweep_ridge(store, gx, gy, ridge.corners, t)
            ridge.next_corners = new
            ridge.next_counts = new_cnt
            cur, cnt = list(new), list(new_cnt)
    store.free_all(gx)
    store.free_all(gy)
    store.free_all(L)

    corners = _collect_inward(ridges)
    bd = TApproxBoundary(t, len(points), ridges, corners)
    _build_tree(bd)
    _build_locator(store, bd)
    return bd


def _sweep_ridge(store: BlockStore, gx: List[int], gy: List[int],
                 prev: List[Tuple[int, int]], t: int):
    """Trace ridge R_i over the processed points; return its inner corners.

    ``prev`` holds the corners of R'_i in ascending x (so descending y).
    """
    two_t = 2 * t
    # prev corners by ascending y: (Y, X)
    up = sorted(((cy, cx) for cx, cy in prev))
    corners: List[Tuple[int, int]] = []
    counts: List[int] = []

    def record(x, y, c):
        if not corners or corners[-1] != (x, y):
            corners.append((x, y))
            counts.append(c)
        else:
            counts[-1] = c

    with store.pinned(2):
        G = _Stream(store, gx)
        Y = _Stream(store, gy)
        count = 0
        px = 0
        while count < two_t:
            r = G.pop()
            if r is None:
                break
            count += 1
            px = r[0]
        py = 0
        record(px, py, count)
        m = 0   # index into ``up`` of the curve segment at height py
        while True:
            # (1) raise y until t points dominate p
            while count > t:
                r = Y.pop()
                if r[0] >= px:
                    count -= 1
                py = r[1] + 1
            while m + 1 < len(up) and up[m + 1][0] <= py:
                m += 1
            xc = up[m][1]
            # (2) lower x until 2t points dominate p or p reaches R'_i
            reached = False
            while True:
                r = G.peek()
                if r is None or r[0] < xc:
                    px = xc
                    break
                G.pop()
                if r[1] >= py:
                    count += 1
                    if count >= two_t:
                        px = r[0]
                        reached = True
                        break
            record(px, py, count)
            if reached:
                continue
            if px == 0:
                break
            # (3) follow R'_i until the (y, z)-plane or 2t dominating points
            done = False
            while not reached:
                if m + 1 >= len(up):
                    done = True
                    break
                ny, nx = up[m + 1]
                while True:
                    r = Y.peek()
                    if r is None or r[1] >= ny:
                        break
                    Y.pop()
                    if r[0] >= px and r[1] >= py:
                        count -= 1
                py = ny
                m += 1
                while True:
                    r = G.peek()
                    if r is None or r[0] < nx:
                        px = nx
                        break
                    G.pop()
                    if r[1] >= py:
                        count += 1
                        if count >= two_t:
                            px = r[0]
                            reached = True
                            break
                record(px, py, count)
                if not reached and px == 0:
                    done = True
                    break
            if done:
                break
    pairs = sorted(zip(corners, counts))
    return [c for c, _ in pairs], [n for _, n in pairs]


def _collect_inward(ridges: List[Ridge]) -> List[InwardCorner]:
    out: List[InwardCorner] = []
    for rd in ridges:
        nxt = set(rd.next_corners or ())
        rd.inward = [c not in nxt for c in rd.corners]
        for (x, y), n, inw in zip(rd.corners, rd.counts, rd.inward):
            if inw:
                out.append(InwardCorner(x, y, rd.z, rd.index, n))
    return out


def _build_tree(bd: TApproxBoundary) -> None:
    """Parent links, traversal indices and reporting ranges of inward corners.

    A corner's parent is, on the nearest higher ridge holding corners whose
    (x, y)-projection it dominates, the one with the largest x.  Indices are
    assigned in preorder; each subtree occupies a contiguous index range.
    """
    cs = bd.corners
    by_ridge: Dict[int, List[int]] = {}
    for k, c in enumerate(cs):
        by_ridge.setdefault(c.ridge, []).append(k)
    for ks in by_ridge.values():
        ks.sort(key=lambda k: cs[k].x)
    for k, c in enumerate(cs):
        for r in range(c.ridge - 1, 0, -1):
            best = None
            for j in by_ridge.get(r, ()):
                o = cs[j]
                if o.x <= c.x and o.y <= c.y and (best is None or o.x > cs[best].x):
                    best = j
            if best is not None:
                c.parent = best
                cs[best].children.append(k)
                break
    roots = sorted((k for k, c in enumerate(cs) if c.parent is None),
                   key=lambda k: (cs[k].x, cs[k].ridge))
    order: List[int] = []
    stack = list(reversed(roots))
    while stack:
        k = stack.pop()
        order.append(k)
        stack.extend(sorted(cs[k].children, key=lambda j: cs[j].x, reverse=True))
    for i, k in enumerate(order):
        cs[k].index = i
    for k in reversed(order):
        c = cs[k]
        c.last = max([c.index] + [cs[j].last for j in c.children])
    # processing order: ascending z, then ascending x
    proc = sorted(range(len(cs)), key=lambda k: (cs[k].z, cs[k].x))
    for i, k in enumerate(proc):
        cs[k].order = i
    for ks in by_ridge.values():
        for pos, k in enumerate(ks):
            hood = [cs[j] for j in ks[max(0, pos - NEIGHBOURS):pos + NEIGHBOURS + 1]]
            cs[k].lo = min(h.index for h in hood)
            cs[k].hi = max(h.last for h in hood)
    # re-number parent/children references to traversal indices and sort
    remap = {k: cs[k].index for k in range(len(cs))}
    for c in cs:
        c.parent = remap[c.parent] if c.parent is not None else None
        c.children = sorted(remap[j] for j in c.children)
    bd.corners = sorted(cs, key=lambda c: c.index)


def _build_locator(store: BlockStore, bd: TApproxBoundary) -> None:
    recs = sorted(((c.x, c.y, c.z, c.index) for c in bd.corners),
                  key=lambda r: (-r[2], r[0]))
    bd.locator = write_run(store, recs)
    if len(bd.locator) > 1:
        b = store.block_capacity
        root = [(recs[i][2], recs[i][0], i // b, a)
                for i, a in zip(range(0, len(recs), b), bd.locator)]
        # one block for |S| <= alpha * B**(4/3); oversize test inputs spill over
        bd.locator_root = write_run(store, root)


# -- dominance lists ----------------------------------------------------------------


def build_dominance_lists(store: BlockStore, bd: TApproxBoundary, points: Sequence) -> None:
    """Fill the shared dominance list and each corner's slice of it.

    Ridges are handled by ascending z and corners by ascending x.  A point
    dominating corner ``c`` joins ``Dom(c)`` unless it is already stored in a
    list whose traversal index lies in ``c``'s reporting range, so the range
    always covers every dominating point.
    """
    if bd.lists_built:
        return
    cs = bd.corners
    if not cs:
        bd.lists_built = True
        return
    X = build_batchsets(store, list(points), c=3)
    members: List[int] = []          # (id, index) sorted by id
    dom_w = _Writer(store)           # (index, x, y, z, id, ...) records
    procs = sorted(cs, key=lambda c: c.order)
    with store.pinned(1):
        i = 0
        while i < len(procs):
            j = i
            while j < len(procs) and procs[j].ridge == procs[i].ridge:
                j += 1
            ridge = procs[i:j]
            boxes = [(c.x, INT_MAX, c.y, INT_MAX, c.z, INT_MAX) for c in ridge]
            answers = batch_query_many(store, X, boxes)
            cand = _Writer(store)
            with store.pinned(1):
                for c, ans in zip(ridge, answers):
                    for r in ans:
                        cand.add((r[3], c.order, c.index, c.lo, c.hi) + tuple(r))
                cand_run = cand.close()
            cand_run = external_sort(store, cand_run, key=_cand_key, free_input=True)
            members = _assign(store, cand_run, members, dom_w)
            store.free_all(cand_run)
            i = j
        dom_unsorted = dom_w.close()
    for s in X:
        free_batchset(store, s)
    store.free_all(members)
    bd.dom_run = external_sort(store, dom_unsorted, key=_dom_key, free_input=True)
    # slice boundaries: one counting pass over the sorted list
    n = len(cs)
    sizes = [0] * n
    for r in read_run(store, bd.dom_run):
        sizes[r[0]] += 1
    start, acc = [], 0
    for s in sizes:
        start.append(acc)
        acc += s
    bd.dom_start = start
    bd.dom_end = [s + z for s, z in zip(start, sizes)]
    bd.lists_built = True


def _cand_key(r):
    return (r[0], r[1])


def _dom_key(r):
    return (r[0], r[4])


def _assign(store: BlockStore, cand_run: List[int], members: List[int],
            dom_w: _Writer) -> List[int]:
    """Merge candidates (sorted by id) with the membership run; emit new entries."""
    out = _Writer(store)
    with store.pinned(3):
        C = _Stream(store, cand_run)
        M = _Stream(store, members)
        while True:
            c = C.peek()
            if c is None:
                break
            pid = c[0]
            m = M.peek()
            while m is not None and m[0] < pid:
                out.add(M.pop())
                m = M.peek()
            have: List[int] = []
            while m is not None and m[0] == pid:
                have.append(M.pop()[1])
                m = M.peek()
            while True:
                c = C.peek()
                if c is None or c[0] != pid:
                    break
                C.pop()
                _, _, index, lo, hi = c[:5]
                if not any(lo <= h <= hi for h in have):
                    have.append(index)
                    dom_w.add((index,) + c[5:])
            for h in sorted(have):
                out.add((pid, h))
        m = M.peek()
        while m is not None:
            out.add(M.pop())
            m = M.peek()
        res = out.close()
    store.free_all(members)
    return res


# -- queries ------------------------------------------------------------------------


def locate(store: BlockStore, bd: TApproxBoundary, q) -> Optional[InwardCorner]:
    """An inward corner dominated by ``q`` (ridges scanned by descending z)."""
    if not bd.locator:
        return None
    qx, qy, qz = q[0], q[1], q[2]
    leaves = bd.locator
    if bd.locator_root is not None:
        root = [r for a in bd.locator_root for r in store.read_block(a)]
        first = 0
        for k, (z, _x, _i, _a) in enumerate(root):
            if z > qz:
                first = k
        leaves = [r[3] for r in root[first:]]
    for a in leaves:
        for x, y, z, idx in store.read_block(a):
            if z <= qz and x <= qx and y <= qy:
                return bd.corners[idx]
    return None


def report_corner(store: BlockStore, bd: TApproxBoundary, c: InwardCorner, q=None) -> list:
    """Points dominating ``q`` (default: the corner) read from the corner's range."""
    if q is None:
        q = c.pos
    lo, hi = bd.dom_start[c.lo], bd.dom_end[c.hi]
    if hi <= lo:
        return []
    b = store.block_capacity
    out: list = []
    seen = set()
    for bi in range(lo // b, (hi - 1) // b + 1):
        blk = store.read_block(bd.dom_run[bi])
        s = max(0, lo - bi * b)
        e = min(len(blk), hi - bi * b)
        for r in filter_dominating([rr[1:] for rr in blk[s:e]], q):
            if r[3] not in seen:
                seen.add(r[3])
                out.append(r)
    return out


def locate_and_report(store: BlockStore, bd: TApproxBoundary, q):
    """All points dominating ``q``, or ``None`` when ``q`` is below the boundary."""
    if not bd.lists_built:
        raise BoundaryError("dominance lists not built")
    c = locate(store, bd, q)
    if c is None:
        return None
    return report_corner(store, bd, c, q)


# -- geometry checks and export -------------------------------------------------------


def dominates_corner(bd: TApproxBoundary, q) -> bool:
    """Uncounted: does ``q`` dominate some inward corner?"""
    return any(c.x <= q[0] and c.y <= q[1] and c.z <= q[2] for c in bd.corners)


def _in_region(corners, x, y) -> bool:
    return any(cx <= x and cy <= y for cx, cy in corners)


def _in_open_region(corners, x, y) -> bool:
    return any(cx < x and cy < y for cx, cy in corners)


def dominated_by_surface(bd: TApproxBoundary, q, z_max: int) -> bool:
    """Uncounted: is ``q`` dominated by a point of the boundary surface?

    The wall under ridge ``R_{i-1}`` spans heights ``[z_i, z_{i-1}]``; a wall
    point dominates ``q`` iff the wall reaches ``q.z`` and ``q``'s projection
    is not strictly inside the staircase.
    """
    top = z_max
    for rd in bd.ridges:
        if q[2] <= top and not _in_open_region(rd.corners, q[0], q[1]):
            return True
        top = rd.z
    return False


def above_surface(bd: TApproxBoundary, q, z_max: int) -> bool:
    """Uncounted: does ``q`` dominate a surface point (ridge geometry only)?"""
    for rd in bd.ridges:
        if q[2] >= rd.z and _in_region(rd.corners, q[0], q[1]):
            return True
    return False


def export_csv(bd: TApproxBoundary, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ridge", "kind", "x", "y", "z"])
        for rd in bd.ridges:
            for (x, y), inw in zip(rd.corners, rd.inward):
                w.writerow([rd.index, "inward" if inw else "lowered", x, y, rd.z])
            for x, y in rd.next_corners or ():
                w.writerow([rd.index, "inner", x, y, rd.z])


def iter_dom(store: BlockStore, bd: TApproxBoundary, c: InwardCorner) -> Iterator[tuple]:
    """Uncounted: the corner's own dominance list."""
    b = store.block_capacity
    for k in range(bd.dom_start[c.index], bd.dom_end[c.index]):
        yield store.peek(bd.dom_run[k // b])[k % b][1:]


def ridge_count_bound(size: int, t: int, gamma: float) -> float:
    return gamma * (size / t) + gamma


def z_top(points: Sequence) -> int:
    return max((p[2] for p in points), default=0)


__all__ = [
    "BoundaryError", "Ridge", "InwardCorner", "TApproxBoundary", "build_boundary",
    "build_dominance_lists", "locate", "report_corner", "locate_and_report",
    "dominates_corner", "dominated_by_surface", "above_surface", "export_csv",
    "iter_dom", "z_top",
]
