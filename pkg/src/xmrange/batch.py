"""Batched range reporting over a small static point set.

A :class:`BatchSet` of ``F`` points is laid out in ``f = ceil(F/B)`` chunk
blocks.  A batch of up to ``ceil(B**(1/c))`` boxes is answered by one scan of
the chunks: every (query index, point) hit is appended to a pair list, the
pair list is sorted by query index with :func:`external_sort`, and a final
scan splits it into per-query answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

from .block_io import (BlockStore, CapacityError, MemoryLimitError, external_sort,
                       read_run, write_run)
from .geom import EMPTY_BOUNDS, QueryBox
from .kernels import batch_pairs


class BatchSizeError(ValueError):
    pass


def batch_width(block_capacity: int, c: int = 3) -> int:
    """Largest number of chunks (and of queries per batch) allowed."""
    return max(1, math.ceil(block_capacity ** (1.0 / c) - 1e-9))


@dataclass
class BatchSet:
    chunks: List[int]
    size: int
    c: int
    width: int

    @property
    def f(self) -> int:
        return len(self.chunks)


def build_batchset(store: BlockStore, points: Sequence, c: int = 3) -> BatchSet:
    """Write ``points`` (records ``(x, y, z, id, ...)``) into chunk blocks."""
    if c < 3:
        raise ValueError("c must be >= 3")
    width = batch_width(store.block_capacity, c)
    if len(points) > width * store.block_capacity:
        raise CapacityError(
            f"{len(points)} points exceed batch capacity {width * store.block_capacity}")
    if store.pinned_limit < width + 2:
        raise MemoryLimitError(
            f"batch queries need pinned_limit >= {width + 2}, have {store.pinned_limit}")
    return BatchSet(write_run(store, list(points)), len(points), c, width)


def build_batchsets(store: BlockStore, points: Sequence, c: int = 3) -> List[BatchSet]:
    """Split an oversize set into several full-width BatchSets."""
    cap = batch_width(store.block_capacity, c) * store.block_capacity
    points = list(points)
    if not points:
        return [build_batchset(store, [], c)]
    return [build_batchset(store, points[i:i + cap], c) for i in range(0, len(points), cap)]


def _as_bounds(q):
    if isinstance(q, QueryBox):
        return q.as_bounds()
    if q is None:
        return EMPTY_BOUNDS
    return tuple(q)


def batch_query(store: BlockStore, bs: BatchSet, queries: Sequence) -> List[list]:
    """Answer up to ``bs.width`` boxes in one pass.

    ``queries`` holds :class:`QueryBox` objects or 6-tuples of closed bounds.
    Each answer lists the matching records ordered by point id.
    """
    if len(queries) > bs.width:
        raise BatchSizeError(f"{len(queries)} queries > batch width {bs.width}")
    boxes = [_as_bounds(q) for q in queries]
    answers: List[list] = [[] for _ in boxes]
    if not bs.chunks or not boxes:
        return answers
    b = store.block_capacity
    pairs_run: List[int] = []
    buf: list = []
    # one frame for the queries, one for the output buffer; chunk read is transient
    with store.pinned(2):
        for addr in bs.chunks:
            chunk = store.read_block(addr)
            buf.extend(batch_pairs(chunk, boxes))
            while len(buf) >= b:
                pairs_run.append(store.allocate(buf[:b]))
                del buf[:b]
    if buf:
        pairs_run.append(store.allocate(buf))
    if len(pairs_run) * b > b ** 4:
        raise BatchSizeError("pair list exceeds B**4 records")
    srt = external_sort(store, pairs_run, key=_pair_key, free_input=True)
    for pair in read_run(store, srt):
        answers[pair[0]].append(pair[1:])
    store.free_all(srt)
    return answers


def _pair_key(pair):
    return (pair[0], pair[4])


def batch_query_many(store: BlockStore, sets: Sequence[BatchSet], queries: Sequence):
    """Answer any number of queries against several BatchSets, batching as needed."""
    out: List[list] = [[] for _ in queries]
    if not sets:
        return out
    width = sets[0].width
    for s in sets:
        for i in range(0, len(queries), width):
            part = queries[i:i + width]
            for j, ans in enumerate(batch_query(store, s, part)):
                out[i + j].extend(ans)
    return out


def free_batchset(store: BlockStore, bs: BatchSet) -> None:
    store.free_all(bs.chunks)
    bs.chunks = []
