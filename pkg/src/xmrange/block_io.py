"""Simulated block storage with exact I/O accounting.

Every module in the package keeps its bulk data in a :class:`BlockStore`
and reaches it only through :meth:`BlockStore.read_block` and
:meth:`BlockStore.write_block`, so the ``reads``/``writes`` counters are the
cost of an operation in the external-memory model.
"""

from __future__ import annotations

import heapq
import math
from array import array
import struct
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

Record = Tuple[int, ...]

MAGIC = b"XMB1"


class StoreError(Exception):
    """Base class for block storage errors."""


class AddressError(StoreError, KeyError):
    pass


class CapacityError(StoreError, ValueError):
    pass


class MemoryLimitError(StoreError, RuntimeError):
    """Raised when an operation would pin more blocks than ``pinned_limit``."""


def default_pinned_limit(block_capacity: int) -> int:
    return max(8, math.ceil(block_capacity ** (1.0 / 3.0) - 1e-9) + 4)


@dataclass
class IoReport:
    reads: int = 0
    writes: int = 0
    label: str = ""

    @property
    def total(self) -> int:
        return self.reads + self.writes


class BlockStore:
    """Addressable fixed-capacity blocks of integer records.

    There is no cache: reading the same block twice costs two reads.  Callers
    that keep blocks in "main memory" across several steps must declare that
    with :meth:`pinned`; the store refuses to let the number of simultaneously
    held blocks exceed ``pinned_limit``.
    """

    def __init__(self, block_capacity: int = 32, pinned_limit: Optional[int] = None,
                 record_width: int = 4):
        if block_capacity < 4:
            raise CapacityError("block_capacity must be >= 4")
        self.block_capacity = block_capacity
        self.pinned_limit = (default_pinned_limit(block_capacity)
                             if pinned_limit is None else pinned_limit)
        self.record_width = record_width
        self.reads = 0
        self.writes = 0
        self._blocks: dict = {}
        self._next = 0
        self._free: List[int] = []
        self._held = 0
        self.peak_held = 0

    # -- allocation -------------------------------------------------------

    def allocate(self, recs: Sequence[Record] = ()) -> int:
        """Allocate a block and write ``recs`` into it (one write)."""
        addr = self._free.pop() if self._free else self._next
        if addr == self._next:
            self._next += 1
        self._blocks[addr] = ()
        self.write_block(addr, recs)
        return addr

    def free(self, addr: int) -> None:
        if addr not in self._blocks:
            raise AddressError(addr)
        del self._blocks[addr]
        self._free.append(addr)

    def free_all(self, addrs: Iterable[int]) -> None:
        for a in addrs:
            self.free(a)

    @property
    def block_count(self) -> int:
        return len(self._blocks)

    # -- transfers --------------------------------------------------------

    def read_block(self, addr: int) -> tuple:
        try:
            recs = self._blocks[addr]
        except KeyError:
            raise AddressError(addr) from None
        if self._held + 1 > self.pinned_limit:
            raise MemoryLimitError(
                f"read needs a free frame but {self._held} of "
                f"{self.pinned_limit} blocks are pinned")
        self.reads += 1
        return _unpack(recs)

    def write_block(self, addr: int, recs: Sequence[Record]) -> None:
        if addr not in self._blocks:
            raise AddressError(addr)
        if len(recs) > self.block_capacity:
            raise CapacityError(
                f"{len(recs)} records exceed block capacity {self.block_capacity}")
        self.writes += 1
        self._blocks[addr] = _pack(recs)

    def peek(self, addr: int) -> tuple:
        """Uncounted access for audits and debugging only."""
        return _unpack(self._blocks[addr])

    # -- main-memory frames -------------------------------------------------

    @contextmanager
    def pinned(self, n: int) -> Iterator[None]:
        """Declare that the caller keeps ``n`` blocks in memory for the block."""
        if n < 0:
            raise ValueError("negative pin count")
        if self._held + n > self.pinned_limit:
            raise MemoryLimitError(
                f"pinning {n} blocks with {self._held} held exceeds "
                f"pinned_limit={self.pinned_limit}")
        self._held += n
        self.peak_held = max(self.peak_held, self._held)
        try:
            yield
        finally:
            self._held -= n

    # -- accounting ---------------------------------------------------------

    def snapshot(self) -> Tuple[int, int]:
        return self.reads, self.writes

    def since(self, snap: Tuple[int, int], label: str = "") -> IoReport:
        return IoReport(self.reads - snap[0], self.writes - snap[1], label)

    @contextmanager
    def measure(self, label: str = "") -> Iterator[IoReport]:
        """Context manager yielding an :class:`IoReport` filled in on exit."""
        rep = IoReport(label=label)
        r0, w0 = self.reads, self.writes
        try:
            yield rep
        finally:
            rep.reads = self.reads - r0
            rep.writes = self.writes - w0

    # -- file-backed mode -----------------------------------------------------

    def save(self, path: str) -> None:
        """Persist as little-endian int64s.

        Layout: ``XMB1``, then (block_capacity, block_count, record_width),
        then per block (addr, n_records, B*record_width padded values).
        """
        w = self.record_width
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<3q", self.block_capacity, len(self._blocks), w))
            slot = self.block_capacity * w
            for addr in sorted(self._blocks):
                recs = _unpack(self._blocks[addr])
                flat = [v for r in recs for v in r]
                if any(len(r) != w for r in recs):
                    raise CapacityError("record width mismatch on save")
                flat.extend([0] * (slot - len(flat)))
                fh.write(struct.pack(f"<2q{slot}q", addr, len(recs), *flat))

    @classmethod
    def load(cls, path: str, pinned_limit: Optional[int] = None) -> "BlockStore":
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                raise StoreError("bad magic")
            cap, count, w = struct.unpack("<3q", fh.read(24))
            store = cls(cap, pinned_limit, w)
            slot = cap * w
            for _ in range(count):
                vals = struct.unpack(f"<2q{slot}q", fh.read(8 * (2 + slot)))
                addr, n = vals[0], vals[1]
                body = vals[2:]
                store._blocks[addr] = _pack(
                    [tuple(body[i * w:(i + 1) * w]) for i in range(n)])
            store._next = max(store._blocks, default=-1) + 1
            store._free = [a for a in range(store._next) if a not in store._blocks]
        return store


class _Packed:
    """Equal-width integer records stored as one flat int64 array."""

    __slots__ = ("width", "data")

    def __init__(self, width: int, data: array):
        self.width = width
        self.data = data


def _pack(recs):
    if not recs:
        return ()
    w = len(recs[0])
    try:
        if w and all(len(r) == w for r in recs):
            return _Packed(w, array("q", [v for r in recs for v in r]))
    except (TypeError, OverflowError):
        pass
    return tuple(tuple(r) for r in recs)


def _unpack(blk) -> tuple:
    if type(blk) is _Packed:
        it = iter(blk.data)
        return tuple(zip(*[it] * blk.width))
    return blk


# -- block-list helpers -------------------------------------------------------


def write_run(store: BlockStore, recs: Sequence[Record]) -> List[int]:
    """Pack records into freshly allocated blocks; one write per block."""
    b = store.block_capacity
    return [store.allocate(recs[i:i + b]) for i in range(0, len(recs), b)]


def read_run(store: BlockStore, addrs: Sequence[int]) -> Iterator[Record]:
    """Stream records of a run one block at a time."""
    for a in addrs:
        yield from store.read_block(a)


def external_sort(store: BlockStore, run: Sequence[int],
                  key: Optional[Callable[[Record], object]] = None,
                  free_input: bool = False) -> List[int]:
    """Multiway external merge sort of the records stored in ``run``.

    Uses every frame not already pinned by the caller: initial runs hold
    ``avail - 1`` blocks each and merge passes have fan-in ``avail - 1`` plus
    one output frame.  Returns the addresses of freshly written sorted blocks.
    """
    if key is None:
        key = _identity
    avail = store.pinned_limit - store._held
    if avail < 3:
        raise MemoryLimitError(f"external_sort needs 3 free frames, has {avail}")
    if not run:
        return []
    chunk = avail - 1
    runs: List[List[int]] = []
    for i in range(0, len(run), chunk):
        part = run[i:i + chunk]
        with store.pinned(len(part) - 1):
            recs = [r for a in part for r in store.read_block(a)]
        recs.sort(key=key)
        runs.append(write_run(store, recs))
    if free_input:
        store.free_all(run)
    fan_in = avail - 1
    while len(runs) > 1:
        merged = []
        for i in range(0, len(runs), fan_in):
            group = runs[i:i + fan_in]
            if len(group) == 1:
                merged.append(group[0])
                continue
            merged.append(_merge(store, group, key))
            for g in group:
                store.free_all(g)
        runs = merged
    return runs[0]


def _identity(r):
    return r


def _merge(store: BlockStore, runs: List[List[int]], key) -> List[int]:
    out: List[int] = []
    buf: List[Record] = []
    b = store.block_capacity
    with store.pinned(len(runs)):
        iters = [read_run_pinned(store, r) for r in runs]
        for rec in heapq.merge(*iters, key=key):
            buf.append(rec)
            if len(buf) == b:
                out.append(_alloc_pinned(store, buf))
                buf = []
        if buf:
            out.append(_alloc_pinned(store, buf))
    return out


def read_run_pinned(store: BlockStore, addrs: Sequence[int]) -> Iterator[Record]:
    """Like :func:`read_run` for a caller that already holds a frame for it."""
    for a in addrs:
        store._held -= 1
        try:
            recs = store.read_block(a)
        finally:
            store._held += 1
        yield from recs


def _alloc_pinned(store: BlockStore, buf: List[Record]) -> int:
    return store.allocate(buf)
