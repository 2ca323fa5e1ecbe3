"""Points, query boxes and the dominance relation."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple


class Point3(NamedTuple):
    """A point with integer coordinates and a unique id.

    Stored in blocks as the plain tuple ``(x, y, z, id)``.
    """

    x: int
    y: int
    z: int
    id: int


def key_x(p) -> tuple:
    return (p[0], p[3])


def key_y(p) -> tuple:
    return (p[1], p[3])


def key_z(p) -> tuple:
    return (p[2], p[3])


def dominates(q, p) -> bool:
    """True iff every coordinate of ``q`` is >= the matching one of ``p``."""
    return q[0] >= p[0] and q[1] >= p[1] and q[2] >= p[2]


@dataclass(frozen=True)
class QueryBox:
    """Axis-aligned box; ``None`` in a bound means the side is open."""

    xlo: Optional[int] = None
    xhi: Optional[int] = None
    ylo: Optional[int] = None
    yhi: Optional[int] = None
    zlo: Optional[int] = None
    zhi: Optional[int] = None

    def __post_init__(self):
        for lo, hi in self.axes():
            if lo is not None and hi is not None and lo > hi:
                raise ValueError(f"empty axis interval [{lo}, {hi}]")

    def axes(self) -> Tuple[Tuple[Optional[int], Optional[int]], ...]:
        return ((self.xlo, self.xhi), (self.ylo, self.yhi), (self.zlo, self.zhi))

    @property
    def sidedness(self) -> Tuple[int, int, int]:
        return tuple((lo is not None) + (hi is not None) for lo, hi in self.axes())

    def contains(self, p) -> bool:
        return contains(self, p)

    def as_bounds(self) -> Tuple[int, int, int, int, int, int]:
        """Bounds with open sides replaced by int64 sentinels."""
        return (_lo(self.xlo), _hi(self.xhi), _lo(self.ylo), _hi(self.yhi),
                _lo(self.zlo), _hi(self.zhi))

    @classmethod
    def dominance(cls, q) -> "QueryBox":
        """Box of all points dominating ``q``."""
        return cls(q[0], None, q[1], None, q[2], None)

    @classmethod
    def everything(cls) -> "QueryBox":
        return cls()


INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1


def _lo(v):
    return INT_MIN if v is None else v


def _hi(v):
    return INT_MAX if v is None else v


# Canonical empty box used to pad query batches.
EMPTY_BOUNDS = (1, 0, 1, 0, 1, 0)


def contains(box: QueryBox, p) -> bool:
    for (lo, hi), v in zip(box.axes(), p):
        if lo is not None and v < lo:
            return False
        if hi is not None and v > hi:
            return False
    return True


def in_bounds(bounds, p) -> bool:
    return (bounds[0] <= p[0] <= bounds[1] and bounds[2] <= p[1] <= bounds[3]
            and bounds[4] <= p[2] <= bounds[5])


# -- rank reduction -------------------------------------------------------------


class RankMap:
    """Replace coordinates by ranks under (coordinate, id).

    After reduction all three axes hold distinct values ``1..n``.  Query
    bounds are mapped with predecessor/successor search so that a reduced
    box selects exactly the points the original box selects.
    """

    def __init__(self, points: Sequence):
        self.keys = [sorted(((p[a], p[3]) for p in points)) for a in range(3)]
        self.coords = [[k[0] for k in ks] for ks in self.keys]

    def reduce(self, points: Iterable) -> List[Point3]:
        out = []
        for p in points:
            r = [bisect.bisect_left(self.keys[a], (p[a], p[3])) + 1 for a in range(3)]
            out.append(Point3(r[0], r[1], r[2], p[3]))
        return out

    def reduce_lower(self, axis: int, v: Optional[int]) -> int:
        """Smallest rank whose coordinate is >= v."""
        if v is None:
            return 0
        return bisect.bisect_left(self.coords[axis], v) + 1

    def reduce_upper(self, axis: int, v: Optional[int]) -> int:
        """Largest rank whose coordinate is <= v."""
        if v is None:
            return len(self.coords[axis]) + 1
        return bisect.bisect_right(self.coords[axis], v)

    def reduce_point(self, q) -> Point3:
        """Map a dominance query point to rank space."""
        return Point3(*(self.reduce_lower(a, q[a]) for a in range(3)), -1)


def rank_reduce(points: Sequence) -> Tuple[List[Point3], RankMap]:
    rm = RankMap(points)
    return rm.reduce(points), rm


# -- text point format -----------------------------------------------------------


def parse_points(lines: Iterable[str]) -> List[Point3]:
    pts = []
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        x, y, z, i = ln.split()
        pts.append(Point3(int(x), int(y), int(z), int(i)))
    return pts


def format_points(points: Iterable) -> str:
    return "".join(f"{p[0]} {p[1]} {p[2]} {p[3]}\n" for p in points)


# -- composite keys ----------------------------------------------------------------
#
# Inside the 3D structure every coordinate is paired with the point id so that
# all keys are distinct: key = coord * 2**32 + id.  Coordinates must satisfy
# |c| < 2**30 and ids must lie in [0, 2**32).

ID_BITS = 32
ID_LIMIT = 1 << ID_BITS
COORD_LIMIT = 1 << 30


def check_point(p) -> None:
    for v in p[:3]:
        if not -COORD_LIMIT < v < COORD_LIMIT:
            raise ValueError(f"coordinate {v} outside (-2**30, 2**30)")
    if not 0 <= p[3] < ID_LIMIT:
        raise ValueError(f"id {p[3]} outside [0, 2**32)")


def enc(c: int, pid: int) -> int:
    return (c << ID_BITS) + pid


def dec(k: int) -> int:
    return k >> ID_BITS


def enc_lo(v: Optional[int]) -> int:
    """Smallest key whose coordinate is >= v."""
    if v is None or v <= -COORD_LIMIT:
        return INT_MIN
    if v >= COORD_LIMIT:
        return INT_MAX
    return v << ID_BITS


def enc_hi(v: Optional[int]) -> int:
    """Largest key whose coordinate is <= v."""
    if v is None or v >= COORD_LIMIT:
        return INT_MAX
    if v <= -COORD_LIMIT:
        return INT_MIN
    return (v << ID_BITS) + ID_LIMIT - 1
