"""Library entry point: ``create(config)`` returns a :class:`RangeIndex`."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional

from .block_io import BlockStore, IoReport
from .full3d import (Full3D, full_audit, full_build, full_delete, full_insert,
                     full_query, full_records)
from .geom import Point3, QueryBox


@dataclass
class Config:
    B: int = 32
    f: float = 1.0 / 6.0
    pinned_limit: Optional[int] = None
    seed: int = 0
    leaf_factor: int = 4     # y leaves, z leaves and sided-set buckets hold leaf_factor * B

    @classmethod
    def from_mapping(cls, m) -> "Config":
        known = {k: m[k] for k in ("B", "f", "pinned_limit", "seed", "leaf_factor") if k in m}
        extra = set(m) - set(known)
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**known)


class RangeIndex:
    """Dynamic set of 3D points answering orthogonal range queries.

    All data lives in an I/O-counted :class:`BlockStore`; ``io_stats`` reports
    the transfers so far.
    """

    def __init__(self, config: Config, points: Iterable = ()):
        self.config = config
        self.store = BlockStore(config.B, pinned_limit=config.pinned_limit)
        L = config.leaf_factor * config.B
        self.tree: Full3D = full_build(self.store, points, f=config.f, leaf_size=L,
                                       z_leaf=L, ss_leaf=L, seed=config.seed)

    def __len__(self) -> int:
        return self.tree.size

    def insert(self, p) -> None:
        """Add point ``(x, y, z, id)``; raises ``KeyError`` on a duplicate id."""
        full_insert(self.store, self.tree, p)

    def delete(self, pid: int) -> Point3:
        """Remove by id and return the removed point."""
        return full_delete(self.store, self.tree, pid)

    def query(self, box) -> List[Point3]:
        return full_query(self.store, self.tree, box)

    def io_stats(self) -> IoReport:
        return IoReport(self.store.reads, self.store.writes, "total")

    def audit(self, deep: bool = True) -> List[str]:
        """Structural problems found (empty when healthy); costs no I/O."""
        return full_audit(self.store, self.tree, deep=deep)

    def points(self) -> List[Point3]:
        return full_records(self.store, self.tree)


def create(config=None, points: Iterable = ()) -> RangeIndex:
    """``config`` may be a :class:`Config`, a mapping with keys
    ``B, f, pinned_limit, seed`` (and optionally ``leaf_factor``), or None."""
    if config is None:
        config = Config()
    elif not isinstance(config, Config):
        config = Config.from_mapping(config)
    return RangeIndex(config, points)


__all__ = ["Config", "RangeIndex", "create", "Point3", "QueryBox"]
