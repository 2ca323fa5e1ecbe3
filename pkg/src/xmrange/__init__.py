"""External-memory 3D orthogonal range reporting with exact I/O accounting."""

from .api import Config, RangeIndex, create
from .block_io import BlockStore, IoReport
from .geom import Point3, QueryBox

__all__ = ["BlockStore", "Config", "IoReport", "Point3", "QueryBox", "RangeIndex", "create"]
__version__ = "0.1.0"
