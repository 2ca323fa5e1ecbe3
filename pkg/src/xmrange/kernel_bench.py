"""Timing of the compiled kernels against their pure-Python twins."""

from __future__ import annotations

import random
import timeit
from typing import List

from . import _kernels_py as pure


def _compiled():
    try:
        from ._ext import kernels
    except ImportError:
        return None
    return kernels


def compare(n: int = 100_000, repeat: int = 5, seed: int = 0) -> List[str]:
    rng = random.Random(seed)
    recs = [(rng.randrange(1 << 40), rng.randrange(1 << 40), rng.randrange(1 << 40), i)
            for i in range(n)]
    half = 1 << 39
    box = (0, half, 0, half, 0, half)
    chunk = recs[:64]
    boxes = [box] * 64
    cases = [
        ("filter_bounds", lambda m: m.filter_bounds(recs, box)),
        ("count_bounds", lambda m: m.count_bounds(recs, box)),
        ("filter_dominating", lambda m: m.filter_dominating(recs, (half, half, half))),
        ("batch_pairs", lambda m: m.batch_pairs(chunk, boxes)),
    ]
    ext = _compiled()
    lines = [f"{'kernel':<18} {'pure ms':>9} {'compiled ms':>12} {'speedup':>8}"]
    for name, fn in cases:
        tp = min(timeit.repeat(lambda: fn(pure), number=1, repeat=repeat)) * 1e3
        if ext is None:
            lines.append(f"{name:<18} {tp:9.2f} {'n/a':>12} {'n/a':>8}")
            continue
        if fn(ext) != fn(pure):
            raise AssertionError(f"{name}: compiled and pure results differ")
        tc = min(timeit.repeat(lambda: fn(ext), number=1, repeat=repeat)) * 1e3
        lines.append(f"{name:<18} {tp:9.2f} {tc:12.2f} {tp / tc:7.1f}x")
    return lines
