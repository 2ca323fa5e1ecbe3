"""Lockstep verification against the oracle and I/O scaling reports."""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .api import Config, RangeIndex, create
from .block_io import BlockStore
from .geom import Point3, QueryBox, enc
from .oracle import (Delete, Insert, Op, Query, Workload, format_op, generate,
                     oracle_query, random_box)


# -- verification ------------------------------------------------------------------


@dataclass
class Divergence:
    op_index: int
    box: QueryBox
    live_size: int
    missing: List[int]
    extra: List[int]
    shrunk: List[Op] = field(default_factory=list)

    def describe(self) -> str:
        b = format_op(Query(self.box))
        return (f"op {self.op_index}: {b} with {self.live_size} live points; "
                f"missing ids {self.missing[:10]} extra ids {self.extra[:10]}; "
                f"repro has {len(self.shrunk)} ops")


@dataclass
class VerifyReport:
    passed: bool
    ops: int
    queries: int
    io_reads: int
    io_writes: int
    divergence: Optional[Divergence] = None
    audit_errors: List[str] = field(default_factory=list)

    def text(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        lines = [f"{head} ops={self.ops} queries={self.queries} "
                 f"reads={self.io_reads} writes={self.io_writes}"]
        if self.divergence is not None:
            lines.append(self.divergence.describe())
            lines.extend("  " + format_op(op) for op in self.divergence.shrunk)
        lines.extend("audit: " + e for e in self.audit_errors[:20])
        return "\n".join(lines) + "\n"


Fault = Callable[[RangeIndex], None]


def _replay(ops: Sequence[Op], config: Config, fault: Optional[Fault] = None,
            audit_every: int = 0, bulk: bool = True):
    """Run ``ops`` against a fresh index and the oracle.

    Returns ``(index, first divergence or None, queries run, audit errors)``.
    A leading block of inserts is bulk-loaded when ``bulk`` is set.
    """
    k = 0
    if bulk:
        while k < len(ops) and isinstance(ops[k], Insert):
            k += 1
    live: Dict[int, Point3] = {op.point.id: op.point for op in ops[:k]}
    idx = create(config, list(live.values()))
    if fault is not None:
        fault(idx)
    queries = 0
    errs: List[str] = []
    for i in range(k, len(ops)):
        op = ops[i]
        if isinstance(op, Insert):
            idx.insert(op.point)
            live[op.point.id] = op.point
        elif isinstance(op, Delete):
            idx.delete(op.id)
            del live[op.id]
        else:
            queries += 1
            got = {p.id: p for p in idx.query(op.box)}
            want = {p.id: p for p in oracle_query(live.values(), op.box)}
            if got != want:
                missing = sorted(i_ for i_ in want if got.get(i_) != want[i_])
                extra = sorted(i_ for i_ in got if want.get(i_) != got[i_])
                return idx, Divergence(i, op.box, len(live), missing, extra), queries, errs
        if audit_every and (i + 1) % audit_every == 0:
            errs.extend(idx.audit(deep=False))
    return idx, None, queries, errs


def _consistent(ops: Sequence[Op]) -> List[Op]:
    """Drop deletes of ids that are not live at that point."""
    live, out = set(), []
    for op in ops:
        if isinstance(op, Insert):
            if op.point.id in live:
                continue
            live.add(op.point.id)
        elif isinstance(op, Delete):
            if op.id not in live:
                continue
            live.discard(op.id)
        out.append(op)
    return out


def shrink(ops: Sequence[Op], config: Config, fault: Optional[Fault] = None,
           budget: int = 200) -> List[Op]:
    """Binary-search shrinking: remove halves, quarters, ... of the history
    before the failing query while the replay still diverges."""
    prefix, last = list(ops[:-1]), ops[-1]

    def fails(cand):
        return _replay(_consistent(cand) + [last], config, fault)[1] is not None

    chunk = max(1, len(prefix) // 2)
    tries = 0
    while chunk >= 1 and tries < budget:
        i, progress = 0, False
        while i < len(prefix) and tries < budget:
            cand = prefix[:i] + prefix[i + chunk:]
            tries += 1
            if fails(cand):
                prefix, progress = cand, True
            else:
                i += chunk
        if not progress:
            if chunk == 1:
                break
            chunk //= 2
    return _consistent(prefix) + [last]


def run_verify(workload: Workload, config=None, fault: Optional[Fault] = None,
               audit_every: int = 0, shrink_budget: int = 200) -> VerifyReport:
    """Replay against :class:`RangeIndex` and the oracle in lockstep."""
    if config is None:
        config = Config()
    elif not isinstance(config, Config):
        config = Config.from_mapping(config)
    ops = workload.ops
    idx, div, queries, errs = _replay(ops, config, fault, audit_every)
    st = idx.io_stats()
    if div is not None and shrink_budget:
        div.shrunk = shrink(ops[:div.op_index + 1], config, fault, shrink_budget)
    ran = len(ops) if div is None else div.op_index + 1
    return VerifyReport(div is None and not errs, ran, queries, st.reads, st.writes, div, errs)


def corrupt_point(idx: RangeIndex, pid: int, new_x: int) -> int:
    """Fault injection: rewrite the x of point ``pid`` in every stored copy.

    Returns the number of fields changed (0 if ``pid`` is absent).  No I/O
    is charged.
    """
    st = idx.store
    old = next((p for p in idx.points() if p.id == pid), None)
    if old is None:
        return 0
    ko, kn = enc(old.x, pid), enc(new_x, pid)
    r0, w0 = st.reads, st.writes
    changed = 0
    for addr in list(st._blocks):
        blk = st.peek(addr)
        if not any(ko in r for r in blk):
            continue
        new = []
        for r in blk:
            if ko in r:
                changed += sum(1 for v in r if v == ko)
                r = tuple(kn if v == ko else v for v in r)
            new.append(r)
        st.write_block(addr, new)
    st.reads, st.writes = r0, w0
    return changed


# -- scaling -------------------------------------------------------------------------


CSV_HEADER = ["n", "b", "opclass", "median_io", "mean_io", "k_mean", "fit_term", "fit_kappa"]

SELECTIVITIES = (0.0, 0.002, 0.02)


@dataclass
class Cell:
    n: int
    b: int
    opclass: str
    ios: List[int]
    ks: List[int]

    @property
    def median_io(self) -> float:
        return float(statistics.median(self.ios)) if self.ios else 0.0

    @property
    def mean_io(self) -> float:
        return float(statistics.mean(self.ios)) if self.ios else 0.0

    @property
    def k_mean(self) -> float:
        return float(statistics.mean(self.ks)) if self.ks else 0.0

    @property
    def k_median(self) -> float:
        return float(statistics.median(self.ks)) if self.ks else 0.0


@dataclass
class Fit:
    kappa: Tuple[float, ...]
    r2: float
    terms: Tuple[str, ...]


def log_b(n: float, b: float) -> float:
    return math.log(n) / math.log(b)


def query_features(n: int, b: int, k: float) -> Tuple[float, float, float]:
    return (log_b(n, b) ** 2, k / b, 1.0)


def least_squares(X: Sequence[Sequence[float]], y: Sequence[float]) -> Tuple[np.ndarray, float]:
    A = np.asarray(X, dtype=float)
    v = np.asarray(y, dtype=float)
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


def fit_queries(cells: Iterable[Cell]) -> Fit:
    """median I/O ~ k1 * log_B(N)^2 + k2 * k/B + k3 over query cells."""
    cells = [c for c in cells if c.opclass.startswith("query")]
    X = [query_features(c.n, c.b, c.k_median) for c in cells]
    coef, r2 = least_squares(X, [c.median_io for c in cells])
    return Fit(tuple(float(c) for c in coef), r2, ("log_B^2 N", "k/B", "1"))


def update_ratios(cells: Iterable[Cell]) -> Dict[Tuple[int, int], float]:
    """Mean update I/Os divided by log2(N)^3 per (n, b)."""
    return {(c.n, c.b): c.mean_io / math.log2(c.n) ** 3
            for c in cells if c.opclass == "update"}


def measure_cell(n: int, b: int, config: Config, queries: int = 60, updates: int = 0,
                 seed: int = 0, selectivities: Sequence[float] = SELECTIVITIES,
                 universe: int = 1 << 20) -> List[Cell]:
    """Build one index of ``n`` uniform points and measure query classes
    (one per selectivity) and optionally ``updates`` mixed updates."""
    w = generate(n, "uniform", seed=seed, universe=universe)
    pts = [op.point for op in w.ops]
    cfg = Config(b, config.f, config.pinned_limit, config.seed, config.leaf_factor)
    idx = create(cfg, pts)
    st = idx.store
    rng = random.Random(seed * 1000003 + n * 31 + b)
    cells = []
    for s in selectivities:
        ios, ks = [], []
        for _ in range(queries):
            box = random_box(rng, universe, s, open_prob=0.0) if s > 0 else _point_box(rng, universe)
            r0 = st.reads + st.writes
            k = len(idx.query(box))
            ios.append(st.reads + st.writes - r0)
            ks.append(k)
        cells.append(Cell(n, b, f"query_s{s:g}", ios, ks))
    if updates:
        ios = []
        nid = n
        ids = [p.id for p in pts]
        for u in range(updates):
            r0 = st.reads + st.writes
            if u % 2 == 0:
                idx.insert((rng.randrange(universe), rng.randrange(universe),
                            rng.randrange(universe), nid))
                ids.append(nid)
                nid += 1
            else:
                j = rng.randrange(len(ids))
                ids[j], ids[-1] = ids[-1], ids[j]
                idx.delete(ids.pop())
            ios.append(st.reads + st.writes - r0)
        cells.append(Cell(n, b, "update", ios, []))
    return cells


def _point_box(rng: random.Random, universe: int) -> QueryBox:
    """Tiny box: expected output close to zero."""
    b = []
    for _ in range(3):
        lo = rng.randrange(universe)
        b += [lo, lo]
    return QueryBox(*b)


def run_scaling(grid: Iterable[Tuple[int, int]], config=None, queries: int = 60,
                updates: int = 0, seed: int = 0, out=None) -> Tuple[List[Cell], str]:
    """Measure every ``(n, b)`` cell, fit the cost models, and return the
    cells plus the CSV text (also written to ``out`` if given)."""
    if config is None:
        config = Config()
    elif not isinstance(config, Config):
        config = Config.from_mapping(config)
    cells: List[Cell] = []
    for n, b in grid:
        cells.extend(measure_cell(n, b, config, queries, updates, seed))
    text = scaling_csv(cells)
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return cells, text


def scaling_csv(cells: Sequence[Cell]) -> str:
    qfit = fit_queries(cells) if any(c.opclass.startswith("query") for c in cells) else None
    ratios = update_ratios(cells)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in cells:
        if c.opclass.startswith("query"):
            term = log_b(c.n, c.b) ** 2 + c.k_median / c.b
            kappa = qfit.kappa[0] if qfit else float("nan")
        else:
            term = math.log2(c.n) ** 3
            kappa = ratios[(c.n, c.b)]
        w.writerow([c.n, c.b, c.opclass, f"{c.median_io:.1f}", f"{c.mean_io:.2f}",
                    f"{c.k_mean:.2f}", f"{term:.3f}", f"{kappa:.4f}"])
    return buf.getvalue()


def parse_grid(grid: str) -> List[Tuple[int, int]]:
    """``"n1,n2;b1,b2"`` -> cross product; ``n`` may be written ``2^k``."""
    ns, _, bs = grid.partition(";")
    if not bs:
        raise ValueError("grid must look like 'N1,N2,...;B1,B2,...'")

    def num(t):
        t = t.strip()
        if "^" in t:
            a, e = t.split("^")
            return int(a) ** int(e)
        return int(t)

    return [(num(n), num(b)) for n in ns.split(",") for b in bs.split(",")]
