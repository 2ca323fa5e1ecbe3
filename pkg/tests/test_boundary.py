import random

import pytest
from hypothesis import given, strategies as st

from xmrange.audit import count_violations, rank_points, separation_violations
from xmrange.block_io import BlockStore, CapacityError, MemoryLimitError
from xmrange.boundary import (BoundaryError, build_boundary, build_dominance_lists,
                              dominated_by_surface, dominates_corner, export_csv, iter_dom,
                              locate_and_report, ridge_count_bound, z_top)

GAMMA = 1.0   # ridges <= GAMMA * (|S|/t + 1); worst measured 0.84


def _build(n, b, t, seed=0):
    rng = random.Random(seed)
    pts = rank_points(n, rng)
    s = BlockStore(b)
    bd = build_boundary(s, pts, t)
    build_dominance_lists(s, bd, pts)
    return s, bd, pts, rng


def _dominators(pts, q):
    return {p[3] for p in pts if p[0] >= q[0] and p[1] >= q[1] and p[2] >= q[2]}


def _descendants(bd, c):
    out, todo = [], list(c.children)
    while todo:
        d = todo.pop()
        out.append(bd.corners[d])
        todo.extend(bd.corners[d].children)
    return out


def test_set_of_exactly_t_points():
    s, bd, pts, _ = _build(32, 32, 32)
    for c in bd.corners:
        assert len(_dominators(pts, c.pos)) >= 32


def test_empty_set():
    s = BlockStore(32)
    bd = build_boundary(s, [], 32)
    build_dominance_lists(s, bd, [])
    assert bd.corners == []
    assert locate_and_report(s, bd, (5, 5, 5)) is None


def test_properties_at_256_points():
    s, bd, pts, rng = _build(256, 64, 64)
    assert count_violations(bd, pts) == []
    assert separation_violations(bd, pts, 1000, rng) == []
    assert len(bd.ridges) <= ridge_count_bound(256, 64, GAMMA)


@given(st.integers(1, 700), st.sampled_from([8, 16, 32]), st.sampled_from([1, 2]),
       st.integers(0, 10**6))
def test_boundary_invariants(n, b, tm, seed):
    t = b * tm
    n = min(n, int(4 * b ** (4 / 3)))
    s, bd, pts, rng = _build(n, b, t, seed)
    if n >= t:
        assert count_violations(bd, pts) == []
    assert separation_violations(bd, pts, 100, rng) == []
    assert len(bd.ridges) <= ridge_count_bound(n, t, GAMMA)
    for rd in bd.ridges:
        xs = [x for x, _ in rd.corners]
        ys = [y for _, y in rd.corners]
        assert xs == sorted(set(xs)) and ys == sorted(set(ys), reverse=True)
    for c in bd.corners:
        dom = list(iter_dom(s, bd, c))
        assert len(dom) <= 3 * t
        assert all(r[0] >= c.x and r[1] >= c.y and r[2] >= c.z for r in dom)
        mine = {r[3] for r in dom}
        for d in _descendants(bd, c):
            assert not mine & {r[3] for r in iter_dom(s, bd, d)}
        near = set()
        for d in bd.corners[c.lo:c.hi + 1]:
            near |= {r[3] for r in iter_dom(s, bd, d)}
        assert _dominators(pts, c.pos) <= near


def test_single_corner_list_is_every_dominator():
    s, bd, pts, _ = _build(40, 16, 16, seed=3)
    lone = [c for c in bd.corners if not c.children and c.parent is None]
    for c in lone:
        assert {r[3] for r in iter_dom(s, bd, c)} == _dominators(pts, c.pos)


def test_query_above_everything():
    s, bd, pts, _ = _build(256, 64, 64)
    n = len(pts)
    assert locate_and_report(s, bd, (n + 1, n + 1, n + 1)) == []


def test_query_below_everything():
    s, bd, pts, _ = _build(256, 64, 64)
    assert locate_and_report(s, bd, (0, 0, 0)) is None


def test_random_queries_match_oracle():
    s, bd, pts, rng = _build(256, 64, 64, seed=9)
    answered = 0
    for _ in range(100):
        q = tuple(rng.randint(0, 257) for _ in range(3))
        res = locate_and_report(s, bd, q)
        if res is None:
            assert len(_dominators(pts, q)) > 64 or dominated_by_surface(bd, q, z_top(pts))
            continue
        answered += 1
        assert {r[3] for r in res} == _dominators(pts, q)
    assert answered > 0


def test_input_errors():
    s = BlockStore(32)
    pts = rank_points(50, random.Random(0))
    with pytest.raises(BoundaryError):
        build_boundary(s, pts, 16)
    with pytest.raises(CapacityError):
        build_boundary(s, rank_points(500, random.Random(0)), 32)
    dup = list(pts)
    dup[1] = (dup[0][0],) + tuple(dup[1][1:])
    with pytest.raises(BoundaryError):
        build_boundary(s, dup, 32)
    bd = build_boundary(s, pts, 32)
    with pytest.raises(BoundaryError):
        locate_and_report(s, bd, (1, 1, 1))


def test_construction_needs_frames():
    s = BlockStore(64, pinned_limit=3)
    with pytest.raises(MemoryLimitError):
        build_boundary(s, rank_points(256, random.Random(0)), 64)


def test_csv_export(tmp_path):
    s, bd, pts, _ = _build(256, 64, 64)
    p = tmp_path / "bd.csv"
    export_csv(bd, str(p))
    lines = p.read_text().splitlines()
    assert lines[0] == "ridge,kind,x,y,z"
    assert sum(1 for ln in lines if ",inward," in ln) == len(bd.corners)


def test_probe_classification_is_exclusive():
    s, bd, pts, rng = _build(300, 32, 32, seed=4)
    zmax = z_top(pts)
    for _ in range(200):
        q = tuple(rng.randint(0, 301) + 0.5 for _ in range(3))
        assert dominates_corner(bd, q) != dominated_by_surface(bd, q, zmax)
