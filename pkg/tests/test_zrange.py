import math
import random

from hypothesis import given, strategies as st

from xmrange.block_io import BlockStore
from xmrange.geom import INT_MAX, INT_MIN, enc, enc_hi, enc_lo
from xmrange.zrange import (level_count, tiling_ok, zt_audit, zt_build, zt_delete,
                            zt_insert, zt_query, zt_records)

# fan-out 2 makes each log_B factor about six levels deep
KAPPA_QUERY = 32.0   # I/Os / (log_B^2 N + k/B); worst 22.1 at N=20000, B=32 (24.3 at B=64)
KAPPA_UPDATE = 5.0   # I/Os / log2^2 N; mean 2.9 at N=10^4, B=32 (3.4 at B=16)


def _key(p):
    return (enc(p[0], p[3]), enc(p[1], p[3]), enc(p[2], p[3]), p[3])


def _pts(rng, n, u=1 << 20, start=0):
    return [(rng.randrange(u), rng.randrange(u), rng.randrange(u), start + i) for i in range(n)]


def _want(pts, a, b, c, d, e, sign=1):
    out = []
    for p in pts:
        X, Y, Z, _ = _key(p)
        if a <= X <= b and sign * Y >= c and d <= Z <= e:
            out.append(p[3])
    return sorted(out)


def _ids(recs):
    return sorted(r[3] for r in recs)


def _depth_of(zt, Z):
    """Nodes on the root-to-leaf path that owns ``Z``."""
    n, v = 1, zt.root
    while not v.is_leaf:
        v = next((c for c in v.children if Z <= c.hi), v.children[-1])
        n += 1
    return n


def _build(n, B=32, seed=0, sign=1):
    s = BlockStore(B)
    pts = _pts(random.Random(seed), n)
    return s, pts, zt_build(s, [_key(p) for p in pts], sign=sign)


def test_full_z_range_is_one_root_piece():
    s, pts, zt = _build(3000)
    assert zt.height() >= 3
    got = zt_query(s, zt, INT_MIN, INT_MAX, INT_MIN, INT_MIN, INT_MAX)
    assert _ids(got) == sorted(p[3] for p in pts)
    tr = zt.last_trace
    assert tr.pieces == [(zt.root.uid, 1, len(zt.root.children))]
    assert tr.fringe == []


def test_one_leaf_span_is_at_most_one_piece():
    s, pts, zt = _build(3000, seed=1)
    par, v = None, zt.root
    while not v.is_leaf:
        par, v = v, v.children[len(v.children) // 2]
    got = zt_query(s, zt, INT_MIN, INT_MAX, INT_MIN, v.lo, v.hi)
    assert _ids(got) == _want(pts, INT_MIN, INT_MAX, INT_MIN, v.lo, v.hi)
    tr = zt.last_trace
    assert len(tr.pieces) + len(tr.fringe) <= 1
    assert all(uid == par.uid for uid, _, _ in tr.pieces)


def test_empty_and_inverted_ranges():
    s, pts, zt = _build(500, seed=2)
    assert zt_query(s, zt, 5, 4, INT_MIN, INT_MIN, INT_MAX) == []
    assert zt_query(s, zt, INT_MIN, INT_MAX, INT_MIN, 9, 8) == []
    s2 = BlockStore(8)
    empty = zt_build(s2, [])
    assert zt_query(s2, empty, INT_MIN, INT_MAX, INT_MIN, INT_MIN, INT_MAX) == []


def test_each_point_once_per_level():
    s, pts, zt = _build(4000, seed=3)
    rng = random.Random(3)
    for p in rng.sample(pts, 40):
        Z = _key(p)[2]
        assert level_count(s, zt, p[3]) == _depth_of(zt, Z)


def test_small_tree_insert_touches_no_pst():
    s = BlockStore(32)
    zt = zt_build(s, [_key(p) for p in _pts(random.Random(4), 10)])
    assert zt.root.is_leaf and zt.root.F is None
    zt_insert(s, zt, _key((1, 2, 3, 99)))
    assert zt.root.is_leaf and level_count(s, zt, 99) == 1


def test_random_boxes_against_oracle():
    n, B = 20000, 32
    s, pts, zt = _build(n, B, seed=5)
    rng = random.Random(5)
    U = 1 << 20
    h, fo = zt.height(), zt.branch
    worst = 0.0
    for _ in range(200):
        x0, y0, z0 = (rng.randrange(U) for _ in range(3))
        w = rng.choice([U // 100, U // 20, U // 4])
        a, b = enc_lo(x0), enc_hi(x0 + w)
        c = enc_lo(y0)
        d, e = enc_lo(z0), enc_hi(z0 + w)
        snap = s.snapshot()
        got = zt_query(s, zt, a, b, c, d, e)
        io = s.since(snap).reads
        assert _ids(got) == _want(pts, a, b, c, d, e)
        assert len({r[3] for r in got}) == len(got)
        tr = zt.last_trace
        assert len(tr.pieces) <= 2 * h * fo
        assert tr.fact1_violations == 0
        assert tiling_ok(s, zt, d, e)
        worst = max(worst, io / (math.log(n, B) ** 2 + len(got) / B))
    assert worst <= KAPPA_QUERY


def test_mirrored_sign_answers_upper_bounds():
    s, pts, zt = _build(3000, 16, seed=6, sign=-1)
    rng = random.Random(6)
    for _ in range(50):
        y = rng.randrange(1 << 20)
        d = enc_lo(rng.randrange(1 << 19))
        e = d + (enc(1 << 19, 0))
        c = -enc_hi(y)
        got = zt_query(s, zt, INT_MIN, INT_MAX, c, d, e)
        assert _ids(got) == _want(pts, INT_MIN, INT_MAX, c, d, e, sign=-1)


def test_update_cost_trend():
    n, B = 10000, 32
    s, pts, zt = _build(n, B, seed=7)
    rng = random.Random(7)
    live = {p[3]: p for p in pts}
    spent = 0
    nid = n
    steps = 2000
    for k in range(steps):
        snap = s.snapshot()
        if rng.random() < 0.5:
            p = (rng.randrange(1 << 20), rng.randrange(1 << 20), rng.randrange(1 << 20), nid)
            zt_insert(s, zt, _key(p))
            live[nid] = p
            nid += 1
        else:
            zt_delete(s, zt, _key(live.pop(rng.choice(list(live)))))
        spent += s.since(snap).total
    assert spent / steps <= KAPPA_UPDATE * math.log2(n) ** 2
    assert zt_audit(s, zt) == []
    assert sorted(r[3] for r in zt_records(s, zt)) == sorted(live)


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 60), st.integers(0, 60),
                          st.integers(0, 60)), max_size=150),
       st.integers(0, 60), st.integers(0, 60), st.integers(0, 60), st.sampled_from([1, -1]))
def test_audit_after_any_update_sequence(ops, x, y, z, sign):
    s = BlockStore(4)
    zt = zt_build(s, [], sign=sign)
    live = {}
    for i, (ins, a, b, c) in enumerate(ops):
        if ins or not live:
            p = (a, b, c, i)
            zt_insert(s, zt, _key(p))
            live[i] = p
        else:
            zt_delete(s, zt, _key(live.pop(min(live))))
    assert zt_audit(s, zt) == []
    a, b = enc_lo(x), enc_hi(x + 20)
    c = enc_lo(y) if sign > 0 else -enc_hi(y)
    d, e = enc_lo(z), enc_hi(z + 20)
    assert _ids(zt_query(s, zt, a, b, c, d, e)) == _want(live.values(), a, b, c, d, e, sign)
    assert tiling_ok(s, zt, d, e)
