import random

import pytest
from hypothesis import given, strategies as st

from xmrange.batch import (BatchSizeError, batch_query, batch_query_many, batch_width,
                           build_batchset, build_batchsets)
from xmrange.block_io import BlockStore, CapacityError, MemoryLimitError
from xmrange.geom import QueryBox, contains

# measured once: build 1.26 * B^(1/3), query 2.65 * (B^(1/3) + X/B) at worst
KAPPA_BUILD = 2.0
KAPPA_QUERY = 3.5


def _pts(rng, n, u=1000):
    return [(rng.randrange(u), rng.randrange(u), rng.randrange(u), i) for i in range(n)]


def _box(rng, u=1000):
    b = []
    for _ in range(3):
        lo, hi = sorted(rng.randrange(u) for _ in range(2))
        b += [lo, hi]
    return QueryBox(*b)


def test_empty_set():
    s = BlockStore(64)
    bs = build_batchset(s, [])
    assert bs.f == 0 and s.block_count == 0
    assert batch_query(s, bs, [QueryBox()]) == [[]]


def test_single_chunk():
    s = BlockStore(64)
    with s.measure() as rep:
        bs = build_batchset(s, _pts(random.Random(0), 64))
    assert bs.f == 1 and s.block_count == 1 and rep.total <= 2


def test_four_chunks_build_cost():
    s = BlockStore(64)
    with s.measure() as rep:
        bs = build_batchset(s, _pts(random.Random(1), 256))
    assert bs.f == 4
    assert rep.total <= KAPPA_BUILD * 4


def test_empty_boxes_cost_only_the_scan():
    s = BlockStore(64)
    bs = build_batchset(s, _pts(random.Random(2), 256))
    with s.measure() as rep:
        ans = batch_query(s, bs, [None] * 4)
    assert ans == [[], [], [], []]
    assert rep.total <= KAPPA_QUERY * 64 ** (1 / 3)


def test_whole_space_query():
    s = BlockStore(64)
    pts = _pts(random.Random(3), 256)
    bs = build_batchset(s, pts)
    ans = batch_query(s, bs, [QueryBox(), None, None, None])
    assert sorted(ans[0]) == sorted(pts)
    assert ans[1:] == [[], [], []]


def test_answers_sorted_by_id():
    s = BlockStore(64)
    pts = _pts(random.Random(4), 200)
    random.Random(0).shuffle(pts)
    bs = build_batchset(s, pts)
    (ans,) = batch_query(s, bs, [QueryBox()])
    assert [r[3] for r in ans] == sorted(r[3] for r in pts)


@pytest.mark.parametrize("b", [32, 64, 128])
def test_oracle_and_cost(b):
    rng = random.Random(b)
    w = batch_width(b)
    pts = _pts(rng, w * b)
    s = BlockStore(b)
    bs = build_batchset(s, pts)
    for _ in range(20):
        qs = [_box(rng) for _ in range(w)]
        with s.measure() as rep:
            ans = batch_query(s, bs, qs)
        for q, a in zip(qs, ans):
            assert sorted(a) == sorted(p for p in pts if contains(q, p))
        x = sum(map(len, ans)) + bs.f
        assert rep.total <= KAPPA_QUERY * (b ** (1 / 3) + x / b)


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20)),
                max_size=128),
       st.lists(st.tuples(*[st.integers(0, 20)] * 6), min_size=1, max_size=4))
def test_batch_matches_brute_force(coords, raw):
    s = BlockStore(32)
    pts = [c + (i,) for i, c in enumerate(coords)]
    bs = build_batchset(s, pts)
    qs = [QueryBox(min(a, b), max(a, b), min(c, d), max(c, d), min(e, f), max(e, f))
          for a, b, c, d, e, f in raw]
    for q, ans in zip(qs, batch_query(s, bs, qs)):
        assert sorted(ans) == sorted(p for p in pts if contains(q, p))


def test_too_many_queries():
    s = BlockStore(64)
    bs = build_batchset(s, _pts(random.Random(5), 10))
    with pytest.raises(BatchSizeError):
        batch_query(s, bs, [None] * 5)


def test_oversize_and_memory_errors():
    with pytest.raises(CapacityError):
        build_batchset(BlockStore(64), _pts(random.Random(6), 257))
    with pytest.raises(MemoryLimitError):
        build_batchset(BlockStore(64, pinned_limit=4), [])
    with pytest.raises(ValueError):
        build_batchset(BlockStore(64), [], c=2)


def test_many_sets_and_batches():
    rng = random.Random(7)
    s = BlockStore(32)
    pts = _pts(rng, 700)
    sets = build_batchsets(s, pts)
    qs = [_box(rng) for _ in range(11)]
    for q, a in zip(qs, batch_query_many(s, sets, qs)):
        assert sorted(a) == sorted(p for p in pts if contains(q, p))
