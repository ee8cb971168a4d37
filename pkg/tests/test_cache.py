import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import LruSet
from wawlab.addr import CacheGeometry, LevelGeometry, congruent, set_index, slice_of
from wawlab.cache import ClassicCache, HitLevel


def congruent_lines(g, base, count, start=1):
    """``count`` addresses congruent with ``base`` in the last level, ground truth."""
    out = []
    k = start
    while len(out) < count:
        a = base + k * (g.sets << 6)
        if congruent(a, base, g):
            out.append(a)
        k += 1
    return out


def small_geometry(slices=2):
    return CacheGeometry((LevelGeometry("L1", 4, 2), LevelGeometry("L2", 8, 2),
                          LevelGeometry("LLC", 16, 4, slices=slices, inclusive=True,
                                        private=False)))


def test_second_access_hits_l1():
    c = ClassicCache()
    assert c.access(0x1000).level == HitLevel.MISS
    assert c.access(0x1000).level == HitLevel.L1
    assert c.access(0x1000, core=1).level == HitLevel.LLC


def test_w_plus_one_congruent_evicts_first():
    c = ClassicCache()
    g = c.geometry
    a = 0x12340
    others = congruent_lines(g, a, g.ways)
    for x in [a] + others:
        c.access(x)
    assert not c.is_cached(a, "LLC")
    assert not c.is_cached(a, "L1") and not c.is_cached(a, "L2")
    assert c.access(a).level == HitLevel.MISS


def test_w_congruent_keep_first_in_llc():
    c = ClassicCache()
    g = c.geometry
    a = 0x12340
    for x in [a] + congruent_lines(g, a, g.ways - 1):
        c.access(x)
    assert c.access(a).level == HitLevel.LLC


def test_distinct_sets_never_evict():
    c = ClassicCache()
    a = 0x40
    c.access(a)
    for k in range(5000):
        b = (k + 2) * 0x40 * 7 + 0x80
        if set_index(b, c.geometry) != set_index(a, c.geometry):
            c.access(b)
    assert c.is_cached(a, "LLC")


def test_flush():
    c = ClassicCache()
    c.access(0x4000, core=2, kind="write")
    c.flush(0x4000)
    for lvl in ("L1", "L2", "LLC"):
        assert not c.is_cached(0x4000, lvl, core=2)
    assert c.access(0x4000).level == HitLevel.MISS


def test_flush_uncached_is_noop():
    c = ClassicCache()
    lines = [0x40 * k for k in range(50)]
    for a in lines:
        c.access(a)
    before = [(lvl, a, c.is_cached(a, lvl)) for a in lines for lvl in ("L1", "L2", "LLC")]
    c.flush(0x7777740)
    assert before == [(lvl, a, c.is_cached(a, lvl)) for a in lines for lvl in ("L1", "L2", "LLC")]
    assert c.writebacks == 0


def test_flush_leaves_colliding_line():
    c = ClassicCache()
    a, b = 0x4FC0, 0x40004FC0
    c.access(a)
    c.access(b)
    c.flush(a)
    assert c.is_cached(b, "L1") and not c.is_cached(a, "LLC")


def test_dirty_flush_writes_back():
    c = ClassicCache()
    c.access(0x80, kind="write")
    c.flush(0x80)
    assert c.writebacks == 1


def test_bad_arguments():
    c = ClassicCache()
    with pytest.raises(ValueError):
        c.access(0, kind="rmw")
    with pytest.raises(ValueError):
        c.is_cached(0, HitLevel.MISS)
    with pytest.raises(ValueError):
        ClassicCache(policy="fifo")
    with pytest.raises(ValueError):
        ClassicCache(CacheGeometry.scatter_default())


def test_evicted_reports_llc_victim():
    c = ClassicCache()
    g = c.geometry
    a = 0x12340
    others = congruent_lines(g, a, g.ways)
    for x in [a] + others[:-1]:
        c.access(x)
    out = c.access(others[-1])
    assert (3, -1, a) in out.evicted


trace = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 255), st.booleans(),
                           st.integers(0, 9)), min_size=1, max_size=400)


@pytest.mark.parametrize("policy", ["lru", "random"])
@given(seq=trace)
def test_invariants_on_random_traces(policy, seq):
    c = ClassicCache(small_geometry(), n_cores=4, policy=policy, seed=5)
    for core, ln, w, op in seq:
        a = ln << 6
        if op == 0:
            c.flush(a)
        else:
            c.access(a, core, "write" if w else "read")
        # occupancy <= ways and inclusion, checked after every mutation
        assert c.check_invariants()
    g = c.geometry
    for s in range(g.slices):
        for idx in range(g.sets):
            assert len(c.kernel.llc_lines(s, idx)) <= g.ways
    for core in range(4):
        for ln in range(256):
            if c.is_cached(ln << 6, "L1", core) or c.is_cached(ln << 6, "L2", core):
                assert c.is_cached(ln << 6, "LLC")


def test_llc_lru_matches_reference():
    """10^4 accesses from four cores; every LLC set equals an OrderedDict LRU."""
    g = CacheGeometry.classic_default()
    c = ClassicCache(g)
    rng = np.random.default_rng(7)
    # 3 set indices x all slices, ~40 lines each: heavy conflict
    pool = [idx * 64 + k * (g.sets << 6) for idx in (3, 77, 900) for k in range(1, 150)]
    ref: dict = {}
    for _ in range(10_000):
        a = pool[int(rng.integers(len(pool)))]
        core = int(rng.integers(4))
        c.access(a, core, "write" if rng.random() < 0.3 else "read")
        key = (slice_of(a, g), set_index(a, g))
        ref.setdefault(key, LruSet(g.ways)).access(a)
        assert c.llc_set(a) == ref[key].lines()
    assert len(ref) == 3 * g.slices
