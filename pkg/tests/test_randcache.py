import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import chi2_critical, scatter_hash_np
from wawlab.addr import CacheGeometry, LevelGeometry
from wawlab.cache import HitLevel
from wawlab.randcache import ScatterCacheModel, split_key, way_index

SETS = 2048
N = 100_000
KEY = 0x0123456789ABCDEF_FEDCBA9876543210


def lines(n=N, seed=0):
    return np.random.default_rng(seed).choice(1 << 24, size=n, replace=False).astype(np.uint64)


@given(st.integers(0, 2**128 - 1), st.integers(0, 7), st.integers(0, 2**40))
def test_way_index_matches_numpy_oracle(key, way, line):
    k0, k1 = split_key(key)
    want = int(scatter_hash_np(k0, k1, way, np.array([line]))[0]) & (SETS - 1)
    assert way_index(key, way, line << 6, SETS) == want


@given(st.integers(0, 2**128 - 1), st.integers(0, 7), st.integers(0, 2**46))
def test_way_index_deterministic_and_line_granular(key, way, a):
    i = way_index(key, way, a, SETS)
    assert i == way_index(key, way, a, SETS)
    assert i == way_index(key, way, a | 0x3F, SETS)
    assert 0 <= i < SETS


def test_model_uses_one_key_for_both_levels():
    m = ScatterCacheModel(key=KEY)
    for a in range(0, 1 << 20, 0x1040):
        for w in range(2):
            assert m.way_index(w, a, level=1) == m.way_index(w, a, level=2) & 511


@pytest.mark.parametrize("key", [KEY, KEY ^ (1 << 77)])
def test_indices_uniform_chi_square(key):
    k0, k1 = split_key(key)
    crit = chi2_critical(SETS - 1)
    for way in (0, 5):
        idx = scatter_hash_np(k0, k1, way, lines()) & np.uint64(SETS - 1)
        counts = np.bincount(idx.astype(np.int64), minlength=SETS)
        e = N / SETS
        stat = float(((counts - e) ** 2 / e).sum())
        assert stat < crit, (way, stat, crit)


def test_ways_agree_at_rate_one_over_sets():
    k0, k1 = split_key(KEY)
    ls = lines(seed=1)
    i0 = scatter_hash_np(k0, k1, 0, ls) & np.uint64(SETS - 1)
    i1 = scatter_hash_np(k0, k1, 1, ls) & np.uint64(SETS - 1)
    hits = int((i0 == i1).sum())
    mu = N / SETS  # 48.8, Poisson
    assert abs(hits - mu) < 4 * mu ** 0.5


def test_keys_give_different_indices():
    a, b = KEY, KEY ^ 1
    same = sum(way_index(a, 0, x << 6, SETS) == way_index(b, 0, x << 6, SETS)
               for x in range(5000))
    assert same < 25


def test_fully_congruent_search_fails():
    """10^6 random lines, none shares the target's index in all 8 ways."""
    k0, k1 = split_key(KEY)
    rng = np.random.default_rng(3)
    cand = rng.integers(0, 1 << 40, size=1_000_000, dtype=np.uint64)
    tgt = np.array([12345], dtype=np.uint64)
    full = np.ones(len(cand), dtype=bool)
    one = np.zeros(len(cand), dtype=bool)
    for w in range(8):
        m = (scatter_hash_np(k0, k1, w, cand) & np.uint64(SETS - 1)) == \
            (scatter_hash_np(k0, k1, w, tgt)[0] & np.uint64(SETS - 1))
        full &= m
        one |= m
    assert full.sum() < 8
    # while >= 1-way collisions are plentiful (about 8/2048 of candidates)
    assert abs(one.mean() - 8 / SETS) < 0.1 * 8 / SETS


# -- access / flush -------------------------------------------------------------
def test_access_twice_hits_and_flush_misses():
    m = ScatterCacheModel(key=KEY, seed=1)
    assert m.access(0x1000).level == HitLevel.MISS
    assert m.access(0x1000).level == HitLevel.L1
    assert m.access(0x1000, core=3).level == HitLevel.LLC
    m.flush(0x1000)
    assert not m.is_cached(0x1000, "L1") and not m.is_cached(0x1000, "L2")
    assert m.access(0x1000).level == HitLevel.MISS


def test_placement_is_one_of_the_way_indices():
    m = ScatterCacheModel(key=KEY, seed=2)
    for a in range(0, 200 * 0x40, 0x40):
        m.access(a)
        w, idx = m.placement(a)
        if w >= 0:
            assert idx == m.way_index(w, a)
    assert m.placement(0x7777000) == (-1, -1)


def small():
    return CacheGeometry((LevelGeometry("L1", 4, 2),
                          LevelGeometry("L2", 16, 4, inclusive=True, private=False)))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 80), st.integers(0, 7)),
                min_size=1, max_size=200),
       st.integers(0, 2**32))
def test_evictions_only_through_shared_slot(seq, seed):
    """b evicts a from L2 only when b is installed into the slot a occupied."""
    m = ScatterCacheModel(small(), key=KEY, seed=seed)
    for core, ln, op in seq:
        a = ln << 6
        if op == 0:
            m.flush(a)
            assert m.placement(a) == (-1, -1)
            continue
        resident = {x: m.placement(x) for x in range(0, 81 << 6, 64) if m.is_cached(x, "L2")}
        out = m.access(a, core)
        l2_victims = [e for lvl, _, e in out.evicted if lvl == 2]
        assert len(l2_victims) <= 1
        for e in l2_victims:
            assert resident[e] == m.placement(a)
            assert m.way_index(resident[e][0], a) == resident[e][1]
        gone = [x for x in resident if not m.is_cached(x, "L2")]
        assert gone == l2_victims
        assert m.check_invariants()


def test_scatter_rejects_three_levels():
    with pytest.raises(ValueError):
        ScatterCacheModel(CacheGeometry.classic_default())
