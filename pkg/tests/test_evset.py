import pytest

from wawlab.addr import CacheGeometry, LevelGeometry, congruent, set_index, slice_of
from wawlab.cache import ClassicCache
from wawlab.evset import (EvictionSet, EvictionSetError, all_congruent, build_classic,
                          build_randomized, collides_any_way, coverage, measurement_count,
                          meets_ratio, reduce_classic, reduce_randomized, test_evset,
                          test_evset_ratio, true_colliders)
from wawlab.timing import LatencyParams, TimingOracle, make_oracle

QUIET = LatencyParams().quiet()
TGT = 0x12340


def bare(geometry=None, params=QUIET, seed=1):
    return TimingOracle(ClassicCache(geometry, seed=seed), params, None, seed=seed)


def same_set(g, base, count, want_congruent=True):
    out, k = [], 1
    while len(out) < count:
        a = base + k * (g.sets << 6)
        if congruent(a, base, g) == want_congruent:
            out.append(a)
        k += 1
    return out


# -- test_evset ----------------------------------------------------------------
def test_evset_functional_empty_and_short():
    o = bare()
    g = o.cache.geometry
    ev = same_set(g, TGT, g.ways)
    assert test_evset(o, ev, TGT)
    assert not test_evset(o, [], TGT)
    assert not test_evset(o, ev[:-1], TGT)
    # same set index, other slices: never evicts
    assert not test_evset(o, same_set(g, TGT, 40, False), TGT)


def test_evset_ratio_extremes():
    o = bare()
    g = o.cache.geometry
    assert test_evset_ratio(o, same_set(g, TGT, g.ways), TGT, 50) == 1.0
    assert test_evset_ratio(o, same_set(g, TGT, 3), TGT, 50) == 0.0
    assert test_evset_ratio(o, [], TGT, 50) == 0.0


# -- reduce ----------------------------------------------------------------------
def test_reduce_minimal_unchanged():
    o = bare()
    ev = same_set(o.cache.geometry, TGT, 16)
    es = reduce_classic(o, EvictionSet(list(ev), TGT, "classic"))
    assert es.members == ev


def test_reduce_drops_false_positive():
    o = bare()
    ev = same_set(o.cache.geometry, TGT, 16)
    fp = TGT + 0x40 * 5  # another set entirely
    es = reduce_classic(o, EvictionSet(ev[:7] + [fp] + ev[7:], TGT, "classic"))
    assert es.members == ev


def test_reduce_drops_other_slice_members():
    o = bare()
    g = o.cache.geometry
    ev = same_set(g, TGT, 16)
    other = same_set(g, TGT, 4, want_congruent=False)
    assert all(set_index(a, g) == set_index(TGT, g) for a in other)
    assert all(slice_of(a, g) != slice_of(TGT, g) for a in other)
    mixed = other[:2] + ev[:8] + other[2:] + ev[8:]
    es = reduce_classic(o, EvictionSet(mixed, TGT, "classic"))
    assert sorted(es.members) == sorted(ev)


# -- build_classic -------------------------------------------------------------------
def single_slice():
    return CacheGeometry((LevelGeometry("L1", 64, 8), LevelGeometry("L2", 1024, 4),
                          LevelGeometry("LLC", 1024, 16, slices=1, inclusive=True,
                                        private=False)))


def test_build_classic_noiseless_single_slice():
    o = make_oracle("classic", seed=4, params=QUIET, geometry=single_slice())
    mem = o.pagemap.allocate_bytes(1 << 24)
    tgt = o.pagemap.allocate(1) + 0x340
    es = build_classic(o, tgt, mem, 1 << 24, reps=4)
    assert len(es.positives) == 16
    assert es.members == es.positives  # reduce is a no-op
    assert all_congruent(o, es)
    assert measurement_count(es) == es.measurements > 0


@pytest.mark.parametrize("seed", range(4))
def test_build_classic_default_noise(seed):
    o = make_oracle("classic", seed=seed)
    mem = o.pagemap.allocate_bytes(1 << 24)
    tgt = o.pagemap.allocate(1) + 0x7C0
    es = build_classic(o, tgt, mem, 1 << 24, reps=30)
    assert len(es.members) == o.cache.geometry.ways
    assert all_congruent(o, es)
    assert test_evset(o, es.members, tgt)
    assert all(m & 0xFFF == tgt & 0xFFF for m in es.members)
    det, tot = coverage(o, es)
    assert tot > 0 and det / tot > 0.7


def test_coverage_variant_finds_superset():
    o1 = make_oracle("classic", seed=8, params=QUIET)
    o2 = make_oracle("classic", seed=8, params=QUIET)
    mems = [o.pagemap.allocate_bytes(1 << 24) for o in (o1, o2)]
    tgts = [o.pagemap.allocate(1) + 0x100 for o in (o1, o2)]
    perf = build_classic(o1, tgts[0], mems[0], 1 << 24, reps=4, reduce=False)
    cov = build_classic(o2, tgts[1], mems[1], 1 << 24, reps=4, variant="coverage",
                        reduce=False)
    stop = min(perf.scan[1], cov.scan[1])
    p = {a for a in perf.positives if a < stop - 4096}
    assert p and p <= set(cov.positives)
    # noiseless coverage scan detects every true collider it walked past
    truth = set(true_colliders(o2, cov).tolist())
    assert truth <= set(cov.positives) | {cov.scan[1] - 4096}


def test_build_classic_errors():
    o = make_oracle("classic", seed=1)
    mem = o.pagemap.allocate_bytes(1 << 16)
    tgt = o.pagemap.allocate(1)
    with pytest.raises(EvictionSetError):
        build_classic(o, tgt, mem, 1 << 16)
    with pytest.raises(ValueError):
        build_classic(o, tgt, mem, 1 << 16, variant="fast")


# -- randomized ---------------------------------------------------------------------
@pytest.fixture(scope="module")
def rand_run():
    o = make_oracle("scatter", seed=21, params=QUIET)
    mem = o.pagemap.allocate_bytes(1 << 25)
    tgt = o.pagemap.allocate(1) + 0x9C0
    es = build_randomized(o, tgt, mem, 1 << 25)
    return o, tgt, es


def test_randomized_members_all_collide(rand_run):
    o, tgt, es = rand_run
    assert es.kind == "probabilistic"
    assert all(collides_any_way(o, m, tgt) for m in es.members)
    assert 0.8 * 143 <= len(es.members) <= 1.2 * 143
    assert 0.85 <= test_evset_ratio(o, es.members, tgt, 1000) <= 0.95


def test_ratio_monotone_in_prefix(rand_run):
    o, tgt, es = rand_run
    sizes = list(range(0, len(es.members) + 1, 20)) + [len(es.members)]
    rates = [test_evset_ratio(o, es.members[:k], tgt, 100) for k in sizes]
    for a, b in zip(rates, rates[1:]):
        assert b >= a - 0.1  # 100-trial binomial noise
    assert rates[0] == 0.0 and rates[-1] > 0.75
    # against the 1 - (1 - 1/64)^k model
    k = len(es.members)
    assert abs(rates[-1] - (1 - (63 / 64) ** k)) < 0.12


def test_meets_ratio_decisions(rand_run):
    o, tgt, es = rand_run
    ev = es.members[:100]  # rate about 1 - (63/64)^100 = 0.79
    assert all(meets_ratio(o, ev, tgt, 0.0, 100) for _ in range(3))
    assert all(meets_ratio(o, ev, tgt, 0.5, 100) for _ in range(3))
    assert not any(meets_ratio(o, ev, tgt, 0.99, 100) for _ in range(3))
    c = bare()
    full = same_set(c.cache.geometry, TGT, 16)
    assert meets_ratio(c, full, TGT, 1.0, 50) and not meets_ratio(c, full[:-1], TGT, 0.02, 50)


def test_reduce_randomized_removes_non_colliders(rand_run):
    o, tgt, es = rand_run
    # fakes share no slot with the target or with any other member, so
    # nothing can ever evict them during priming
    keep = es.members[:30]
    fakes = []
    base = o.pagemap.allocate(64)
    for k in range(64 * 64):
        a = base + 0x40 * k
        if not any(collides_any_way(o, a, x) for x in [tgt] + keep + fakes):
            fakes.append(a)
        if len(fakes) == 10:
            break
    mixed = EvictionSet(keep + fakes, tgt, "probabilistic")
    red = reduce_randomized(o, mixed, rounds=50)
    assert not set(fakes) & set(red.members)
    assert set(red.members) <= set(es.members[:30])
    assert reduce_randomized(o, EvictionSet([], tgt, "probabilistic")).members == []


def test_randomized_exhausts_small_region():
    o = make_oracle("scatter", seed=2, params=QUIET)
    mem = o.pagemap.allocate_bytes(1 << 16)
    with pytest.raises(EvictionSetError):
        build_randomized(o, o.pagemap.allocate(1), mem, 1 << 16)
