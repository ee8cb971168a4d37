"""The compiled kernel and the Python reference must agree bit for bit."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wawlab import _pycore
from wawlab._backend import load

try:
    _core = load("cython")
except ImportError:  # pragma: no cover
    _core = None

pytestmark = pytest.mark.skipif(_core is None, reason="compiled kernel not built")

KERNELS = (_pycore, _core)


def _classic(k, lru=True):
    return k.ClassicCache(2, 4, 2, 8, 4, 16, 4, 2, lru=lru, seed=11)


def _scatter(k):
    return k.ScatterCache(2, 4, 2, 16, 4, 0x1234, 0x5678, seed=11)


def _oracle(k, cache, sigma=15.0):
    return k.OracleCore(cache, 2, 4, 12, 40, 200, 100, 1000, 30, sigma, 250, 30, 60, False, 7)


def test_rng_streams_match():
    a, b = _pycore.Rng(2024), _core.Rng(2024)
    for _ in range(2000):
        assert a.next_u64() == b.next_u64()
    for _ in range(2000):
        assert a.normal() == b.normal()
        assert a.below(997) == b.below(997)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1),
       st.integers(0, 31), st.integers(0, 2**40))
def test_scatter_hash_matches(k0, k1, way, line):
    assert _pycore.scatter_hash(k0, k1, way, line) == _core.scatter_hash(k0, k1, way, line)


ops = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1), st.integers(0, 400)),
               min_size=1, max_size=300)


def _drive(k, make, seq):
    o = _oracle(k, make(k))
    out = []
    for op, core, a in seq:
        pa = a * 64 * 37
        if op == 0:
            out.append(o.read(core, pa))
        elif op == 1:
            out.append(o.write(core, pa))
        elif op == 2:
            out.append(o.timed_write(core, pa, nontemporal=True))
        elif op == 3:
            o.clflush(core, pa)
        elif op == 4:
            o.serialize(core)
        else:
            out.append(o.ww(core, pa, pa + 0x1000 * 64))
        out.append(o.now(core))
        out.append(tuple(o.cache.last_evicted()))
    out.append((o.cache.writebacks, o.timed_ops, o.mem_ops, o.flush_ops))
    return out


@settings(max_examples=60, deadline=None)
@given(ops, st.booleans())
def test_classic_oracle_matches(seq, lru):
    mk = lambda k: _classic(k, lru)
    assert _drive(_pycore, mk, seq) == _drive(_core, mk, seq)


@settings(max_examples=60, deadline=None)
@given(ops)
def test_scatter_oracle_matches(seq):
    assert _drive(_pycore, _scatter, seq) == _drive(_core, _scatter, seq)


def test_fused_loops_match():
    res = []
    for k in KERNELS:
        o = _oracle(k, _classic(k))
        s = o.ww_sums(0, 0x10000, 0x20000, 0x20040, 30)
        lat = o.timed_read_many(1, np.arange(0, 64 * 200, 64, dtype=np.int64))
        ev = o.evict_trial(0, 0x40000, [0x40000 + i * 0x10000 for i in range(1, 9)], 100)
        cyc, wl = o.sample_writes(1, 0x8000, 300)
        res.append((s, lat.tolist(), ev, cyc.tolist(), wl.tolist(), o.global_cycle()))
    assert res[0] == res[1]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 300), min_size=0, max_size=400),
       st.integers(1, 8), st.integers(1, 8), st.integers(0, 40))
def test_recover_edges_matches(lats, aw, dw, th):
    cyc = np.arange(len(lats), dtype=np.int64) * 7
    a = _pycore.recover_edges(cyc, lats, aw, dw, th)
    b = _core.recover_edges(cyc, lats, aw, dw, th)
    assert a[0].tolist() == b[0].tolist() and a[1].tolist() == b[1].tolist()


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=40), st.lists(st.integers(0, 1), max_size=40))
def test_nw_matches(a, b):
    assert _pycore.nw_align(a, b, 1, -1, -8) == _core.nw_align(a, b, 1, -1, -8)
