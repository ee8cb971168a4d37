# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; mirrors ``_pycore`` bit for bit."""

from libc.math cimport sqrt, log, cos, floor
from libc.stdint cimport uint64_t, int64_t

import numpy as np

BACKEND = "cython"

cdef enum:
    MAXW = 64

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586

MISS = 0
L1 = 1
L2 = 2
LLC = 3


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _splitmix_next(uint64_t* x) nogil:
    x[0] += GOLDEN
    cdef uint64_t z = x[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def splitmix64(x):
    cdef uint64_t s = <uint64_t>(x & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t z = _splitmix_next(&s)
    return s, z


cdef class Rng:
    """xoshiro256** seeded through splitmix64."""
    cdef uint64_t s0, s1, s2, s3

    def __init__(self, seed):
        cdef uint64_t x = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
        self.s0 = _splitmix_next(&x)
        self.s1 = _splitmix_next(&x)
        self.s2 = _splitmix_next(&x)
        self.s3 = _splitmix_next(&x)

    cdef inline uint64_t next(self) nogil:
        cdef uint64_t result = rotl(self.s1 * 5, 7) * 9
        cdef uint64_t t = self.s1 << 17
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = rotl(self.s3, 45)
        return result

    cdef inline double unif(self) nogil:
        return <double>(self.next() >> 11) * (1.0 / 9007199254740992.0)

    cdef inline double gauss(self) nogil:
        cdef double u1 = 1.0 - self.unif()
        cdef double u2 = self.unif()
        return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)

    cdef inline uint64_t bounded(self, uint64_t n) nogil:
        return ((self.next() >> 32) * n) >> 32

    def next_u64(self):
        return self.next()

    def uniform(self):
        return self.unif()

    def normal(self):
        return self.gauss()

    def below(self, n):
        return self.bounded(n)


cdef inline uint64_t _scatter_hash(uint64_t k0, uint64_t k1, int way, uint64_t line) nogil:
    cdef uint64_t x = line ^ k0
    cdef uint64_t y = ((<uint64_t>(way + 1)) * GOLDEN) ^ k1
    cdef int r
    for r in range(4):
        x = x + y
        x ^= x >> 31
        x = x * 0xBF58476D1CE4E5B9ULL
        x = rotl(x, 23)
        y = y * 0x94D049BB133111EBULL + 1
    x ^= x >> 29
    return x


def scatter_hash(k0, k1, way, line):
    """Keyed per-way mixer: four xor-shift / multiply / rotate rounds."""
    return _scatter_hash(<uint64_t>(k0 & 0xFFFFFFFFFFFFFFFF), <uint64_t>(k1 & 0xFFFFFFFFFFFFFFFF),
                         way, <uint64_t>(line & 0xFFFFFFFFFFFFFFFF))


cdef inline int64_t _fold_slice(int64_t pa, int64_t slices, int slice_bits) nogil:
    if slices <= 1:
        return 0
    cdef uint64_t t = (<uint64_t>pa) >> 16
    cdef uint64_t h = 0
    cdef uint64_t mask = <uint64_t>(slices - 1)
    while t:
        h ^= t & mask
        t >>= slice_bits
    return <int64_t>h


def fold_slice(pa, slices, slice_bits):
    return _fold_slice(pa, slices, slice_bits)


cdef class CacheBase:
    cdef public int n_cores
    cdef public long long writebacks
    cdef int n_ev
    cdef int ev_level[8]
    cdef int ev_core[8]
    cdef int64_t ev_line[8]

    cdef inline void _record(self, int level, int core, int64_t line):
        if self.n_ev < 8:
            self.ev_level[self.n_ev] = level
            self.ev_core[self.n_ev] = core
            self.ev_line[self.n_ev] = line
            self.n_ev += 1

    cdef int _access(self, int core, int64_t line, int is_write):
        return 0

    cdef bint _flush(self, int64_t line):
        return False

    cdef int64_t _way_index(self, int way, int64_t line):
        return -1

    cdef void _placement(self, int64_t line, int* way, int64_t* idx):
        way[0] = -1
        idx[0] = -1

    def last_evicted(self):
        return [(self.ev_level[i], self.ev_core[i], self.ev_line[i]) for i in range(self.n_ev)]

    def access(self, int core, int64_t line, int is_write):
        return self._access(core, line, is_write)

    def flush(self, int64_t line):
        return self._flush(line)


cdef class ClassicCache(CacheBase):
    """Private L1/L2 per core, shared sliced inclusive LLC, LRU or random."""
    cdef public int l1_sets, l1_ways, l2_sets, l2_ways, llc_sets, llc_ways, slices, slice_bits
    cdef public bint lru
    cdef Rng rng
    cdef uint64_t tick
    cdef int64_t[::1] t1, t2, t3
    cdef uint64_t[::1] s1, s2, s3
    cdef signed char[::1] d1, d2, d3
    cdef object _keep

    is_scatter = False

    def __init__(self, n_cores, l1_sets, l1_ways, l2_sets, l2_ways,
                 llc_sets, llc_ways, slices, lru=True, seed=0):
        self.n_cores = n_cores
        self.l1_sets, self.l1_ways = l1_sets, l1_ways
        self.l2_sets, self.l2_ways = l2_sets, l2_ways
        self.llc_sets, self.llc_ways = llc_sets, llc_ways
        self.slices = slices
        self.slice_bits = int(slices).bit_length() - 1
        self.lru = bool(lru)
        self.rng = Rng(seed)
        self.tick = 0
        self.writebacks = 0
        n1 = n_cores * l1_sets * l1_ways
        n2 = n_cores * l2_sets * l2_ways
        n3 = slices * llc_sets * llc_ways
        arrs = [np.full(n1, -1, np.int64), np.zeros(n1, np.uint64), np.zeros(n1, np.int8),
                np.full(n2, -1, np.int64), np.zeros(n2, np.uint64), np.zeros(n2, np.int8),
                np.full(n3, -1, np.int64), np.zeros(n3, np.uint64), np.zeros(n3, np.int8)]
        self._keep = arrs
        self.t1, self.s1, self.d1 = arrs[0], arrs[1], arrs[2]
        self.t2, self.s2, self.d2 = arrs[3], arrs[4], arrs[5]
        self.t3, self.s3, self.d3 = arrs[6], arrs[7], arrs[8]

    cdef inline Py_ssize_t _b1(self, int core, int64_t line) nogil:
        return (core * self.l1_sets + (line & (self.l1_sets - 1))) * self.l1_ways

    cdef inline Py_ssize_t _b2(self, int core, int64_t line) nogil:
        return (core * self.l2_sets + (line & (self.l2_sets - 1))) * self.l2_ways

    cdef inline Py_ssize_t _b3(self, int64_t line) nogil:
        cdef int64_t sl = _fold_slice(line << 6, self.slices, self.slice_bits)
        return (sl * self.llc_sets + (line & (self.llc_sets - 1))) * self.llc_ways

    cdef inline Py_ssize_t _find(self, int64_t[::1] tags, Py_ssize_t base, int ways, int64_t line) nogil:
        cdef Py_ssize_t w
        for w in range(base, base + ways):
            if tags[w] == line:
                return w
        return -1

    cdef inline Py_ssize_t _victim(self, int64_t[::1] tags, uint64_t[::1] stamps, Py_ssize_t base, int ways):
        cdef Py_ssize_t w, best
        for w in range(base, base + ways):
            if tags[w] == -1:
                return w
        if self.lru:
            best = base
            for w in range(base + 1, base + ways):
                if stamps[w] < stamps[best]:
                    best = w
            return best
        return base + <Py_ssize_t>self.rng.bounded(ways)

    cdef void _install1(self, int core, int64_t line, int dirty):
        cdef Py_ssize_t b = self._b1(core, line)
        cdef Py_ssize_t v = self._victim(self.t1, self.s1, b, self.l1_ways)
        cdef int64_t old = self.t1[v]
        cdef Py_ssize_t w2, w3
        if old != -1:
            self._record(1, core, old)
            if self.d1[v]:
                w2 = self._find(self.t2, self._b2(core, old), self.l2_ways, old)
                if w2 >= 0:
                    self.d2[w2] = 1
                else:
                    w3 = self._find(self.t3, self._b3(old), self.llc_ways, old)
                    if w3 >= 0:
                        self.d3[w3] = 1
        self.t1[v] = line
        self.s1[v] = self.tick
        self.d1[v] = dirty

    cdef void _install2(self, int core, int64_t line):
        cdef Py_ssize_t b = self._b2(core, line)
        cdef Py_ssize_t v = self._victim(self.t2, self.s2, b, self.l2_ways)
        cdef int64_t old = self.t2[v]
        cdef Py_ssize_t w3
        if old != -1:
            self._record(2, core, old)
            if self.d2[v]:
                w3 = self._find(self.t3, self._b3(old), self.llc_ways, old)
                if w3 >= 0:
                    self.d3[w3] = 1
        self.t2[v] = line
        self.s2[v] = self.tick
        self.d2[v] = 0

    cdef int _drop_private(self, int64_t line):
        cdef int dirty = 0
        cdef int c
        cdef Py_ssize_t w
        for c in range(self.n_cores):
            w = self._find(self.t1, self._b1(c, line), self.l1_ways, line)
            if w >= 0:
                dirty |= self.d1[w]
                self.t1[w] = -1
                self.d1[w] = 0
            w = self._find(self.t2, self._b2(c, line), self.l2_ways, line)
            if w >= 0:
                dirty |= self.d2[w]
                self.t2[w] = -1
                self.d2[w] = 0
        return dirty

    cdef void _install3(self, int64_t line):
        cdef Py_ssize_t b = self._b3(line)
        cdef Py_ssize_t v = self._victim(self.t3, self.s3, b, self.llc_ways)
        cdef int64_t old = self.t3[v]
        if old != -1:
            self._record(3, -1, old)
            if self._drop_private(old) | self.d3[v]:
                self.writebacks += 1
        self.t3[v] = line
        self.s3[v] = self.tick
        self.d3[v] = 0

    cdef int _access(self, int core, int64_t line, int is_write):
        self.n_ev = 0
        self.tick += 1
        cdef uint64_t tick = self.tick
        cdef Py_ssize_t w1 = self._find(self.t1, self._b1(core, line), self.l1_ways, line)
        cdef Py_ssize_t w2 = self._find(self.t2, self._b2(core, line), self.l2_ways, line)
        cdef Py_ssize_t w3 = self._find(self.t3, self._b3(line), self.llc_ways, line)
        if w1 >= 0:
            self.s1[w1] = tick
            if is_write:
                self.d1[w1] = 1
            if w2 >= 0:
                self.s2[w2] = tick
            self.s3[w3] = tick
            return 1
        if w2 >= 0:
            self.s2[w2] = tick
            self.s3[w3] = tick
            self._install1(core, line, 1 if is_write else 0)
            return 2
        if w3 >= 0:
            self.s3[w3] = tick
            self._install2(core, line)
            self._install1(core, line, 1 if is_write else 0)
            return 3
        self._install3(line)
        self._install2(core, line)
        self._install1(core, line, 1 if is_write else 0)
        return 0

    cdef bint _flush(self, int64_t line):
        cdef int dirty = self._drop_private(line)
        cdef Py_ssize_t w3 = self._find(self.t3, self._b3(line), self.llc_ways, line)
        cdef bint present = w3 >= 0
        if present:
            dirty |= self.d3[w3]
            self.t3[w3] = -1
            self.d3[w3] = 0
        if dirty:
            self.writebacks += 1
        return present

    def contains(self, int64_t line, int level, int core=0):
        if level == 1:
            return self._find(self.t1, self._b1(core, line), self.l1_ways, line) >= 0
        if level == 2:
            return self._find(self.t2, self._b2(core, line), self.l2_ways, line) >= 0
        if level == 3:
            return self._find(self.t3, self._b3(line), self.llc_ways, line) >= 0
        raise ValueError("level must be 1, 2 or 3")

    def llc_lines(self, int slice_id, int set_id):
        """Lines of one LLC set ordered least- to most-recently used."""
        b = (slice_id * self.llc_sets + set_id) * self.llc_ways
        ws = [w for w in range(b, b + self.llc_ways) if self.t3[w] != -1]
        ws.sort(key=lambda w: self.s3[w])
        return [self.t3[w] for w in ws]

    def check_invariants(self):
        cdef Py_ssize_t w, lo, hi
        cdef int c
        for c in range(self.n_cores):
            for lvl in (1, 2):
                tags = self.t1 if lvl == 1 else self.t2
                ways = self.l1_ways if lvl == 1 else self.l2_ways
                per = tags.shape[0] // self.n_cores
                lo = c * per
                hi = lo + per
                for w in range(lo, hi):
                    line = tags[w]
                    if line == -1:
                        continue
                    base = self._b1(c, line) if lvl == 1 else self._b2(c, line)
                    if base != w - w % ways:
                        raise AssertionError("line stored in wrong set")
                    if self._find(self.t3, self._b3(line), self.llc_ways, line) < 0:
                        raise AssertionError(f"inclusivity violated for line {line:#x}")
        return True


cdef class ScatterCache(CacheBase):
    """Two-level ScatterCache: keyed index per way, random replacement.

    L1 is private per core, L2 shared and inclusive of every L1.
    """
    cdef public int l1_sets, l1_ways, l2_sets, l2_ways, nh
    cdef public uint64_t k0, k1
    cdef Rng rng
    cdef int64_t[::1] t1, t2
    cdef signed char[::1] d1, d2
    cdef object _keep
    cdef uint64_t hs[MAXW]
    cdef uint64_t hs_old[MAXW]

    is_scatter = True

    def __init__(self, n_cores, l1_sets, l1_ways, l2_sets, l2_ways, k0, k1, seed=0):
        if max(l1_ways, l2_ways) > MAXW:
            raise ValueError(f"at most {MAXW} ways supported")
        self.n_cores = n_cores
        self.l1_sets, self.l1_ways = l1_sets, l1_ways
        self.l2_sets, self.l2_ways = l2_sets, l2_ways
        self.k0 = k0 & 0xFFFFFFFFFFFFFFFF
        self.k1 = k1 & 0xFFFFFFFFFFFFFFFF
        self.nh = max(l1_ways, l2_ways)
        self.rng = Rng(seed)
        self.writebacks = 0
        arrs = [np.full(n_cores * l1_ways * l1_sets, -1, np.int64),
                np.zeros(n_cores * l1_ways * l1_sets, np.int8),
                np.full(l2_ways * l2_sets, -1, np.int64),
                np.zeros(l2_ways * l2_sets, np.int8)]
        self._keep = arrs
        self.t1, self.d1, self.t2, self.d2 = arrs

    cdef inline void _hashes(self, int64_t line, uint64_t* out) nogil:
        cdef int w
        for w in range(self.nh):
            out[w] = _scatter_hash(self.k0, self.k1, w, <uint64_t>line)

    def hashes(self, line):
        return [_scatter_hash(self.k0, self.k1, w, <uint64_t>line) for w in range(self.nh)]

    cdef int64_t _way_index(self, int way, int64_t line):
        return <int64_t>(_scatter_hash(self.k0, self.k1, way, <uint64_t>line) & <uint64_t>(self.l2_sets - 1))

    def way_index(self, int way, int64_t line, int level=2):
        cdef uint64_t h = _scatter_hash(self.k0, self.k1, way, <uint64_t>line)
        return <int64_t>(h & <uint64_t>((self.l2_sets if level == 2 else self.l1_sets) - 1))

    cdef inline Py_ssize_t _slot1(self, int core, int way, uint64_t h) nogil:
        return (core * self.l1_ways + way) * self.l1_sets + <Py_ssize_t>(h & <uint64_t>(self.l1_sets - 1))

    cdef inline Py_ssize_t _slot2(self, int way, uint64_t h) nogil:
        return way * self.l2_sets + <Py_ssize_t>(h & <uint64_t>(self.l2_sets - 1))

    cdef Py_ssize_t _find1(self, int core, int64_t line, uint64_t* hs):
        cdef int w
        cdef Py_ssize_t k
        for w in range(self.l1_ways):
            k = self._slot1(core, w, hs[w])
            if self.t1[k] == line:
                return k
        return -1

    cdef Py_ssize_t _find2(self, int64_t line, uint64_t* hs):
        cdef int w
        cdef Py_ssize_t k
        for w in range(self.l2_ways):
            k = self._slot2(w, hs[w])
            if self.t2[k] == line:
                return k
        return -1

    cdef int _drop_l1(self, int64_t line, uint64_t* hs):
        cdef int dirty = 0
        cdef int c
        cdef Py_ssize_t k
        for c in range(self.n_cores):
            k = self._find1(c, line, hs)
            if k >= 0:
                dirty |= self.d1[k]
                self.t1[k] = -1
                self.d1[k] = 0
        return dirty

    cdef int _access(self, int core, int64_t line, int is_write):
        self.n_ev = 0
        self._hashes(line, self.hs)
        cdef Py_ssize_t k = self._find1(core, line, self.hs)
        cdef Py_ssize_t k1, k2, k2o
        cdef int w, level
        cdef int64_t old
        if k >= 0:
            if is_write:
                self.d1[k] = 1
            return 1
        k2 = self._find2(line, self.hs)
        level = 2
        if k2 < 0:
            level = 0
            w = <int>self.rng.bounded(self.l2_ways)
            k2 = self._slot2(w, self.hs[w])
            old = self.t2[k2]
            if old != -1:
                self._record(2, -1, old)
                self._hashes(old, self.hs_old)
                if self._drop_l1(old, self.hs_old) | self.d2[k2]:
                    self.writebacks += 1
            self.t2[k2] = line
            self.d2[k2] = 0
        w = <int>self.rng.bounded(self.l1_ways)
        k1 = self._slot1(core, w, self.hs[w])
        old = self.t1[k1]
        if old != -1:
            self._record(1, core, old)
            if self.d1[k1]:
                self._hashes(old, self.hs_old)
                k2o = self._find2(old, self.hs_old)
                if k2o >= 0:
                    self.d2[k2o] = 1
        self.t1[k1] = line
        self.d1[k1] = 1 if is_write else 0
        return level

    cdef bint _flush(self, int64_t line):
        self._hashes(line, self.hs)
        cdef int dirty = self._drop_l1(line, self.hs)
        cdef Py_ssize_t k2 = self._find2(line, self.hs)
        cdef bint present = k2 >= 0
        if present:
            dirty |= self.d2[k2]
            self.t2[k2] = -1
            self.d2[k2] = 0
        if dirty:
            self.writebacks += 1
        return present

    cdef void _placement(self, int64_t line, int* way, int64_t* idx):
        cdef int w
        cdef int64_t i
        for w in range(self.l2_ways):
            i = <int64_t>(_scatter_hash(self.k0, self.k1, w, <uint64_t>line) & <uint64_t>(self.l2_sets - 1))
            if self.t2[w * self.l2_sets + i] == line:
                way[0] = w
                idx[0] = i
                return
        way[0] = -1
        idx[0] = -1

    def contains(self, int64_t line, int level, int core=0):
        self._hashes(line, self.hs)
        if level == 1:
            return self._find1(core, line, self.hs) >= 0
        if level == 2:
            return self._find2(line, self.hs) >= 0
        raise ValueError("level must be 1 or 2")

    def placement(self, int64_t line):
        """(way, index) of the line in L2, or (-1, -1) when not cached."""
        cdef int w
        cdef int64_t i
        self._placement(line, &w, &i)
        return w, i

    def check_invariants(self):
        cdef Py_ssize_t k
        for k in range(self.t1.shape[0]):
            line = self.t1[k]
            if line != -1:
                self._hashes(line, self.hs_old)
                if self._find2(line, self.hs_old) < 0:
                    raise AssertionError(f"inclusivity violated for line {line:#x}")
        return True


cdef class OracleCore:
    """Attacker-visible timing model on top of a cache kernel.

    Addresses are physical byte addresses. Each core keeps its own cycle
    cursor, W+W arming state and noise stream.
    """
    cdef public CacheBase cache
    cdef public bint scatter, read_clock
    cdef public int n_cores
    cdef public long long l1_hit, l2_hit, llc_hit, miss, penalty, period, amplitude
    cdef public long long serialize_cost, fence_cost, flush_cost
    cdef public double sigma
    cdef public long long timed_ops, mem_ops, flush_ops
    cdef long long base[4]
    cdef int64_t[::1] time, last_write, last_idx, armed, armed_idx
    cdef int[::1] last_way, armed_way
    cdef list rngs
    cdef object _keep

    def __init__(self, CacheBase cache, n_cores, l1_hit, l2_hit, llc_hit, miss, penalty,
                 period, amplitude, sigma, serialize_cost, fence_cost,
                 flush_cost, read_clock, seed):
        self.cache = cache
        self.scatter = bool(cache.is_scatter)
        self.n_cores = n_cores
        self.l1_hit, self.l2_hit, self.llc_hit, self.miss = l1_hit, l2_hit, llc_hit, miss
        self.base[0] = miss
        self.base[1] = l1_hit
        self.base[2] = llc_hit if self.scatter else l2_hit
        self.base[3] = llc_hit
        self.penalty = penalty
        self.period = period
        self.amplitude = amplitude
        self.sigma = float(sigma)
        self.serialize_cost = serialize_cost
        self.fence_cost = fence_cost
        self.flush_cost = flush_cost
        self.read_clock = bool(read_clock)
        arrs = [np.zeros(n_cores, np.int64), np.full(n_cores, -1, np.int64),
                np.full(n_cores, -1, np.int64), np.full(n_cores, -1, np.int64),
                np.full(n_cores, -1, np.int64),
                np.full(n_cores, -1, np.intc), np.full(n_cores, -1, np.intc)]
        self._keep = arrs
        self.time, self.last_write, self.last_idx, self.armed, self.armed_idx = arrs[:5]
        self.last_way, self.armed_way = arrs[5], arrs[6]
        M = 0xFFFFFFFFFFFFFFFF
        self.rngs = [Rng((seed + 0x632BE59BD9B4E019 * (c + 1)) & M) for c in range(n_cores)]
        self.timed_ops = 0
        self.mem_ops = 0
        self.flush_ops = 0

    def now(self, int core):
        return self.time[core]

    def advance_to(self, int core, long long t):
        if t > self.time[core]:
            self.time[core] = t

    def global_cycle(self):
        return int(np.max(np.asarray(self.time)))

    cdef inline long long _clock(self, long long t):
        if self.period <= 0:
            return 0
        return self.amplitude if 2 * (t % self.period) < self.period else 0

    def clock_level(self, long long t):
        return self._clock(t)

    cdef inline long long _noisy(self, int core, long long base):
        cdef Rng r
        if self.sigma > 0.0:
            r = <Rng>self.rngs[core]
            return <long long>floor(<double>base + self.sigma * r.gauss() + 0.5)
        return base

    cdef long long _read(self, int core, int64_t pa):
        cdef long long t = self.time[core]
        cdef int level = self.cache._access(core, pa >> 6, 0)
        cdef long long b = self.base[level]
        if self.read_clock:
            b += self._clock(t)
        cdef long long lat = self._noisy(core, b)
        self.time[core] = t + (lat if lat > 1 else 1)
        self.mem_ops += 1
        return lat

    cdef long long _write(self, int core, int64_t pa, bint nontemporal):
        cdef long long t = self.time[core]
        cdef int64_t line = pa >> 6
        cdef long long pen, lat
        cdef int64_t a
        cdef int level, w
        cdef int64_t idx
        if nontemporal:
            self.cache._flush(line)
            self.armed[core] = -1
            self.last_write[core] = -1
            lat = self._noisy(core, self.miss + self._clock(t))
        else:
            pen = 0
            a = self.armed[core]
            if a != -1:
                if self.scatter:
                    if self.cache._way_index(self.armed_way[core], line) == self.armed_idx[core]:
                        pen = self.penalty
                elif ((a ^ line) & 0x3FF) == 0:
                    pen = self.penalty
                self.armed[core] = -1
            level = self.cache._access(core, line, 1)
            lat = self._noisy(core, self.base[level] + self._clock(t) + pen)
            self.last_write[core] = line
            if self.scatter:
                self.cache._placement(line, &w, &idx)
                self.last_way[core] = w
                self.last_idx[core] = idx
        self.time[core] = t + (lat if lat > 1 else 1)
        self.mem_ops += 1
        return lat

    cdef inline void _clflush(self, int core, int64_t pa):
        self.cache._flush(pa >> 6)
        self.time[core] += self.flush_cost
        self.flush_ops += 1

    cdef inline void _serialize(self, int core):
        self.armed[core] = self.last_write[core]
        self.armed_way[core] = self.last_way[core]
        self.armed_idx[core] = self.last_idx[core]
        self.last_write[core] = -1
        self.time[core] += self.serialize_cost

    def read(self, int core, int64_t pa):
        return self._read(core, pa)

    def timed_read(self, int core, int64_t pa):
        self.timed_ops += 1
        return self._read(core, pa)

    def write(self, int core, int64_t pa, nontemporal=False):
        return self._write(core, pa, nontemporal)

    def timed_write(self, int core, int64_t pa, nontemporal=False):
        self.timed_ops += 1
        return self._write(core, pa, nontemporal)

    def clflush(self, int core, int64_t pa):
        self._clflush(core, pa)

    def serialize(self, int core):
        self._serialize(core)

    def fence(self, int core):
        self.time[core] += self.fence_cost

    def armed_line(self, int core):
        return self.armed[core]

    cdef long long _ww(self, int core, int64_t target, int64_t cand):
        self._clflush(core, target)
        self._write(core, cand, False)
        self._serialize(core)
        self.timed_ops += 1
        return self._write(core, target, False)

    def ww(self, int core, int64_t target, int64_t cand):
        return self._ww(core, target, cand)

    def ww_sums(self, int core, int64_t target, int64_t c0, int64_t c1, int reps):
        cdef long long s0 = 0, s1 = 0
        cdef int j
        for j in range(2 * reps):
            if (j & 2) >> 1:
                s1 += self._ww(core, target, c1)
            else:
                s0 += self._ww(core, target, c0)
        return s0, s1

    def read_many(self, int core, pas):
        cdef int64_t[::1] v = np.ascontiguousarray(pas, dtype=np.int64)
        cdef Py_ssize_t i
        for i in range(v.shape[0]):
            self._read(core, v[i])

    def write_many(self, int core, pas):
        cdef int64_t[::1] v = np.ascontiguousarray(pas, dtype=np.int64)
        cdef Py_ssize_t i
        for i in range(v.shape[0]):
            self._write(core, v[i], False)

    def timed_read_many(self, int core, pas):
        cdef int64_t[::1] v = np.ascontiguousarray(pas, dtype=np.int64)
        out = np.empty(v.shape[0], dtype=np.int64)
        cdef int64_t[::1] o = out
        cdef Py_ssize_t i
        for i in range(v.shape[0]):
            self.timed_ops += 1
            o[i] = self._read(core, v[i])
        return out

    def flush_many(self, int core, pas):
        cdef int64_t[::1] v = np.ascontiguousarray(pas, dtype=np.int64)
        cdef Py_ssize_t i
        for i in range(v.shape[0]):
            self._clflush(core, v[i])

    def evict_trial(self, int core, int64_t target, members, long long threshold):
        """Flush all, load target, access members, time target. True on miss."""
        cdef int64_t[::1] v = np.ascontiguousarray(members, dtype=np.int64)
        cdef Py_ssize_t i
        self._clflush(core, target)
        for i in range(v.shape[0]):
            self._clflush(core, v[i])
        self._read(core, target)
        for i in range(v.shape[0]):
            self._read(core, v[i])
        self.timed_ops += 1
        return self._read(core, target) > threshold

    def sample_writes(self, int core, int64_t pa, long long n, long long until=-1):
        cdef list cyc = []
        cdef list lat = []
        cdef long long count = 0
        while (n < 0 or count < n) and (until < 0 or self.time[core] < until):
            self._serialize(core)
            cyc.append(self.time[core])
            self.timed_ops += 1
            lat.append(self._write(core, pa, False))
            count += 1
        return np.array(cyc, dtype=np.int64), np.array(lat, dtype=np.int64)


def recover_edges(cycles, lats, avg_window, delta_window, edge_th):
    """Moving-average + delta-ring edge detector (integer arithmetic)."""
    cdef int64_t[::1] cy = np.ascontiguousarray(cycles, dtype=np.int64)
    cdef int64_t[::1] x = np.ascontiguousarray(lats, dtype=np.int64)
    cdef int aw = int(avg_window)
    cdef int dw = int(delta_window)
    cdef Py_ssize_t n = x.shape[0]
    ring_a = np.zeros(aw, np.int64)
    dring_a = np.zeros(dw, np.int64)
    cdef int64_t[::1] ring = ring_a
    cdef int64_t[::1] dring = dring_a
    cdef int64_t s = 0, sd = 0, d, xv
    cdef double limit = float(edge_th) * aw * dw
    cdef int level = -1
    cdef Py_ssize_t k, j
    ec = []
    ed = []
    for k in range(n):
        xv = x[k]
        s += xv - ring[k % aw]
        ring[k % aw] = xv
        if k < aw - 1:
            continue
        d = aw * xv - s
        j = (k - aw + 1) % dw
        sd += d - dring[j]
        dring[j] = d
        if k < aw + dw - 2:
            continue
        if sd > limit and level != 1:
            level = 1
            ec.append(cy[k])
            ed.append(1)
        elif sd < -limit and level != 0:
            level = 0
            ec.append(cy[k])
            ed.append(0)
    return np.array(ec, dtype=np.int64), np.array(ed, dtype=np.int8)


def nw_align(a, b, long long match, long long mismatch, long long gap):
    """Needleman-Wunsch global alignment with fixed tie order.

    Returns (score, matches, mismatches, gaps_a, gaps_b).
    """
    cdef signed char[::1] av = np.ascontiguousarray(a, dtype=np.int8)
    cdef signed char[::1] bv = np.ascontiguousarray(b, dtype=np.int8)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0]
    cdef Py_ssize_t i, j, W = m + 1
    trace_a = np.zeros((n + 1) * (m + 1), dtype=np.uint8)
    cdef unsigned char[::1] tr = trace_a
    prev_a = np.empty(m + 1, dtype=np.int64)
    cur_a = np.empty(m + 1, dtype=np.int64)
    cdef int64_t[::1] prev = prev_a
    cdef int64_t[::1] cur = cur_a
    cdef int64_t[::1] tmp
    cdef int64_t best, up, left
    cdef unsigned char op
    cdef signed char ai
    for j in range(m + 1):
        prev[j] = gap * j
    for j in range(1, m + 1):
        tr[j] = 2
    for i in range(1, n + 1):
        cur[0] = gap * i
        tr[i * W] = 1
        ai = av[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (match if ai == bv[j - 1] else mismatch)
            op = 0
            up = prev[j] + gap
            if up > best:
                best = up
                op = 1
            left = cur[j - 1] + gap
            if left > best:
                best = left
                op = 2
            cur[j] = best
            tr[i * W + j] = op
        tmp = prev
        prev = cur
        cur = tmp
    cdef int64_t score = prev[m]
    cdef long long matches = 0, mismatches = 0, ga = 0, gb = 0
    i = n
    j = m
    while i > 0 or j > 0:
        op = tr[i * W + j]
        if op == 0:
            if av[i - 1] == bv[j - 1]:
                matches += 1
            else:
                mismatches += 1
            i -= 1
            j -= 1
        elif op == 1:
            ga += 1
            i -= 1
        else:
            gb += 1
            j -= 1
    return int(score), int(matches), int(mismatches), int(ga), int(gb)
