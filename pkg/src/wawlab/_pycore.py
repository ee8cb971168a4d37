"""Pure-Python simulation kernels.

This module is the reference implementation of everything in ``_core.pyx``.
Both must produce bit-identical results for identical seeds and call
sequences; ``tests/test_backends.py`` enforces it.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

M64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
TWO_PI = 6.283185307179586

# hit levels reported by access()
MISS = 0
L1 = 1
L2 = 2
LLC = 3


def splitmix64(x):
    x = (x + GOLDEN) & M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return x, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M64


class Rng:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed):
        x = seed & M64
        st = []
        for _ in range(4):
            x, z = splitmix64(x)
            st.append(z)
        self.s = st

    def next_u64(self):
        s = self.s
        result = (_rotl((s[1] * 5) & M64, 7) * 9) & M64
        t = (s[1] << 17) & M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self):
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)

    def below(self, n):
        # n < 2**32
        return ((self.next_u64() >> 32) * n) >> 32


def scatter_hash(k0, k1, way, line):
    """Keyed per-way mixer: four xor-shift / multiply / rotate rounds."""
    x = (line ^ k0) & M64
    y = (((way + 1) * GOLDEN) & M64) ^ k1
    for _ in range(4):
        x = (x + y) & M64
        x ^= x >> 31
        x = (x * 0xBF58476D1CE4E5B9) & M64
        x = _rotl(x, 23)
        y = (y * 0x94D049BB133111EB + 1) & M64
    x ^= x >> 29
    return x


def fold_slice(pa, slices, slice_bits):
    if slices <= 1:
        return 0
    t = pa >> 16
    h = 0
    mask = slices - 1
    while t:
        h ^= t & mask
        t >>= slice_bits
    return h


class ClassicCache:
    """Private L1/L2 per core, shared sliced inclusive LLC, LRU or random."""

    is_scatter = False

    def __init__(self, n_cores, l1_sets, l1_ways, l2_sets, l2_ways,
                 llc_sets, llc_ways, slices, lru=True, seed=0):
        self.n_cores = n_cores
        self.l1_sets, self.l1_ways = l1_sets, l1_ways
        self.l2_sets, self.l2_ways = l2_sets, l2_ways
        self.llc_sets, self.llc_ways = llc_sets, llc_ways
        self.slices = slices
        self.slice_bits = slices.bit_length() - 1
        self.lru = bool(lru)
        self.rng = Rng(seed)
        self.tick = 0
        self.writebacks = 0
        n1 = n_cores * l1_sets * l1_ways
        n2 = n_cores * l2_sets * l2_ways
        n3 = slices * llc_sets * llc_ways
        self.t1, self.s1, self.d1 = [-1] * n1, [0] * n1, [0] * n1
        self.t2, self.s2, self.d2 = [-1] * n2, [0] * n2, [0] * n2
        self.t3, self.s3, self.d3 = [-1] * n3, [0] * n3, [0] * n3
        self.evicted = []

    # slot base offsets -------------------------------------------------
    def _b1(self, core, line):
        return (core * self.l1_sets + (line & (self.l1_sets - 1))) * self.l1_ways

    def _b2(self, core, line):
        return (core * self.l2_sets + (line & (self.l2_sets - 1))) * self.l2_ways

    def _b3(self, line):
        sl = fold_slice(line << 6, self.slices, self.slice_bits)
        return (sl * self.llc_sets + (line & (self.llc_sets - 1))) * self.llc_ways

    @staticmethod
    def _find(tags, base, ways, line):
        for w in range(base, base + ways):
            if tags[w] == line:
                return w
        return -1

    def _victim(self, tags, stamps, base, ways):
        for w in range(base, base + ways):
            if tags[w] == -1:
                return w
        if self.lru:
            best = base
            for w in range(base + 1, base + ways):
                if stamps[w] < stamps[best]:
                    best = w
            return best
        return base + self.rng.below(ways)

    def _install1(self, core, line, dirty):
        t, s, d = self.t1, self.s1, self.d1
        b = self._b1(core, line)
        v = self._victim(t, s, b, self.l1_ways)
        old = t[v]
        if old != -1:
            self.evicted.append((1, core, old))
            if d[v]:
                w2 = self._find(self.t2, self._b2(core, old), self.l2_ways, old)
                if w2 >= 0:
                    self.d2[w2] = 1
                else:
                    w3 = self._find(self.t3, self._b3(old), self.llc_ways, old)
                    if w3 >= 0:
                        self.d3[w3] = 1
        t[v] = line
        s[v] = self.tick
        d[v] = dirty

    def _install2(self, core, line):
        t, s, d = self.t2, self.s2, self.d2
        b = self._b2(core, line)
        v = self._victim(t, s, b, self.l2_ways)
        old = t[v]
        if old != -1:
            self.evicted.append((2, core, old))
            if d[v]:
                w3 = self._find(self.t3, self._b3(old), self.llc_ways, old)
                if w3 >= 0:
                    self.d3[w3] = 1
        t[v] = line
        s[v] = self.tick
        d[v] = 0

    def _drop_private(self, line):
        dirty = 0
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

    def _install3(self, line):
        t, s, d = self.t3, self.s3, self.d3
        b = self._b3(line)
        v = self._victim(t, s, b, self.llc_ways)
        old = t[v]
        if old != -1:
            self.evicted.append((3, -1, old))
            if self._drop_private(old) | d[v]:
                self.writebacks += 1
        t[v] = line
        s[v] = self.tick
        d[v] = 0

    def access(self, core, line, is_write):
        self.evicted = []
        self.tick += 1
        tick = self.tick
        w1 = self._find(self.t1, self._b1(core, line), self.l1_ways, line)
        w2 = self._find(self.t2, self._b2(core, line), self.l2_ways, line)
        w3 = self._find(self.t3, self._b3(line), self.llc_ways, line)
        if w1 >= 0:
            self.s1[w1] = tick
            if is_write:
                self.d1[w1] = 1
            if w2 >= 0:
                self.s2[w2] = tick
            self.s3[w3] = tick
            return L1
        if w2 >= 0:
            self.s2[w2] = tick
            self.s3[w3] = tick
            self._install1(core, line, 1 if is_write else 0)
            return L2
        if w3 >= 0:
            self.s3[w3] = tick
            self._install2(core, line)
            self._install1(core, line, 1 if is_write else 0)
            return LLC
        self._install3(line)
        self._install2(core, line)
        self._install1(core, line, 1 if is_write else 0)
        return MISS

    def flush(self, line):
        dirty = self._drop_private(line)
        w3 = self._find(self.t3, self._b3(line), self.llc_ways, line)
        present = w3 >= 0
        if present:
            dirty |= self.d3[w3]
            self.t3[w3] = -1
            self.d3[w3] = 0
        if dirty:
            self.writebacks += 1
        return present

    def contains(self, line, level, core=0):
        if level == 1:
            return self._find(self.t1, self._b1(core, line), self.l1_ways, line) >= 0
        if level == 2:
            return self._find(self.t2, self._b2(core, line), self.l2_ways, line) >= 0
        if level == 3:
            return self._find(self.t3, self._b3(line), self.llc_ways, line) >= 0
        raise ValueError("level must be 1, 2 or 3")

    def llc_lines(self, slice_id, set_id):
        """Lines of one LLC set ordered least- to most-recently used."""
        b = (slice_id * self.llc_sets + set_id) * self.llc_ways
        ws = [w for w in range(b, b + self.llc_ways) if self.t3[w] != -1]
        ws.sort(key=lambda w: self.s3[w])
        return [self.t3[w] for w in ws]

    def last_evicted(self):
        return list(self.evicted)

    def check_invariants(self):
        for c in range(self.n_cores):
            for tags, bfn, ways in ((self.t1, self._b1, self.l1_ways),
                                    (self.t2, self._b2, self.l2_ways)):
                lo = c * (len(tags) // self.n_cores)
                hi = lo + len(tags) // self.n_cores
                for w in range(lo, hi):
                    line = tags[w]
                    if line == -1:
                        continue
                    if bfn(c, line) != (w - (w - lo) % ways):
                        raise AssertionError("line stored in wrong set")
                    if self._find(self.t3, self._b3(line), self.llc_ways, line) < 0:
                        raise AssertionError(f"inclusivity violated for line {line:#x}")
        return True


class ScatterCache:
    """Two-level ScatterCache: keyed index per way, random replacement.

    L1 is private per core, L2 shared and inclusive of every L1.
    """

    is_scatter = True

    def __init__(self, n_cores, l1_sets, l1_ways, l2_sets, l2_ways, k0, k1, seed=0):
        self.n_cores = n_cores
        self.l1_sets, self.l1_ways = l1_sets, l1_ways
        self.l2_sets, self.l2_ways = l2_sets, l2_ways
        self.k0, self.k1 = k0 & M64, k1 & M64
        self.nh = max(l1_ways, l2_ways)
        self.rng = Rng(seed)
        self.writebacks = 0
        self.t1 = [-1] * (n_cores * l1_ways * l1_sets)
        self.d1 = [0] * len(self.t1)
        self.t2 = [-1] * (l2_ways * l2_sets)
        self.d2 = [0] * len(self.t2)
        self.evicted = []

    def hashes(self, line):
        return [scatter_hash(self.k0, self.k1, w, line) for w in range(self.nh)]

    def way_index(self, way, line, level=2):
        h = scatter_hash(self.k0, self.k1, way, line)
        return h & ((self.l2_sets if level == 2 else self.l1_sets) - 1)

    def _slot1(self, core, way, h):
        return (core * self.l1_ways + way) * self.l1_sets + (h & (self.l1_sets - 1))

    def _slot2(self, way, h):
        return way * self.l2_sets + (h & (self.l2_sets - 1))

    def _find1(self, core, line, hs):
        for w in range(self.l1_ways):
            k = self._slot1(core, w, hs[w])
            if self.t1[k] == line:
                return k
        return -1

    def _find2(self, line, hs):
        for w in range(self.l2_ways):
            k = self._slot2(w, hs[w])
            if self.t2[k] == line:
                return k
        return -1

    def _drop_l1(self, line, hs):
        dirty = 0
        for c in range(self.n_cores):
            k = self._find1(c, line, hs)
            if k >= 0:
                dirty |= self.d1[k]
                self.t1[k] = -1
                self.d1[k] = 0
        return dirty

    def access(self, core, line, is_write):
        self.evicted = []
        hs = self.hashes(line)
        k = self._find1(core, line, hs)
        if k >= 0:
            if is_write:
                self.d1[k] = 1
            return L1
        k2 = self._find2(line, hs)
        level = L2
        if k2 < 0:
            level = MISS
            w = self.rng.below(self.l2_ways)
            k2 = self._slot2(w, hs[w])
            old = self.t2[k2]
            if old != -1:
                self.evicted.append((2, -1, old))
                if self._drop_l1(old, self.hashes(old)) | self.d2[k2]:
                    self.writebacks += 1
            self.t2[k2] = line
            self.d2[k2] = 0
        w = self.rng.below(self.l1_ways)
        k1 = self._slot1(core, w, hs[w])
        old = self.t1[k1]
        if old != -1:
            self.evicted.append((1, core, old))
            if self.d1[k1]:
                k2o = self._find2(old, self.hashes(old))
                if k2o >= 0:
                    self.d2[k2o] = 1
        self.t1[k1] = line
        self.d1[k1] = 1 if is_write else 0
        return level

    def flush(self, line):
        hs = self.hashes(line)
        dirty = self._drop_l1(line, hs)
        k2 = self._find2(line, hs)
        present = k2 >= 0
        if present:
            dirty |= self.d2[k2]
            self.t2[k2] = -1
            self.d2[k2] = 0
        if dirty:
            self.writebacks += 1
        return present

    def contains(self, line, level, core=0):
        hs = self.hashes(line)
        if level == 1:
            return self._find1(core, line, hs) >= 0
        if level == 2:
            return self._find2(line, hs) >= 0
        raise ValueError("level must be 1 or 2")

    def placement(self, line):
        """(way, index) of the line in L2, or (-1, -1) when not cached."""
        hs = self.hashes(line)
        for w in range(self.l2_ways):
            idx = hs[w] & (self.l2_sets - 1)
            if self.t2[w * self.l2_sets + idx] == line:
                return w, idx
        return -1, -1

    def last_evicted(self):
        return list(self.evicted)

    def check_invariants(self):
        for k, line in enumerate(self.t1):
            if line != -1 and self._find2(line, self.hashes(line)) < 0:
                raise AssertionError(f"inclusivity violated for line {line:#x}")
        return True


class OracleCore:
    """Attacker-visible timing model on top of a cache kernel.

    Addresses are physical byte addresses. Each core keeps its own cycle
    cursor, W+W arming state and noise stream.
    """

    def __init__(self, cache, n_cores, l1_hit, l2_hit, llc_hit, miss, penalty,
                 period, amplitude, sigma, serialize_cost, fence_cost,
                 flush_cost, read_clock, seed):
        self.cache = cache
        self.scatter = bool(cache.is_scatter)
        self.n_cores = n_cores
        self.base = {L1: l1_hit, L2: l2_hit, LLC: llc_hit, MISS: miss}
        if self.scatter:
            self.base[L2] = llc_hit
        self.miss = miss
        self.penalty = penalty
        self.period = period
        self.amplitude = amplitude
        self.sigma = float(sigma)
        self.serialize_cost = serialize_cost
        self.fence_cost = fence_cost
        self.flush_cost = flush_cost
        self.read_clock = bool(read_clock)
        self.time = [0] * n_cores
        self.last_write = [-1] * n_cores
        self.last_way = [-1] * n_cores
        self.last_idx = [-1] * n_cores
        self.armed = [-1] * n_cores
        self.armed_way = [-1] * n_cores
        self.armed_idx = [-1] * n_cores
        self.rngs = [Rng((seed + 0x632BE59BD9B4E019 * (c + 1)) & M64) for c in range(n_cores)]
        self.timed_ops = 0
        self.mem_ops = 0
        self.flush_ops = 0

    # time ---------------------------------------------------------------
    def now(self, core):
        return self.time[core]

    def advance_to(self, core, t):
        if t > self.time[core]:
            self.time[core] = t

    def global_cycle(self):
        return max(self.time)

    def clock_level(self, t):
        if self.period <= 0:
            return 0
        return self.amplitude if 2 * (t % self.period) < self.period else 0

    def _noisy(self, core, base):
        if self.sigma > 0.0:
            return int(math.floor(float(base) + self.sigma * self.rngs[core].normal() + 0.5))
        return base

    # memory ops ---------------------------------------------------------
    def _read(self, core, pa):
        t = self.time[core]
        level = self.cache.access(core, pa >> 6, 0)
        base = self.base[level]
        if self.read_clock:
            base += self.clock_level(t)
        lat = self._noisy(core, base)
        self.time[core] = t + (lat if lat > 1 else 1)
        self.mem_ops += 1
        return lat

    def _write(self, core, pa, nontemporal):
        t = self.time[core]
        line = pa >> 6
        if nontemporal:
            self.cache.flush(line)
            self.armed[core] = -1
            self.last_write[core] = -1
            lat = self._noisy(core, self.miss + self.clock_level(t))
        else:
            pen = 0
            a = self.armed[core]
            if a != -1:
                if self.scatter:
                    if self.cache.way_index(self.armed_way[core], line) == self.armed_idx[core]:
                        pen = self.penalty
                elif ((a ^ line) & 0x3FF) == 0:
                    pen = self.penalty
                self.armed[core] = -1
            level = self.cache.access(core, line, 1)
            lat = self._noisy(core, self.base[level] + self.clock_level(t) + pen)
            self.last_write[core] = line
            if self.scatter:
                w, idx = self.cache.placement(line)
                self.last_way[core] = w
                self.last_idx[core] = idx
        self.time[core] = t + (lat if lat > 1 else 1)
        self.mem_ops += 1
        return lat

    def read(self, core, pa):
        return self._read(core, pa)

    def timed_read(self, core, pa):
        self.timed_ops += 1
        return self._read(core, pa)

    def write(self, core, pa, nontemporal=False):
        return self._write(core, pa, nontemporal)

    def timed_write(self, core, pa, nontemporal=False):
        self.timed_ops += 1
        return self._write(core, pa, nontemporal)

    def clflush(self, core, pa):
        self.cache.flush(pa >> 6)
        self.time[core] += self.flush_cost
        self.flush_ops += 1

    def serialize(self, core):
        self.armed[core] = self.last_write[core]
        self.armed_way[core] = self.last_way[core]
        self.armed_idx[core] = self.last_idx[core]
        self.last_write[core] = -1
        self.time[core] += self.serialize_cost

    def fence(self, core):
        self.time[core] += self.fence_cost

    def armed_line(self, core):
        return self.armed[core]

    # fused loops ----------------------------------------------------------
    def ww(self, core, target, cand):
        self.clflush(core, target)
        self._write(core, cand, False)
        self.serialize(core)
        self.timed_ops += 1
        return self._write(core, target, False)

    def ww_sums(self, core, target, c0, c1, reps):
        s0 = 0
        s1 = 0
        for j in range(2 * reps):
            if (j & 2) >> 1:
                s1 += self.ww(core, target, c1)
            else:
                s0 += self.ww(core, target, c0)
        return s0, s1

    def read_many(self, core, pas):
        for pa in pas:
            self._read(core, int(pa))

    def write_many(self, core, pas):
        for pa in pas:
            self._write(core, int(pa), False)

    def timed_read_many(self, core, pas):
        out = np.empty(len(pas), dtype=np.int64)
        for i, pa in enumerate(pas):
            self.timed_ops += 1
            out[i] = self._read(core, int(pa))
        return out

    def flush_many(self, core, pas):
        for pa in pas:
            self.clflush(core, int(pa))

    def evict_trial(self, core, target, members, threshold):
        """Flush all, load target, access members, time target. True on miss."""
        self.clflush(core, target)
        for pa in members:
            self.clflush(core, int(pa))
        self._read(core, target)
        for pa in members:
            self._read(core, int(pa))
        self.timed_ops += 1
        return self._read(core, target) > threshold

    def sample_writes(self, core, pa, n, until=-1):
        cyc = []
        lat = []
        while (n < 0 or len(cyc) < n) and (until < 0 or self.time[core] < until):
            self.serialize(core)
            cyc.append(self.time[core])
            self.timed_ops += 1
            lat.append(self._write(core, pa, False))
        return np.array(cyc, dtype=np.int64), np.array(lat, dtype=np.int64)


def recover_edges(cycles, lats, avg_window, delta_window, edge_th):
    """Moving-average + delta-ring edge detector.

    Works in integers scaled by avg_window: the delta of a sample is
    ``aw*x - window_sum`` so both backends agree exactly.
    """
    aw = int(avg_window)
    dw = int(delta_window)
    n = len(lats)
    ring = [0] * aw
    dring = [0] * dw
    s = 0
    sd = 0
    limit = float(edge_th) * aw * dw
    level = -1
    ec = []
    ed = []
    for k in range(n):
        x = int(lats[k])
        s += x - ring[k % aw]
        ring[k % aw] = x
        if k < aw - 1:
            continue
        d = aw * x - s
        j = (k - aw + 1) % dw
        sd += d - dring[j]
        dring[j] = d
        if k < aw + dw - 2:
            continue
        if sd > limit and level != 1:
            level = 1
            ec.append(int(cycles[k]))
            ed.append(1)
        elif sd < -limit and level != 0:
            level = 0
            ec.append(int(cycles[k]))
            ed.append(0)
    return np.array(ec, dtype=np.int64), np.array(ed, dtype=np.int8)


def nw_align(a, b, match, mismatch, gap):
    """Needleman-Wunsch global alignment with fixed tie order.

    Returns (score, matches, mismatches, gaps_a, gaps_b): gaps_a counts
    symbols of ``a`` aligned to a gap, gaps_b symbols of ``b``.
    """
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    n, m = len(a), len(b)
    # trace: 0 diag, 1 up (consume a), 2 left (consume b)
    trace = [bytearray(m + 1) for _ in range(n + 1)]
    prev = [gap * j for j in range(m + 1)]
    for j in range(1, m + 1):
        trace[0][j] = 2
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        cur[0] = gap * i
        tr = trace[i]
        tr[0] = 1
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (match if ai == b[j - 1] else mismatch)
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
            tr[j] = op
        prev = cur
    score = prev[m]
    i, j = n, m
    matches = mismatches = ga = gb = 0
    while i > 0 or j > 0:
        op = trace[i][j]
        if op == 0:
            if a[i - 1] == b[j - 1]:
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
    return score, matches, mismatches, ga, gb
