"""Independent reference implementations used as test oracles.

None of these import the package's kernels.
"""
from __future__ import annotations

import itertools
from collections import OrderedDict
from functools import lru_cache
from math import comb

import numpy as np

M64 = (1 << 64) - 1
U = np.uint64


# ---------------------------------------------------------------- scatter hash
def scatter_hash_np(k0: int, k1: int, way: int, lines: np.ndarray) -> np.ndarray:
    """Vectorised keyed mixer, written from the documented round structure."""
    with np.errstate(over="ignore"):
        x = lines.astype(U) ^ U(k0)
        y = U(((way + 1) * 0x9E3779B97F4A7C15) & M64) ^ U(k1)
        for _ in range(4):
            x = x + y
            x ^= x >> U(31)
            x = x * U(0xBF58476D1CE4E5B9)
            x = (x << U(23)) | (x >> U(41))
            y = y * U(0x94D049BB133111EB) + U(1)
        x ^= x >> U(29)
    return x


def chi2_critical(df: int, z: float = 2.326) -> float:
    """Wilson-Hilferty upper quantile (z=2.326 -> alpha 0.01)."""
    h = 2.0 / (9.0 * df)
    return df * (1 - h + z * h ** 0.5) ** 3


# ---------------------------------------------------------------- LRU set
class LruSet:
    """One cache set as an ordered dict, least recent first."""

    def __init__(self, ways: int):
        self.ways = ways
        self.d: OrderedDict[int, None] = OrderedDict()

    def access(self, line: int) -> bool:
        if line in self.d:
            self.d.move_to_end(line)
            return True
        if len(self.d) >= self.ways:
            self.d.popitem(last=False)
        self.d[line] = None
        return False

    def lines(self) -> list[int]:
        return list(self.d)


# ---------------------------------------------------------------- alignment
def all_alignments(a, b):
    """Every global alignment of a and b as a list of column pairs (None = gap)."""
    if not a and not b:
        yield ()
        return
    if a and b:
        for rest in all_alignments(a[1:], b[1:]):
            yield ((a[0], b[0]),) + rest
    if a:
        for rest in all_alignments(a[1:], b):
            yield ((a[0], None),) + rest
    if b:
        for rest in all_alignments(a, b[1:]):
            yield ((None, b[0]),) + rest


def brute_align(a, b, match=1, mismatch=-1, gap=-8):
    """(score, matches, mismatches, gaps_a, gaps_b) of the best alignment.

    Among optimal alignments the one with the fewest gaps wins; for the
    scoring used here the counts are unique anyway.
    """
    best = None
    for al in all_alignments(tuple(a), tuple(b)):
        m = mm = ga = gb = 0
        for x, y in al:
            if x is None:
                gb += 1
            elif y is None:
                ga += 1
            elif x == y:
                m += 1
            else:
                mm += 1
        s = m * match + mm * mismatch + (ga + gb) * gap
        key = (s, -(ga + gb))
        if best is None or key > best[0]:
            best = (key, (s, m, mm, ga, gb))
    return best[1]


@lru_cache(maxsize=None)
def _subsets(n, k):
    c = list(itertools.combinations(range(n), k))
    return np.array(c, dtype=np.int64).reshape(len(c), k)


def shape_oracle(n: int, m: int, match=1, mismatch=-1, gap=-8):
    """Optimal score and counts for *all* pairs of bit strings of lengths n, m.

    An alignment's score depends only on which a-positions are paired with
    which b-positions (k columns, order preserved) -- the placement of the
    gaps does not matter -- so enumerating pairs of k-subsets covers every
    alignment. Subset sizes k with 17k < 15*min(n, m) are skipped: even all
    matches there score below the worst gap-minimal alignment (valid for
    match=1, mismatch=-1, gap=-8 only).

    The selected bits of every string are packed into a k-bit code, so the
    mismatch count of a shape is popcount(code_a ^ code_b).

    Returns arrays indexed [int(a), int(b)] with a's bit i = a[i].
    """
    assert (match, mismatch, gap) == (1, -1, -8)
    k0 = min(n, m)
    abits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    bbits = (np.arange(1 << m)[:, None] >> np.arange(m)) & 1
    pop = np.array([bin(x).count("1") for x in range(1 << max(k0, 1))], dtype=np.int64)
    best = np.full((1 << n, 1 << m), np.iinfo(np.int64).min, dtype=np.int64)
    best_k = np.zeros_like(best)
    for k in range(k0, -1, -1):
        if 17 * k < 15 * k0:
            continue
        gaps = (n - k) + (m - k)
        w = 1 << np.arange(k)
        codes_a = [abits[:, ia] @ w for ia in _subsets(n, k)]
        codes_b = [bbits[:, ib] @ w for ib in _subsets(m, k)]
        for ca in codes_a:
            for cb in codes_b:
                mm = pop[ca[:, None] ^ cb[None, :]]
                score = (k - mm) * match + mm * mismatch + gaps * gap
                better = score > best
                best[better] = score[better]
                best_k[better] = k
    gaps = (n - best_k) + (m - best_k)
    bal = best - gaps * gap  # matches - mismatches
    matches = (best_k + bal) // 2
    mism = best_k - matches
    return best, matches, mism, n - best_k, m - best_k


def shapes_checked(n, m):
    k0 = min(n, m)
    return sum(comb(n, k) * comb(m, k) for k in range(k0 + 1) if 17 * k >= 15 * k0)


# ---------------------------------------------------------------- edge detector
def detect_edges_float(cycles, x, aw, dw, th):
    """Moving average + delta ring, straight floating-point transcription."""
    x = np.asarray(x, dtype=np.float64)
    level = None
    ring = []
    deltas = []
    out = []
    for k in range(len(x)):
        ring.append(x[k])
        if len(ring) > aw:
            ring.pop(0)
        if len(ring) < aw:
            continue
        ma = sum(ring) / aw
        deltas.append(x[k] - ma)
        if len(deltas) > dw:
            deltas.pop(0)
        if len(deltas) < dw:
            continue
        mean = sum(deltas) / dw
        if mean > th and level != 1:
            level = 1
            out.append((int(cycles[k]), 1))
        elif mean < -th and level != 0:
            level = 0
            out.append((int(cycles[k]), 0))
    return out
