"""Write+Write measurement primitive and the comparative pair decision."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .addr import PAGE_SIZE, collides
from .timing import TimingOracle

DEFAULT_TH = 10.0


class Verdict(Enum):
    NONE = "none"
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class PairDecision:
    verdict: Verdict
    mean_diff: float  # avg_0 - avg_1
    reps: int


def _decide(s0, s1, reps, th):
    diff = (s0 - s1) / reps
    if diff > th:
        return Verdict.FIRST, diff
    if diff < -th:
        return Verdict.SECOND, diff
    return Verdict.NONE, diff


def write_write(oracle: TimingOracle, target: int, candidate: int, core: int = 0) -> int:
    """clflush(target); write(candidate); serialize; time a write to target."""
    return oracle.write_write(target, candidate, core)


def classify_pair(oracle: TimingOracle, target: int, c0: int, c1: int,
                  reps: int = 30, th: float = DEFAULT_TH, core: int = 0) -> PairDecision:
    """Decide which of two candidates collides with ``target``.

    Runs ``2*reps`` W+W measurements in T-T-C-C order (the candidate flips
    every second iteration), so each candidate is measured ``reps`` times.
    A colliding candidate makes the target write slower, hence FIRST when
    avg_0 exceeds avg_1 by more than ``th``.
    """
    if reps < 2 or reps % 2:
        raise ValueError(f"reps must be even and >= 2, got {reps}")
    s0, s1 = oracle.ww_sums(target, c0, c1, reps, core)
    v, diff = _decide(s0, s1, reps, th)
    return PairDecision(v, diff, reps)


def find_pairs(oracle: TimingOracle, base: int, pages: int, count: int, rng):
    """Known (target, colliding, non-colliding) triples from a mapped region.

    Uses ground-truth physical addresses; for experiment setup only.
    """
    vs = base + np.arange(pages, dtype=np.int64) * PAGE_SIZE
    ps = oracle.phys_many(vs)
    key = (ps >> 6) & 0x3FF
    out = []
    while len(out) < count:
        line = int(rng.integers(0, PAGE_SIZE // 64)) * 64
        i = int(rng.integers(0, pages))
        t = int(vs[i]) + line
        same = np.nonzero(key == key[i])[0]
        same = same[same != i]
        diff = np.nonzero(key != key[i])[0]
        if len(same) == 0:
            continue
        c = int(vs[int(rng.choice(same))]) + line
        n = int(vs[int(rng.choice(diff))]) + line
        assert collides(oracle.phys(t), oracle.phys(c)) and not collides(oracle.phys(t), oracle.phys(n))
        out.append((t, c, n))
    return out


def tpr_curve(oracle: TimingOracle, reps_list, trials: int = 100, th: float = DEFAULT_TH,
              seed: int = 0, core: int = 0, pages: int = 4096) -> dict[int, float]:
    """True-positive rate of classify_pair per ``reps`` value.

    Each trial takes a fresh colliding/non-colliding pair, places the
    colliding one at a random position, and counts a hit when the verdict
    names it.
    """
    rng = np.random.default_rng(seed)
    base = oracle.pagemap.allocate(pages) if oracle.pagemap else 0
    triples = find_pairs(oracle, base, pages, trials, rng)
    swaps = rng.integers(0, 2, size=trials)
    out = {}
    for reps in reps_list:
        ok = 0
        for (t, c, n), sw in zip(triples, swaps):
            if sw:
                d = classify_pair(oracle, t, n, c, reps, th, core)
                ok += d.verdict is Verdict.SECOND
            else:
                d = classify_pair(oracle, t, c, n, reps, th, core)
                ok += d.verdict is Verdict.FIRST
        out[reps] = ok / trials
    return out
