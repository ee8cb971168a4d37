"""Bottom-up eviction set construction with Write+Write.

``build_classic`` scans page-aligned candidate pairs for a set-associative
LLC; ``build_randomized`` scans line pairs for a randomized cache and
stops once the set evicts the target with the requested probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .addr import PAGE_SIZE, collides, congruent
from .probe import DEFAULT_TH, Verdict, _decide
from .timing import TimingOracle

LINE = 0x40


class EvictionSetError(RuntimeError):
    """Candidate memory ran out before a working set was found."""


@dataclass
class EvictionSet:
    members: list[int]
    target: int
    kind: str  # "classic" or "probabilistic"
    measured_eviction_rate: float | None = None
    measurements: int = 0
    rounds: int = 0
    positives: list[int] = field(default_factory=list)
    # candidates scanned: start, stop (exclusive), step
    scan: tuple[int, int, int] = (0, 0, 1)

    def __len__(self):
        return len(self.members)

    def scanned(self) -> np.ndarray:
        start, stop, step = self.scan
        return np.arange(start, stop, step, dtype=np.int64)


def measurement_count(run: EvictionSet) -> int:
    """Timed operations spent building ``run``."""
    return run.measurements


# ---------------------------------------------------------------- testing
def test_evset(oracle: TimingOracle, ev, target: int, core: int = 0) -> bool:
    """Load target, touch every member, then time the target."""
    if len(ev) == 0:
        return False
    return oracle.evict_trial(target, ev, core)


test_evset.__test__ = False


def test_evset_ratio(oracle: TimingOracle, ev, target: int, trials: int = 200,
                     core: int = 0) -> float:
    """Fraction of ``trials`` in which priming ``ev`` evicts ``target``."""
    if len(ev) == 0:
        return 0.0
    phys_ev = oracle.phys_many(ev)
    pt = oracle.phys(target)
    th = oracle.params.miss_threshold
    hits = sum(oracle.core.evict_trial(core, pt, phys_ev, th) for _ in range(trials))
    return hits / trials


test_evset_ratio.__test__ = False


def meets_ratio(oracle: TimingOracle, ev, target: int, p: float, trials: int = 200,
                core: int = 0) -> bool:
    """Same decision as ``test_evset_ratio(...) >= p`` but stops as soon as
    the outcome is settled."""
    if len(ev) == 0:
        return p <= 0
    need = math.ceil(p * trials - 1e-9)
    allowed_fail = trials - need
    phys_ev = oracle.phys_many(ev)
    pt = oracle.phys(target)
    th = oracle.params.miss_threshold
    ok = bad = 0
    trial = oracle.core.evict_trial
    while ok < need and bad <= allowed_fail:
        if trial(core, pt, phys_ev, th):
            ok += 1
        else:
            bad += 1
    return ok >= need


# ---------------------------------------------------------------- classic
def build_classic(oracle: TimingOracle, target: int, mem_base: int, mem_size: int,
                  reps: int = 30, th: float = DEFAULT_TH, variant: str = "performance",
                  reduce: bool = True, core: int = 0) -> EvictionSet:
    """Write+Write eviction set for a classic sliced LLC.

    Candidates share the target's low 12 bits. The performance variant
    tests disjoint page pairs (stride two pages); the coverage variant
    slides by one page so every candidate meets both neighbours.
    """
    if variant not in ("performance", "coverage"):
        raise ValueError(f"unknown variant {variant!r}")
    ops0 = oracle.timed_ops
    start = mem_base + ((target - mem_base) & (PAGE_SIZE - 1))
    end = mem_base + mem_size
    step = 2 * PAGE_SIZE if variant == "performance" else PAGE_SIZE
    n_pairs = max(0, (end - PAGE_SIZE - start + step - 1) // step)
    c0s = start + np.arange(n_pairs, dtype=np.int64) * step
    p0s = oracle.phys_many(c0s)
    p1s = oracle.phys_many(c0s + PAGE_SIZE)
    pt = oracle.phys(target)
    ww_sums = oracle.core.ww_sums

    ev: list[int] = []
    seen = set()
    found = False
    last = start
    for k in range(n_pairs):
        s0, s1 = ww_sums(core, pt, int(p0s[k]), int(p1s[k]), reps)
        v, _ = _decide(s0, s1, reps, th)
        last = int(c0s[k]) + PAGE_SIZE
        if v is Verdict.NONE:
            continue
        a = int(c0s[k]) if v is Verdict.FIRST else int(c0s[k]) + PAGE_SIZE
        if a in seen:
            continue
        seen.add(a)
        ev.append(a)
        if test_evset(oracle, ev, target, core):
            found = True
            break
    scan = (start, last + PAGE_SIZE, PAGE_SIZE)
    if not found:
        raise EvictionSetError(
            f"no eviction set after scanning {mem_size} bytes ({len(ev)} positives)")
    es = EvictionSet(list(ev), target, "classic", positives=list(ev), scan=scan)
    if reduce:
        es = reduce_classic(oracle, es, core)
    es.measurements = oracle.timed_ops - ops0
    return es


def reduce_classic(oracle: TimingOracle, es: EvictionSet, core: int = 0) -> EvictionSet:
    """Drop members one at a time while the rest still evicts the target."""
    members = list(es.members)
    for a in list(members):
        trial = [m for m in members if m != a]
        if test_evset(oracle, trial, es.target, core):
            members = trial
    return replace(es, members=members)


# ------------------------------------------------------------- randomized
def build_randomized(oracle: TimingOracle, target: int, mem_base: int, mem_size: int,
                     reps: int = 2, th: float = DEFAULT_TH, p_e: float = 0.9,
                     trials: int = 200, tolerance: float = 0.02, confirm: int = 2,
                     reduce: bool = False, reduce_rounds: int = 50,
                     core: int = 0) -> EvictionSet:
    """Probabilistic eviction set for a randomized cache.

    Scans line pairs at a 64-byte stride from ``mem_base`` (no alignment
    to the target). After every new positive the set is tested; the scan
    stops once ``confirm`` consecutive ``trials``-trial measurements reach
    ``p_e - tolerance``.
    """
    ops0 = oracle.timed_ops
    n_pairs = max(0, (mem_size - LINE) // (2 * LINE))
    c0s = mem_base + np.arange(n_pairs, dtype=np.int64) * (2 * LINE)
    p0s = oracle.phys_many(c0s)
    p1s = oracle.phys_many(c0s + LINE)
    pt = oracle.phys(target)
    ww_sums = oracle.core.ww_sums
    goal = p_e - tolerance

    ev: list[int] = []
    found = False
    last = mem_base
    for k in range(n_pairs):
        s0, s1 = ww_sums(core, pt, int(p0s[k]), int(p1s[k]), reps)
        v, _ = _decide(s0, s1, reps, th)
        last = int(c0s[k]) + 2 * LINE
        if v is Verdict.NONE:
            continue
        ev.append(int(c0s[k]) if v is Verdict.FIRST else int(c0s[k]) + LINE)
        if all(meets_ratio(oracle, ev, target, goal, trials, core) for _ in range(confirm)):
            found = True
            break
    if not found:
        raise EvictionSetError(
            f"eviction rate {goal:.2f} not reached in {mem_size} bytes ({len(ev)} positives)")
    es = EvictionSet(list(ev), target, "probabilistic", positives=list(ev),
                     scan=(mem_base, last, LINE))
    if reduce:
        es = reduce_randomized(oracle, es, reduce_rounds, core)
    es.measurements = oracle.timed_ops - ops0
    return es


def reduce_randomized(oracle: TimingOracle, es: EvictionSet, rounds: int = 50,
                      core: int = 0) -> EvictionSet:
    """Remove members the target never evicted over ``rounds`` priming rounds."""
    members = np.asarray(es.members, dtype=np.int64)
    if len(members) == 0:
        return es
    th = oracle.params.miss_threshold
    hits = np.zeros(len(members), dtype=np.int64)
    for _ in range(rounds):
        oracle.clflush(es.target, core)
        oracle.flush_many(members, core)
        oracle.read_many(members, core)
        oracle.read(es.target, core)
        hits += oracle.timed_read_many(members, core) > th
    kept = [int(m) for m, h in zip(members, hits) if h > 0]
    return replace(es, members=kept)


# ------------------------------------------------------- ground-truth checks
def true_colliders(oracle: TimingOracle, es: EvictionSet) -> np.ndarray:
    """Scanned candidates whose W+W key equals the target's (classic)."""
    cands = es.scanned()
    key = (oracle.phys_many(cands) >> 6) & 0x3FF
    return cands[key == ((oracle.phys(es.target) >> 6) & 0x3FF)]


def coverage(oracle: TimingOracle, es: EvictionSet) -> tuple[int, int]:
    """(detected, total) truly colliding candidates in the scanned range."""
    truth = true_colliders(oracle, es)
    pos = set(es.positives)
    return sum(int(a) in pos for a in truth), len(truth)


def all_congruent(oracle: TimingOracle, es: EvictionSet) -> bool:
    g = oracle.cache.geometry
    pt = oracle.phys(es.target)
    return all(congruent(oracle.phys(m), pt, g) for m in es.members)


def collides_any_way(oracle: TimingOracle, a: int, target: int) -> bool:
    """Randomized ground truth: some way maps ``a`` and ``target`` alike."""
    return bool(oracle.cache.collides_in(oracle.phys(a), oracle.phys(target)))


def ww_collides(oracle: TimingOracle, a: int, target: int) -> bool:
    return collides(oracle.phys(a), oracle.phys(target))
