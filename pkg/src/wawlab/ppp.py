"""Prime+Prune+Probe baseline for randomized caches."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evset import LINE, EvictionSet, meets_ratio
from .timing import TimingOracle


class PppError(RuntimeError):
    """Round budget exhausted before reaching the target eviction rate."""


@dataclass(frozen=True)
class PppConfig:
    prime_fraction: float = 0.5
    p_e: float = 0.9
    max_rounds: int = 2000
    trials: int = 200
    tolerance: float = 0.02
    confirm: int = 2
    max_prune_passes: int = 100

    def __post_init__(self):
        if not 0 <= self.prime_fraction <= 1:
            raise ValueError("prime_fraction must lie in [0, 1]")


def prune(kc, core: int, prime: np.ndarray, idx: np.ndarray, th: int, max_passes: int):
    """Re-read the prime set, dropping lines that miss, until a pass sees no miss.

    Returns (lines, indices, passes); ``passes`` is -1 if it never settled.
    """
    for k in range(max_passes):
        miss = kc.timed_read_many(core, prime) > th
        if not miss.any():
            return prime, idx, k + 1
        prime = prime[~miss]
        idx = idx[~miss]
    return prime, idx, -1


def prime_prune_probe(oracle: TimingOracle, target: int, mem_base: int, mem_size: int,
                      cfg: PppConfig | None = None, core: int = 0) -> EvictionSet:
    """Grow a generalized eviction set one observed eviction at a time.

    Each round primes a fresh block of lines covering ``prime_fraction``
    of the cache, prunes lines that miss until a full pass sees none,
    lets the target be accessed and probes the survivors. The first
    missing line of the probe pass joins the set; later misses in the same
    pass can be knock-on effects of the probe's own refills.
    """
    cfg = cfg or PppConfig()
    g = oracle.cache.geometry
    n_prime = int(g.last.lines * cfg.prime_fraction)
    th = oracle.params.miss_threshold
    ops0 = oracle.timed_ops
    if n_prime == 0:
        raise PppError("prime set is empty")
    n_lines = mem_size // LINE
    if n_lines < n_prime:
        raise ValueError("memory region smaller than one prime set")
    pool_phys = oracle.phys_many(mem_base + np.arange(n_lines, dtype=np.int64) * LINE)
    goal = cfg.p_e - cfg.tolerance
    ev: list[int] = []
    have = set()
    kc = oracle.core
    pt = oracle.phys(target)
    cursor = 0
    for rnd in range(cfg.max_rounds):
        if cursor + n_prime > n_lines:
            cursor = 0
        idx = np.arange(cursor, cursor + n_prime)
        cursor += n_prime
        prime = pool_phys[idx]
        kc.clflush(core, pt)
        kc.read_many(core, prime)
        prime, idx, passes = prune(kc, core, prime, idx, th, cfg.max_prune_passes)
        if passes < 0:
            continue  # never settled; discard this prime set
        kc.read(core, pt)  # victim access
        miss = np.nonzero(kc.timed_read_many(core, prime) > th)[0]
        if len(miss) == 0:
            continue
        v = int(mem_base + idx[miss[0]] * LINE)
        if v in have:
            continue
        have.add(v)
        ev.append(v)
        if all(meets_ratio(oracle, ev, target, goal, cfg.trials, core)
               for _ in range(cfg.confirm)):
            es = EvictionSet(ev, target, "probabilistic", positives=list(ev))
            es.measurements = oracle.timed_ops - ops0
            es.rounds = rnd + 1
            return es
    raise PppError(f"eviction rate {goal:.2f} not reached in {cfg.max_rounds} rounds "
                   f"({len(ev)} members)")
