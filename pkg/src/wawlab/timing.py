"""Attacker-visible timing oracle.

Attack code talks only to :class:`TimingOracle`: timed reads and writes,
flushes, serialization and fences, all in virtual cycles. Underneath, the
oracle drives a ground-truth cache model and adds the Write+Write penalty,
the square-wave write-latency clock and Gaussian noise.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._backend import kernel
from .addr import CacheGeometry, PageMap
from .cache import ClassicCache
from .randcache import ScatterCacheModel
from .seeding import derive_seed


@dataclass(frozen=True)
class LatencyParams:
    l1_hit: int = 4
    l2_hit: int = 12
    llc_hit: int = 40
    miss: int = 200
    penalty_waw: int = 100
    clock_period: int = 100_000
    clock_amplitude: int = 30
    noise_sigma: float = 15.0
    serialize_cost: int = 250
    fence_cost: int = 30
    flush_cost: int = 50
    read_clock: bool = False

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not isinstance(v, bool) and v < 0:
                raise ValueError(f"{k} must be >= 0")

    @property
    def miss_threshold(self) -> int:
        """Midpoint between last-level hit and memory latency."""
        return (self.llc_hit + self.miss) // 2

    def quiet(self) -> "LatencyParams":
        """Same magnitudes without noise and without the clock."""
        return replace(self, noise_sigma=0.0, clock_amplitude=0)


def clock_level(cycle: int, period: int, amplitude: int) -> int:
    if period <= 0:
        return 0
    return amplitude if 2 * (cycle % period) < period else 0


class TimingOracle:
    """Per-core cycle cursors over one shared cache model.

    Every method takes virtual addresses; translation goes through the
    page map (identity when none is given).
    """

    def __init__(self, cache, params: LatencyParams | None = None,
                 pagemap: PageMap | None = None, n_cores: int | None = None,
                 seed: int = 0, record: bool = False):
        self.cache = cache
        self.params = p = params or LatencyParams()
        self.pagemap = pagemap
        self.n_cores = n_cores or cache.n_cores
        self.seed = seed
        self.core = kernel.OracleCore(
            cache.kernel, self.n_cores, p.l1_hit, p.l2_hit, p.llc_hit, p.miss,
            p.penalty_waw, p.clock_period, p.clock_amplitude, p.noise_sigma,
            p.serialize_cost, p.fence_cost, p.flush_cost, p.read_clock, seed)
        self.record = record
        self.trace: list[tuple[int, int, str, int]] = []

    # translation --------------------------------------------------------
    def phys(self, v: int) -> int:
        return int(v) if self.pagemap is None else self.pagemap.translate(int(v))

    def phys_many(self, vs) -> np.ndarray:
        if self.pagemap is None:
            return np.asarray(vs, dtype=np.int64)
        return self.pagemap.translate_many(vs)

    # time ---------------------------------------------------------------
    def now(self, core: int = 0) -> int:
        return self.core.now(core)

    @property
    def cycle(self) -> int:
        return self.core.global_cycle()

    def advance_to(self, core: int, t: int) -> None:
        self.core.advance_to(core, int(t))

    def clock_level(self, cycle: int) -> int:
        return self.core.clock_level(int(cycle))

    @property
    def timed_ops(self) -> int:
        return self.core.timed_ops

    @property
    def mem_ops(self) -> int:
        return self.core.mem_ops

    def _log(self, core, op, t, lat):
        if self.record:
            self.trace.append((t, core, op, lat))

    # single operations ----------------------------------------------------
    def read(self, a: int, core: int = 0) -> None:
        t = self.now(core)
        lat = self.core.read(core, self.phys(a))
        self._log(core, "read", t, lat)

    def timed_read(self, a: int, core: int = 0) -> int:
        t = self.now(core)
        lat = self.core.timed_read(core, self.phys(a))
        self._log(core, "timed_read", t, lat)
        return lat

    def write(self, a: int, core: int = 0, nontemporal: bool = False) -> None:
        t = self.now(core)
        lat = self.core.write(core, self.phys(a), nontemporal)
        self._log(core, "write_nt" if nontemporal else "write", t, lat)

    def timed_write(self, a: int, core: int = 0, nontemporal: bool = False) -> int:
        t = self.now(core)
        lat = self.core.timed_write(core, self.phys(a), nontemporal)
        self._log(core, "timed_write_nt" if nontemporal else "timed_write", t, lat)
        return lat

    def clflush(self, a: int, core: int = 0) -> None:
        t = self.now(core)
        self.core.clflush(core, self.phys(a))
        self._log(core, "clflush", t, 0)

    def serialize(self, core: int = 0) -> None:
        t = self.now(core)
        self.core.serialize(core)
        self._log(core, "serialize", t, 0)

    def fence(self, core: int = 0) -> None:
        t = self.now(core)
        self.core.fence(core)
        self._log(core, "fence", t, 0)

    # fused operations (not recorded in the trace) --------------------------
    def write_write(self, target: int, candidate: int, core: int = 0) -> int:
        t = self.now(core)
        lat = self.core.ww(core, self.phys(target), self.phys(candidate))
        self._log(core, "write_write", t, lat)
        return lat

    def ww_sums(self, target, c0, c1, reps, core=0):
        return self.core.ww_sums(core, self.phys(target), self.phys(c0), self.phys(c1), reps)

    def read_many(self, vs, core=0):
        self.core.read_many(core, self.phys_many(vs))

    def timed_read_many(self, vs, core=0) -> np.ndarray:
        return self.core.timed_read_many(core, self.phys_many(vs))

    def flush_many(self, vs, core=0):
        self.core.flush_many(core, self.phys_many(vs))

    def evict_trial(self, target, members, core=0, threshold=None) -> bool:
        th = self.params.miss_threshold if threshold is None else threshold
        return bool(self.core.evict_trial(core, self.phys(target),
                                          self.phys_many(members), th))

    def sample_writes(self, a, core=0, n=-1, until=-1):
        return self.core.sample_writes(core, self.phys(a), n, until)

    # export ---------------------------------------------------------------
    def export_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "core", "op", "latency"])
            w.writerows(self.trace)


def make_oracle(mode: str = "classic", seed: int = 0, params: LatencyParams | None = None,
                geometry: CacheGeometry | None = None, n_cores: int = 4,
                phys_size: int = 1 << 30, key: int | None = None,
                policy: str = "lru", record: bool = False) -> TimingOracle:
    """Build a cache, page map and oracle from one master seed."""
    if mode == "classic":
        cache = ClassicCache(geometry, n_cores=n_cores, policy=policy,
                             seed=derive_seed(seed, "replacement"))
    elif mode == "scatter":
        if key is None:
            key = derive_seed(seed, "key0") | (derive_seed(seed, "key1") << 64)
        cache = ScatterCacheModel(geometry, key=key, n_cores=n_cores,
                                  seed=derive_seed(seed, "replacement"))
    else:
        raise ValueError(f"cache mode must be 'classic' or 'scatter', not {mode!r}")
    pm = PageMap(seed=derive_seed(seed, "pagemap") & 0xFFFFFFFF, phys_size=phys_size)
    return TimingOracle(cache, params, pm, n_cores, derive_seed(seed, "noise"), record)
