"""ScatterCache-style randomized hierarchy.

Every way has its own keyed index function; lookups probe one slot per
way and misses fill a uniformly random way. The keyed mixer stands in for
a round-reduced block cipher: only index pseudorandomness matters here.
"""
from __future__ import annotations

from ._backend import kernel
from .addr import CacheGeometry
from .cache import AccessOutcome, HitLevel, _kind_is_write, _outcome

M64 = (1 << 64) - 1


def split_key(key: int) -> tuple[int, int]:
    return key & M64, (key >> 64) & M64


def way_index(key: int, way: int, a: int, sets: int) -> int:
    """Set index of physical address ``a`` in ``way`` under a 128-bit key."""
    k0, k1 = split_key(key)
    return kernel.scatter_hash(k0, k1, way, int(a) >> 6) & (sets - 1)


class ScatterCacheModel:
    """Two levels: private L1 per core and a shared L2 inclusive of L1.

    One key serves both levels. ``access`` reports L2 hits as
    ``HitLevel.LLC`` since L2 is the last level here.
    """

    is_scatter = True

    def __init__(self, geometry: CacheGeometry | None = None, key: int = 0,
                 n_cores: int = 4, seed: int = 0):
        g = geometry or CacheGeometry.scatter_default()
        if len(g.levels) != 2:
            raise ValueError("scatter hierarchy needs exactly two levels")
        l1, l2 = g.levels
        self.geometry = g
        self.key = key
        self.n_cores = n_cores
        k0, k1 = split_key(key)
        self.kernel = kernel.ScatterCache(n_cores, l1.sets, l1.ways, l2.sets, l2.ways,
                                          k0, k1, seed=seed)

    def way_index(self, way: int, a: int, level: int = 2) -> int:
        return self.kernel.way_index(way, int(a) >> 6, level)

    def indices(self, a: int) -> list[int]:
        """L2 index of ``a`` in every way."""
        return [self.way_index(w, a) for w in range(self.geometry.ways)]

    def collides_in(self, a: int, b: int) -> list[int]:
        """Ways in which ``a`` and ``b`` share an L2 index (ground truth)."""
        return [w for w in range(self.geometry.ways)
                if self.way_index(w, a) == self.way_index(w, b)]

    def access(self, a: int, core: int = 0, kind: str = "read") -> AccessOutcome:
        k = self.kernel
        level = k.access(core, int(a) >> 6, _kind_is_write(kind))
        out = _outcome(k, level)
        if level == HitLevel.L2:
            out = AccessOutcome(HitLevel.LLC, out.evicted)
        return out

    def flush(self, a: int) -> None:
        self.kernel.flush(int(a) >> 6)

    def is_cached(self, a: int, level: int | str = "L2", core: int = 0) -> bool:
        if level in ("LLC", HitLevel.LLC, 3):
            level = 2
        if isinstance(level, str):
            level = {"L1": 1, "L2": 2}[level]
        return bool(self.kernel.contains(int(a) >> 6, int(level), core))

    def placement(self, a: int) -> tuple[int, int]:
        """(way, index) holding ``a`` in L2, or (-1, -1)."""
        return self.kernel.placement(int(a) >> 6)

    @property
    def writebacks(self) -> int:
        return self.kernel.writebacks

    def check_invariants(self) -> bool:
        return self.kernel.check_invariants()
