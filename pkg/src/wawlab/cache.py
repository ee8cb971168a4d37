"""Classic set-associative hierarchy: private L1/L2, shared sliced inclusive LLC."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from ._backend import kernel
from .addr import CacheGeometry, set_index, slice_of


class HitLevel(IntEnum):
    MISS = 0
    L1 = 1
    L2 = 2
    LLC = 3


@dataclass(frozen=True)
class AccessOutcome:
    level: HitLevel
    # (level, core or -1 for shared, physical line address)
    evicted: tuple[tuple[int, int, int], ...] = ()

    @property
    def hit(self) -> bool:
        return self.level != HitLevel.MISS


def _kind_is_write(kind: str) -> int:
    if kind == "read":
        return 0
    if kind == "write":
        return 1
    raise ValueError(f"access kind must be 'read' or 'write', not {kind!r}")


def _outcome(k, level) -> AccessOutcome:
    ev = tuple((lvl, core, line << 6) for lvl, core, line in k.last_evicted())
    return AccessOutcome(HitLevel(level), ev)


class ClassicCache:
    """Ground-truth state machine for a three-level inclusive hierarchy.

    Write-allocate, write-back; tags only. Replacement is true LRU by
    default, or uniform random (``policy="random"``).
    """

    is_scatter = False

    def __init__(self, geometry: CacheGeometry | None = None, n_cores: int = 4,
                 policy: str = "lru", seed: int = 0):
        g = geometry or CacheGeometry.classic_default()
        if len(g.levels) != 3:
            raise ValueError("classic hierarchy needs exactly L1, L2 and LLC levels")
        if policy not in ("lru", "random"):
            raise ValueError(f"unknown replacement policy {policy!r}")
        l1, l2, llc = g.levels
        self.geometry = g
        self.n_cores = n_cores
        self.policy = policy
        self.kernel = kernel.ClassicCache(
            n_cores, l1.sets, l1.ways, l2.sets, l2.ways,
            llc.sets, llc.ways, llc.slices, lru=(policy == "lru"), seed=seed)

    def access(self, a: int, core: int = 0, kind: str = "read") -> AccessOutcome:
        k = self.kernel
        return _outcome(k, k.access(core, int(a) >> 6, _kind_is_write(kind)))

    def flush(self, a: int) -> None:
        self.kernel.flush(int(a) >> 6)

    def is_cached(self, a: int, level: int | str = "LLC", core: int = 0) -> bool:
        """Oracle-only introspection."""
        lvl = HitLevel[level] if isinstance(level, str) else HitLevel(level)
        if lvl == HitLevel.MISS:
            raise ValueError("level must name a cache level")
        return bool(self.kernel.contains(int(a) >> 6, int(lvl), core))

    def llc_set(self, a: int) -> list[int]:
        """Lines (as byte addresses) in ``a``'s LLC set, LRU first."""
        g = self.geometry
        return [ln << 6 for ln in self.kernel.llc_lines(slice_of(a, g), set_index(a, g))]

    @property
    def writebacks(self) -> int:
        return self.kernel.writebacks

    def check_invariants(self) -> bool:
        return self.kernel.check_invariants()
