"""Address model: collision predicate, set/slice derivation, page mapping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NewType

import numpy as np

from ._backend import kernel

PhysAddr = NewType("PhysAddr", int)
VirtAddr = NewType("VirtAddr", int)

LINE_SIZE = 64
PAGE_SIZE = 4096
PAGE_SHIFT = 12
# bits 6..15 decide a Write+Write collision
COLLISION_SHIFT = 6
COLLISION_MASK = 0x3FF

VBASE = 0x7F00_0000_0000


def collides(a: int, b: int) -> bool:
    """True iff physical address bits 6..15 of ``a`` and ``b`` are equal."""
    return ((a ^ b) >> COLLISION_SHIFT) & COLLISION_MASK == 0


def collision_key(a):
    """Bits 6..15 of ``a``; works on ints and integer numpy arrays."""
    return (a >> COLLISION_SHIFT) & COLLISION_MASK


@dataclass(frozen=True)
class LevelGeometry:
    name: str
    sets: int
    ways: int
    slices: int = 1
    inclusive: bool = False
    private: bool = True
    line_size: int = LINE_SIZE

    def __post_init__(self):
        for label, v in (("sets", self.sets), ("slices", self.slices)):
            if v < 1 or v & (v - 1):
                raise ValueError(f"{self.name}: {label} must be a power of two, got {v}")
        if self.ways < 1:
            raise ValueError(f"{self.name}: ways must be >= 1")
        if self.line_size != LINE_SIZE:
            raise ValueError("line size is fixed at 64 bytes")

    @property
    def size(self) -> int:
        return self.sets * self.ways * self.slices * self.line_size

    @property
    def lines(self) -> int:
        return self.sets * self.ways * self.slices


@dataclass(frozen=True)
class CacheGeometry:
    """Cache hierarchy description.

    ``sets``, ``ways`` and ``slices`` describe the last level, which is the
    one eviction sets target. ``levels`` lists every level from L1 outward.
    """

    levels: tuple[LevelGeometry, ...]
    line_size: int = LINE_SIZE

    def __post_init__(self):
        if not self.levels:
            raise ValueError("geometry needs at least one level")

    @property
    def last(self) -> LevelGeometry:
        return self.levels[-1]

    @property
    def sets(self) -> int:
        return self.last.sets

    @property
    def ways(self) -> int:
        return self.last.ways

    @property
    def slices(self) -> int:
        return self.last.slices

    @classmethod
    def classic_default(cls) -> "CacheGeometry":
        # 32 KiB L1, 256 KiB L2 sharing the LLC index bits, 4 x 1 MiB LLC
        return cls((
            LevelGeometry("L1", 64, 8),
            LevelGeometry("L2", 1024, 4),
            LevelGeometry("LLC", 1024, 16, slices=4, inclusive=True, private=False),
        ))

    @classmethod
    def scatter_default(cls) -> "CacheGeometry":
        # 64 KiB 2-way L1, 1 MiB 8-way shared L2
        return cls((
            LevelGeometry("L1", 512, 2),
            LevelGeometry("L2", 2048, 8, inclusive=True, private=False),
        ))

    def to_dict(self) -> dict:
        return {lv.name: {"sets": lv.sets, "ways": lv.ways, "slices": lv.slices}
                for lv in self.levels}


def set_index(a: int, g) -> int:
    """(a / 64) mod sets. ``g`` may be a CacheGeometry or a LevelGeometry."""
    return (a >> 6) & (g.sets - 1)


def slice_of(a: int, g) -> int:
    """Xor-fold of bits 16 and up, in log2(slices)-bit chunks."""
    s = g.slices
    return kernel.fold_slice(int(a), s, s.bit_length() - 1)


def congruent(a: int, b: int, g) -> bool:
    """Same set index and slice in the last level of ``g``."""
    return set_index(a, g) == set_index(b, g) and slice_of(a, g) == slice_of(b, g)


class TranslationError(LookupError):
    pass


class FrameExhaustedError(MemoryError):
    pass


@dataclass
class PageMap:
    """Seeded virtual-to-physical page mapping.

    Frames are handed out in the order of a seeded permutation of the
    physical frame space, so the mapping is injective and reproducible.
    """

    seed: int = 0
    phys_size: int = 1 << 30
    page_size: int = PAGE_SIZE
    _order: np.ndarray = field(init=False, repr=False)
    _next: int = field(init=False, default=0, repr=False)
    _vnext: int = field(init=False, default=VBASE >> PAGE_SHIFT, repr=False)
    _regions: list = field(init=False, default_factory=list, repr=False)

    def __post_init__(self):
        if self.page_size != PAGE_SIZE:
            raise ValueError("only 4 KiB pages are modelled")
        n = self.phys_size // self.page_size
        self._order = np.random.default_rng(self.seed).permutation(n).astype(np.int64)

    @property
    def frames_total(self) -> int:
        return len(self._order)

    @property
    def frames_free(self) -> int:
        return len(self._order) - self._next

    def allocate(self, pages: int) -> VirtAddr:
        """Map ``pages`` contiguous virtual pages; returns the base address."""
        if pages < 1:
            raise ValueError("pages must be >= 1")
        if pages > self.frames_free:
            raise FrameExhaustedError(
                f"requested {pages} pages, {self.frames_free} frames left")
        frames = self._order[self._next:self._next + pages]
        self._next += pages
        vpage = self._vnext
        self._vnext += pages + 1  # leave an unmapped guard page
        self._regions.append((vpage, frames))
        return VirtAddr(vpage << PAGE_SHIFT)

    def allocate_bytes(self, size: int) -> VirtAddr:
        return self.allocate(-(-size // self.page_size))

    def _region(self, vpage):
        for start, frames in reversed(self._regions):
            if start <= vpage < start + len(frames):
                return start, frames
        raise TranslationError(f"virtual page {vpage << PAGE_SHIFT:#x} is not mapped")

    def translate(self, v: int) -> PhysAddr:
        vpage = v >> PAGE_SHIFT
        start, frames = self._region(vpage)
        return PhysAddr((int(frames[vpage - start]) << PAGE_SHIFT) | (v & (PAGE_SIZE - 1)))

    def translate_many(self, vs) -> np.ndarray:
        """Vectorised translate for an integer array of virtual addresses."""
        vs = np.asarray(vs, dtype=np.int64)
        out = np.empty_like(vs)
        if vs.size == 0:
            return out
        vp = vs >> PAGE_SHIFT
        done = np.zeros(vs.shape, dtype=bool)
        for start, frames in self._regions:
            m = (vp >= start) & (vp < start + len(frames))
            if m.any():
                out[m] = (frames[vp[m] - start] << PAGE_SHIFT) | (vs[m] & (PAGE_SIZE - 1))
                done |= m
        if not done.all():
            bad = int(vs[~done][0])
            raise TranslationError(f"virtual page {bad:#x} is not mapped")
        return out

    def is_mapped(self, v: int) -> bool:
        try:
            self._region(v >> PAGE_SHIFT)
        except TranslationError:
            return False
        return True
