"""Recovering the write-latency clock and measuring its quality.

A clock observer times serialized writes to one fixed line, smooths the
stream with a moving average and watches a ring of deltas (sample minus
average). A sustained positive delta marks a rising edge, a sustained
negative one a falling edge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .timing import TimingOracle

AVG_WINDOW = 64
DELTA_WINDOW = 16
EDGE_TH = 15.0

UP = 1
DOWN = 0


@dataclass(frozen=True)
class ClockTrace:
    cycles: np.ndarray
    latencies: np.ndarray
    core: int = 0

    def __post_init__(self):
        if len(self.cycles) != len(self.latencies):
            raise ValueError("cycles and latencies differ in length")
        if len(self.cycles) > 1 and not (np.diff(self.cycles) > 0).all():
            raise ValueError("trace cycles must strictly increase")

    def __len__(self):
        return len(self.cycles)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "latency"])
            w.writerows(zip(self.cycles.tolist(), self.latencies.tolist()))


@dataclass(frozen=True)
class RecoveredClock:
    edge_cycles: np.ndarray
    edge_dirs: np.ndarray  # 1 rising, 0 falling

    def __len__(self):
        return len(self.edge_cycles)

    def rising(self) -> np.ndarray:
        return self.edge_cycles[self.edge_dirs == UP]

    def falling(self) -> np.ndarray:
        return self.edge_cycles[self.edge_dirs == DOWN]

    @property
    def periods(self) -> np.ndarray:
        """T_j: distance between consecutive rising edges."""
        return np.diff(self.rising())

    def level_at(self, cycle: int) -> int:
        """Recovered binary level at ``cycle``; -1 before the first edge."""
        k = int(np.searchsorted(self.edge_cycles, cycle, side="right")) - 1
        return -1 if k < 0 else int(self.edge_dirs[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "direction"])
            w.writerows(zip(self.edge_cycles.tolist(),
                            ["up" if d == UP else "down" for d in self.edge_dirs]))

    @classmethod
    def ideal(cls, period: int, start: int, stop: int) -> "RecoveredClock":
        """True edges of the oracle clock in [start, stop)."""
        half = period // 2
        k0 = -(-start // half)
        cyc = np.arange(k0, stop // half + 1, dtype=np.int64) * half
        cyc = cyc[(cyc >= start) & (cyc < stop)]
        dirs = ((cyc // half) % 2 == 0).astype(np.int8)  # level high in the first half
        return cls(cyc, dirs)


def sample_stream(oracle: TimingOracle, core: int, n: int = -1, addr: int | None = None,
                  until: int = -1) -> ClockTrace:
    """Serialize-bracketed timed writes to one line, ``n`` samples or up to ``until``.

    The line is written once beforehand so every sample hits the cache.
    """
    if addr is None:
        addr = oracle.pagemap.allocate(1) + 0x80 * (core + 1) if oracle.pagemap else 0x80 * (core + 1)
    oracle.write(addr, core)
    cyc, lat = oracle.sample_writes(addr, core, n, until)
    return ClockTrace(cyc, lat, core)


def recover(trace: ClockTrace, avg_window: int = AVG_WINDOW, delta_window: int = DELTA_WINDOW,
            edge_th: float = EDGE_TH) -> RecoveredClock:
    if avg_window < 1 or delta_window < 1:
        raise ValueError("windows must be >= 1")
    if edge_th <= 0:
        raise ValueError("edge_th must be > 0")
    if len(trace) < avg_window + delta_window - 1:
        raise ValueError(f"trace of {len(trace)} samples is shorter than the windows")
    ec, ed = kernel.recover_edges(trace.cycles, trace.latencies, avg_window,
                                  delta_window, edge_th)
    return RecoveredClock(ec, ed)


def jitter_of(periods) -> float:
    p = np.asarray(periods, dtype=np.float64)
    if len(p) < 2:
        raise ValueError("jitter needs at least two periods")
    return float(np.mean(np.abs(np.diff(p))))


def jitter(rc: RecoveredClock) -> float:
    """J_cc: mean absolute difference of consecutive periods."""
    return jitter_of(rc.periods)


def pair_edges(rc0: RecoveredClock, rc1: RecoveredClock, max_offset: float | None = None):
    """Match edges by index after aligning the first edges.

    Leading edges of one clock without a counterpart (earlier than the
    other's first same-direction edge by more than ``max_offset``) are
    dropped first. Returns two equally long cycle arrays.
    """
    c0, d0 = rc0.edge_cycles, rc0.edge_dirs
    c1, d1 = rc1.edge_cycles, rc1.edge_dirs
    if len(c0) == 0 or len(c1) == 0:
        return c0[:0], c1[:0]
    if max_offset is None:
        per = np.concatenate([rc0.periods, rc1.periods])
        max_offset = float(np.median(per)) / 4 if len(per) else np.inf
    i = j = 0
    while i < len(c0) and j < len(c1):
        if d0[i] != d1[j]:
            if c0[i] < c1[j]:
                i += 1
            else:
                j += 1
        elif c1[j] - c0[i] > max_offset:
            i += 1
        elif c0[i] - c1[j] > max_offset:
            j += 1
        else:
            break
    m = min(len(c0) - i, len(c1) - j)
    return c0[i:i + m], c1[j:j + m]


def sync_error(rc0: RecoveredClock, rc1: RecoveredClock) -> float:
    """S_cc: mean absolute cycle difference of corresponding edges."""
    a, b = pair_edges(rc0, rc1)
    if len(a) == 0:
        raise ValueError("no corresponding edges")
    return float(np.mean(np.abs(a - b)))
