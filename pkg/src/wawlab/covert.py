"""Clock-synchronized Flush+Reload covert channel and its error analysis.

Four agents share one oracle: a sender and a receiver, each with its own
clock observer. Both derive slot boundaries from their own recovered
rising edges plus a running mean of recent periods; they share nothing
else but the cache.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernel
from .clocksync import AVG_WINDOW, DELTA_WINDOW, EDGE_TH, RecoveredClock, recover, sample_stream
from .seeding import derive_seed
from .timing import LatencyParams, TimingOracle, make_oracle

SCORES = (1, -1, -8)

SENDER, RECEIVER, SENDER_CLOCK, RECEIVER_CLOCK = 0, 1, 2, 3


@dataclass(frozen=True)
class ChannelConfig:
    division: int = 1
    read_threshold: int = 120
    shared_addr: int | None = None
    message: tuple[int, ...] | None = None
    avg_window: int = AVG_WINDOW
    delta_window: int = DELTA_WINDOW
    edge_th: float = EDGE_TH
    period_memory: int = 8
    start_periods: int = 3
    oracle_clock: bool = False

    def __post_init__(self):
        if self.division < 1:
            raise ValueError("division must be >= 1")


@dataclass(frozen=True)
class AlignmentReport:
    matches: int
    mismatches: int
    gaps_sent: int      # sent bits the receiver lost
    gaps_received: int  # received bits the sender never sent
    score: int
    length: int
    scores: tuple[int, int, int] = SCORES

    @property
    def gaps(self) -> int:
        return self.gaps_sent + self.gaps_received

    @property
    def transmission_error_rate(self) -> float:
        return 100.0 * self.mismatches / self.length if self.length else 0.0

    @property
    def clock_error_rate(self) -> float:
        return min(100.0, 100.0 * self.gaps / self.length) if self.length else 0.0


def align_nw(sent, received, scores=SCORES) -> AlignmentReport:
    """Global alignment; mismatches are transmission errors, gaps clock errors.

    Ties prefer a match/mismatch over a gap, then a gap in the received
    sequence over one in the sent sequence.
    """
    match, mismatch, gap = scores
    score, m, mm, ga, gb = kernel.nw_align(np.asarray(sent, dtype=np.int8),
                                           np.asarray(received, dtype=np.int8),
                                           match, mismatch, gap)
    return AlignmentReport(m, mm, ga, gb, score, len(sent), tuple(scores))


# ------------------------------------------------------------------ slots
def slot_times(rc: RecoveredClock, start: int, division: int, count: int,
               offset: float, memory: int = 8) -> np.ndarray:
    """Slot instants from rising edges detected at or after ``start``.

    The period estimate for an edge is the mean of up to ``memory``
    preceding rising-edge intervals, i.e. only what is known when the
    edge is detected.
    """
    rise = rc.rising()
    out = []
    for k in range(1, len(rise)):
        if rise[k] < start:
            continue
        lo = max(0, k - memory)
        period = (rise[k] - rise[lo]) / (k - lo)
        for s in range(division):
            out.append(int(rise[k] + math.floor((s + offset) * period / division)))
            if len(out) == count:
                return np.array(out, dtype=np.int64)
    return np.array(out, dtype=np.int64)


# ------------------------------------------------------------------ agents
def sender_agent(oracle: TimingOracle, message, slots, shared: int, core: int = SENDER):
    for bit, t in zip(message, slots):
        oracle.advance_to(core, t)
        yield
        if bit:
            oracle.read(shared, core)


def receiver_agent(oracle: TimingOracle, slots, shared: int, threshold: int, out: list,
                   core: int = RECEIVER):
    for t in slots:
        oracle.advance_to(core, t)
        yield
        lat = oracle.timed_read(shared, core)
        out.append(1 if lat < threshold else 0)
        oracle.clflush(shared, core)


def run_agents(oracle: TimingOracle, agents) -> None:
    """Dispatch the agent whose core is furthest behind; ties go to the lower core."""
    heap = [(oracle.now(core), core, gen) for core, gen in agents]
    heapq.heapify(heap)
    while heap:
        _, core, gen = heapq.heappop(heap)
        try:
            next(gen)
        except StopIteration:
            continue
        heapq.heappush(heap, (oracle.now(core), core, gen))


def send(oracle: TimingOracle, message, rc: RecoveredClock, cfg: ChannelConfig,
         core: int = SENDER, start: int = 0) -> int:
    """Run the sender alone; returns the number of accesses made."""
    slots = slot_times(rc, start, cfg.division, len(message), 0.0, cfg.period_memory)
    before = oracle.mem_ops
    run_agents(oracle, [(core, sender_agent(oracle, message, slots, cfg.shared_addr, core))])
    return oracle.mem_ops - before


def receive(oracle: TimingOracle, rc: RecoveredClock, cfg: ChannelConfig, n_bits: int,
            core: int = RECEIVER, start: int = 0) -> list[int]:
    slots = slot_times(rc, start, cfg.division, n_bits, 0.5, cfg.period_memory)
    out: list[int] = []
    run_agents(oracle, [(core, receiver_agent(oracle, slots, cfg.shared_addr,
                                              cfg.read_threshold, out, core))])
    return out


# --------------------------------------------------------------- channel
@dataclass
class ChannelRun:
    sent: list[int]
    received: list[int]
    report: AlignmentReport
    sender_accesses: int
    clocks: tuple[RecoveredClock, RecoveredClock] = field(repr=False, default=None)


def _clock_for(oracle: TimingOracle, core: int, horizon: int, cfg: ChannelConfig) -> RecoveredClock:
    if cfg.oracle_clock:
        return RecoveredClock.ideal(oracle.params.clock_period, 0, horizon)
    tr = sample_stream(oracle, core, until=horizon)
    return recover(tr, cfg.avg_window, cfg.delta_window, cfg.edge_th)


def run_channel(oracle: TimingOracle, message, cfg: ChannelConfig) -> ChannelRun:
    """Transmit ``message`` once and align what arrived.

    Clock observers only ever touch their own private line, so their
    sample streams do not depend on the other agents; they are sampled up
    front over the whole horizon. Sender and receiver still act only on
    edges detected before the slot they serve.
    """
    message = [int(b) for b in message]
    P = oracle.params.clock_period
    n = cfg.division
    shared = cfg.shared_addr
    if shared is None:
        shared = oracle.pagemap.allocate(1) + 0x100 if oracle.pagemap else 0x100
    start = cfg.start_periods * P + P // 2
    periods = -(-len(message) // n)
    horizon = start + int((periods + 4 + cfg.period_memory) * P * 1.05)
    rc_s = _clock_for(oracle, SENDER_CLOCK, horizon, cfg)
    rc_r = _clock_for(oracle, RECEIVER_CLOCK, horizon, cfg)
    s_slots = slot_times(rc_s, start, n, len(message), 0.0, cfg.period_memory)
    r_slots = slot_times(rc_r, start, n, len(message), 0.5, cfg.period_memory)
    received: list[int] = []
    before = oracle.mem_ops
    run_agents(oracle, [
        (SENDER, sender_agent(oracle, message, s_slots, shared)),
        (RECEIVER, receiver_agent(oracle, r_slots, shared, cfg.read_threshold, received)),
    ])
    accesses = oracle.mem_ops - before - len(received)
    rep = align_nw(message, received)
    return ChannelRun(message, received, rep, accesses, (rc_s, rc_r))


def random_message(n_bits: int, seed: int) -> list[int]:
    return np.random.default_rng(seed).integers(0, 2, size=n_bits).astype(int).tolist()


def channel_experiment(cfg: ChannelConfig, message_len: int, repetitions: int = 1,
                       divisions=(1, 2, 4, 8, 16, 32, 64), seed: int = 0,
                       params: LatencyParams | None = None) -> list[dict]:
    """Error rates as a function of the clock division ``n``.

    One fresh oracle per (n, repetition); ``message_len`` is in bits.
    """
    rows = []
    for n in divisions:
        te = ce = 0.0
        for r in range(repetitions):
            s = derive_seed(seed, f"covert-{n}-{r}")
            o = make_oracle("classic", seed=s, params=params)
            msg = list(cfg.message) if cfg.message is not None else \
                random_message(message_len, derive_seed(s, "message"))
            c = ChannelConfig(**{**cfg.__dict__, "division": n})
            run = run_channel(o, msg, c)
            te += run.report.transmission_error_rate
            ce += run.report.clock_error_rate
        rows.append({"n": n, "transmission_error": te / repetitions,
                     "clock_error": ce / repetitions, "bits_per_period": n})
    return rows
