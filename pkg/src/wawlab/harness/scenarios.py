"""Scenario runners. Each writes CSV files plus a ``manifest.json``."""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .. import __version__
from .._backend import BACKEND
from ..clocksync import recover, jitter, sample_stream, sync_error
from ..covert import ChannelConfig, channel_experiment
from ..evset import (EvictionSetError, all_congruent, build_classic, build_randomized,
                     collides_any_way, coverage, test_evset, test_evset_ratio)
from ..ppp import PppConfig, PppError, prime_prune_probe
from ..probe import Verdict, classify_pair, find_pairs, tpr_curve
from ..seeding import derive_seed
from .config import ExperimentConfig


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return v


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _oracle(cfg: ExperimentConfig, seed: int):
    from ..timing import make_oracle
    return make_oracle(cfg.mode, seed=seed, params=cfg.latency.build(cfg.scenario),
                       geometry=cfg.geometry.build(cfg.mode))


def _target(o, rng):
    return o.pagemap.allocate(1) + int(rng.integers(0, 64)) * 64


# ----------------------------------------------------------------------------
def run_hist(cfg, out):
    p = cfg.params
    o = _oracle(cfg, cfg.seed)
    rng = np.random.default_rng(derive_seed(cfg.seed, "hist") & 0xFFFFFFFF)
    base = o.pagemap.allocate(4096)
    (t, c, n), (_, _, n2) = find_pairs(o, base, 4096, 2, rng)
    n2 = n2 - (n2 & 0xFFF) + (t & 0xFFF)
    if (o.phys(n2) >> 6) & 0x3FF == (o.phys(t) >> 6) & 0x3FF:
        n2 = n
    col, non = [], []
    for j in range(p.iterations):
        if (j & 2) >> 1:
            non.append(o.write_write(t, n))
        else:
            col.append(o.write_write(t, c))
    m = min(len(col), len(non))
    files = [_write(os.path.join(out, "hist.csv"), ["colliding", "non_colliding"],
                    zip(col[:m], non[:m]))]
    reps = p.reps or 30
    d_pos = classify_pair(o, t, c, n, reps, p.th)
    d_neg = classify_pair(o, t, n, n2, reps, p.th) if n2 != n else None
    diff = float(np.mean(col) - np.mean(non))
    files.append(_write(os.path.join(out, "hist_summary.csv"),
                        ["mean_colliding", "mean_non_colliding", "mean_diff", "th",
                         "separated", "pair_verdict", "control_verdict"],
                        [[np.mean(col), np.mean(non), diff, p.th, diff > p.th,
                          d_pos.verdict.value,
                          d_neg.verdict.value if d_neg else "n/a"]]))
    return files


def run_tpr(cfg, out):
    p = cfg.params
    o = _oracle(cfg, cfg.seed)
    curve = tpr_curve(o, p.reps_list, trials=p.trials, th=p.th,
                      seed=derive_seed(cfg.seed, "tpr") & 0xFFFFFFFF)
    return [_write(os.path.join(out, "tpr.csv"), ["reps", "tpr", "trials"],
                   [[r, curve[r], p.trials] for r in p.reps_list])]


def run_evset_classic(cfg, out):
    p = cfg.params
    runs = p.runs or 100
    mem = p.mem_size or (1 << 24)
    reps = p.reps or 30
    rows = []
    for r in range(runs):
        s = derive_seed(cfg.seed, f"evset-classic-{r}")
        o = _oracle(cfg, s)
        rng = np.random.default_rng(s & 0xFFFFFFFF)
        base = o.pagemap.allocate_bytes(mem)
        tgt = _target(o, rng)
        try:
            es = build_classic(o, tgt, base, mem, reps=reps, th=p.th, variant=p.variant)
        except EvictionSetError:
            rows.append([r, False, 0, 0, False, o.timed_ops, 0, 0])
            continue
        ok = (len(es.members) == o.cache.geometry.ways and all_congruent(o, es)
              and test_evset(o, es.members, tgt))
        det, tot = coverage(o, es)
        rows.append([r, ok, len(es.positives), len(es.members), all_congruent(o, es),
                     es.measurements, det, tot])
    files = [_write(os.path.join(out, "evset_classic.csv"),
                    ["run", "success", "positives", "size", "all_congruent",
                     "measurements", "detected", "colliding"], rows)]
    det = sum(x[6] for x in rows)
    tot = sum(x[7] for x in rows)
    files.append(_write(os.path.join(out, "evset_classic_summary.csv"),
                        ["runs", "success_rate", "coverage", "mean_measurements"],
                        [[runs, sum(x[1] for x in rows) / runs, det / tot if tot else 0.0,
                          float(np.mean([x[5] for x in rows]))]]))
    return files


def _rand_run(cfg, s, method):
    p = cfg.params
    mem = p.mem_size or (1 << 25)
    o = _oracle(cfg, s)
    rng = np.random.default_rng(s & 0xFFFFFFFF)
    tgt = _target(o, rng)
    if method == "ww":
        base = o.pagemap.allocate_bytes(mem)
        es = build_randomized(o, tgt, base, mem, reps=p.reps or 2, th=p.th, p_e=p.p_e,
                              trials=p.ratio_trials)
    else:
        pmem = 1 << 28
        base = o.pagemap.allocate_bytes(pmem)
        es = prime_prune_probe(o, tgt, base, pmem,
                               PppConfig(prime_fraction=p.prime_fraction, p_e=p.p_e,
                                         max_rounds=p.max_rounds, trials=p.ratio_trials))
    good = sum(collides_any_way(o, m, tgt) for m in es.members)
    rate = test_evset_ratio(o, es.members, tgt, p.eval_trials)
    return es, good, rate


def run_evset_rand(cfg, out):
    runs = cfg.params.runs or 5
    rows = []
    for r in range(runs):
        s = derive_seed(cfg.seed, f"rand-{r}")
        try:
            es, good, rate = _rand_run(cfg, s, "ww")
        except EvictionSetError:
            rows.append([r, False, 0, 0, 0.0, 0])
            continue
        rows.append([r, True, len(es.members), good, rate, es.measurements])
    return [_write(os.path.join(out, "evset_rand.csv"),
                   ["run", "success", "size", "colliding_members", "eviction_rate",
                    "measurements"], rows)]


def run_ppp(cfg, out):
    runs = cfg.params.runs or 10
    rows = []
    for r in range(runs):
        s = derive_seed(cfg.seed, f"rand-{r}")
        for method in ("ww", "ppp"):
            try:
                es, good, rate = _rand_run(cfg, s, method)
            except (EvictionSetError, PppError):
                rows.append([method, r, False, 0, 0, 0, 0, 0.0])
                continue
            rows.append([method, r, True, es.measurements, es.rounds, len(es.members),
                         good, rate])
    files = [_write(os.path.join(out, "comparison.csv"),
                    ["method", "run", "success", "timed_ops", "rounds", "size",
                     "colliding_members", "eviction_rate"], rows)]
    ww = [x[3] for x in rows if x[0] == "ww" and x[2]]
    pp = [x[3] for x in rows if x[0] == "ppp" and x[2]]
    ratio = float(np.mean(pp) / np.mean(ww)) if ww and pp else 0.0
    files.append(_write(os.path.join(out, "comparison_summary.csv"),
                        ["ww_mean_timed_ops", "ppp_mean_timed_ops", "ratio"],
                        [[float(np.mean(ww)) if ww else 0.0,
                          float(np.mean(pp)) if pp else 0.0, ratio]]))
    return files


def run_clock(cfg, out):
    p = cfg.params
    o = _oracle(cfg, cfg.seed)
    P = o.params.clock_period
    until = (p.periods + 1) * P + P // 4
    traces = [sample_stream(o, core, until=until) for core in (2, 3)]
    rcs = [recover(t, p.avg_window, p.delta_window, p.edge_th) for t in traces]
    traces[0].to_csv(os.path.join(out, "clock_trace.csv"))
    files = [os.path.join(out, "clock_trace.csv")]
    files.append(_write(os.path.join(out, "clock_edges.csv"), ["observer", "cycle", "direction"],
                        [[i, int(c), "up" if d else "down"]
                         for i, rc in enumerate(rcs)
                         for c, d in zip(rc.edge_cycles, rc.edge_dirs)]))
    rows = []
    for i, (t, rc) in enumerate(zip(traces, rcs)):
        per = rc.periods
        j = jitter(rc)
        rows.append([i, len(t), len(rc), float(per.mean()), float(per.mean()) / P,
                     j, 100 * j / P])
    files.append(_write(os.path.join(out, "clock_observers.csv"),
                        ["observer", "samples", "edges", "mean_period", "period_ratio",
                         "jitter", "jitter_pct"], rows))
    s = sync_error(rcs[0], rcs[1])
    files.append(_write(os.path.join(out, "clock_summary.csv"),
                        ["period", "sync_error", "sync_pct"], [[P, s, 100 * s / P]]))
    return files


def run_covert(cfg, out):
    p = cfg.params
    divisions = (p.division,) if p.division else p.divisions
    lat = cfg.latency.build(cfg.scenario)
    rows = channel_experiment(ChannelConfig(avg_window=p.avg_window,
                                            delta_window=p.delta_window, edge_th=p.edge_th),
                              p.message_bytes * 8, p.repetitions, divisions,
                              seed=cfg.seed, params=lat)
    return [_write(os.path.join(out, "covert.csv"),
                   ["n", "transmission_error", "clock_error", "bits_per_period"],
                   [[r["n"], r["transmission_error"], r["clock_error"], r["bits_per_period"]]
                    for r in rows])]


SCENARIOS = {
    "hist": run_hist,
    "tpr": run_tpr,
    "evset-classic": run_evset_classic,
    "evset-rand": run_evset_rand,
    "ppp": run_ppp,
    "clock": run_clock,
    "covert": run_covert,
}


def run(cfg: ExperimentConfig, out_dir: str | None = None) -> list[str]:
    """Run ``cfg.scenario``; returns the written file paths, manifest last."""
    cfg.validate()
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    files = SCENARIOS[cfg.scenario](cfg, out)
    manifest = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "version": __version__,
        "backend": BACKEND,
        "cache": cfg.mode,
        "config": cfg.to_dict(),
        "outputs": [os.path.basename(f) for f in files],
    }
    mpath = os.path.join(out, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + [mpath]
