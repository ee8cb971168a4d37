"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_backends.py [--quick]

Kernel rows call each backend module directly. Workload rows run a whole
experiment in a subprocess with WAWLAB_PURE_PYTHON toggled, because the
backend is bound once at import.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from wawlab._backend import load

SETUP = """
from wawlab.timing import make_oracle
from wawlab.probe import classify_pair
from wawlab.evset import build_classic
from wawlab.clocksync import recover, sample_stream
o = make_oracle("classic", seed=1)
b = o.pagemap.allocate_bytes(1 << 24)
"""

# name -> timed body
WORKLOADS = {
    "ww classify x200": """
for i in range(200):
    classify_pair(o, b, b + (1 << 16), b + (i % 15 + 1) * 64)
""",
    "classic evset build": "build_classic(o, o.pagemap.allocate(1) + 0x440, b, 1 << 24)",
    "clock sampling 100 P": "recover(sample_stream(o, 2, until=100 * 100000))",
}


def best_of(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, 1500).astype(np.int8)
    b = a.copy()
    b[rng.integers(0, 1500, 30)] ^= 1
    cyc = np.cumsum(np.full(30_000, 370, dtype=np.int64))
    lat = (118 + 30 * ((cyc // 50_000) & 1) + rng.normal(0, 15, cyc.size)).astype(np.int64)
    cases = {
        "nw_align 1500x1500": lambda k: k.nw_align(a, b, 1, -1, -8),
        "recover_edges 30k samples": lambda k: k.recover_edges(cyc, lat, 64, 16, 15.0),
    }
    mods = {n: load(n) for n in ("python", "cython")}
    for name, fn in cases.items():
        t = {n: best_of(lambda: fn(m), repeat) for n, m in mods.items()}
        yield name, t["python"], t["cython"]


def workload_rows(repeat):
    for name, code in WORKLOADS.items():
        t = {}
        for backend, flag in (("python", "1"), ("cython", "0")):
            env = dict(os.environ, WAWLAB_PURE_PYTHON=flag)
            prog = f"import time\n{SETUP}\nt0 = time.perf_counter()\n{code}\n" \
                "print(time.perf_counter() - t0)"
            runs = [float(subprocess.run([sys.executable, "-c", prog], env=env, check=True,
                                         capture_output=True, text=True).stdout)
                    for _ in range(repeat)]
            t[backend] = min(runs)
        yield name, t["python"], t["cython"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="single repetition")
    args = ap.parse_args(argv)
    repeat = 1 if args.quick else 3
    try:
        load("cython")
    except ImportError:
        sys.exit("compiled core not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'case':<28}{'python s':>10}{'cython s':>10}{'speedup':>9}")
    for rows in (kernel_rows(repeat), workload_rows(repeat)):
        for name, py, cy in rows:
            print(f"{name:<28}{py:>10.3f}{cy:>10.3f}{py / cy:>8.1f}x")


if __name__ == "__main__":
    main()
