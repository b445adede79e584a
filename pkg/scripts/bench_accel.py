"""Benchmark the compiled elementwise kernels against the numpy fallback.

Runs the random-feature map hot loops (cos/sin with phase) at a few
problem sizes under both code paths and prints a timing table.  The
numpy path is selected by re-executing this script with
SPARSEREG_NUMBA=0, so each path is measured in a fresh interpreter.

Usage:  python3 scripts/bench_accel.py [--sizes 1000,10000] [--features 300]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def measure(sizes, D, repeats):
    from sparsereg import accel

    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        P = rng.normal(size=(n, D))
        b = rng.uniform(0, 2 * np.pi, D)
        # warm-up (triggers compilation on the numba path)
        accel.cos_plus_phase(P, b, 1.0)
        accel.sin_plus_phase(P, b)
        t0 = time.perf_counter()
        for _ in range(repeats):
            accel.cos_plus_phase(P, b, 1.0)
            accel.sin_plus_phase(P, b)
        rows.append({"n": n, "D": D, "seconds": (time.perf_counter() - t0) / repeats})
    return {"numba": accel.using_numba(), "rows": rows}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="1000,10000,50000")
    parser.add_argument("--features", type=int, default=300)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--emit-json", action="store_true", help="internal: print one path's timings as JSON")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if args.emit_json:
        print(json.dumps(measure(sizes, args.features, args.repeats)))
        return 0

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, SPARSEREG_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--emit-json", "--sizes", args.sizes,
             "--features", str(args.features), "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True,
        )
        payload = json.loads(out.stdout.strip().splitlines()[-1])
        results["numba" if payload["numba"] else "numpy"] = payload["rows"]

    if "numba" not in results:
        print("numba unavailable; only the numpy path was measured")
    print(f"{'n':>8} {'D':>5} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>8}")
    for i, row in enumerate(results["numpy"]):
        base = row["seconds"] * 1e3
        if "numba" in results:
            fast = results["numba"][i]["seconds"] * 1e3
            print(f"{row['n']:>8} {row['D']:>5} {base:>12.2f} {fast:>12.2f} {base / fast:>8.2f}")
        else:
            print(f"{row['n']:>8} {row['D']:>5} {base:>12.2f} {'-':>12} {'-':>8}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
