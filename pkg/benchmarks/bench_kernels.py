"""Compare the numba-compiled kernels with their pure-Python fallback.

The JIT switch is read at import time, so each mode runs in a child process
(``SWITCHSPIN_NO_JIT=1`` for the fallback).  Every workload is run once to
warm up (this includes compilation, or loading it from the on-disk cache)
and then timed over ``--repeat`` runs; the best time is reported.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time


def workloads(quick: bool):
    import numpy as np

    from switchspin import _kernels as K
    from switchspin import (
        PulseSequence,
        SystemParams,
        bloch_trajectory,
        derive_frame,
        random_rotation,
        synthesize_selective,
    )

    frame = derive_frame(SystemParams(1.0, 1.0, -0.5))
    rng = np.random.default_rng(0)
    n_chain = 200 if quick else 2000
    seqs = rng.uniform(0, 15, size=(n_chain, 31))
    targets = [random_rotation(rng) for _ in range(2 if quick else 5)]
    traj_seq = PulseSequence(tuple(rng.uniform(1, 10, size=21)))
    ax2 = np.stack([frame.axes, frame.axes[::-1]])
    om2 = np.stack([frame.omegas, frame.omegas[::-1]])
    mt = np.array([[0.0, 0, 0, 1], [1.0, 0, 0, 0]])
    mtaus = rng.uniform(0, 20, size=12)

    def chains():
        for d in seqs:
            K.chain_product(d, frame.axes, frame.omegas, 0)

    def selective():
        for t in targets:
            synthesize_selective(frame, t, "alpha")

    def trajectory():
        bloch_trajectory(traj_seq, frame, [0.0, 0.0, 1.0], dt=0.01)

    def multi_sweep():
        K.multi_sweep(mtaus, np.full(12, 30.0), ax2, om2, mt, 96, 60)

    return {
        f"chain_product x{n_chain} (31 delays)": chains,
        f"synthesize_selective x{len(targets)}": selective,
        "bloch_trajectory (dt=0.01)": trajectory,
        "multi_sweep (12 delays, 2 chains)": multi_sweep,
    }


def worker(repeat: int, quick: bool) -> None:
    from switchspin._accel import JIT_ENABLED

    out = {"jit": JIT_ENABLED, "results": {}}
    for name, fn in workloads(quick).items():
        t0 = time.perf_counter()
        fn()
        first = time.perf_counter() - t0
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["results"][name] = {"first": first, "best": best}
    print(json.dumps(out))


def run_mode(no_jit: bool, repeat: int, quick: bool) -> dict:
    env = dict(os.environ)
    env.pop("SWITCHSPIN_NO_JIT", None)
    if no_jit:
        env["SWITCHSPIN_NO_JIT"] = "1"
    cmd = [sys.executable, __file__, "--worker", "--repeat", str(repeat)] + (["--quick"] if quick else [])
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        worker(args.repeat, args.quick)
        return 0
    jit = run_mode(False, args.repeat, args.quick)
    pure = run_mode(True, args.repeat, args.quick)
    if not jit["jit"]:
        print("numba is unavailable; both columns use the Python fallback")
    print(f"{'workload':40s} {'numba first':>12s} {'numba best':>11s} {'python best':>12s} {'speedup':>8s}")
    for name, r in jit["results"].items():
        p = pure["results"][name]
        print(
            f"{name:40s} {r['first']:12.4f} {r['best']:11.4f} {p['best']:12.4f} {p['best'] / r['best']:7.1f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
