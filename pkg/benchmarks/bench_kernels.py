"""Compare the numba kernels with the plain-Python fallback.

Each variant runs in its own interpreter, because the switch
(BAKERNEWTON_DISABLE_NUMBA) is read at import time.

    python benchmarks/bench_kernels.py [--points 200] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time


def worker(points: int, repeat: int) -> dict:
    import numpy as np

    from bakernewton._jit import HAS_NUMBA
    from bakernewton.config import RunConfig
    from bakernewton.pipeline import make_evaluator

    ev = make_evaluator(RunConfig())
    rng = np.random.default_rng(0)
    ws = np.exp(rng.uniform(0, np.log(1e5), points) + 1j * rng.uniform(-np.pi, np.pi, points))

    t = time.perf_counter()
    ev.log_values(ws[:2])  # compile, or warm caches
    warm = time.perf_counter() - t
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        lv, d1, _, _ = ev.log_values(ws)
        best = min(best, time.perf_counter() - t)
    return {"numba": HAS_NUMBA, "warmup_s": warm, "best_s": best,
            "per_point_us": 1e6 * best / points,
            "lnmod": lv.real.tolist(), "d1": [[z.real, z.imag] for z in d1]}


def run_variant(disable: bool, points: int, repeat: int) -> dict:
    env = dict(os.environ, BAKERNEWTON_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, __file__, "--worker", "--points", str(points), "--repeat", str(repeat)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.points, args.repeat)))
        return 0

    fast = run_variant(False, args.points, args.repeat)
    slow = run_variant(True, args.points, args.repeat)
    import numpy as np
    dl = np.max(np.abs(np.array(fast["lnmod"]) - np.array(slow["lnmod"])))
    dd = np.max(np.abs(np.array(fast["d1"]) - np.array(slow["d1"])))
    print(f"log Pi with derivatives at {args.points} points, |w| log-uniform in [1, 1e5]")
    print(f"{'variant':<10}{'warmup s':>12}{'best s':>12}{'us/point':>12}")
    for name, r in (("numba", fast), ("python", slow)):
        print(f"{name:<10}{r['warmup_s']:>12.3f}{r['best_s']:>12.4f}{r['per_point_us']:>12.1f}")
    print(f"speedup {slow['best_s'] / fast['best_s']:.1f}x; "
          f"max |diff| lnmod {dl:.2e}, (log Pi)' {dd:.2e}")
    if not fast["numba"]:
        print("note: numba is not importable, both variants ran the fallback")
    return 0


if __name__ == "__main__":
    sys.exit(main())
