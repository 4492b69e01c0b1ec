"""Compare the numba kernels against the pure-Python fallback.

Each backend runs in its own interpreter (the switch is read at import time).
For every size the script reports the best-of-``--repeat`` wall time of
``vr_persistence`` and ``image_persistence`` and checks that both backends
emit byte-identical diagrams.

    python benchmarks/bench_kernels.py --sizes 40 80 120
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
import numpy as np
from scipy.spatial.distance import cdist
from topoboot import BACKEND, FiltrationParams, image_persistence, plan_bootstraps, vr_persistence

sizes, repeat = json.loads(sys.argv[1]), int(sys.argv[2])
params = FiltrationParams(max_dim=1)
warm = np.random.default_rng(0).normal(size=(12, 2))
vr_persistence(cdist(warm, warm), params)  # compile / load cache outside the timings
image_persistence(cdist(warm, warm), plan_bootstraps(12, R=1).masks[0], params)
out = {"backend": BACKEND, "rows": []}
for n in sizes:
    rng = np.random.default_rng(n)
    t = rng.uniform(0, 2 * np.pi, n)
    x = np.column_stack([np.cos(t), np.sin(t)]) + 0.05 * rng.normal(size=(n, 2))
    D = cdist(x, x)
    mask = plan_bootstraps(n, R=1, master_seed=1).masks[0]
    best_vr = best_img = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        dg = vr_persistence(D, params)
        t1 = time.perf_counter()
        img = image_persistence(D, mask, params)
        t2 = time.perf_counter()
        best_vr, best_img = min(best_vr, t1 - t0), min(best_img, t2 - t1)
    digest = hashlib.sha256((dg.to_json() + img.to_json()).encode()).hexdigest()
    out["rows"].append({"n": n, "vr": best_vr, "image": best_img, "digest": digest})
print(json.dumps(out))
"""


def run_backend(sizes, repeat, disable):
    env = dict(os.environ, TOPOBOOT_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, json.dumps(sizes), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[40, 80, 120])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    fast = run_backend(args.sizes, args.repeat, disable=False)
    slow = run_backend(args.sizes, args.repeat, disable=True)
    print(f"{'N':>5} {'backend':>8} {'vr [s]':>10} {'image [s]':>10} {'speedup':>9}  same output")
    ok = True
    for f, s in zip(fast["rows"], slow["rows"]):
        same = f["digest"] == s["digest"]
        ok &= same
        speed = (s["vr"] + s["image"]) / max(f["vr"] + f["image"], 1e-12)
        print(f"{f['n']:>5} {fast['backend']:>8} {f['vr']:>10.4f} {f['image']:>10.4f}")
        print(f"{s['n']:>5} {slow['backend']:>8} {s['vr']:>10.4f} {s['image']:>10.4f} "
              f"{speed:>8.1f}x  {'yes' if same else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
