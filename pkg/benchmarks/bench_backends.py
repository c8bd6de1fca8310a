"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the switch
(``LAMPERTI_DISABLE_NUMBA``) is read at import. Both runs step identical
lattices, so the script also checks that they agree.

    python benchmarks/bench_backends.py [--paths 2000] [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from lamperti import kernels
from lamperti.models import model_from_config, preset_config
from lamperti.montecarlo import gen_fine_increments
from lamperti.solvers import simulate_transformed

paths, repeats = int(sys.argv[1]), int(sys.argv[2])
h = 2.0**-9
incs = np.vstack([gen_fine_increments(1, i, 512, h) for i in range(paths)])
out = {"backend": kernels.BACKEND, "rows": []}
for name in ("example-6.1", "example-6.2", "example-6.3", "example-6.4"):
    spec = model_from_config(preset_config(name))
    for scheme in ("proposed", "lbem"):
        simulate_transformed(spec, scheme, h, incs[:2])
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            y = simulate_transformed(spec, scheme, h, incs)
            best = min(best, time.perf_counter() - t0)
        out["rows"].append({"model": spec.tag, "scheme": scheme, "seconds": best,
                            "checksum": float(np.sum(y[:, -1]))})
print(json.dumps(out))
"""


def run(disable: bool, paths: int, repeats: int) -> dict:
    env = dict(os.environ, LAMPERTI_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(paths), str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    fast = run(False, args.paths, args.repeats)
    slow = run(True, args.paths, args.repeats)
    print(f"{args.paths} paths x 512 steps (h = 2^-9), best of {args.repeats}")
    print(f"{'model':<12} {'scheme':<9} {fast['backend']:>10} {slow['backend']:>10} {'speedup':>8}  agree")
    for a, b in zip(fast["rows"], slow["rows"]):
        agree = abs(a["checksum"] - b["checksum"]) <= 1e-9 * abs(b["checksum"])
        print(f"{a['model']:<12} {a['scheme']:<9} {a['seconds']:>9.4f}s {b['seconds']:>9.4f}s "
              f"{b['seconds'] / a['seconds']:>7.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
