"""Compiled kernels vs the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, time
import numpy as np
from htsim import NUMBA_ENABLED
from htsim.architectures import make_architecture
from htsim.harness import InputSpec, Jitter, ScenarioConfig, simulate
from htsim.numerics import eigenvalues

repeat = int(__import__("sys").argv[1])
cfg = ScenarioConfig(architecture=make_architecture("FPPF", force_lowpass=0.1),
                     input=InputSpec(kind="multisine", amplitude_m=0.01, freqs_hz=(0.2, 0.5, 1.3)),
                     duration_s=10.0, delay_ms=250.0, jitter=Jitter(40.0, 10.0, 1))
rng = np.random.default_rng(0)
mats = [rng.normal(size=(6, 6)) for _ in range(200)]

def best(fn):
    t0 = time.perf_counter(); fn(); first = time.perf_counter() - t0
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); runs.append(time.perf_counter() - t0)
    return first, min(runs)

out = {"numba": NUMBA_ENABLED}
out["simulate_10s"] = best(lambda: simulate(cfg))
out["eig_6x6_x200"] = best(lambda: [eigenvalues(m) for m in mats])
print(json.dumps(out))
"""


def run(disable, repeat):
    env = dict(os.environ, HTSIM_DISABLE_NUMBA="1" if disable else "0")
    r = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'kernel':<18}{'numba first':>13}{'numba best':>12}{'numpy best':>12}{'speedup':>9}")
    for key in ("simulate_10s", "eig_6x6_x200"):
        (f1, f), (_, s) = fast[key], slow[key]
        print(f"{key:<18}{f1:>12.3f}s{f:>11.4f}s{s:>11.4f}s{s / f:>8.1f}x")
    if not fast["numba"]:
        print("numba not importable: both columns ran the fallback")


if __name__ == "__main__":
    main()
