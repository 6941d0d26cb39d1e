"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--ops 20000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from slicebench import kernels
from slicebench.simring import RingConfig, SimRing
from slicebench.workload import key_bytes


def batch_args(ring, hashes, rng):
    n, rf = len(hashes), 2
    return dict(hashes=hashes, tokens=ring.tokens, owners=ring.owners, rf=rf, q_rank=2,
                scale=np.full(3, 4.0), stall_prob=np.full(3, 0.1), stall_ms=50.0,
                hop_ms=np.full(3, 0.3), client_rtt_ms=np.full(3, 0.4),
                jitter=np.exp(0.2 * rng.standard_normal((n, rf))),
                stall_u=rng.random((n, rf)), timeout_ms=1000.0, in_flight=16,
                duration_limit_ms=0.0, out_latency=np.empty(n),
                out_timed_out=np.empty(n, dtype=np.uint8), node_busy_ms=np.zeros(3))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ops", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ring = SimRing(RingConfig())
    keys = [key_bytes(i) for i in range(args.ops)]
    values = list(np.random.default_rng(1).random(2 ** 12))
    backends = kernels.available_backends()
    if len(backends) < 2:
        print("note: compiled backend unavailable, timing the fallback only")

    results = {}
    for name, mod in sorted(backends.items()):
        hashes = mod.hash_keys(keys)
        prep = batch_args(ring, hashes, np.random.default_rng(2))
        cases = {
            "hash_keys": lambda: mod.hash_keys(keys),
            "simulate_batch": lambda: mod.simulate_batch(**{**prep,
                                                            "node_busy_ms": np.zeros(3)}),
            "yates(4096)": lambda: mod.yates(values),
        }
        for case, fn in cases.items():
            results[(case, name)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    names = sorted(backends)
    print(f"{'kernel':<16}" + "".join(f"{n + ' (ms)':>16}" for n in names)
          + ("   speedup" if len(names) == 2 else ""))
    for case in ("hash_keys", "simulate_batch", "yates(4096)"):
        times = [results[(case, n)] for n in names]
        line = f"{case:<16}" + "".join(f"{t * 1e3:>16.2f}" for t in times)
        if len(names) == 2:
            line += f"   {times[names.index('python')] / times[names.index('cython')]:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
