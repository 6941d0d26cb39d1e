"""Pure-Python implementations of the hot kernels.

These are the reference semantics; ``_ckernels.pyx`` mirrors them operation
for operation so both backends produce bit-identical results.
"""
import bisect
import heapq

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB

BACKEND = "python"


def mix64(z):
    """SplitMix64 finalizer."""
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def hash_key(key):
    """Ring position of ``key``: FNV-1a 64 followed by the SplitMix64 finalizer."""
    return mix64(fnv1a64(key))


def hash_keys(keys):
    return np.array([hash_key(k) for k in keys], dtype=np.uint64)


def yates(values):
    """Yates' algorithm: signed contrast sums for every effect bitmask.

    Output index ``m`` holds ``sum_r y_r * prod_{i in m} code_i(r)`` for a
    design in standard order (first factor alternates fastest).
    """
    y = [float(v) for v in values]
    n = len(y)
    if n == 0 or n & (n - 1):
        raise ValueError("yates needs a power-of-two length")
    half = n // 2
    k = n.bit_length() - 1
    for _ in range(k):
        sums = [y[2 * j] + y[2 * j + 1] for j in range(half)]
        diffs = [y[2 * j + 1] - y[2 * j] for j in range(half)]
        y = sums + diffs
    return y


def simulate_batch(hashes, tokens, owners, rf, q_rank, scale, stall_prob, stall_ms,
                   hop_ms, client_rtt_ms, jitter, stall_u, timeout_ms, in_flight,
                   duration_limit_ms, out_latency, out_timed_out, node_busy_ms):
    """Run a batch of operations on the token ring in virtual time.

    Returns ``(issued, elapsed_ms)``. Fills ``out_latency`` / ``out_timed_out``
    for the first ``issued`` operations and accumulates per-node busy time.
    """
    hashes_l = hashes.tolist()
    tokens_l = tokens.tolist()
    owners_l = owners.tolist()
    scale_l = scale.tolist()
    pstall_l = stall_prob.tolist()
    hop_l = hop_ms.tolist()
    rtt_l = client_rtt_ms.tolist()
    jit_l = jitter.tolist()
    stall_l = stall_u.tolist()
    busy = node_busy_ms.tolist()
    n_tokens = len(tokens_l)

    slots = [0.0] * in_flight
    lat_out = []
    to_out = []
    elapsed = 0.0
    issued = 0
    for i, h in enumerate(hashes_l):
        start = slots[0]
        if duration_limit_ms > 0.0 and start >= duration_limit_ms:
            break
        pos = bisect.bisect_left(tokens_l, h)
        if pos == n_tokens:
            pos = 0
        replicas = []
        while len(replicas) < rf:
            node = owners_l[pos]
            if node not in replicas:
                replicas.append(node)
            pos += 1
            if pos == n_tokens:
                pos = 0
        jrow = jit_l[i]
        srow = stall_l[i]
        times = []
        for j, node in enumerate(replicas):
            service = scale_l[node] * jrow[j]
            if srow[j] < pstall_l[node]:
                service = service + stall_ms
            busy[node] = busy[node] + service
            if j > 0:
                service = service + hop_l[node]
            times.append(service)
        times.sort()
        latency = rtt_l[replicas[0]] + times[q_rank - 1]
        if latency > timeout_ms:
            latency = timeout_ms
            to_out.append(1)
        else:
            to_out.append(0)
        lat_out.append(latency)
        end = start + latency
        heapq.heapreplace(slots, end)
        if end > elapsed:
            elapsed = end
        issued += 1

    out_latency[:issued] = lat_out
    out_timed_out[:issued] = to_out
    node_busy_ms[:] = busy
    return issued, elapsed
