# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``.

Every loop mirrors the Python reference step for step; floating point
operations happen in the same order so the outputs are bit-identical.
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL
cdef uint64_t MIX_C1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX_C2 = 0x94D049BB133111EBULL


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX_C1
    z = (z ^ (z >> 27)) * MIX_C2
    return z ^ (z >> 31)


def mix64(z):
    return _mix64(<uint64_t>z)


def hash_key(bytes key):
    cdef const unsigned char[:] buf = key
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(buf.shape[0]):
        h = (h ^ buf[i]) * FNV_PRIME
    return _mix64(h)


def hash_keys(keys):
    cdef Py_ssize_t n = len(keys), i, j, m
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef const unsigned char* p
    cdef bytes key
    cdef uint64_t h
    for i in range(n):
        key = keys[i]
        p = key
        m = len(key)
        h = FNV_OFFSET
        for j in range(m):
            h = (h ^ p[j]) * FNV_PRIME
        out[i] = _mix64(h)
    return out


def yates(values):
    cdef double[:] y = np.array(values, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    if n == 0 or (n & (n - 1)):
        raise ValueError("yates needs a power-of-two length")
    cdef double[:] tmp = np.empty(n, dtype=np.float64)
    cdef double[:] swap
    cdef Py_ssize_t half = n // 2, j, step
    cdef int k = 0
    while (1 << k) < n:
        k += 1
    for step in range(k):
        for j in range(half):
            tmp[j] = y[2 * j] + y[2 * j + 1]
            tmp[half + j] = y[2 * j + 1] - y[2 * j]
        swap = y
        y = tmp
        tmp = swap
    return [y[j] for j in range(n)]


cdef inline void _sift_down(double* heap, Py_ssize_t size) nogil:
    cdef Py_ssize_t pos = 0, child
    cdef double item = heap[0]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and heap[child + 1] < heap[child]:
            child += 1
        if heap[child] < item:
            heap[pos] = heap[child]
            pos = child
        else:
            break
    heap[pos] = item


def simulate_batch(const uint64_t[:] hashes, const uint64_t[:] tokens, const int64_t[:] owners,
                   int rf, int q_rank, const double[:] scale, const double[:] stall_prob,
                   double stall_ms, const double[:] hop_ms, const double[:] client_rtt_ms,
                   const double[:, :] jitter, const double[:, :] stall_u, double timeout_ms,
                   Py_ssize_t in_flight, double duration_limit_ms, double[:] out_latency,
                   uint8_t[:] out_timed_out, double[:] node_busy_ms):
    cdef Py_ssize_t n = hashes.shape[0], n_tokens = tokens.shape[0]
    cdef Py_ssize_t i, j, a, b, pos, lo, hi, mid, issued = 0
    cdef uint64_t h
    cdef int64_t node
    cdef int count
    cdef bint seen
    cdef double service, latency, start, end, elapsed = 0.0, t
    cdef double* slots = <double*>malloc(in_flight * sizeof(double))
    cdef int64_t* replicas = <int64_t*>malloc(rf * sizeof(int64_t))
    cdef double* times = <double*>malloc(rf * sizeof(double))
    if slots == NULL or replicas == NULL or times == NULL:
        free(slots); free(replicas); free(times)
        raise MemoryError()
    try:
        for i in range(in_flight):
            slots[i] = 0.0
        with nogil:
            for i in range(n):
                start = slots[0]
                if duration_limit_ms > 0.0 and start >= duration_limit_ms:
                    break
                h = hashes[i]
                lo = 0
                hi = n_tokens
                while lo < hi:
                    mid = (lo + hi) // 2
                    if tokens[mid] < h:
                        lo = mid + 1
                    else:
                        hi = mid
                pos = lo
                if pos == n_tokens:
                    pos = 0
                count = 0
                while count < rf:
                    node = owners[pos]
                    seen = False
                    for a in range(count):
                        if replicas[a] == node:
                            seen = True
                            break
                    if not seen:
                        replicas[count] = node
                        count += 1
                    pos += 1
                    if pos == n_tokens:
                        pos = 0
                for j in range(rf):
                    node = replicas[j]
                    service = scale[node] * jitter[i, j]
                    if stall_u[i, j] < stall_prob[node]:
                        service = service + stall_ms
                    node_busy_ms[node] = node_busy_ms[node] + service
                    if j > 0:
                        service = service + hop_ms[node]
                    # insertion sort keeps the order statistic exact
                    b = j
                    while b > 0 and times[b - 1] > service:
                        times[b] = times[b - 1]
                        b -= 1
                    times[b] = service
                latency = client_rtt_ms[replicas[0]] + times[q_rank - 1]
                if latency > timeout_ms:
                    latency = timeout_ms
                    out_timed_out[i] = 1
                else:
                    out_timed_out[i] = 0
                out_latency[i] = latency
                end = start + latency
                slots[0] = end
                _sift_down(slots, in_flight)
                if end > elapsed:
                    elapsed = end
                issued += 1
    finally:
        free(slots)
        free(replicas)
        free(times)
    return issued, elapsed
