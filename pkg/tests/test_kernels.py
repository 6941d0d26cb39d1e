import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicebench import _pykernels as py
from slicebench import kernels

BACKENDS = kernels.available_backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def test_fnv1a64_published_vectors():
    assert py.fnv1a64(b"") == 0xCBF29CE484222325
    assert py.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert py.fnv1a64(b"foobar") == 0x85944171F73967E8


def test_splitmix64_first_output():
    # reference SplitMix64 with state 0: first output
    assert py.mix64(py.GOLDEN_GAMMA) == 0xE220A8397B1DCDAF


def test_yates_matches_brute_force_contrasts():
    rng = np.random.default_rng(3)
    for k in range(1, 7):
        y = rng.uniform(1, 100, 1 << k)
        out = py.yates(y)
        for mask in range(1 << k):
            signs = [np.prod([1 if r >> i & 1 else -1 for i in range(k) if mask >> i & 1])
                     for r in range(1 << k)]
            assert out[mask] == pytest.approx(float(np.dot(signs, y)), rel=1e-12, abs=1e-9)


def test_yates_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        py.yates([1.0, 2.0, 3.0])


@needs_ext
class TestBackendParity:
    C = BACKENDS.get("cython")

    @given(st.lists(st.binary(max_size=40), min_size=1, max_size=50))
    def test_hash_keys(self, keys):
        assert list(self.C.hash_keys(keys)) == list(py.hash_keys(keys))
        assert all(self.C.hash_key(k) == py.hash_key(k) for k in keys)

    @given(st.integers(0, 2**64 - 1))
    def test_mix64(self, z):
        assert self.C.mix64(z) == py.mix64(z)

    @given(st.integers(0, 8).flatmap(
        lambda k: st.lists(st.floats(-1e6, 1e6), min_size=1 << k, max_size=1 << k)))
    def test_yates(self, values):
        assert self.C.yates(values) == py.yates(values)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32), n_nodes=st.integers(1, 5), rf_frac=st.floats(0, 1),
           in_flight=st.integers(1, 20), limit=st.sampled_from([0.0, 5.0, 50.0]),
           timeout=st.floats(1.0, 100.0))
    def test_simulate_batch(self, seed, n_nodes, rf_frac, in_flight, limit, timeout):
        rng = np.random.default_rng(seed)
        rf = 1 + int(rf_frac * (n_nodes - 1))
        n_tokens = n_nodes * 8
        tokens = np.sort(rng.integers(0, 2**63, n_tokens, dtype=np.uint64) * np.uint64(2))
        owners = np.concatenate([np.arange(n_nodes), rng.integers(0, n_nodes, n_tokens - n_nodes)])
        rng.shuffle(owners)
        owners = owners.astype(np.int64)
        n = 300
        hashes = rng.integers(0, 2**63, n, dtype=np.uint64) * np.uint64(2)
        args = (hashes, tokens, owners, rf, 1 + rng.integers(0, rf), rng.uniform(1, 20, n_nodes),
                rng.uniform(0, 1, n_nodes), 30.0, rng.uniform(0, 5, n_nodes),
                rng.uniform(0, 5, n_nodes), np.exp(0.3 * rng.standard_normal((n, rf))),
                rng.random((n, rf)), timeout, in_flight, limit)
        outs = {}
        for name, mod in (("py", py), ("c", self.C)):
            lat, to, busy = np.zeros(n), np.zeros(n, dtype=np.uint8), np.zeros(n_nodes)
            issued, elapsed = mod.simulate_batch(*args, lat, to, busy)
            outs[name] = (issued, elapsed, lat.tobytes(), to.tobytes(), busy.tobytes())
        assert outs["py"] == outs["c"]


def test_selected_backend_is_known():
    assert kernels.BACKEND in BACKENDS
