import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicebench.errors import (MissingFieldError, SummaryFormatError, UnitError,
                               ValidationError, WorkloadAborted)
from slicebench.simring import LatencyModelParams, RingConfig, build_ring
from slicebench.workload import (LatencyAccumulator, LatencySample, Operation, WorkloadSpec,
                                 WorkloadStats, aggregate_samples, key_sequence,
                                 parse_stress_summary, render_summary, run_workload)

MANDATORY = "op rate : 4500 op/s\nlatency mean : 93.5 ms\nlatency 99th percentile : 210.0 ms\ntotal ops : 10000\n"


def samples(values, timeouts=()):
    return [LatencySample(v, i in timeouts, i) for i, v in enumerate(values)]


class TestAggregate:
    def test_small(self):
        s = aggregate_samples(samples([10, 20, 30]))
        assert s.mean_latency_ms == 20 and s.p50_ms == 20
        assert s.completed_ops == 3 and s.timeout_count == 0

    def test_constant(self):
        s = aggregate_samples(samples([7.25] * 100))
        assert s.mean_latency_ms == s.p50_ms == s.p95_ms == s.p99_ms == 7.25

    def test_nearest_rank(self):
        s = aggregate_samples(samples(list(range(1, 101))))
        assert (s.p50_ms, s.p95_ms, s.p99_ms) == (50, 95, 99)

    def test_timeouts_counted_at_threshold(self):
        s = aggregate_samples(samples([10.0, 10.0, 100.0], timeouts={2}))
        assert s.mean_latency_ms == 40.0
        assert s.mean_completed_ms == 10.0
        assert s.timeout_count == 1 and s.completed_ops == 2 and s.issued_ops == 3

    def test_empty(self):
        with pytest.raises(ValidationError):
            aggregate_samples([])

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1e4), min_size=1, max_size=200), st.randoms())
    def test_order_independent(self, values, rnd):
        shuffled = list(values)
        rnd.shuffle(shuffled)
        assert aggregate_samples(samples(values)) == aggregate_samples(samples(shuffled))

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.floats(0, 1e4), st.booleans()), min_size=2, max_size=200),
           st.integers(1, 199))
    def test_merge_is_monoid(self, items, cut):
        cut = min(cut, len(items) - 1)
        whole, left, right = LatencyAccumulator(), LatencyAccumulator(), LatencyAccumulator()
        for i, (v, t) in enumerate(items):
            whole.add(v, t)
            (left if i < cut else right).add(v, t)
        assert left.merge(right).stats() == whole.stats()
        assert right.merge(left).stats() == whole.stats()
        assert whole.merge(LatencyAccumulator()).stats() == whole.stats()

    def test_invariants(self):
        s = aggregate_samples(samples([random.Random(1).uniform(1, 50) for _ in range(500)]))
        assert s.p50_ms <= s.p95_ms <= s.p99_ms and s.mean_latency_ms > 0


class TestParseSummary:
    def test_minimal(self):
        s = parse_stress_summary(MANDATORY)
        assert (s.mean_latency_ms, s.ops_per_sec, s.p99_ms) == (93.5, 4500.0, 210.0)
        assert s.p50_ms is None and s.completed_ops == 10000

    def test_full_and_unknown_lines(self):
        text = ("Results:\n" + MANDATORY + "row rate : 4400.5 row/s\nlatency median : 80.0 ms\n"
                "latency 95th percentile : 150.0 ms\nerrors : 12\nTotal GC count : 0\n")
        s = parse_stress_summary(text, Operation.READ)
        assert s.rows_per_sec == 4400.5 and s.p50_ms == 80.0 and s.p95_ms == 150.0
        assert s.timeout_count == 12 and s.completed_ops == 9988 and s.operation is Operation.READ

    def test_decimal_comma(self):
        with pytest.raises(SummaryFormatError):
            parse_stress_summary(MANDATORY.replace("93.5", "93,5"))

    def test_missing_op_rate(self):
        with pytest.raises(MissingFieldError, match="op rate"):
            parse_stress_summary(MANDATORY.replace("op rate : 4500 op/s\n", ""))

    def test_unit_mismatch(self):
        with pytest.raises(UnitError):
            parse_stress_summary(MANDATORY.replace("93.5 ms", "93.5 us"))

    def test_duplicate_field(self):
        with pytest.raises(SummaryFormatError, match="duplicate"):
            parse_stress_summary(MANDATORY + "latency mean : 1.0 ms\n")

    def test_integer_field_rejects_float(self):
        with pytest.raises(SummaryFormatError):
            parse_stress_summary(MANDATORY.replace("total ops : 10000", "total ops : 10000.5"))

    @settings(max_examples=200)
    @given(st.floats(1e-6, 1e7), st.lists(st.floats(0, 1e6), min_size=3, max_size=3),
           st.floats(0, 1e7), st.integers(0, 10**6), st.integers(0, 10**6))
    def test_round_trip(self, mean, pcts, rate, completed, timeouts):
        p50, p95, p99 = sorted(pcts)
        stats = WorkloadStats(mean, p50, p95, p99, rate, rate / 2, timeouts, completed)
        back = parse_stress_summary(render_summary(stats))
        for f in ("mean_latency_ms", "p50_ms", "p95_ms", "p99_ms", "ops_per_sec",
                  "rows_per_sec", "timeout_count", "completed_ops", "operation"):
            assert getattr(back, f) == getattr(stats, f)


def quiet_ring(**model):
    params = dict(cpu_alpha=0.0, ram_beta=0.0, jitter_sigma=0.0)
    params.update(model)
    return build_ring(RingConfig(latency_model=LatencyModelParams(**params)))


class TestRunWorkload:
    def test_write_all_complete(self, backend):
        s = run_workload(WorkloadSpec(Operation.WRITE, 10000, op_count=10000), quiet_ring())
        assert s.completed_ops == 10000 and s.timeout_count == 0

    def test_deterministic(self, backend):
        spec = WorkloadSpec(Operation.READ, 2000, op_count=3000, seed=11)
        model = dict(cpu_alpha=2.0, ram_beta=0.5, jitter_sigma=0.3)
        assert run_workload(spec, quiet_ring(**model)) == run_workload(spec, quiet_ring(**model))

    def test_forced_stall_aborts_on_timeout_fraction(self, backend):
        ring = build_ring(RingConfig(timeout_ms=100.0, latency_model=LatencyModelParams(
            ram_beta=10.0, stall_ms=500.0, jitter_sigma=0.0)))
        with pytest.raises(WorkloadAborted, match="timeout fraction"):
            run_workload(WorkloadSpec(Operation.READ, 100, op_count=100), ring)

    def test_read_populates_keyspace(self):
        ring = quiet_ring()
        spec = WorkloadSpec(Operation.READ, 500, op_count=100)
        run_workload(spec, ring)
        assert ring.ops_executed == 600

    def test_duration_limit_wins(self):
        spec = WorkloadSpec(Operation.WRITE, 100, op_count=10000, in_flight=1, duration_limit=0.5)
        s = run_workload(spec, quiet_ring(base_write_ms=10.0))
        # 10 ms per op one at a time: the 51st op would start at 500 ms
        assert s.completed_ops == 50 and s.stop_reason == "duration"

    def test_throughput_from_virtual_time(self):
        spec = WorkloadSpec(Operation.WRITE, 100, op_count=1000, in_flight=4)
        s = run_workload(spec, quiet_ring(base_write_ms=10.0))
        assert s.elapsed_s == pytest.approx(2.5) and s.ops_per_sec == pytest.approx(400.0)
        assert s.stop_reason == "op_count"

    def test_rf_bounded_by_ring(self):
        with pytest.raises(ValidationError, match="exceeds ring size"):
            run_workload(WorkloadSpec(replication_factor=4), quiet_ring())

    def test_spec_validation(self):
        for bad in (dict(entry_count=0), dict(op_count=0), dict(in_flight=0),
                    dict(operation="scan"), dict(consistency="TWO")):
            with pytest.raises(ValidationError):
                WorkloadSpec(**bad)

    def test_key_sequences(self):
        seq = key_sequence(WorkloadSpec(entry_count=3, op_count=7, key_distribution="sequential"))
        assert seq.tolist() == [0, 1, 2, 0, 1, 2, 0]
        uni = key_sequence(WorkloadSpec(entry_count=10, op_count=1000, seed=5))
        assert set(uni.tolist()) == set(range(10))
        assert (uni == key_sequence(WorkloadSpec(entry_count=10, op_count=1000, seed=5))).all()
