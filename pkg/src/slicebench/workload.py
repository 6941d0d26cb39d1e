"""Stress workloads, latency aggregation, and stress-summary parsing."""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import kernels
from .errors import (MissingFieldError, SummaryFormatError, TargetUnreachable, UnitError,
                     ValidationError, WorkloadAborted)


class Operation(str, Enum):
    WRITE = "write"
    READ = "read"

    @classmethod
    def parse(cls, value) -> "Operation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown operation {value!r} (expected write or read)") from None


class Consistency(str, Enum):
    ONE = "ONE"
    QUORUM = "QUORUM"
    ALL = "ALL"

    @classmethod
    def parse(cls, value) -> "Consistency":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValidationError(f"unknown consistency level {value!r}") from None

    def required(self, rf: int) -> int:
        """Replica acknowledgements needed at replication factor ``rf``."""
        if self is Consistency.ONE:
            return 1
        if self is Consistency.ALL:
            return rf
        return rf // 2 + 1


class KeyDistribution(str, Enum):
    UNIFORM = "uniform"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class WorkloadSpec:
    operation: Operation = Operation.WRITE
    entry_count: int = 10_000
    replication_factor: int = 2
    consistency: Consistency = Consistency.QUORUM
    duration_limit: float | None = None
    op_count: int = 10_000
    in_flight: int = 16
    key_distribution: KeyDistribution = KeyDistribution.UNIFORM
    value_size_bytes: int = 34
    seed: int = 0
    abort_timeout_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "operation", Operation.parse(self.operation))
        object.__setattr__(self, "consistency", Consistency.parse(self.consistency))
        try:
            object.__setattr__(self, "key_distribution",
                               KeyDistribution(str(getattr(self.key_distribution, "value",
                                                           self.key_distribution)).lower()))
        except ValueError:
            raise ValidationError(f"unknown key distribution {self.key_distribution!r}") from None
        for name in ("entry_count", "op_count", "in_flight", "replication_factor"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.value_size_bytes < 0:
            raise ValidationError("value_size_bytes must be >= 0")
        if self.duration_limit is not None and self.duration_limit <= 0:
            raise ValidationError("duration_limit must be positive when given")
        if not 0.0 <= self.abort_timeout_fraction <= 1.0:
            raise ValidationError("abort_timeout_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("operation", "consistency", "key_distribution"):
            d[k] = getattr(self, k).value
        return d

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "WorkloadSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown workload keys: {sorted(unknown)}")
        return cls(**{**data, **overrides})


@dataclass(frozen=True)
class LatencySample:
    latency_ms: float
    timed_out: bool = False
    op_index: int = 0


@dataclass(frozen=True)
class WorkloadStats:
    mean_latency_ms: float
    p50_ms: float | None
    p95_ms: float | None
    p99_ms: float | None
    ops_per_sec: float
    rows_per_sec: float
    timeout_count: int
    completed_ops: int
    operation: Operation = Operation.WRITE
    # diagnostics beyond the stress summary fields
    mean_completed_ms: float | None = None
    elapsed_s: float | None = None
    stop_reason: str | None = None

    @property
    def issued_ops(self) -> int:
        return self.completed_ops + self.timeout_count

    def to_dict(self) -> dict:
        d = asdict(self)
        d["operation"] = self.operation.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadStats":
        return cls(**{**data, "operation": Operation.parse(data["operation"])})


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile of an ascending sequence."""
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


@dataclass
class LatencyAccumulator:
    """Mergeable sample summary: exact histogram plus counters.

    Merging two accumulators equals accumulating the union of their samples.
    """

    histogram: Counter = field(default_factory=Counter)
    timeout_count: int = 0
    completed_latencies: Counter = field(default_factory=Counter)

    def add(self, latency_ms: float, timed_out: bool = False):
        self.histogram[latency_ms] += 1
        if timed_out:
            self.timeout_count += 1
        else:
            self.completed_latencies[latency_ms] += 1

    def merge(self, other: "LatencyAccumulator") -> "LatencyAccumulator":
        return LatencyAccumulator(self.histogram + other.histogram,
                                  self.timeout_count + other.timeout_count,
                                  self.completed_latencies + other.completed_latencies)

    @property
    def count(self) -> int:
        return sum(self.histogram.values())

    def stats(self, operation=Operation.WRITE, elapsed_s: float | None = None,
              stop_reason: str | None = None) -> WorkloadStats:
        n = self.count
        if n == 0:
            raise ValidationError("cannot aggregate an empty sample list")
        values = sorted(self.histogram.elements())
        # fsum is exactly rounded, so the mean does not depend on sample order
        mean = math.fsum(values) / n
        completed = n - self.timeout_count
        done = list(self.completed_latencies.elements())
        mean_completed = math.fsum(done) / len(done) if done else None
        if elapsed_s and elapsed_s > 0:
            rate = completed / elapsed_s
        else:
            rate = 0.0
        return WorkloadStats(
            mean_latency_ms=mean,
            p50_ms=nearest_rank(values, 50),
            p95_ms=nearest_rank(values, 95),
            p99_ms=nearest_rank(values, 99),
            ops_per_sec=rate,
            rows_per_sec=rate,
            timeout_count=self.timeout_count,
            completed_ops=completed,
            operation=Operation.parse(operation),
            mean_completed_ms=mean_completed,
            elapsed_s=elapsed_s,
            stop_reason=stop_reason,
        )


def aggregate_samples(samples: Iterable[LatencySample], operation=Operation.WRITE,
                      elapsed_s: float | None = None) -> WorkloadStats:
    """Aggregate samples; timeouts count toward the mean at their threshold value."""
    acc = LatencyAccumulator()
    for s in samples:
        if not math.isfinite(s.latency_ms) or s.latency_ms < 0:
            raise ValidationError(f"invalid latency sample {s.latency_ms!r}")
        acc.add(s.latency_ms, s.timed_out)
    return acc.stats(operation, elapsed_s)


# --- stress summary grammar -------------------------------------------------

_FLOAT = r"[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?"
_INT = r"\d+"
_LINE = re.compile(r"^(?P<key>[a-z0-9 ]+?)\s*:\s*(?P<value>\S+)(?:\s+(?P<unit>\S+))?\s*$")

# key -> (stats field, value regex, required unit)
SUMMARY_FIELDS = {
    "op rate": ("ops_per_sec", _FLOAT, "op/s"),
    "row rate": ("rows_per_sec", _FLOAT, "row/s"),
    "latency mean": ("mean_latency_ms", _FLOAT, "ms"),
    "latency median": ("p50_ms", _FLOAT, "ms"),
    "latency 95th percentile": ("p95_ms", _FLOAT, "ms"),
    "latency 99th percentile": ("p99_ms", _FLOAT, "ms"),
    "total ops": ("total_ops", _INT, None),
    "errors": ("timeout_count", _INT, None),
}
MANDATORY = ("op rate", "latency mean", "total ops")


def parse_stress_summary(text: str, operation=Operation.WRITE) -> WorkloadStats:
    """Parse the ``<key> : <value> <unit>`` stress summary format.

    Unknown keys are ignored. ``errors`` counts failed (timed-out) operations;
    ``completed_ops`` is ``total ops - errors``.
    """
    found: dict[str, float | int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or ":" not in line:
            continue
        key = line.split(":", 1)[0].strip()
        if key not in SUMMARY_FIELDS:
            continue
        attr, pattern, unit = SUMMARY_FIELDS[key]
        m = _LINE.match(line)
        if not m:
            raise SummaryFormatError(f"line {lineno}: malformed summary line {raw!r}")
        value, got_unit = m.group("value"), m.group("unit")
        if not re.fullmatch(pattern, value):
            raise SummaryFormatError(f"line {lineno}: bad numeral {value!r} for {key!r}")
        if got_unit != unit:
            raise UnitError(f"line {lineno}: {key!r} expects unit {unit!r}, got {got_unit!r}")
        if attr in found:
            raise SummaryFormatError(f"line {lineno}: duplicate field {key!r}")
        found[attr] = int(value) if pattern == _INT else float(value)
    missing = [k for k in MANDATORY if SUMMARY_FIELDS[k][0] not in found]
    if missing:
        raise MissingFieldError(f"stress summary missing mandatory field(s): {', '.join(missing)}")
    total = found.pop("total_ops")
    timeouts = found.pop("timeout_count", 0)
    if timeouts > total:
        raise SummaryFormatError("errors exceed total ops")
    return WorkloadStats(
        mean_latency_ms=found["mean_latency_ms"],
        p50_ms=found.get("p50_ms"),
        p95_ms=found.get("p95_ms"),
        p99_ms=found.get("p99_ms"),
        ops_per_sec=found["ops_per_sec"],
        rows_per_sec=found.get("rows_per_sec", found["ops_per_sec"]),
        timeout_count=timeouts,
        completed_ops=total - timeouts,
        operation=Operation.parse(operation),
    )


def _num(x: float) -> str:
    s = repr(float(x))
    if not re.fullmatch(_FLOAT, s):
        raise ValidationError(f"value {x!r} cannot be written in the summary format")
    return s


def render_summary(stats: WorkloadStats) -> str:
    """Inverse of :func:`parse_stress_summary` on the fields the format carries."""
    lines = [
        f"op rate : {_num(stats.ops_per_sec)} op/s",
        f"row rate : {_num(stats.rows_per_sec)} row/s",
        f"latency mean : {_num(stats.mean_latency_ms)} ms",
    ]
    for key, attr in (("latency median", "p50_ms"), ("latency 95th percentile", "p95_ms"),
                      ("latency 99th percentile", "p99_ms")):
        value = getattr(stats, attr)
        if value is not None:
            lines.append(f"{key} : {_num(value)} ms")
    lines.append(f"total ops : {stats.issued_ops}")
    lines.append(f"errors : {stats.timeout_count}")
    return "\n".join(lines) + "\n"


# --- driver -----------------------------------------------------------------

class KeyValueTarget(Protocol):
    """What :func:`run_workload` needs from a store."""

    node_count: int

    def is_ready(self) -> bool: ...

    def contains_all(self, key_hashes: np.ndarray) -> bool: ...

    def run_batch(self, operation: Operation, key_hashes: np.ndarray, *, rf: int,
                  consistency: Consistency, in_flight: int,
                  duration_limit_ms: float | None) -> "BatchOutcome": ...


@dataclass(frozen=True)
class BatchOutcome:
    latencies_ms: np.ndarray
    timed_out: np.ndarray
    elapsed_ms: float

    @property
    def issued(self) -> int:
        return len(self.latencies_ms)


_KEY_CACHE: dict[int, np.ndarray] = {}


def key_bytes(index: int) -> bytes:
    return b"%010d" % index


def keyspace_hashes(entry_count: int) -> np.ndarray:
    """Ring hashes of keys ``0..entry_count-1`` (cached)."""
    cached = _KEY_CACHE.get(entry_count)
    if cached is None:
        cached = kernels.hash_keys([key_bytes(i) for i in range(entry_count)])
        cached.setflags(write=False)
        _KEY_CACHE[entry_count] = cached
    return cached


def key_sequence(spec: WorkloadSpec) -> np.ndarray:
    """Deterministic key indices for ``spec``."""
    if spec.key_distribution is KeyDistribution.SEQUENTIAL:
        return np.arange(spec.op_count, dtype=np.int64) % spec.entry_count
    rng = np.random.default_rng(spec.seed)
    return rng.integers(0, spec.entry_count, size=spec.op_count, dtype=np.int64)


def populate(spec: WorkloadSpec, target: KeyValueTarget):
    """Write every key once so reads find data; statistics are discarded."""
    hashes = keyspace_hashes(spec.entry_count)
    target.run_batch(Operation.WRITE, hashes, rf=spec.replication_factor,
                     consistency=spec.consistency, in_flight=spec.in_flight,
                     duration_limit_ms=None)


def run_workload(spec: WorkloadSpec, target: KeyValueTarget) -> WorkloadStats:
    """Issue ``spec.op_count`` operations (or until ``duration_limit``) and aggregate.

    Whichever of op count and duration limit is reached first ends the run;
    ``stop_reason`` records which.
    """
    if not target.is_ready():
        raise TargetUnreachable("target is not ready")
    if spec.replication_factor > target.node_count:
        raise ValidationError(
            f"replication factor {spec.replication_factor} exceeds ring size {target.node_count}")
    hashes_all = keyspace_hashes(spec.entry_count)
    if spec.operation is Operation.READ and not target.contains_all(hashes_all):
        populate(spec, target)
    hashes = hashes_all[key_sequence(spec)]
    limit_ms = spec.duration_limit * 1000.0 if spec.duration_limit is not None else None
    out = target.run_batch(spec.operation, hashes, rf=spec.replication_factor,
                           consistency=spec.consistency, in_flight=spec.in_flight,
                           duration_limit_ms=limit_ms)
    issued = out.issued
    if issued == 0:
        raise WorkloadAborted("no operations were issued")
    timeouts = int(out.timed_out.sum())
    if timeouts / issued > spec.abort_timeout_fraction:
        raise WorkloadAborted(
            f"timeout fraction {timeouts / issued:.3f} exceeds abort threshold "
            f"{spec.abort_timeout_fraction}")
    if timeouts == issued:
        raise WorkloadAborted(f"zero completed operations ({timeouts} timed out)")
    acc = LatencyAccumulator()
    for lat, to in zip(out.latencies_ms.tolist(), out.timed_out.tolist()):
        acc.add(lat, bool(to))
    reason = "op_count" if issued == spec.op_count else "duration"
    return acc.stats(spec.operation, out.elapsed_ms / 1000.0, reason)
