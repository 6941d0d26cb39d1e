"""Deterministic simulated replicated key-value ring.

Keys hash onto a 64-bit token ring (FNV-1a 64 followed by the SplitMix64
finalizer); each node owns ``token_count`` tokens drawn from a seeded
SplitMix64 stream. A key's replicas are the first ``rf`` distinct owners
walking clockwise from the first token ``>=`` the key hash.

Per-replica service time::

    base_op_ms * (1 + cpu_alpha / vcpus) * jitter + stall

with ``jitter = exp(jitter_sigma * z)`` for a standard normal ``z`` and a
stall of ``stall_ms`` with probability ``min(1, ram_beta / ram_gb)``.
Operation latency is the client RTT to the coordinator (the primary replica)
plus the consistency-level order statistic of the replica times, where
non-coordinator replicas add their inter-node RTT. Everything runs in
virtual time.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import kernels
from ._pykernels import GOLDEN_GAMMA, MASK64
from .errors import ValidationError
from .workload import BatchOutcome, Consistency, LatencySample, Operation


@dataclass(frozen=True)
class NodeProfile:
    node_id: str
    vcpus: int = 1
    ram_gb: float = 2.0
    token_count: int = 1024
    rtt_to_client_ms: float = 0.0
    inter_node_rtt_ms: float = 0.0

    def __post_init__(self):
        if self.vcpus < 1:
            raise ValidationError(f"{self.node_id}: vcpus must be >= 1")
        if not self.ram_gb > 0:
            raise ValidationError(f"{self.node_id}: ram_gb must be > 0")
        if self.token_count < 1:
            raise ValidationError(f"{self.node_id}: token_count must be >= 1")
        if self.rtt_to_client_ms < 0 or self.inter_node_rtt_ms < 0:
            raise ValidationError(f"{self.node_id}: RTTs must be >= 0")


@dataclass(frozen=True)
class LatencyModelParams:
    base_write_ms: float = 2.0
    base_read_ms: float = 3.0
    cpu_alpha: float = 1.0
    ram_beta: float = 0.5
    stall_ms: float = 50.0
    jitter_sigma: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"latency model {f.name} must be finite and >= 0")

    def base_ms(self, op: Operation) -> float:
        return self.base_write_ms if Operation.parse(op) is Operation.WRITE else self.base_read_ms


def default_nodes(n: int = 3) -> tuple[NodeProfile, ...]:
    return tuple(NodeProfile(f"cassandra-{i}") for i in range(n))


@dataclass(frozen=True)
class RingConfig:
    nodes: tuple[NodeProfile, ...] = field(default_factory=default_nodes)
    replication_factor: int = 2
    consistency: Consistency = Consistency.QUORUM
    timeout_ms: float = 1000.0
    latency_model: LatencyModelParams = field(default_factory=LatencyModelParams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "consistency", Consistency.parse(self.consistency))
        if not self.nodes:
            raise ValidationError("a ring needs at least one node")
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("node ids must be unique")
        if self.replication_factor < 1:
            raise ValidationError("replication_factor must be >= 1")
        if self.replication_factor > len(self.nodes):
            raise ValidationError(
                f"replication_factor {self.replication_factor} exceeds node count {len(self.nodes)}")
        if not self.timeout_ms > 0:
            raise ValidationError("timeout_ms must be > 0")
        if not 0 <= self.seed <= MASK64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def with_allocation(self, vcpus: int | None = None, ram_gb: float | None = None) -> "RingConfig":
        """Apply one allocation profile to every node."""
        changes = {}
        if vcpus is not None:
            changes["vcpus"] = int(vcpus)
        if ram_gb is not None:
            changes["ram_gb"] = float(ram_gb)
        return replace(self, nodes=tuple(replace(n, **changes) for n in self.nodes))

    def to_dict(self) -> dict:
        return {
            "nodes": [asdict(n) for n in self.nodes],
            "replication_factor": self.replication_factor,
            "consistency": self.consistency.value,
            "timeout_ms": self.timeout_ms,
            "latency_model": asdict(self.latency_model),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RingConfig":
        data = dict(data)
        kwargs = {}
        if "nodes" in data:
            kwargs["nodes"] = tuple(NodeProfile(**n) for n in data.pop("nodes"))
        elif "node_count" in data:
            kwargs["nodes"] = default_nodes(int(data.pop("node_count")))
        if "latency_model" in data:
            kwargs["latency_model"] = LatencyModelParams(**data.pop("latency_model"))
        unknown = set(data) - {"replication_factor", "consistency", "timeout_ms", "seed"}
        if unknown:
            raise ValidationError(f"unknown ring keys: {sorted(unknown)}")
        return cls(**kwargs, **data)


def generate_tokens(config: RingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sorted tokens and their owning node indices (ties broken by node index)."""
    state = config.seed
    pairs = []
    for idx, node in enumerate(config.nodes):
        for _ in range(node.token_count):
            state = (state + GOLDEN_GAMMA) & MASK64
            pairs.append((kernels.mix64(state), idx))
    pairs.sort()
    tokens = np.array([t for t, _ in pairs], dtype=np.uint64)
    owners = np.array([o for _, o in pairs], dtype=np.int64)
    return tokens, owners


def stall_probability(profile: NodeProfile, model: LatencyModelParams) -> float:
    return min(1.0, max(0.0, model.ram_beta / profile.ram_gb))


def service_scale(profile: NodeProfile, op: Operation, model: LatencyModelParams) -> float:
    return model.base_ms(op) * (1.0 + model.cpu_alpha / profile.vcpus)


def replica_service_time(profile: NodeProfile, op: Operation, model: LatencyModelParams,
                         jitter_draw: float, stall_draw: float) -> float:
    """Service time of one replica given a standard-normal and a uniform draw."""
    jitter = math.exp(model.jitter_sigma * jitter_draw) if model.jitter_sigma > 0 else 1.0
    service = service_scale(profile, op, model) * jitter
    if stall_draw < stall_probability(profile, model):
        service = service + model.stall_ms
    return service


def quorum_latency(replica_latencies: Sequence[float], rf: int | None = None,
                   consistency=Consistency.QUORUM) -> float:
    """Latency at which the consistency level is satisfied (an order statistic)."""
    if len(replica_latencies) == 0:
        raise ValidationError("quorum_latency needs at least one replica latency")
    if rf is None:
        rf = len(replica_latencies)
    if len(replica_latencies) != rf:
        raise ValidationError(f"expected {rf} replica latencies, got {len(replica_latencies)}")
    need = Consistency.parse(consistency).required(rf)
    return sorted(replica_latencies)[need - 1]


class SimRing:
    """One logical timeline over a seeded token ring. Not thread-safe."""

    def __init__(self, config: RingConfig):
        self.config = config
        self.tokens, self.owners = generate_tokens(config)
        self._tokens_list = self.tokens.tolist()
        self._rng = np.random.default_rng(config.seed)
        self.node_busy_ms = np.zeros(len(config.nodes))
        self.clock_ms = 0.0
        self.ops_executed = 0
        self._stored = np.empty(0, dtype=np.uint64)

    @property
    def node_count(self) -> int:
        return len(self.config.nodes)

    @property
    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.config.nodes]

    def reseed(self, seed: int):
        """Restart the jitter/stall stream without touching the token layout."""
        self._rng = np.random.default_rng(seed)

    def is_ready(self) -> bool:
        return True

    def contains_all(self, key_hashes: np.ndarray) -> bool:
        return bool(np.isin(key_hashes, self._stored).all())

    def tokens_of(self, node_id: str) -> np.ndarray:
        idx = self.node_ids.index(node_id)
        return self.tokens[self.owners == idx]

    def replica_indices(self, key_hash: int, rf: int | None = None) -> list[int]:
        rf = self.config.replication_factor if rf is None else rf
        n_tokens = len(self._tokens_list)
        pos = bisect.bisect_left(self._tokens_list, key_hash)
        if pos == n_tokens:
            pos = 0
        out: list[int] = []
        while len(out) < rf:
            node = int(self.owners[pos])
            if node not in out:
                out.append(node)
            pos = (pos + 1) % n_tokens
        return out

    def primary_counts(self, key_hashes: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.tokens, key_hashes, side="left") % len(self.tokens)
        return np.bincount(self.owners[pos], minlength=self.node_count)

    def run_batch(self, operation: Operation, key_hashes: np.ndarray, *, rf: int | None = None,
                  consistency=None, in_flight: int = 1,
                  duration_limit_ms: float | None = None) -> BatchOutcome:
        cfg = self.config
        op = Operation.parse(operation)
        rf = cfg.replication_factor if rf is None else rf
        if not 1 <= rf <= self.node_count:
            raise ValidationError(f"replication factor {rf} invalid for {self.node_count} nodes")
        cons = cfg.consistency if consistency is None else Consistency.parse(consistency)
        model = cfg.latency_model
        hashes = np.ascontiguousarray(key_hashes, dtype=np.uint64)
        n = len(hashes)
        z = self._rng.standard_normal((n, rf))
        u = self._rng.random((n, rf))
        if model.jitter_sigma > 0:
            jitter = np.exp(model.jitter_sigma * z)
        else:
            jitter = np.ones((n, rf))
        scale = np.array([service_scale(p, op, model) for p in cfg.nodes])
        pstall = np.array([stall_probability(p, model) for p in cfg.nodes])
        hop = np.array([p.inter_node_rtt_ms for p in cfg.nodes], dtype=np.float64)
        rtt = np.array([p.rtt_to_client_ms for p in cfg.nodes], dtype=np.float64)
        lat = np.zeros(n)
        timed_out = np.zeros(n, dtype=np.uint8)
        busy = np.zeros(self.node_count)
        issued, elapsed = kernels.simulate_batch(
            hashes, self.tokens, self.owners, rf, cons.required(rf), scale, pstall,
            float(model.stall_ms), hop, rtt, jitter, u, float(cfg.timeout_ms), int(in_flight),
            float(duration_limit_ms or 0.0), lat, timed_out, busy)
        self.node_busy_ms += busy
        self.clock_ms += elapsed
        self.ops_executed += issued
        if op is Operation.WRITE and issued:
            self._stored = np.union1d(self._stored, hashes[:issued])
        return BatchOutcome(lat[:issued], timed_out[:issued].astype(bool), float(elapsed))


def build_ring(config: RingConfig) -> SimRing:
    return SimRing(config)


def place_replicas(ring: SimRing, key: bytes) -> list[str]:
    """Ordered replica node ids for ``key``."""
    ids = ring.node_ids
    return [ids[i] for i in ring.replica_indices(kernels.hash_key(key))]


def execute_op(ring: SimRing, op: Operation, key: bytes) -> LatencySample:
    index = ring.ops_executed
    out = ring.run_batch(op, np.array([kernels.hash_key(key)], dtype=np.uint64))
    return LatencySample(float(out.latencies_ms[0]), bool(out.timed_out[0]), index)


def dump_ring_csv(ring: SimRing) -> str:
    ids = ring.node_ids
    lines = ["node_id,token"]
    lines += [f"{ids[o]},{t}" for t, o in zip(ring.tokens.tolist(), ring.owners.tolist())]
    return "\n".join(lines) + "\n"
