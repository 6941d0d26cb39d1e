"""Factorial campaign execution: plans, adapters, replay and deployment timing."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from . import kernels
from ._pykernels import GOLDEN_GAMMA, MASK64
from .doe import Analysis, DesignMatrix, Factor, ResponseVector, analyze, build_design
from .errors import (AdapterError, ExecutionError, IncompleteResultError, PlanError,
                     ReadinessTimeout, ResponseError, ValidationError)
from .simring import RingConfig, SimRing
from .workload import Operation, WorkloadSpec, WorkloadStats, parse_stress_summary, run_workload

DEFAULT_SEED = 20240917
SEED_ENV = "SLICEBENCH_SEED"
RESULT_FORMAT = "slicebench.result/1"
BUNDLED_PREFIX = "bundled:"
CSV_HEADER = ["experiment", "operation", "latency_ms"]

_LEADING_NUMBER = re.compile(r"^\s*(\d+(?:\.\d+)?)")


def data_path(name: str) -> Path:
    return Path(str(resources.files("slicebench") / "data" / name))


def bundled_plan(name: str) -> Path | None:
    p = data_path("plans") / name
    return p if p.is_file() else None


def resolve_path(path: str | os.PathLike, base: Path | None = None) -> Path:
    """Resolve ``bundled:<name>``, plan-relative and bundled-fallback paths."""
    text = str(path)
    if text.startswith(BUNDLED_PREFIX):
        name = text[len(BUNDLED_PREFIX):]
        direct = data_path(name)
        return direct if direct.exists() or not (data_path("plans") / name).exists() \
            else data_path("plans") / name
    p = Path(text)
    if not p.is_absolute() and base is not None and (base / p).exists():
        return base / p
    if p.exists():
        return p
    for candidate in (data_path(text), data_path("plans") / text):
        if candidate.is_file():
            return candidate
    return p


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for a repetition/cell index path; index path () returns ``seed``."""
    s = seed & MASK64
    for idx in path:
        s = kernels.mix64((s + (idx + 1) * GOLDEN_GAMMA) & MASK64)
    return s


# --- responses ---------------------------------------------------------------

def replay_responses(path, n_rows: int | None = None,
                     source: str = "replayed") -> dict[Operation, ResponseVector]:
    """Read a recorded-responses CSV into one ResponseVector per operation.

    Rows may appear in any order; vectors are ordered by experiment index.
    Without ``n_rows`` the design size is the next power of two covering the
    largest experiment index seen.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ResponseError(f"cannot read {path}: {exc}") from exc
    return parse_responses_csv(text, n_rows, source, name=str(path))


def parse_responses_csv(text: str, n_rows: int | None = None, source: str = "replayed",
                        name: str = "<csv>") -> dict[Operation, ResponseVector]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CSV_HEADER:
        raise ResponseError(f"{name}: header must be {','.join(CSV_HEADER)}")
    seen: dict[Operation, dict[int, float]] = {}
    for lineno, row in enumerate(reader, 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ResponseError(f"{name}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            exp = int(row[0])
            latency = float(row[2])
        except ValueError:
            raise ResponseError(f"{name}:{lineno}: malformed row {row!r}") from None
        op = Operation.parse(row[1].strip())
        if exp < 1:
            raise ResponseError(f"{name}:{lineno}: experiment index must be >= 1")
        if not math.isfinite(latency) or latency <= 0:
            raise ResponseError(f"{name}:{lineno}: latency must be positive, got {row[2]!r}")
        cells = seen.setdefault(op, {})
        if exp in cells:
            raise ResponseError(f"{name}:{lineno}: duplicate row for experiment {exp}, {op.value}")
        cells[exp] = latency
    if not seen:
        raise ResponseError(f"{name}: no data rows")
    if n_rows is None:
        top = max(max(c) for c in seen.values())
        n_rows = 1 << max(1, (top - 1).bit_length())
    out = {}
    for op in (Operation.WRITE, Operation.READ):
        if op not in seen:
            continue
        cells = seen[op]
        extra = sorted(e for e in cells if e > n_rows)
        if extra:
            raise ResponseError(f"{name}: experiment index {extra[0]} exceeds design size {n_rows}")
        missing = [e for e in range(1, n_rows + 1) if e not in cells]
        if missing:
            raise ResponseError(
                f"{name}: missing {op.value} row(s) for experiment(s) {', '.join(map(str, missing))}")
        out[op] = ResponseVector(tuple(cells[e] for e in range(1, n_rows + 1)), "ms",
                                 op.value, source)
    return out


def default_design(k: int) -> DesignMatrix:
    return build_design([Factor(chr(ord("A") + i)) for i in range(k)])


# --- deployment --------------------------------------------------------------

def deployment_overhead(t_slow: float, t_fast: float) -> float:
    """Percent extra time ``t_slow`` needs relative to ``t_fast``."""
    if not t_fast > 0:
        raise ValidationError(f"reference deployment time must be positive, got {t_fast}")
    return 100.0 * (t_slow - t_fast) / t_fast


def measure_deployment(adapter) -> float:
    return adapter.deploy()


# --- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class AllocationProfile:
    vcpus: int | None = None
    ram_gb: float | None = None

    def __post_init__(self):
        for name in ("vcpus", "ram_gb"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise PlanError(f"allocation {name} must be positive, got {v}")

    def to_dict(self) -> dict:
        return {k: v for k, v in (("vcpus", self.vcpus), ("ram_gb", self.ram_gb)) if v is not None}


@dataclass(frozen=True)
class PlanFactor:
    factor: Factor
    field: str
    low: float
    high: float

    def value(self, code: int) -> float:
        return self.high if code > 0 else self.low

    def to_dict(self) -> dict:
        return {"name": self.factor.name, "field": self.field,
                "low_label": self.factor.low_label, "high_label": self.factor.high_label,
                "low": self.low, "high": self.high}


def _level_value(label: str, explicit, factor: str) -> float:
    if explicit is not None:
        return float(explicit)
    m = _LEADING_NUMBER.match(label)
    if not m:
        raise PlanError(f"factor {factor!r}: cannot decode a value from label {label!r}; "
                        "give low/high explicitly")
    return float(m.group(1))


@dataclass(frozen=True)
class ExperimentPlan:
    plan_id: str
    factors: tuple[PlanFactor, ...]
    workloads: dict[Operation, WorkloadSpec]
    adapter: dict
    repetitions: int = 1
    cell_order: str = "ascending"
    order_seed: int = DEFAULT_SEED
    base_dir: Path | None = field(default=None, compare=False)

    @property
    def design(self) -> DesignMatrix:
        return build_design([f.factor for f in self.factors])

    def allocation(self, row: int) -> AllocationProfile:
        codes = self.design.main_codes(row)
        values = {}
        for pf, code in zip(self.factors, codes):
            v = pf.value(code)
            values[pf.field] = int(v) if pf.field == "vcpus" else float(v)
        return AllocationProfile(**values)

    def execution_order(self) -> list[int]:
        n = self.design.n_rows
        if self.cell_order == "randomized":
            return [int(i) for i in np.random.default_rng(self.order_seed).permutation(n)]
        return list(range(n))

    def to_dict(self) -> dict:
        order = ({"randomized": self.order_seed} if self.cell_order == "randomized"
                 else "ascending")
        wl = {}
        for op, spec in self.workloads.items():
            d = spec.to_dict()
            d.pop("operation")
            wl[op.value] = {k: v for k, v in d.items() if v is not None}
        return {"plan_id": self.plan_id,
                "factors": [f.to_dict() for f in self.factors],
                "workloads": wl,
                "adapter": self.adapter,
                "repetitions": self.repetitions,
                "cell_order": order}


def plan_schema() -> dict:
    return json.loads(data_path("plan.schema.json").read_text())


def resolve_seed(flag: int | None, planned: int | None) -> int:
    """Seed precedence: CLI flag, then plan file, then ``SLICEBENCH_SEED``, then the default."""
    if flag is not None:
        return int(flag)
    if planned is not None:
        return int(planned)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise PlanError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def parse_plan(data: Mapping, seed: int | None = None, base_dir: Path | None = None) -> ExperimentPlan:
    """Validate a plan document and bind every seed.

    A ``seed`` argument overrides every seed in the plan (ring, workloads and
    randomized cell order).
    """
    try:
        jsonschema.validate(data, plan_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise PlanError(f"plan schema violation at {where}: {exc.message}") from None

    factors = []
    used = set()
    for f in data["factors"]:
        if f["field"] in used:
            raise PlanError(f"two factors drive allocation field {f['field']!r}")
        used.add(f["field"])
        try:
            factor = Factor(f["name"], f["low_label"], f["high_label"])
        except ValidationError as exc:
            raise PlanError(str(exc)) from None
        low = _level_value(f["low_label"], f.get("low"), f["name"])
        high = _level_value(f["high_label"], f.get("high"), f["name"])
        if f["field"] == "vcpus" and (low != int(low) or high != int(high)):
            raise PlanError(f"factor {f['name']!r}: vcpus levels must be integers")
        if low == high:
            raise PlanError(f"factor {f['name']!r}: low and high decode to the same value")
        factors.append(PlanFactor(factor, f["field"], low, high))
    names = [pf.factor.name for pf in factors]
    if len(set(names)) != len(names):
        raise PlanError("duplicate factor names")

    adapter = json.loads(json.dumps(data["adapter"]))
    if adapter["kind"] == "simulated":
        ring = adapter.setdefault("ring", {})
        ring["seed"] = resolve_seed(seed, ring.get("seed"))
        try:
            RingConfig.from_dict(ring)
        except ValidationError as exc:
            raise PlanError(f"adapter ring: {exc}") from None

    workloads = {}
    for op_name, wdata in data["workloads"].items():
        op = Operation.parse(op_name)
        wdata = dict(wdata)
        wdata["seed"] = resolve_seed(seed, wdata.get("seed"))
        try:
            workloads[op] = WorkloadSpec.from_dict(wdata, operation=op)
        except ValidationError as exc:
            raise PlanError(f"workload {op_name}: {exc}") from None
    workloads = {op: workloads[op] for op in (Operation.WRITE, Operation.READ) if op in workloads}

    order = data.get("cell_order", "ascending")
    order_seed = None
    if isinstance(order, dict):
        order_seed = order["randomized"]
        order = "randomized"
    order_seed = resolve_seed(seed, order_seed)
    return ExperimentPlan(data["plan_id"], tuple(factors), workloads, adapter,
                          data.get("repetitions", 1), order, order_seed, base_dir)


def load_plan(path, seed: int | None = None) -> ExperimentPlan:
    path = resolve_path(path)
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise PlanError(f"cannot read plan {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PlanError(f"plan {path} is not valid JSON: {exc}") from exc
    return parse_plan(data, seed, Path(path).parent)


# --- adapters ----------------------------------------------------------------

class SimulatedAdapter:
    """Fresh simulated ring per cell repetition; reports virtual time."""

    kind = "simulated"

    def __init__(self, ring: RingConfig, deploy_time_s: float | None = None,
                 readiness_timeout_s: float | None = None):
        self.ring_config = ring
        self.deploy_time_s = deploy_time_s
        self.readiness_timeout_s = readiness_timeout_s
        self.virtual_clock_ms = 0.0

    @property
    def has_deployment(self) -> bool:
        return self.deploy_time_s is not None

    def deploy(self) -> float:
        t = float(self.deploy_time_s or 0.0)
        if self.readiness_timeout_s is not None and t > self.readiness_timeout_s:
            raise ReadinessTimeout(
                f"replicas not ready within {self.readiness_timeout_s} s (needs {t} s)")
        return t

    def run_cell(self, row: int, allocation: AllocationProfile,
                 workloads: Mapping[Operation, WorkloadSpec], repetition: int) -> dict:
        cfg = self.ring_config.with_allocation(allocation.vcpus, allocation.ram_gb)
        ring = SimRing(cfg)
        # same jitter stream in every cell of one repetition (common random numbers)
        ring.reseed(derive_seed(cfg.seed, repetition))
        start = self.virtual_clock_ms
        stats = {}
        for op, spec in workloads.items():
            spec = replace(spec, seed=derive_seed(spec.seed, repetition))
            stats[op] = run_workload(spec, ring)
        self.virtual_clock_ms += ring.clock_ms
        return {"stats": stats, "virtual_time_ms": [start, self.virtual_clock_ms]}


class ReplayAdapter:
    """Serves recorded cell means instead of executing workloads."""

    kind = "replay"

    def __init__(self, path: Path, n_rows: int, deploy_time_s: float | None = None):
        self.path = path
        self.responses = replay_responses(path, n_rows)
        self.deploy_time_s = deploy_time_s

    @property
    def has_deployment(self) -> bool:
        return self.deploy_time_s is not None

    def deploy(self) -> float:
        return float(self.deploy_time_s or 0.0)

    def run_cell(self, row, allocation, workloads, repetition) -> dict:
        means = {}
        for op in workloads:
            if op not in self.responses:
                raise AdapterError(f"{self.path} has no {op.value} rows")
            means[op] = self.responses[op].values[row]
        return {"means": means}


class ExternalAdapter:
    """Runs a stress command per cell and parses its summary output.

    Command templates accept ``{vcpus}``, ``{ram_gb}``, ``{operation}``,
    ``{experiment}`` and ``{repetition}`` placeholders.
    """

    kind = "external"

    def __init__(self, command: str, workdir: str | None = None, env: Mapping | None = None,
                 deploy_command: str | None = None, readiness_command: str | None = None,
                 configure_command: str | None = None, teardown_command: str | None = None,
                 readiness_timeout_s: float = 600.0, poll_interval_s: float = 1.0,
                 command_timeout_s: float | None = None):
        self.command = command
        self.workdir = workdir
        self.env = {**os.environ, **(env or {})}
        self.deploy_command = deploy_command
        self.readiness_command = readiness_command
        self.configure_command = configure_command
        self.teardown_command = teardown_command
        self.readiness_timeout_s = readiness_timeout_s
        self.poll_interval_s = poll_interval_s
        self.command_timeout_s = command_timeout_s

    @property
    def has_deployment(self) -> bool:
        return self.deploy_command is not None or self.readiness_command is not None

    def _run(self, template: str, **values) -> subprocess.CompletedProcess:
        argv = [arg.format(**values) for arg in shlex.split(template)]
        try:
            return subprocess.run(argv, cwd=self.workdir, env=self.env, capture_output=True,
                                  text=True, timeout=self.command_timeout_s)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AdapterError(f"command {argv[0]!r} failed: {exc}") from exc

    def deploy(self) -> float:
        start = time.monotonic()
        if self.deploy_command:
            proc = self._run(self.deploy_command)
            if proc.returncode != 0:
                raise AdapterError(f"deploy command exited {proc.returncode}: {proc.stderr.strip()}")
        if self.readiness_command:
            while True:
                if self._run(self.readiness_command).returncode == 0:
                    break
                if time.monotonic() - start > self.readiness_timeout_s:
                    raise ReadinessTimeout(
                        f"readiness check did not pass within {self.readiness_timeout_s} s")
                time.sleep(self.poll_interval_s)
        return time.monotonic() - start

    def run_cell(self, row, allocation, workloads, repetition) -> dict:
        values = {"vcpus": allocation.vcpus if allocation.vcpus is not None else "",
                  "ram_gb": allocation.ram_gb if allocation.ram_gb is not None else "",
                  "experiment": row + 1, "repetition": repetition}
        started = time.time()
        if self.configure_command:
            proc = self._run(self.configure_command, operation="", **values)
            if proc.returncode != 0:
                raise AdapterError(f"configure command exited {proc.returncode}")
        try:
            stats = {}
            for op in workloads:
                proc = self._run(self.command, operation=op.value, **values)
                if proc.returncode != 0:
                    raise AdapterError(
                        f"stress command exited {proc.returncode}: {proc.stderr.strip()[:200]}")
                try:
                    stats[op] = parse_stress_summary(proc.stdout, op)
                except ValidationError as exc:
                    raise AdapterError(f"unusable {op.value} summary: {exc}") from exc
        finally:
            if self.teardown_command:
                self._run(self.teardown_command, operation="", **values)
        return {"stats": stats, "wall_time_s": [started, time.time()]}


def make_adapter(plan: ExperimentPlan):
    cfg = dict(plan.adapter)
    kind = cfg.pop("kind")
    try:
        if kind == "simulated":
            return SimulatedAdapter(RingConfig.from_dict(cfg.get("ring", {})),
                                    cfg.get("deploy_time_s"), cfg.get("readiness_timeout_s"))
        if kind == "replay":
            path = resolve_path(cfg["path"], plan.base_dir)
            return ReplayAdapter(path, plan.design.n_rows, cfg.get("deploy_time_s"))
        if kind == "external":
            return ExternalAdapter(**cfg)
    except ValidationError as exc:
        raise AdapterError(f"cannot construct {kind} adapter: {exc}") from exc
    raise AdapterError(f"unknown adapter kind {kind!r}")


# --- results -----------------------------------------------------------------

@dataclass
class CellResult:
    experiment: int
    codes: dict[str, int]
    levels: dict[str, str]
    allocation: AllocationProfile
    status: str = "ok"
    error: str | None = None
    runs: list[dict] = field(default_factory=list)
    means: dict[str, float] = field(default_factory=dict)
    residual_ss: dict[str, float] = field(default_factory=dict)
    timestamps: dict[str, list[float]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        runs = []
        for run in self.runs:
            runs.append({k: (v.to_dict() if isinstance(v, WorkloadStats) else v)
                         for k, v in run.items()})
        return {"experiment": self.experiment, "codes": self.codes, "levels": self.levels,
                "allocation": self.allocation.to_dict(), "status": self.status,
                "error": self.error, "runs": runs, "means": self.means,
                "residual_ss": self.residual_ss, "timestamps": self.timestamps}

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        runs = []
        for run in d["runs"]:
            runs.append({k: (WorkloadStats.from_dict(v) if isinstance(v, dict) else v)
                         for k, v in run.items()})
        return cls(d["experiment"], d["codes"], d["levels"], AllocationProfile(**d["allocation"]),
                   d["status"], d["error"], runs, d["means"], d["residual_ss"],
                   d.get("timestamps", {}))


@dataclass
class ExperimentResult:
    plan_id: str
    design: DesignMatrix
    adapter_kind: str
    operations: list[str]
    cells: list[CellResult]
    repetitions: int = 1
    execution_order: list[int] = field(default_factory=list)
    deployment_time_s: float | None = None
    plan: dict | None = None

    @property
    def complete(self) -> bool:
        return len(self.cells) == self.design.n_rows and all(c.ok for c in self.cells)

    def response_vector(self, operation) -> ResponseVector:
        op = Operation.parse(operation)
        if op.value not in self.operations:
            raise IncompleteResultError(f"result {self.plan_id!r} has no {op.value} measurements")
        failed = [c.experiment for c in self.cells if not c.ok]
        if failed:
            raise IncompleteResultError(
                f"result {self.plan_id!r} has failed cell(s) {failed}; refusing to analyze")
        if len(self.cells) != self.design.n_rows:
            raise IncompleteResultError(f"result {self.plan_id!r} is missing cells")
        source = "replayed" if self.adapter_kind == "replay" else (
            "simulated" if self.adapter_kind == "simulated" else "external")
        return ResponseVector(tuple(c.means[op.value] for c in self.cells), "ms", op.value, source)

    def response_vectors(self) -> dict[Operation, ResponseVector]:
        return {Operation.parse(o): self.response_vector(o) for o in self.operations}

    def analyze(self, operation) -> Analysis:
        rv = self.response_vector(operation)
        residuals = None
        if self.repetitions > 1:
            residuals = [c.residual_ss[rv.label] for c in self.cells]
        return analyze(self.design, rv, self.repetitions, residuals)

    def to_dict(self) -> dict:
        responses = {}
        for op in self.operations:
            responses[op] = [c.means.get(op) if c.ok else None for c in self.cells]
        return {"format": RESULT_FORMAT, "plan_id": self.plan_id,
                "adapter_kind": self.adapter_kind, "design": self.design.to_dict(),
                "operations": self.operations, "repetitions": self.repetitions,
                "execution_order": self.execution_order,
                "deployment_time_s": self.deployment_time_s,
                "cells": [c.to_dict() for c in self.cells], "responses": responses,
                "plan": self.plan}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        if d.get("format") != RESULT_FORMAT:
            raise ValidationError(f"not a slicebench result document (format {d.get('format')!r})")
        return cls(d["plan_id"], DesignMatrix.from_dict(d["design"]), d["adapter_kind"],
                   list(d["operations"]), [CellResult.from_dict(c) for c in d["cells"]],
                   d["repetitions"], d["execution_order"], d["deployment_time_s"], d.get("plan"))

    @classmethod
    def load(cls, path) -> "ExperimentResult":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise ValidationError(f"cannot read result {path}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"result {path} is malformed: {exc}") from exc


def result_from_responses(responses: Mapping[Operation, ResponseVector], label: str,
                          design: DesignMatrix | None = None) -> ExperimentResult:
    """Wrap replayed response vectors as a result so they share the analysis path."""
    n = len(next(iter(responses.values())))
    if design is None:
        design = default_design(max(1, (n - 1).bit_length()))
    if design.n_rows != n:
        raise ResponseError(f"{n} responses do not fit a {design.n_rows}-row design")
    cells = []
    for row in range(n):
        cells.append(CellResult(row + 1, design.row_codes(row),
                                dict(zip(design.factor_names, design.level_labels(row))),
                                AllocationProfile(),
                                means={op.value: rv.values[row] for op, rv in responses.items()}))
    return ExperimentResult(label, design, "replay", [op.value for op in responses], cells,
                            execution_order=list(range(1, n + 1)))


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def run_experiment(plan: ExperimentPlan, adapter=None) -> ExperimentResult:
    """Execute every design row, Write then Read, and collect cell means.

    Failed cells are recorded with their error and no fabricated values.
    """
    design = plan.design
    adapter = make_adapter(plan) if adapter is None else adapter
    deployment = measure_deployment(adapter) if adapter.has_deployment else None
    repetitions = 1 if adapter.kind == "replay" else plan.repetitions
    cells: list[CellResult | None] = [None] * design.n_rows
    order = plan.execution_order()
    for row in order:
        allocation = plan.allocation(row)
        cell = CellResult(row + 1, design.row_codes(row),
                          dict(zip(design.factor_names, design.level_labels(row))), allocation)
        try:
            for rep in range(repetitions):
                out = adapter.run_cell(row, allocation, plan.workloads, rep)
                run = {"repetition": rep}
                if "stats" in out:
                    run.update({op.value: s for op, s in out["stats"].items()})
                else:
                    run.update({op.value: m for op, m in out["means"].items()})
                cell.runs.append(run)
                for key in ("virtual_time_ms", "wall_time_s"):
                    if key in out:
                        cell.timestamps.setdefault(key, []).extend(out[key])
        except ExecutionError as exc:
            cell.status, cell.error = "failed", f"{type(exc).__name__}: {exc}"
        else:
            for op in plan.workloads:
                per_rep = [r[op.value].mean_latency_ms if isinstance(r[op.value], WorkloadStats)
                           else float(r[op.value]) for r in cell.runs]
                m = _mean(per_rep)
                cell.means[op.value] = m
                cell.residual_ss[op.value] = math.fsum((v - m) ** 2 for v in per_rep)
        cells[row] = cell
    return ExperimentResult(plan.plan_id, design, adapter.kind,
                            [op.value for op in plan.workloads], cells, repetitions,
                            [r + 1 for r in order], deployment, plan.to_dict())
