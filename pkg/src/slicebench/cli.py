"""``slicebench`` command line.

Exit codes: 0 success, 1 runtime failure, 2 invalid input or usage.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, kernels
from .doe import Analysis
from .errors import ExecutionError, SliceBenchError, ValidationError
from .orchestrator import (ExperimentResult, load_plan, replay_responses, resolve_path,
                           resolve_seed, result_from_responses, run_experiment)
from .reporter import (FORMATS, Table, cell_table, deployment_table, fmt, influence_table)
from .simring import LatencyModelParams, NodeProfile, RingConfig, SimRing, dump_ring_csv
from .workload import (Consistency, Operation, WorkloadSpec, render_summary, run_workload)


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_input(spec: str) -> tuple[str, ExperimentResult]:
    """``LABEL=PATH`` or ``PATH``; a ``.csv`` path is read as recorded responses."""
    label = None
    if "=" in spec and not Path(spec).exists():
        label, spec = spec.split("=", 1)
    path = resolve_path(spec)
    if path.suffix.lower() == ".csv":
        result = result_from_responses(replay_responses(path), label or path.stem)
    else:
        result = ExperimentResult.load(path)
    return label or result.plan_id, result


def _operations(result: ExperimentResult, which: str) -> list[str]:
    if which == "all":
        return list(result.operations)
    op = Operation.parse(which).value
    if op not in result.operations:
        raise ValidationError(f"input has no {op} measurements")
    return [op]


def _effects_table(items: list[tuple[str, Analysis]]) -> Table:
    effects = list(items[0][1].effects.effects)
    header = ["testbed", "operation", "q0", *(f"q_{e}" for e in effects),
              *(f"SS_{e}" for e in effects), "SS_T"]
    rows = []
    for label, a in items:
        rows.append([label, a.responses.label.capitalize(), fmt(a.effects.q0, 4),
                     *(fmt(a.effects.effects[e], 4) for e in effects),
                     *(fmt(a.breakdown.ss_terms[e], 4) for e in effects),
                     fmt(a.breakdown.ss_total, 4)])
    return Table("effects", header, rows, frozenset(header[2:]))


def _render_analyses(items: list[tuple[str, Analysis]], fmt_name: str, table: str) -> str:
    if fmt_name == "json":
        doc = [{"testbed": label, **a.to_dict()} for label, a in items]
        return json.dumps({"analyses": doc}, indent=2) + "\n"
    if table == "effects":
        return _effects_table(items).render(fmt_name)
    return influence_table([(label, a.responses.label, a.influence) for label, a in items]
                           ).render(fmt_name)


# --- subcommands -------------------------------------------------------------

def cmd_plan(args) -> int:
    plan = load_plan(args.plan, args.seed)
    if args.format == "json":
        _emit(json.dumps(plan.to_dict(), indent=2) + "\n", args.out)
        return 0
    design = plan.design
    header = ["experiment", *design.factor_names, *(pf.field for pf in plan.factors)]
    rows = []
    for row in range(design.n_rows):
        alloc = plan.allocation(row).to_dict()
        rows.append([f"#{row + 1}",
                     *(f"{lab} ({c:+d})" for lab, c in zip(design.level_labels(row),
                                                          design.main_codes(row))),
                     *(str(alloc[pf.field]) for pf in plan.factors)])
    _emit(Table("plan", header, rows).render(args.format), args.out)
    return 0


def cmd_run(args) -> int:
    plan = load_plan(args.plan, args.seed)
    result = run_experiment(plan)
    _emit(result.to_json(), args.out)
    failed = [c.experiment for c in result.cells if not c.ok]
    if failed:
        for c in result.cells:
            if not c.ok:
                print(f"experiment {c.experiment} failed: {c.error}", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args) -> int:
    if bool(args.result) == bool(args.responses):
        raise UsageError("give exactly one of --result or --responses")
    label, result = _load_input(args.result or args.responses)
    label = args.label or label
    items = [(label, result.analyze(op)) for op in _operations(result, args.operation)]
    _emit(_render_analyses(items, args.format, args.table), args.out)
    return 0


def cmd_report(args) -> int:
    loaded = [_load_input(s) for s in args.inputs]
    if args.table == "cells":
        text = cell_table([r for _, r in loaded], [label for label, _ in loaded]).render(args.format)
    elif args.table == "deployment":
        times = [(label, r.deployment_time_s) for label, r in loaded
                 if r.deployment_time_s is not None]
        if not times:
            raise ValidationError("no input carries a deployment time")
        text = deployment_table(times).render(args.format)
    else:
        items = [(label, r.analyze(op)) for label, r in loaded
                 for op in _operations(r, args.operation)]
        text = _render_analyses(items, args.format, args.table)
    _emit(text, args.out)
    return 0


def cmd_compare(args) -> int:
    loaded = [_load_input(s) for s in args.inputs]
    if len(loaded) < 2:
        raise UsageError("compare needs at least two inputs")
    items = [(label, r.analyze(op)) for label, r in loaded
             for op in _operations(r, args.operation)]
    times = [(label, r.deployment_time_s) for label, r in loaded
             if r.deployment_time_s is not None]
    infl = influence_table([(label, a.responses.label, a.influence) for label, a in items])
    if args.format == "json":
        doc = {"influence": json.loads(infl.render("json"))["rows"]}
        if len(times) >= 2:
            doc["deployment"] = json.loads(deployment_table(times).render("json"))["rows"]
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = infl.render(args.format)
        if len(times) >= 2:
            text += "\n" + deployment_table(times).render(args.format)
    _emit(text, args.out)
    return 0


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed, None)
    nodes = [NodeProfile(f"cassandra-{i}", args.vcpus, args.ram_gb, args.tokens, args.rtt_ms,
                         args.inter_node_rtt_ms) for i in range(args.nodes)]
    model = LatencyModelParams(args.base_write_ms, args.base_read_ms, args.cpu_alpha,
                               args.ram_beta, args.stall_ms, args.jitter_sigma)
    cfg = RingConfig(tuple(nodes), args.rf, args.consistency, args.timeout_ms, model, seed)
    ring = SimRing(cfg)
    if args.dump_ring:
        _emit(dump_ring_csv(ring), args.out)
        return 0
    spec = WorkloadSpec(args.operation, args.entries, args.rf, args.consistency, args.duration,
                        args.ops, args.in_flight, args.distribution, seed=seed,
                        abort_timeout_fraction=args.abort_fraction)
    stats = run_workload(spec, ring)
    if args.summary:
        text = render_summary(stats)
    elif args.format == "json":
        text = json.dumps(stats.to_dict(), indent=2) + "\n"
    else:
        cols = ["operation", "mean (ms)", "p50 (ms)", "p95 (ms)", "p99 (ms)", "op/s", "timeouts",
                "completed"]
        row = [stats.operation.value, fmt(stats.mean_latency_ms, 3), fmt(stats.p50_ms, 3),
               fmt(stats.p95_ms, 3), fmt(stats.p99_ms, 3), fmt(stats.ops_per_sec, 1),
               str(stats.timeout_count), str(stats.completed_ops)]
        text = Table("workload", cols, [row], frozenset(cols[1:])).render(args.format)
    _emit(text, args.out)
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--format", choices=FORMATS, default=None,
                        help="output format (default: markdown; json for 'plan')")
    shared.add_argument("--seed", type=int, default=None,
                        help="master seed; overrides plan seeds and $SLICEBENCH_SEED")
    shared.add_argument("--out", default=None, help="write output here instead of stdout")

    parser = _Parser(prog="slicebench",
                     description="2^k factorial latency benchmarking for replicated KV slices")
    parser.add_argument("--version", action="version",
                        version=f"slicebench {__version__} ({kernels.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("plan", parents=[shared], help="validate a plan and echo it")
    p.add_argument("plan", help="plan JSON file (bundled plan names also accepted)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", parents=[shared], help="execute a campaign and write its result")
    p.add_argument("--plan", required=True, help="plan JSON file")
    p.set_defaults(func=cmd_run)

    def analysis_flags(p):
        p.add_argument("--operation", default="all", choices=["write", "read", "all"],
                       help="which operation(s) to analyze (default: all)")
        p.add_argument("--table", choices=["influence", "effects"], default="influence",
                       help="influence percentages or raw effects/sums of squares")

    p = sub.add_parser("analyze", parents=[shared],
                       help="effects, sums of squares and influence from a result or CSV")
    p.add_argument("--result", help="result JSON written by 'run'")
    p.add_argument("--responses", help="recorded-responses CSV (experiment,operation,latency_ms)")
    p.add_argument("--label", help="testbed label for the output rows")
    analysis_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", parents=[shared], help="render cell, influence or deployment tables")
    p.add_argument("inputs", nargs="+", metavar="[LABEL=]PATH",
                   help="result JSON or responses CSV files")
    p.add_argument("--operation", default="all", choices=["write", "read", "all"])
    p.add_argument("--table", choices=["cells", "influence", "effects", "deployment"],
                   default="cells")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", parents=[shared], help="merge analyses across labeled inputs")
    p.add_argument("inputs", nargs="+", metavar="[LABEL=]PATH")
    p.add_argument("--operation", default="all", choices=["write", "read", "all"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[shared], help="run one ad-hoc simulator workload")
    p.add_argument("--operation", default="write", choices=["write", "read"])
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--vcpus", type=int, default=1)
    p.add_argument("--ram-gb", type=float, default=2.0)
    p.add_argument("--tokens", type=int, default=1024, help="tokens per node")
    p.add_argument("--rf", type=int, default=2, help="replication factor")
    p.add_argument("--consistency", default="QUORUM", type=str.upper,
                   choices=[c.value for c in Consistency])
    p.add_argument("--timeout-ms", type=float, default=1000.0)
    p.add_argument("--base-write-ms", type=float, default=2.0)
    p.add_argument("--base-read-ms", type=float, default=3.0)
    p.add_argument("--cpu-alpha", type=float, default=1.0)
    p.add_argument("--ram-beta", type=float, default=0.5)
    p.add_argument("--stall-ms", type=float, default=50.0)
    p.add_argument("--jitter-sigma", type=float, default=0.0)
    p.add_argument("--rtt-ms", type=float, default=0.0, help="client round trip per node")
    p.add_argument("--inter-node-rtt-ms", type=float, default=0.0)
    p.add_argument("--entries", type=int, default=10_000)
    p.add_argument("--ops", type=int, default=10_000)
    p.add_argument("--in-flight", type=int, default=16)
    p.add_argument("--distribution", default="uniform", choices=["uniform", "sequential"])
    p.add_argument("--duration", type=float, default=None, help="virtual-time limit in seconds")
    p.add_argument("--abort-fraction", type=float, default=0.5,
                   help="abort when the timeout fraction exceeds this")
    p.add_argument("--summary", action="store_true", help="print the stress summary format")
    p.add_argument("--dump-ring", action="store_true", help="print node_id,token CSV and exit")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "json" if args.command == "plan" else "markdown"
    try:
        return args.func(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except ValidationError as exc:
        print(f"slicebench {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ExecutionError, SliceBenchError, OSError) as exc:
        print(f"slicebench {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
