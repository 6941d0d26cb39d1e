"""Table rendering (CSV, Markdown, JSON) with fixed display rounding.

Latencies display with one decimal and percentages with two, both rounded
half-up on the value's shortest decimal representation. Stored artifacts
keep full precision; rounding only happens here.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .doe import InfluenceReport
from .errors import DegenerateInputError, ValidationError
from .orchestrator import ExperimentResult, deployment_overhead

FORMATS = ("csv", "markdown", "json")


def round_half_up(value: float, places: int) -> Decimal:
    return Decimal(repr(float(value))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def fmt(value: float, places: int) -> str:
    return str(round_half_up(value, places))


def fmt_percent(value: float) -> str:
    return fmt(value, 2) + "%"


@dataclass(frozen=True)
class Table:
    """Header plus rows of display strings; ``numeric`` marks columns parsed as numbers."""

    title: str
    header: list[str]
    rows: list[list[str]]
    numeric: frozenset[str] = frozenset()

    def render(self, fmt_name: str) -> str:
        if fmt_name == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\r\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([c.rstrip("%") if h in self.numeric else c
                            for h, c in zip(self.header, row)])
            return buf.getvalue()
        if fmt_name == "markdown":
            width = [max(len(h), *(len(r[i]) for r in self.rows)) if self.rows else len(h)
                     for i, h in enumerate(self.header)]
            lines = ["| " + " | ".join(h.ljust(w) for h, w in zip(self.header, width)) + " |",
                     "|" + "|".join(("-" * (w + 1) + ":" if h in self.numeric else "-" * (w + 2))
                                    for h, w in zip(self.header, width)) + "|"]
            for row in self.rows:
                lines.append("| " + " | ".join(c.rjust(w) if h in self.numeric else c.ljust(w)
                                               for h, c, w in zip(self.header, row, width)) + " |")
            return "\n".join(lines) + "\n"
        if fmt_name == "json":
            records = []
            for row in self.rows:
                rec = {}
                for h, c in zip(self.header, row):
                    rec[h] = float(c.rstrip("%")) if h in self.numeric and c else c
                records.append(rec)
            return json.dumps({"table": self.title, "rows": records}, indent=2) + "\n"
        raise ValidationError(f"unknown format {fmt_name!r} (expected one of {', '.join(FORMATS)})")


def cell_table(results: Sequence[ExperimentResult], labels: Sequence[str] | None = None) -> Table:
    if not results:
        raise ValidationError("no results to tabulate")
    labels = list(labels) if labels is not None else [r.plan_id for r in results]
    design = results[0].design
    for r in results[1:]:
        if r.design.to_dict()["effects"] != design.to_dict()["effects"] or \
                r.design.n_rows != design.n_rows:
            raise ValidationError(f"result {r.plan_id!r} uses a different design")
    header = ["experiment", *design.factor_names, "Y"]
    numeric = set()
    for label, r in zip(labels, results):
        for op in r.operations:
            col = f"{label} {op} latency (ms)"
            header.append(col)
            numeric.add(col)
    all_vectors = [{op: r.response_vector(op) for op in r.operations} for r in results]
    rows = []
    for row in range(design.n_rows):
        main = design.main_codes(row)
        line = [f"#{row + 1}"]
        line += [f"{lab} ({c:+d})" for lab, c in zip(design.level_labels(row), main)]
        line.append(f"y{row + 1}")
        for r, vectors in zip(results, all_vectors):
            for op in r.operations:
                line.append(fmt(vectors[op].values[row], 1))
        rows.append(line)
    return Table("cell_means", header, rows, frozenset(numeric))


def render_cell_table(results: Sequence[ExperimentResult], fmt_name: str = "markdown",
                      labels: Sequence[str] | None = None) -> str:
    return cell_table(results, labels).render(fmt_name)


def influence_table(analyses: Sequence[tuple[str, str, InfluenceReport]],
                    effects: Sequence[str] | None = None) -> Table:
    """``analyses`` holds ``(testbed_label, operation, report)`` triples."""
    if not analyses:
        raise ValidationError("no analyses to tabulate")
    for label, op, rep in analyses:
        if rep.degenerate:
            raise DegenerateInputError(
                f"{label} {op}: zero total variation, influence percentages are undefined")
    if effects is None:
        effects = [e for e in analyses[0][2].percentages if e != "error"]
        if any("error" in a[2].percentages for a in analyses):
            effects.append("error")
    header = ["testbed", "operation", *effects]
    rows = []
    for label, op, rep in analyses:
        rows.append([label, str(op).capitalize(),
                     *(fmt_percent(rep.percentages.get(e, 0.0)) for e in effects)])
    return Table("influence", header, rows, frozenset(effects))


def render_influence_table(analyses, fmt_name: str = "markdown", effects=None) -> str:
    return influence_table(analyses, effects).render(fmt_name)


def deployment_table(times: Sequence[tuple[str, float]]) -> Table:
    """Deployment seconds per testbed and overhead relative to the fastest."""
    if not times:
        raise ValidationError("no deployment times to tabulate")
    fastest = min(t for _, t in times)
    rows = [[label, fmt(t, 1), fmt_percent(deployment_overhead(t, fastest))] for label, t in times]
    return Table("deployment", ["testbed", "deployment (s)", "overhead vs fastest"], rows,
                 frozenset({"deployment (s)", "overhead vs fastest"}))


def render_deployment_table(times, fmt_name: str = "markdown") -> str:
    return deployment_table(times).render(fmt_name)


def parse_table(text: str, fmt_name: str) -> tuple[list[str], list[list[str]]]:
    """Re-read a rendered table into header and string cells (percent signs stripped)."""
    if fmt_name == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        return rows[0], rows[1:]
    if fmt_name == "markdown":
        lines = [ln for ln in text.splitlines() if ln.startswith("|")]
        split = [[c.strip().rstrip("%") for c in ln.strip("|").split("|")] for ln in lines]
        return split[0], split[2:]
    if fmt_name == "json":
        data = json.loads(text)
        header = list(data["rows"][0]) if data["rows"] else []
        return header, [[str(r[h]) for h in header] for r in data["rows"]]
    raise ValidationError(f"unknown format {fmt_name!r}")
