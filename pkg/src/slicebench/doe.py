"""Two-level full factorial designs and effect analysis.

Designs are in Yates standard order (first factor alternates fastest) and
are coded -1/+1. Effect coefficients, sums of squares and influence
percentages follow the classic ``2^k`` allocation-of-variation method::

    >>> design = build_design([Factor("A", "1vCPU", "4vCPU"), Factor("B", "2GB", "8GB")])
    >>> est = estimate_effects(design, [156.9, 93.5, 186.6, 93.0])
    >>> round(est.effects["A"], 6)
    -39.25
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import DesignError, ResponseError

MAX_FACTORS = 16
TIME_UNITS = frozenset({"ms", "s", "us"})


@dataclass(frozen=True)
class Factor:
    name: str
    low_label: str = "-1"
    high_label: str = "+1"

    def __post_init__(self):
        if not self.name:
            raise DesignError("factor name must be nonempty")
        if self.low_label == self.high_label:
            raise DesignError(f"factor {self.name!r}: low and high labels are identical")


def _effect_name(names: Sequence[str]) -> str:
    if all(len(n) == 1 for n in names):
        return "".join(names)
    return ":".join(names)


@dataclass(frozen=True)
class DesignMatrix:
    """A ``2^k`` design with every main-effect and interaction column.

    Columns are generated on demand from bitmasks so even ``k = 16`` stays
    cheap; :attr:`codes` materializes the whole matrix.
    """

    factors: tuple[Factor, ...]
    effect_names: tuple[str, ...]
    effect_masks: tuple[int, ...]
    row_order: str = "yates"

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def n_rows(self) -> int:
        return 1 << self.k

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def members(self, effect: str) -> tuple[str, ...]:
        mask = self.effect_masks[self.effect_names.index(effect)]
        return tuple(f.name for i, f in enumerate(self.factors) if mask >> i & 1)

    def mask_of(self, effect: str) -> int:
        try:
            return self.effect_masks[self.effect_names.index(effect)]
        except ValueError:
            raise DesignError(f"unknown effect {effect!r}") from None

    def column(self, effect: str) -> np.ndarray:
        mask = self.mask_of(effect)
        rows = np.arange(self.n_rows)
        col = np.ones(self.n_rows, dtype=np.int8)
        for i in range(self.k):
            if mask >> i & 1:
                col *= np.where(rows >> i & 1, 1, -1).astype(np.int8)
        return col

    @property
    def codes(self) -> np.ndarray:
        """Full ``(2^k, 2^k - 1)`` matrix of codes in :attr:`effect_names` order."""
        return np.stack([self.column(e) for e in self.effect_names], axis=1)

    def main_codes(self, row: int) -> tuple[int, ...]:
        return tuple(1 if row >> i & 1 else -1 for i in range(self.k))

    def row_codes(self, row: int) -> dict[str, int]:
        main = self.main_codes(row)
        out = {}
        for name, mask in zip(self.effect_names, self.effect_masks):
            code = 1
            for i in range(self.k):
                if mask >> i & 1:
                    code *= main[i]
            out[name] = code
        return out

    def level_labels(self, row: int) -> tuple[str, ...]:
        return tuple(f.high_label if c > 0 else f.low_label
                     for f, c in zip(self.factors, self.main_codes(row)))

    def to_dict(self) -> dict:
        return {
            "factors": [{"name": f.name, "low_label": f.low_label, "high_label": f.high_label}
                        for f in self.factors],
            "effects": list(self.effect_names),
            "row_order": self.row_order,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DesignMatrix":
        return build_design([Factor(f["name"], f["low_label"], f["high_label"])
                             for f in data["factors"]])


def build_design(factors: Sequence[Factor]) -> DesignMatrix:
    """Full ``2^k`` design; columns ordered by interaction order, then factor order."""
    factors = tuple(factors)
    if not factors:
        raise DesignError("a design needs at least one factor")
    if len(factors) > MAX_FACTORS:
        raise DesignError(f"at most {MAX_FACTORS} factors are supported, got {len(factors)}")
    names = [f.name for f in factors]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DesignError(f"duplicate factor names: {', '.join(dupes)}")
    effect_names = []
    masks = []
    for order in range(1, len(factors) + 1):
        for combo in combinations(range(len(factors)), order):
            effect_names.append(_effect_name([names[i] for i in combo]))
            masks.append(sum(1 << i for i in combo))
    if len(set(effect_names)) != len(effect_names):
        raise DesignError("factor names produce ambiguous interaction names")
    return DesignMatrix(factors, tuple(effect_names), tuple(masks))


@dataclass(frozen=True)
class ResponseVector:
    values: tuple[float, ...]
    unit: str = "ms"
    label: str = ""
    source: str = "external"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        bad = [i + 1 for i, v in enumerate(self.values) if not math.isfinite(v)]
        if bad:
            raise ResponseError(f"non-finite response at experiment(s) {bad}")
        if self.unit in TIME_UNITS:
            bad = [i + 1 for i, v in enumerate(self.values) if v <= 0]
            if bad:
                raise ResponseError(f"non-positive latency at experiment(s) {bad}")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class EffectEstimates:
    q0: float
    effects: dict[str, float]
    design: DesignMatrix = field(repr=False)
    unit: str = "ms"

    def to_dict(self) -> dict:
        return {"q0": self.q0, "effects": dict(self.effects), "unit": self.unit}


@dataclass(frozen=True)
class VariationBreakdown:
    ss_terms: dict[str, float]
    ss_total: float
    ss_error: float = 0.0

    def to_dict(self) -> dict:
        return {"ss_terms": dict(self.ss_terms), "ss_error": self.ss_error,
                "ss_total": self.ss_total}


@dataclass(frozen=True)
class InfluenceReport:
    percentages: dict[str, float]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"percentages": dict(self.percentages), "degenerate": self.degenerate}


def _as_responses(responses) -> ResponseVector:
    if isinstance(responses, ResponseVector):
        return responses
    return ResponseVector(tuple(responses), unit="")


def estimate_effects(design: DesignMatrix, responses) -> EffectEstimates:
    """Fit the saturated model ``y = q0 + sum_e q_e * x_e``.

    Each coefficient is ``(column . y) / 2^k``, computed with Yates'
    algorithm so the accumulation order is fixed by the design.
    """
    rv = _as_responses(responses)
    if len(rv) != design.n_rows:
        raise ResponseError(
            f"design has {design.n_rows} rows but {len(rv)} responses were given")
    contrasts = kernels.yates(rv.values)
    n = float(design.n_rows)
    effects = {name: contrasts[mask] / n
               for name, mask in zip(design.effect_names, design.effect_masks)}
    return EffectEstimates(contrasts[0] / n, effects, design, rv.unit)


def variation_breakdown(effects: EffectEstimates, k: int | None = None, replication: int = 1,
                        cell_residuals: Sequence[float] | None = None) -> VariationBreakdown:
    """Allocate variation: ``SS_e = r * 2^k * q_e^2`` plus an optional error term.

    ``cell_residuals`` are per-cell within-replicate sums of squares; their
    sum is the error term. Unreplicated designs have ``ss_error = 0``.
    """
    if k is None:
        k = effects.design.k
    if replication < 1:
        raise DesignError(f"replication count must be >= 1, got {replication}")
    if len(effects.effects) != (1 << k) - 1:
        raise DesignError(f"expected {(1 << k) - 1} effects for k={k}, got {len(effects.effects)}")
    weight = float(replication * (1 << k))
    ss_terms = {name: weight * q * q for name, q in effects.effects.items()}
    ss_error = 0.0
    if cell_residuals is not None:
        if len(cell_residuals) != 1 << k:
            raise DesignError("cell_residuals needs one entry per design row")
        if any(r < 0 or not math.isfinite(r) for r in cell_residuals):
            raise DesignError("cell residual sums of squares must be finite and >= 0")
        ss_error = math.fsum(cell_residuals)
    ss_total = math.fsum(list(ss_terms.values()) + [ss_error])
    return VariationBreakdown(ss_terms, ss_total, ss_error)


def influence_percentages(breakdown: VariationBreakdown) -> InfluenceReport:
    """Share of total variation explained by each term, in percent."""
    if breakdown.ss_total == 0.0:
        return InfluenceReport({}, degenerate=True)
    total = breakdown.ss_total
    # ratio first: ss <= total then guarantees a share <= 100
    pct = {name: 100.0 * (ss / total) for name, ss in breakdown.ss_terms.items()}
    if breakdown.ss_error > 0.0:
        pct["error"] = 100.0 * (breakdown.ss_error / total)
    return InfluenceReport(pct)


def predict(effects: EffectEstimates, coded_point: Sequence[float]) -> float:
    design = effects.design
    point = [float(x) for x in coded_point]
    if len(point) != design.k:
        raise DesignError(f"coded point has {len(point)} coordinates, design has {design.k}")
    for x in point:
        if not -1.0 <= x <= 1.0:
            raise DesignError(f"coded coordinate {x} outside [-1, +1]")
    terms = [effects.q0]
    for name, mask in zip(design.effect_names, design.effect_masks):
        code = 1.0
        for i in range(design.k):
            if mask >> i & 1:
                code *= point[i]
        terms.append(effects.effects[name] * code)
    return math.fsum(terms)


@dataclass(frozen=True)
class Analysis:
    """Effects, variation and influence for one response vector."""

    responses: ResponseVector
    effects: EffectEstimates
    breakdown: VariationBreakdown
    influence: InfluenceReport

    def to_dict(self) -> dict:
        return {
            "operation": self.responses.label,
            "unit": self.responses.unit,
            "source": self.responses.source,
            "responses": list(self.responses.values),
            **self.effects.to_dict(),
            **self.breakdown.to_dict(),
            **self.influence.to_dict(),
        }


def analyze(design: DesignMatrix, responses, replication: int = 1,
            cell_residuals: Sequence[float] | None = None) -> Analysis:
    rv = _as_responses(responses)
    est = estimate_effects(design, rv)
    bd = variation_breakdown(est, design.k, replication, cell_residuals)
    return Analysis(rv, est, bd, influence_percentages(bd))
