"""Factorial latency benchmarking for replicated key-value network slices."""
from .doe import (Analysis, DesignMatrix, EffectEstimates, Factor, InfluenceReport,
                  ResponseVector, VariationBreakdown, analyze, build_design, estimate_effects,
                  influence_percentages, predict, variation_breakdown)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "Analysis", "BACKEND", "DesignMatrix", "EffectEstimates", "Factor", "InfluenceReport",
    "ResponseVector", "VariationBreakdown", "analyze", "build_design", "estimate_effects",
    "influence_percentages", "predict", "variation_breakdown",
]
