"""cambench: structure-aware saliency benchmark engine.

Synthesizes QR / non-QR scenes with pixel-exact part masks, applies
controlled distortions that co-transform ground truth, and scores
saliency maps with structural, causal, and robustness metrics.
"""

__version__ = "0.1.0"

from . import errors
from .grid import (SaliencyField, StructureMasks, align_mask, inner_product,
                   normalize)
from .metrics import (CoverageCurve, MetricReport, PenaltyParams,
                      coverage_aucs, coverage_curve, dts,
                      euclidean_distance_transform, evaluate, leak_penalty,
                      mass_ratios, structure_score)

__all__ = [
    "errors", "__version__",
    "SaliencyField", "StructureMasks", "normalize", "align_mask",
    "inner_product",
    "CoverageCurve", "MetricReport", "PenaltyParams", "mass_ratios",
    "coverage_curve", "coverage_aucs", "euclidean_distance_transform",
    "dts", "structure_score", "leak_penalty", "evaluate",
]
