"""Structural saliency metrics: mass ratios, coverage AUCs, distance to
structure, the composite score, and the per-sample leakage penalty term.

All operations are pure functions of a SaliencyField and StructureMasks.
Masks at a different resolution are aligned to the saliency grid by
nearest-neighbor resize before scoring.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyStructure, InvalidK, ShapeError
from .grid import SaliencyField, StructureMasks, as_mask

DEFAULT_K = 32


@dataclass(frozen=True)
class CoverageCurve:
    """Coverage fractions of finder / timing / background inside the
    superlevel set, at K quantile thresholds of the normalized field."""

    thresholds: np.ndarray
    phi_finder: np.ndarray
    phi_timing: np.ndarray
    phi_background: np.ndarray


@dataclass(frozen=True)
class DistanceField:
    """Per-pixel Euclidean distance (in pixels) to the nearest
    structural pixel; zero exactly on structure."""

    grid: np.ndarray


@dataclass(frozen=True)
class PenaltyParams:
    """Weights of the leakage penalty bracket: lam scales the whole term
    (applied by the caller), alpha is the pull toward in-box mass."""

    lam: float = 0.25
    alpha: float = 0.25

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")


@dataclass
class MetricReport:
    """Every per-sample structural metric for one (sample, method) pair."""

    fmr: float
    tmr: float
    bl: float
    auc_misf: float
    auc_mist: float
    auc_bg: float
    dts: float
    structure_score: float
    leak_penalty: float
    degenerate: bool
    eval_latency_us: int

    def to_dict(self) -> dict:
        return {
            "fmr": self.fmr, "tmr": self.tmr, "bl": self.bl,
            "auc_misf": self.auc_misf, "auc_mist": self.auc_mist,
            "auc_bg": self.auc_bg, "dts": self.dts,
            "structure_score": self.structure_score,
            "leak_penalty": self.leak_penalty,
            "degenerate": self.degenerate,
            "eval_latency_us": self.eval_latency_us,
        }

    CSV_FIELDS = ("fmr", "tmr", "bl", "auc_misf", "auc_mist", "auc_bg",
                  "dts", "structure_score", "leak_penalty", "degenerate",
                  "eval_latency_us")


def _aligned(sal: SaliencyField, masks: StructureMasks) -> StructureMasks:
    h, w = sal.shape
    return masks.aligned_to(h, w)


def mass_ratios(sal: SaliencyField, masks: StructureMasks) -> tuple[float, float, float]:
    """(FMR, TMR, BL): fractions of normalized mass on finder, timing,
    and outside the box."""
    masks = _aligned(sal, masks)
    c = sal.normalized.ravel()
    fmr = _kernels.dot_rowmajor(c, masks.finder_flat64)
    tmr = _kernels.dot_rowmajor(c, masks.timing_flat64)
    bl = _kernels.dot_rowmajor(c, masks.background_flat64)
    s = sal.total_mass
    return fmr / s, tmr / s, bl / s


def _quantiles_sorted(sorted_vals: np.ndarray, k: int) -> np.ndarray:
    """Empirical quantiles at levels q_j = j/(K+1), j=1..K, by linear
    interpolation of the sorted values (endpoints excluded by design)."""
    n = sorted_vals.size
    q = np.arange(1, k + 1, dtype=np.float64) / (k + 1)
    pos = q * (n - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] + frac * (sorted_vals[hi] - sorted_vals[lo])


def coverage_curve(sal: SaliencyField, masks: StructureMasks,
                   k: int = DEFAULT_K) -> CoverageCurve:
    """Coverage fractions phi_F / phi_T / phi_BG at K quantile thresholds.

    phi_X(tau) = |{C >= tau} ∩ X| / (|{C >= tau}| + epsilon); thresholds
    are kept with duplicates so AUCs stay a mean over exactly K points.

    Thresholds are quantiles of the positive support of the normalized
    field. Min-max normalization pins the minimum pixel to exactly 0, so
    quantiles over all values would collapse to 0 for sparse maps and
    make every superlevel set the whole canvas; quantiles over the
    support keep the stated limit cases (support inside finders =>
    phi_F = 1 at every threshold). A field with no positive pixels
    (degenerate constant input) yields an all-zero curve.
    """
    if k < 2:
        raise InvalidK(f"K must be >= 2, got {k}")
    masks = _aligned(sal, masks)
    values = sal.normalized.ravel()
    positive = values[values > 0.0]
    if positive.size == 0:
        zeros = np.zeros(k)
        return CoverageCurve(thresholds=zeros, phi_finder=zeros.copy(),
                             phi_timing=zeros.copy(),
                             phi_background=zeros.copy())
    positive.sort()
    taus = _quantiles_sorted(positive, k)

    # closed superlevel counts #{v >= tau} from per-mask sorted values;
    # zeros sort below every tau (all taus > 0) so they drop out exactly
    def counts_at(sorted_vals: np.ndarray) -> np.ndarray:
        return sorted_vals.size - np.searchsorted(sorted_vals, taus, side="left")

    def masked_counts(flat_bool: np.ndarray) -> np.ndarray:
        vals = values[flat_bool]
        vals.sort()
        return counts_at(vals)

    cn = counts_at(positive)
    cf = masked_counts(masks.finder_bool)
    ct = masked_counts(masks.timing_bool)
    cbox = masked_counts(masks.box_bool)
    denom = cn.astype(np.float64) + sal.epsilon
    return CoverageCurve(
        thresholds=taus,
        phi_finder=cf / denom,
        phi_timing=ct / denom,
        phi_background=(cn - cbox) / denom,
    )


def coverage_aucs(curve: CoverageCurve) -> tuple[float, float, float]:
    """(AUC_MISF, AUC_MIST, AUC_BG): means of the coverage fractions over
    the K thresholds."""
    k = curve.thresholds.size
    return (
        float(_kernels.sum_rowmajor(curve.phi_finder) / k),
        float(_kernels.sum_rowmajor(curve.phi_timing) / k),
        float(_kernels.sum_rowmajor(curve.phi_background) / k),
    )


def euclidean_distance_transform(structure) -> DistanceField:
    """Exact Euclidean distance transform to the nearest set pixel."""
    occ = as_mask(structure)
    if not occ.any():
        raise EmptyStructure("distance transform needs at least one set pixel")
    return DistanceField(grid=np.sqrt(_kernels.edt_squared(occ)))


def dts(sal: SaliencyField, masks: StructureMasks,
        distance: DistanceField | None = None) -> float:
    """Mass-weighted mean distance to finder-or-timing structure,
    normalized by the image diagonal."""
    masks = _aligned(sal, masks)
    h, w = sal.shape
    if distance is not None:
        if distance.grid.shape != sal.shape:
            raise ShapeError(
                f"distance shape {distance.grid.shape} != saliency {sal.shape}")
        num = _kernels.dot_rowmajor(sal.normalized.ravel(),
                                    distance.grid.ravel())
    else:
        union = masks.structure_union()
        if not union.any():
            raise EmptyStructure("DtS undefined: empty finder/timing union")
        # same element order and arithmetic as the materialized route,
        # without allocating the sqrt field
        num = _kernels.dot_sqrt_rowmajor(sal.normalized.ravel(),
                                         _kernels.edt_squared(union).ravel())
    return num / (sal.total_mass * float(np.sqrt(h * h + w * w)))


def structure_score(auc_misf: float, auc_mist: float, auc_bg: float,
                    dts_value: float) -> float:
    """Composite score; the -3 weight on background coverage makes
    background avoidance dominate."""
    return auc_misf + auc_mist - 3.0 * auc_bg - dts_value


def leak_penalty(sal: SaliencyField, box, params: PenaltyParams) -> float:
    """Per-sample leakage bracket <C_hat, 1-M_B> - alpha * <C_hat, M_B>,
    where C_hat = C / S is the unit-mass field. The caller scales by lam."""
    box = as_mask(box)
    if box.shape != sal.shape:
        raise ShapeError(f"box shape {box.shape} != saliency {sal.shape}")
    box64 = box.ravel().astype(np.float64)
    return _leak_bracket(sal, box64, 1.0 - box64, params)


def _leak_bracket(sal: SaliencyField, box64: np.ndarray,
                  background64: np.ndarray, params: PenaltyParams) -> float:
    c = sal.normalized.ravel()
    inside = _kernels.dot_rowmajor(c, box64)
    outside = _kernels.dot_rowmajor(c, background64)
    return (outside - params.alpha * inside) / sal.total_mass


def evaluate(sal: SaliencyField, masks: StructureMasks, k: int = DEFAULT_K,
             penalty: PenaltyParams | None = None) -> MetricReport:
    """Full per-sample metric suite with wall-clock latency in microseconds."""
    penalty = penalty or PenaltyParams()
    t0 = time.perf_counter_ns()
    masks = _aligned(sal, masks)
    fmr, tmr, bl = mass_ratios(sal, masks)
    curve = coverage_curve(sal, masks, k)
    auc_misf, auc_mist, auc_bg = coverage_aucs(curve)
    dts_value = dts(sal, masks)
    score = structure_score(auc_misf, auc_mist, auc_bg, dts_value)
    pen = _leak_bracket(sal, masks.box_flat64, masks.background_flat64,
                        penalty)
    latency_us = (time.perf_counter_ns() - t0) // 1000
    return MetricReport(
        fmr=fmr, tmr=tmr, bl=bl,
        auc_misf=auc_misf, auc_mist=auc_mist, auc_bg=auc_bg,
        dts=dts_value, structure_score=score, leak_penalty=pen,
        degenerate=sal.degenerate, eval_latency_us=int(latency_us),
    )
