"""Severity-sweep aggregation: BL slope, FMR/TMR AURC, and means with
95% confidence intervals.

Severity levels are normalized to [0, 1]: level j of J maps to j/J with
0 the clean image, so a fitted BL slope reads as total change over the
full sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_Z95 = 1.96

SWEEP_METRICS = ("bl", "fmr", "tmr")


def ols_slope(x, y) -> float | None:
    """Ordinary-least-squares slope of y on x; None when x is degenerate."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.size != ya.size or xa.size < 2:
        raise ValueError(f"need n >= 2 paired points, got {xa.size}/{ya.size}")
    if np.all(xa == xa[0]):
        return None
    xm = xa - xa.mean()
    return float(xm @ (ya - ya.mean())) / float(xm @ xm)


def aurc(severities, metric) -> float | None:
    """Trapezoidal area of a metric over normalized severity."""
    s = np.asarray(severities, dtype=np.float64)
    m = np.asarray(metric, dtype=np.float64)
    if s.size != m.size:
        raise ValueError(f"length mismatch {s.size} vs {m.size}")
    if s.size < 2:
        return None
    if not np.all(np.diff(s) > 0):
        raise ValueError("severities must be strictly increasing")
    span = s[-1] - s[0]
    return float(np.trapezoid(m, s) / span) if span > 0 else None


def mean_ci95(values) -> tuple[float, float]:
    """(mean, 1.96 * sd / sqrt(n)) half-width; 0 half-width for n < 2."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    sd = float(arr.std(ddof=1))
    return mean, _Z95 * sd / math.sqrt(arr.size)


@dataclass
class SeveritySeries:
    """Per-family sweep: normalized severities (s_0 = 0 is clean) with
    per-level metric means, CI half-widths, and sample counts."""

    family: str
    severities: list[float]
    means: dict = field(default_factory=dict)   # metric -> [mean per level]
    cis: dict = field(default_factory=dict)     # metric -> [ci per level]
    counts: list[int] = field(default_factory=list)

    def __post_init__(self):
        s = np.asarray(self.severities, dtype=np.float64)
        if s.size < 2 or s[0] != 0.0 or not np.all(np.diff(s) > 0):
            raise ValueError(
                f"severities must start at 0 and increase, got {self.severities}")

    def to_dict(self) -> dict:
        return {"family": self.family, "severities": list(self.severities),
                "means": {k: list(v) for k, v in self.means.items()},
                "cis": {k: list(v) for k, v in self.cis.items()},
                "counts": list(self.counts)}


def build_series(family: str, per_level: dict[float, list[dict]]) -> SeveritySeries:
    """Fold per-sample metric dicts (keys bl/fmr/tmr) into a series.

    per_level maps normalized severity -> list of per-sample records.
    """
    sevs = sorted(per_level)
    series = SeveritySeries(family=family, severities=sevs)
    series.counts = [len(per_level[s]) for s in sevs]
    for metric in SWEEP_METRICS:
        means = []
        cis = []
        for s in sevs:
            values = [rec[metric] for rec in per_level[s]]
            mean, ci = mean_ci95(values)
            means.append(mean)
            cis.append(ci)
        series.means[metric] = means
        series.cis[metric] = cis
    return series


@dataclass
class RobustnessSummary:
    bl_slope: float | None
    fmr_aurc: float | None
    tmr_aurc: float | None
    ci95: dict = field(default_factory=dict)
    families: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"bl_slope": self.bl_slope, "fmr_aurc": self.fmr_aurc,
                "tmr_aurc": self.tmr_aurc, "ci95": dict(self.ci95),
                "families": list(self.families)}


def summarize(series_list: list[SeveritySeries]) -> RobustnessSummary:
    """Pool families: BL slope is one OLS fit over all (severity, mean BL)
    points; AURCs are equal-weight means across families; ci95 carries
    the across-family spread of each statistic."""
    if not series_list:
        raise ValueError("no severity series to summarize")
    xs: list[float] = []
    ys: list[float] = []
    per_family_slope = []
    per_family_fmr = []
    per_family_tmr = []
    for series in series_list:
        xs.extend(series.severities)
        ys.extend(series.means["bl"])
        per_family_slope.append(ols_slope(series.severities, series.means["bl"]))
        per_family_fmr.append(aurc(series.severities, series.means["fmr"]))
        per_family_tmr.append(aurc(series.severities, series.means["tmr"]))

    slope = ols_slope(xs, ys)

    def pooled(values):
        vals = [v for v in values if v is not None]
        if not vals:
            return None, 0.0
        return mean_ci95(vals)

    fmr_mean, fmr_ci = pooled(per_family_fmr)
    tmr_mean, tmr_ci = pooled(per_family_tmr)
    _, slope_ci = pooled(per_family_slope)
    return RobustnessSummary(
        bl_slope=slope, fmr_aurc=fmr_mean, tmr_aurc=tmr_mean,
        ci95={"bl_slope": slope_ci, "fmr_aurc": fmr_ci, "tmr_aurc": tmr_ci},
        families=[s.family for s in series_list],
    )
