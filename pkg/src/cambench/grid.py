"""Canonical grid types: saliency fields, binary masks, and the shared
normalization / alignment / inner-product primitives.

Grids are 2-D numpy arrays in row-major order. Saliency math runs in
float64; binary masks are uint8 with values exactly 0 or 1. Everything
here is pure and safe to evaluate in parallel across samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import InvalidDimensions, InvalidSaliency, ShapeError

MAX_SIDE = 8192
DEFAULT_EPSILON = 1e-6

MASK_ROLES = ("finder", "timing", "box", "background", "structure_union")


def as_grid(values, dtype=np.float64) -> np.ndarray:
    """Validate and return a 2-D grid array."""
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 2:
        raise InvalidDimensions(f"grid must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    if not (1 <= h <= MAX_SIDE and 1 <= w <= MAX_SIDE):
        raise InvalidDimensions(f"grid dims {h}x{w} outside [1, {MAX_SIDE}]")
    return arr


def as_mask(values) -> np.ndarray:
    """Validate a binary mask: uint8 grid with values exactly 0 or 1."""
    arr = as_grid(values, dtype=np.uint8)
    if arr.max(initial=0) > 1:
        raise ValueError("mask values must be exactly 0 or 1")
    return arr


@dataclass(frozen=True)
class SaliencyField:
    """A nonnegative raw field plus its min-max normalized form.

    normalized(p) = (raw(p) - min) / (max - min + epsilon), so a constant
    raw field normalizes to all zeros and total_mass collapses to epsilon
    (the degenerate case downstream metrics flag).
    """

    raw: np.ndarray
    normalized: np.ndarray
    total_mass: float
    epsilon: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw.shape

    @property
    def degenerate(self) -> bool:
        return bool(self.normalized.max() == 0.0)

    def unit_mass(self) -> np.ndarray:
        """normalized / total_mass, the unit-mass form used by the
        leakage penalty."""
        return self.normalized / self.total_mass


@dataclass(frozen=True)
class StructureMasks:
    """Finder / timing / box masks for one sample, all sharing (H, W)."""

    finder: np.ndarray
    timing: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "finder", as_mask(self.finder))
        object.__setattr__(self, "timing", as_mask(self.timing))
        object.__setattr__(self, "box", as_mask(self.box))
        if not (self.finder.shape == self.timing.shape == self.box.shape):
            raise ShapeError(
                f"mask shapes differ: {self.finder.shape} / "
                f"{self.timing.shape} / {self.box.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.box.shape

    def background(self) -> np.ndarray:
        """Complement of the box mask (1 - M_box)."""
        return (1 - self.box).astype(np.uint8)

    def structure_union(self) -> np.ndarray:
        """min(finder + timing, 1): the structural support used by the
        distance transform."""
        return np.minimum(self.finder + self.timing, 1).astype(np.uint8)

    # flat float64 views, cached per sample so repeated evaluations skip
    # the conversions (cached_property writes __dict__ directly, which a
    # frozen dataclass permits)

    @cached_property
    def finder_flat64(self) -> np.ndarray:
        return self.finder.ravel().astype(np.float64)

    @cached_property
    def timing_flat64(self) -> np.ndarray:
        return self.timing.ravel().astype(np.float64)

    @cached_property
    def box_flat64(self) -> np.ndarray:
        return self.box.ravel().astype(np.float64)

    @cached_property
    def background_flat64(self) -> np.ndarray:
        return self.background().ravel().astype(np.float64)

    @cached_property
    def finder_bool(self) -> np.ndarray:
        return self.finder.ravel().astype(bool)

    @cached_property
    def timing_bool(self) -> np.ndarray:
        return self.timing.ravel().astype(bool)

    @cached_property
    def box_bool(self) -> np.ndarray:
        return self.box.ravel().astype(bool)

    def is_empty(self) -> bool:
        return not (self.finder.any() or self.timing.any() or self.box.any())

    @classmethod
    def zeros(cls, h: int, w: int) -> "StructureMasks":
        z = np.zeros((h, w), dtype=np.uint8)
        return cls(finder=z, timing=z.copy(), box=z.copy())

    def aligned_to(self, h: int, w: int) -> "StructureMasks":
        if (h, w) == self.shape:
            return self
        return StructureMasks(
            finder=align_mask(self.finder, h, w),
            timing=align_mask(self.timing, h, w),
            box=align_mask(self.box, h, w),
        )


def normalize(raw, epsilon: float = DEFAULT_EPSILON) -> SaliencyField:
    """Min-max normalize a nonnegative field and compute its total mass.

    total_mass = sum(normalized) + epsilon, so it is always positive and
    ratio metrics stay total even for constant fields.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    arr = as_grid(raw)
    if not np.isfinite(arr).all():
        raise InvalidSaliency("saliency contains non-finite values")
    lo = float(arr.min())
    if lo < 0.0:
        raise InvalidSaliency(f"saliency contains negative value {lo}")
    hi = float(arr.max())
    normalized = (arr - lo) / (hi - lo + epsilon)
    total = _kernels.sum_rowmajor(normalized.ravel()) + epsilon
    return SaliencyField(raw=arr, normalized=normalized,
                         total_mass=total, epsilon=epsilon)


def align_mask(mask, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor resize of a binary mask to (target_h, target_w).

    Center-aligned mapping: output pixel p reads source index
    floor((p + 0.5) * src / dst). Idempotent at fixed dims; exact block
    replication for integer upsampling factors.
    """
    src = as_mask(mask)
    if target_h < 1 or target_w < 1:
        raise InvalidDimensions(f"target dims {target_h}x{target_w} < 1")
    if target_h > MAX_SIDE or target_w > MAX_SIDE:
        raise InvalidDimensions(f"target dims {target_h}x{target_w} > {MAX_SIDE}")
    sh, sw = src.shape
    if (sh, sw) == (target_h, target_w):
        return src.copy()
    rows = ((np.arange(target_h, dtype=np.float64) + 0.5) * sh / target_h).astype(np.int64)
    cols = ((np.arange(target_w, dtype=np.float64) + 0.5) * sw / target_w).astype(np.int64)
    np.clip(rows, 0, sh - 1, out=rows)
    np.clip(cols, 0, sw - 1, out=cols)
    return src[np.ix_(rows, cols)]


def inner_product(a, b) -> float:
    """Sum of elementwise products, accumulated sequentially in float64."""
    ga = as_grid(a)
    gb = as_grid(b)
    if ga.shape != gb.shape:
        raise ShapeError(f"shape mismatch {ga.shape} vs {gb.shape}")
    return _kernels.dot_rowmajor(ga.ravel(), gb.ravel())
