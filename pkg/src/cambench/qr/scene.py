"""Scene rendering: QR symbols on synthetic backgrounds with pixel-exact
part masks, and hard negatives (checkerboards, block noise, gratings).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DoesNotFit
from ..grid import StructureMasks
from ..rng import TAG_BACKGROUND, Stream
from .matrix import ModuleMatrix, Role

QUIET_MODULES = 4

NEGATIVE_KINDS = ("checkerboard", "block-noise", "grating")

_TAG_NEGATIVE = 0x4E454741


@dataclass(frozen=True)
class SceneParams:
    """Resolved rendering parameters for one scene."""

    canvas: tuple[int, int]
    module_px: int
    origin: tuple[int, int]          # top-left pixel of the symbol itself
    background: dict                 # {"kind": flat|gradient|blocks, ...}
    contrast: tuple[float, float]    # (dark level, light level)
    seed: int

    def __post_init__(self):
        if self.module_px < 3:
            raise ValueError(f"module_px {self.module_px} < 3")
        dark, light = self.contrast
        if not (0.0 <= dark < light <= 1.0):
            raise ValueError(f"contrast {self.contrast} must satisfy 0 <= dark < light <= 1")

    def to_dict(self) -> dict:
        return {
            "canvas": list(self.canvas),
            "module_px": self.module_px,
            "origin": list(self.origin),
            "background": dict(self.background),
            "contrast": list(self.contrast),
            "seed": self.seed,
        }


@dataclass
class SampleRecord:
    """One synthesized scene: image, co-registered masks, and provenance."""

    sample_id: str
    image: np.ndarray               # float64 grayscale in [0, 1]
    masks: StructureMasks
    label: int                      # 1 = qr, 0 = non-qr
    fill_level: float               # background gray used as warp fill
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    def replaced(self, image: np.ndarray, masks: StructureMasks,
                 distortion: dict) -> "SampleRecord":
        prov = dict(self.provenance)
        prov["distortions"] = list(prov.get("distortions", [])) + [distortion]
        return SampleRecord(sample_id=self.sample_id, image=image,
                            masks=masks, label=self.label,
                            fill_level=self.fill_level, provenance=prov)


def render_background(params: SceneParams) -> np.ndarray:
    """Render the canvas background described by params.background."""
    h, w = params.canvas
    bg = params.background
    kind = bg["kind"]
    if kind == "flat":
        return np.full((h, w), float(bg["level"]), dtype=np.float64)
    if kind == "gradient":
        angle = np.deg2rad(float(bg["angle_deg"]))
        yy, xx = np.mgrid[0:h, 0:w]
        proj = np.cos(angle) * xx + np.sin(angle) * yy
        lo, hi = proj.min(), proj.max()
        t = (proj - lo) / (hi - lo) if hi > lo else np.zeros((h, w))
        return float(bg["start"]) + (float(bg["end"]) - float(bg["start"])) * t
    if kind == "blocks":
        cell = int(bg["cell_px"])
        stream = Stream(params.seed, TAG_BACKGROUND)
        gh = -(-h // cell)
        gw = -(-w // cell)
        grays = np.array([[stream.uniform(0.2, 0.8) for _ in range(gw)]
                          for _ in range(gh)])
        full = np.repeat(np.repeat(grays, cell, axis=0), cell, axis=1)
        return full[:h, :w]
    raise ValueError(f"unknown background kind {kind!r}")


def compose_scene(matrix: ModuleMatrix, params: SceneParams) -> SampleRecord:
    """Render a module matrix into a scene with exact part masks.

    Each module becomes a module_px x module_px block; the finder mask is
    the union of pixels of finder-tagged modules, likewise timing; the
    box mask covers the symbol extent, quiet zone excluded.
    """
    h, w = params.canvas
    m = params.module_px
    side_px = matrix.side * m
    quiet_px = QUIET_MODULES * m
    r0, c0 = params.origin
    if (r0 - quiet_px < 0 or c0 - quiet_px < 0
            or r0 + side_px + quiet_px > h or c0 + side_px + quiet_px > w):
        raise DoesNotFit(
            f"symbol {side_px}px + quiet {quiet_px}px at origin {params.origin} "
            f"exceeds canvas {params.canvas}")

    dark, light = params.contrast
    image = render_background(params)
    fill_level = float(image.mean())
    image[r0 - quiet_px:r0 + side_px + quiet_px,
          c0 - quiet_px:c0 + side_px + quiet_px] = light
    blocks = np.repeat(np.repeat(matrix.modules, m, axis=0), m, axis=1)
    image[r0:r0 + side_px, c0:c0 + side_px] = np.where(blocks, dark, light)

    def mask_for(role: Role) -> np.ndarray:
        mod_mask = (matrix.function_map == role).astype(np.uint8)
        px = np.repeat(np.repeat(mod_mask, m, axis=0), m, axis=1)
        out = np.zeros((h, w), dtype=np.uint8)
        out[r0:r0 + side_px, c0:c0 + side_px] = px
        return out

    box = np.zeros((h, w), dtype=np.uint8)
    box[r0:r0 + side_px, c0:c0 + side_px] = 1
    masks = StructureMasks(finder=mask_for(Role.FINDER),
                           timing=mask_for(Role.TIMING), box=box)

    provenance = {
        "kind": "qr",
        "qr_spec": matrix.spec.to_dict(),
        "mask_pattern_resolved": matrix.mask_pattern,
        "scene": params.to_dict(),
        "fill_level": fill_level,
        "distortions": [],
    }
    return SampleRecord(sample_id="", image=image, masks=masks, label=1,
                        fill_level=fill_level, provenance=provenance)


def make_negative(kind: str, params: SceneParams, **overrides) -> SampleRecord:
    """Hard negative with all-zero masks. Pattern parameters are drawn
    from the sample's stream unless pinned via overrides (tests do)."""
    if kind not in NEGATIVE_KINDS:
        raise ValueError(f"unknown negative kind {kind!r}")
    h, w = params.canvas
    dark, light = params.contrast
    stream = Stream(params.seed, _TAG_NEGATIVE)
    resolved: dict = {}

    if kind == "checkerboard":
        cell = int(overrides.get("cell_px", stream.randint(3, 16)))
        yy, xx = np.mgrid[0:h, 0:w]
        parity = (yy // cell + xx // cell) % 2
        image = np.where(parity == 0, dark, light).astype(np.float64)
        resolved["cell_px"] = cell
    elif kind == "block-noise":
        cell = int(overrides.get("cell_px", stream.randint(3, 16)))
        gh = -(-h // cell)
        gw = -(-w // cell)
        grays = np.array([[stream.uniform(0.05, 0.95) for _ in range(gw)]
                          for _ in range(gh)])
        image = np.repeat(np.repeat(grays, cell, axis=0), cell, axis=1)[:h, :w]
        resolved["cell_px"] = cell
    else:  # grating
        period = int(overrides.get("period_px", 2 * stream.randint(3, 16)))
        axis = overrides.get("axis", stream.choice(("rows", "cols")))
        coord = np.arange(w if axis == "rows" else h)
        wave = np.where((coord % period) < period // 2, dark, light)
        image = np.tile(wave, (h, 1)) if axis == "rows" \
            else np.tile(wave[:, None], (1, w))
        image = image.astype(np.float64)
        resolved.update(period_px=period, axis=axis)

    provenance = {
        "kind": kind,
        "params": resolved,
        "scene": params.to_dict(),
        "fill_level": float(image.mean()),
        "distortions": [],
    }
    return SampleRecord(sample_id="", image=image,
                        masks=StructureMasks.zeros(h, w), label=0,
                        fill_level=float(image.mean()), provenance=provenance)
