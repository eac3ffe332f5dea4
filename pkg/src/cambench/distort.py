"""Six distortion families at five graded severities, co-transforming
masks so ground truth persists.

Geometric families (rotation, perspective) warp image and masks through
one shared inverse map: bilinear sampling for intensities, nearest
neighbor for masks. Photometric families (blur, jpeg, lowlight) and
occlusion leave masks bit-identical.

A distorted sample is a SampleRecord whose provenance records the
applied chain; sample_id stays the base id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import convolve1d

from .errors import CambenchError
from .grid import StructureMasks
from .qr.scene import SampleRecord
from .rng import TAG_DISTORT, TAG_OCCLUDE, Stream

GEOMETRIC_FAMILIES = ("rotation", "perspective")
PHOTOMETRIC_FAMILIES = ("blur", "jpeg", "lowlight")
ALL_FAMILIES = GEOMETRIC_FAMILIES + PHOTOMETRIC_FAMILIES + ("occlusion",)

# severity 1..5 schedules, strictly monotone in effect
ROTATION_DEG = (5.0, 10.0, 20.0, 30.0, 45.0)
PERSPECTIVE_FRAC = (0.02, 0.04, 0.06, 0.08, 0.10)
BLUR_SIGMA = (0.5, 1.0, 2.0, 3.0, 4.0)
JPEG_QUALITY = (90, 70, 50, 30, 15)
LOWLIGHT_GAIN = (0.8, 0.6, 0.45, 0.3, 0.2)
LOWLIGHT_NOISE_SIGMA = 0.02
OCCLUSION_FRAC = (0.05, 0.10, 0.15, 0.20, 0.30)
OCCLUSION_FILL = 0.5

_FAMILY_CODE = {f: i + 1 for i, f in enumerate(ALL_FAMILIES)}

# ITU-T T.81 Annex K luminance quantization table
_JPEG_LUMA = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


@dataclass(frozen=True)
class Distortion:
    """One applied distortion with its fully resolved parameters."""

    family: str
    severity: int
    seed: int
    parameters: dict

    def to_dict(self) -> dict:
        return {"family": self.family, "severity": self.severity,
                "seed": self.seed, "parameters": dict(self.parameters)}


def _check_severity(severity: int) -> None:
    if not 1 <= severity <= 5:
        raise ValueError(f"severity {severity} outside 1..5")


# ----------------------------------------------------------------------
# geometric warps: one inverse map shared by image and masks


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian truncated at 3 sigma, renormalized to sum 1."""
    radius = max(1, int(round(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def warp_inverse(image: np.ndarray, masks: StructureMasks,
                 inv_map: np.ndarray, fill: float):
    """Warp image (bilinear) and masks (nearest) through a shared
    inverse map.

    inv_map is 3x3 acting on homogeneous (x, y, 1) output-pixel-center
    coordinates, yielding source coordinates. Source centers outside
    [0, W-1] x [0, H-1] read the fill level (masks read 0).
    """
    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    denom = inv_map[2, 0] * xx + inv_map[2, 1] * yy + inv_map[2, 2]
    sx = (inv_map[0, 0] * xx + inv_map[0, 1] * yy + inv_map[0, 2]) / denom
    sy = (inv_map[1, 0] * xx + inv_map[1, 1] * yy + inv_map[1, 2]) / denom

    inside = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(sx, 0.0, w - 1.0) - x0
    fy = np.clip(sy, 0.0, h - 1.0) - y0
    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    warped = top * (1.0 - fy) + bot * fy
    warped = np.where(inside, warped, fill)

    # masks: nearest neighbor (half-up rounding), outside reads 0
    nx = np.floor(sx + 0.5).astype(np.int64)
    ny = np.floor(sy + 0.5).astype(np.int64)
    nn_inside = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
    nxc = np.clip(nx, 0, w - 1)
    nyc = np.clip(ny, 0, h - 1)

    def warp_mask(mask: np.ndarray) -> np.ndarray:
        out = mask[nyc, nxc]
        return np.where(nn_inside, out, 0).astype(np.uint8)

    warped_masks = StructureMasks(finder=warp_mask(masks.finder),
                                  timing=warp_mask(masks.timing),
                                  box=warp_mask(masks.box))
    return warped, warped_masks


def rotation_inverse_map(h: int, w: int, angle_deg: float) -> np.ndarray:
    """Inverse map of a rotation about the canvas center."""
    theta = np.deg2rad(angle_deg)
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    cos_t = np.cos(-theta)
    sin_t = np.sin(-theta)
    return np.array([
        [cos_t, -sin_t, cx - cos_t * cx + sin_t * cy],
        [sin_t, cos_t, cy - sin_t * cx - cos_t * cy],
        [0.0, 0.0, 1.0],
    ])


def homography_from_points(src_pts: np.ndarray, dst_pts: np.ndarray) -> np.ndarray:
    """3x3 homography H with H (x_src, y_src, 1) ~ (x_dst, y_dst, 1) for
    the four given point pairs (DLT, h22 pinned to 1)."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src_pts, dst_pts)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i + 1] = v
    hvec = np.linalg.solve(a, b)
    return np.array([[hvec[0], hvec[1], hvec[2]],
                     [hvec[3], hvec[4], hvec[5]],
                     [hvec[6], hvec[7], 1.0]])


def rotate(sample: SampleRecord, angle_deg: float):
    """Rotate a sample about the canvas center (positive = counter-
    clockwise in image coordinates)."""
    inv = rotation_inverse_map(*sample.shape, angle_deg)
    return warp_inverse(sample.image, sample.masks, inv, sample.fill_level)


def perspective(sample: SampleRecord, corner_offsets: np.ndarray):
    """Perspective warp moving the four canvas corners by the given
    (dx, dy) offsets (order: TL, TR, BL, BR)."""
    h, w = sample.shape
    src = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]],
                   dtype=np.float64)
    dst = src + np.asarray(corner_offsets, dtype=np.float64).reshape(4, 2)
    inv = homography_from_points(dst, src)  # output pixel -> source pixel
    return warp_inverse(sample.image, sample.masks, inv, sample.fill_level)


def apply_geometric(sample: SampleRecord, family: str, severity: int,
                    seed: int) -> SampleRecord:
    """Rotation (sign-random magnitude from the schedule) or perspective
    (seeded corner jitter as a fraction of min(H, W))."""
    if family not in GEOMETRIC_FAMILIES:
        raise ValueError(f"{family!r} is not a geometric family")
    _check_severity(severity)
    stream = Stream(seed, TAG_DISTORT, _FAMILY_CODE[family], severity)
    if family == "rotation":
        angle = stream.sign() * ROTATION_DEG[severity - 1]
        image, masks = rotate(sample, angle)
        params = {"angle_deg": angle}
    else:
        h, w = sample.shape
        jitter = PERSPECTIVE_FRAC[severity - 1] * min(h, w)
        offsets = np.array([stream.uniform(-jitter, jitter) for _ in range(8)])
        image, masks = perspective(sample, offsets)
        params = {"jitter_px": jitter, "corner_offsets": offsets.tolist()}
    dist = Distortion(family, severity, seed, params)
    return sample.replaced(image, masks, dist.to_dict())


# ----------------------------------------------------------------------
# photometric families: masks untouched


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel(sigma)
    out = convolve1d(image, kernel, axis=0, mode="reflect")
    return convolve1d(out, kernel, axis=1, mode="reflect")


def jpeg_quant_table(quality: int) -> np.ndarray:
    """IJG scaling of the standard luminance table."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality {quality} outside 1..100")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((_JPEG_LUMA * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def jpeg_roundtrip(image: np.ndarray, quality: int | None = None,
                   table: np.ndarray | None = None) -> np.ndarray:
    """8x8 block DCT quantization round-trip (no entropy coding)."""
    if table is None:
        table = jpeg_quant_table(quality)
    h, w = image.shape
    ph = (8 - h % 8) % 8
    pw = (8 - w % 8) % 8
    x = np.pad(image, ((0, ph), (0, pw)), mode="edge") * 255.0 - 128.0
    hb = x.shape[0] // 8
    wb = x.shape[1] // 8
    blocks = x.reshape(hb, 8, wb, 8).swapaxes(1, 2)
    coeffs = dctn(blocks, axes=(2, 3), norm="ortho")
    coeffs = np.round(coeffs / table) * table
    y = idctn(coeffs, axes=(2, 3), norm="ortho")
    out = (y.swapaxes(1, 2).reshape(hb * 8, wb * 8) + 128.0) / 255.0
    return np.clip(out[:h, :w], 0.0, 1.0)


def lowlight(image: np.ndarray, gain: float, seed: int, severity: int) -> np.ndarray:
    stream = Stream(seed, TAG_DISTORT, _FAMILY_CODE["lowlight"], severity)
    noise = stream.normals(image.size, sigma=LOWLIGHT_NOISE_SIGMA)
    out = image * gain + noise.reshape(image.shape)
    return np.clip(out, 0.0, 1.0)


def apply_photometric(sample: SampleRecord, family: str, severity: int,
                      seed: int = 0) -> SampleRecord:
    """Blur / jpeg / lowlight; masks stay bit-identical. Only lowlight
    consumes the seed (its additive noise)."""
    if family not in PHOTOMETRIC_FAMILIES:
        raise ValueError(f"{family!r} is not a photometric family")
    _check_severity(severity)
    if family == "blur":
        sigma = BLUR_SIGMA[severity - 1]
        image = gaussian_blur(sample.image, sigma)
        params = {"sigma_px": sigma}
    elif family == "jpeg":
        quality = JPEG_QUALITY[severity - 1]
        image = jpeg_roundtrip(sample.image, quality)
        params = {"quality": quality}
    else:
        gain = LOWLIGHT_GAIN[severity - 1]
        image = lowlight(sample.image, gain, seed, severity)
        params = {"gain": gain, "noise_sigma": LOWLIGHT_NOISE_SIGMA}
    dist = Distortion(family, severity, seed, params)
    return sample.replaced(image, sample.masks, dist.to_dict())


def occlusion_patch(h: int, w: int, severity: int, seed: int):
    """Exact-area patch geometry: near-square block of full rows plus a
    partial last row (ceil(sqrt) widths rarely divide the target area)."""
    area = int(round(OCCLUSION_FRAC[severity - 1] * h * w))
    width = max(1, min(w, int(round(np.sqrt(area)))))
    width = max(width, -(-area // h))  # keep the row count on canvas
    full_rows = area // width
    rem = area - full_rows * width
    rows_total = full_rows + (1 if rem else 0)
    stream = Stream(seed, TAG_OCCLUDE, severity)
    top = stream.randint(0, h - rows_total)
    left = stream.randint(0, w - width)
    return top, left, width, full_rows, rem, area


def apply_occlusion(sample: SampleRecord, severity: int, seed: int) -> SampleRecord:
    """Mid-gray patch at a seeded position; masks unchanged (ground truth
    persists under cover)."""
    _check_severity(severity)
    h, w = sample.shape
    top, left, width, full_rows, rem, area = occlusion_patch(h, w, severity, seed)
    image = sample.image.copy()
    image[top:top + full_rows, left:left + width] = OCCLUSION_FILL
    if rem:
        image[top + full_rows, left:left + rem] = OCCLUSION_FILL
    params = {"area_px": area, "top": top, "left": left, "width": width,
              "fill": OCCLUSION_FILL}
    dist = Distortion("occlusion", severity, seed, params)
    return sample.replaced(image, sample.masks, dist.to_dict())


def apply_distortion(sample: SampleRecord, family: str, severity: int,
                     seed: int) -> SampleRecord:
    if family in GEOMETRIC_FAMILIES:
        return apply_geometric(sample, family, severity, seed)
    if family in PHOTOMETRIC_FAMILIES:
        return apply_photometric(sample, family, severity, seed)
    if family == "occlusion":
        return apply_occlusion(sample, severity, seed)
    raise ValueError(f"unknown distortion family {family!r}")


def apply_chain(sample: SampleRecord, chain) -> SampleRecord:
    """Apply (family, severity, seed) triples in order."""
    out = sample
    for family, severity, seed in chain:
        out = apply_distortion(out, family, severity, seed)
    return out


def parse_distort_arg(text: str) -> tuple[str, int, int | None]:
    """Parse the CLI grammar family:severity[:seed]."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise CambenchError(f"bad --distort value {text!r}, want family:severity[:seed]")
    family = parts[0]
    if family not in ALL_FAMILIES:
        raise CambenchError(f"unknown family {family!r}; choices: {ALL_FAMILIES}")
    try:
        severity = int(parts[1])
        seed = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise CambenchError(f"bad --distort value {text!r}: {exc}") from exc
    _check_severity(severity)
    return family, severity, seed
