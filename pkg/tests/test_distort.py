import hashlib

import numpy as np
import pytest

from cambench.distort import (BLUR_SIGMA, JPEG_QUALITY, LOWLIGHT_GAIN,
                              OCCLUSION_FRAC, PERSPECTIVE_FRAC, ROTATION_DEG,
                              apply_geometric, apply_occlusion,
                              apply_photometric, gaussian_kernel,
                              jpeg_quant_table, jpeg_roundtrip,
                              occlusion_patch, parse_distort_arg, rotate,
                              rotation_inverse_map)
from cambench.errors import CambenchError
from cambench.grid import StructureMasks
from cambench.qr.scene import SampleRecord


def toy_sample(h=64, w=64, seed=0):
    rng = np.random.default_rng(seed)
    image = rng.random((h, w))
    finder = np.zeros((h, w), np.uint8)
    finder[8:20, 8:20] = 1
    finder[8:20, 40:52] = 1
    finder[40:52, 8:20] = 1
    timing = np.zeros((h, w), np.uint8)
    timing[22, 12:48] = 1
    box = np.zeros((h, w), np.uint8)
    box[6:56, 6:56] = 1
    masks = StructureMasks(finder=finder, timing=timing, box=box)
    return SampleRecord(sample_id="toy", image=image, masks=masks, label=1,
                        fill_level=0.5, provenance={"distortions": []})


def mask_digest(masks):
    h = hashlib.sha256()
    for arr in (masks.finder, masks.timing, masks.box):
        h.update(arr.tobytes())
    return h.hexdigest()


class TestGeometric:
    def test_zero_angle_is_identity(self):
        sample = toy_sample()
        image, masks = rotate(sample, 0.0)
        assert np.array_equal(image, sample.image)
        assert mask_digest(masks) == mask_digest(sample.masks)

    def test_90_degrees_preserves_mask_count(self):
        sample = toy_sample()
        before = int(sample.masks.box.sum())
        _, masks = rotate(sample, 90.0)
        assert int(masks.box.sum()) == before
        _, masks_neg = rotate(sample, -90.0)
        assert int(masks_neg.box.sum()) == before

    def test_rotation_matches_per_pixel_oracle(self):
        sample = toy_sample()
        angle = 20.0
        _, masks = rotate(sample, angle)
        inv = rotation_inverse_map(64, 64, angle)
        # oracle: recompute the nearest-neighbor warp pixel by pixel
        src = sample.masks.box
        for r in range(64):
            for c in range(64):
                denom = inv[2, 0] * c + inv[2, 1] * r + inv[2, 2]
                sx = (inv[0, 0] * c + inv[0, 1] * r + inv[0, 2]) / denom
                sy = (inv[1, 0] * c + inv[1, 1] * r + inv[1, 2]) / denom
                nx = int(np.floor(sx + 0.5))
                ny = int(np.floor(sy + 0.5))
                want = src[ny, nx] if 0 <= nx < 64 and 0 <= ny < 64 else 0
                assert masks.box[r, c] == want, (r, c)

    def test_apply_geometric_schedule_and_provenance(self):
        sample = toy_sample()
        out = apply_geometric(sample, "rotation", 3, seed=5)
        rec = out.provenance["distortions"][-1]
        assert abs(rec["parameters"]["angle_deg"]) == ROTATION_DEG[2]
        assert out.image.shape == sample.image.shape
        out2 = apply_geometric(sample, "rotation", 3, seed=5)
        assert np.array_equal(out.image, out2.image)

    def test_perspective_deterministic_and_mask_warped(self):
        sample = toy_sample()
        a = apply_geometric(sample, "perspective", 4, seed=9)
        b = apply_geometric(sample, "perspective", 4, seed=9)
        assert np.array_equal(a.image, b.image)
        assert mask_digest(a.masks) == mask_digest(b.masks)
        assert not np.array_equal(a.masks.box, sample.masks.box)

    def test_wrong_family_rejected(self):
        with pytest.raises(ValueError):
            apply_geometric(toy_sample(), "blur", 1, seed=0)


class TestPhotometric:
    @pytest.mark.parametrize("family", ["blur", "jpeg", "lowlight"])
    def test_masks_hash_identical(self, family):
        sample = toy_sample()
        out = apply_photometric(sample, family, 3, seed=4)
        assert mask_digest(out.masks) == mask_digest(sample.masks)
        assert not np.array_equal(out.image, sample.image)

    def test_gaussian_kernel_normalized(self):
        for sigma in BLUR_SIGMA:
            k = gaussian_kernel(sigma)
            assert abs(k.sum() - 1.0) < 1e-9
            assert k.size == 2 * max(1, int(round(3 * sigma))) + 1

    def test_jpeg_all_ones_table_lossless_on_block_constant(self):
        # an 8x8-block-constant image with 8-bit gray levels survives the
        # identity quantization table exactly (the lossless limit)
        rng = np.random.default_rng(3)
        levels = rng.integers(0, 256, (8, 8)).astype(np.float64) / 255.0
        image = np.repeat(np.repeat(levels, 8, axis=0), 8, axis=1)
        out = jpeg_roundtrip(image, table=np.ones((8, 8)))
        assert np.abs(out - image).max() < 1e-6

    def test_jpeg_quality_table_monotone(self):
        tables = [jpeg_quant_table(q) for q in JPEG_QUALITY]
        for coarse, fine in zip(tables[1:], tables[:-1]):
            assert np.all(coarse >= fine)
        assert np.all(jpeg_quant_table(50) >= 1)

    def test_jpeg_roundtrip_range_and_effect(self):
        sample = toy_sample()
        out = jpeg_roundtrip(sample.image, quality=15)
        assert out.min() >= 0.0 and out.max() <= 1.0
        err15 = np.abs(out - sample.image).mean()
        err90 = np.abs(jpeg_roundtrip(sample.image, quality=90) - sample.image).mean()
        assert err15 > err90

    def test_lowlight_gain_and_determinism(self):
        sample = toy_sample()
        a = apply_photometric(sample, "lowlight", 5, seed=8)
        b = apply_photometric(sample, "lowlight", 5, seed=8)
        assert np.array_equal(a.image, b.image)
        assert a.image.mean() < sample.image.mean()  # gain 0.2 dominates


class TestOcclusion:
    def test_exact_area_and_fill(self):
        sample = toy_sample(h=224, w=224)
        out = apply_occlusion(sample, 1, seed=3)
        changed = out.image != sample.image
        assert int(changed.sum()) == round(0.05 * 224 * 224) == 2509
        assert np.all(out.image[changed] == 0.5)

    def test_outside_patch_untouched_and_masks_kept(self):
        sample = toy_sample()
        out = apply_occlusion(sample, 2, seed=6)
        changed = out.image != sample.image
        assert np.array_equal(out.image[~changed], sample.image[~changed])
        assert mask_digest(out.masks) == mask_digest(sample.masks)

    def test_deterministic_placement(self):
        assert occlusion_patch(224, 224, 4, 12) == occlusion_patch(224, 224, 4, 12)
        assert occlusion_patch(224, 224, 4, 12) != occlusion_patch(224, 224, 4, 13)

    def test_all_severities_fit(self):
        for severity in range(1, 6):
            top, left, width, full_rows, rem, area = occlusion_patch(
                224, 224, severity, 1)
            assert area == round(OCCLUSION_FRAC[severity - 1] * 224 * 224)
            rows = full_rows + (1 if rem else 0)
            assert top + rows <= 224 and left + width <= 224


class TestSchedules:
    def test_strictly_monotone_severity_effects(self):
        assert list(ROTATION_DEG) == sorted(ROTATION_DEG)
        assert list(PERSPECTIVE_FRAC) == sorted(PERSPECTIVE_FRAC)
        assert list(BLUR_SIGMA) == sorted(BLUR_SIGMA)
        assert list(JPEG_QUALITY) == sorted(JPEG_QUALITY, reverse=True)
        assert list(LOWLIGHT_GAIN) == sorted(LOWLIGHT_GAIN, reverse=True)
        assert list(OCCLUSION_FRAC) == sorted(OCCLUSION_FRAC)
        for sched in (ROTATION_DEG, PERSPECTIVE_FRAC, BLUR_SIGMA,
                      JPEG_QUALITY, LOWLIGHT_GAIN, OCCLUSION_FRAC):
            assert len(sched) == len(set(sched)) == 5


class TestChainParsing:
    def test_grammar(self):
        assert parse_distort_arg("blur:3") == ("blur", 3, None)
        assert parse_distort_arg("rotation:2:99") == ("rotation", 2, 99)

    @pytest.mark.parametrize("bad", ["blur", "blur:9", "warp:1", "blur:x",
                                     "blur:1:2:3"])
    def test_bad_grammar(self, bad):
        with pytest.raises((CambenchError, ValueError)):
            parse_distort_arg(bad)
