import numpy as np
import pytest

from cambench.causal import (DECISION_THRESHOLD, CausalRecord,
                             SyntheticScorer, causal_sweep,
                             insertion_deletion, occlude_structure, spearman,
                             synthetic_score)
from cambench.errors import EmptyStructure, NotEnoughData
from cambench.grid import StructureMasks, normalize
from cambench.qr.scene import SampleRecord

from conftest import synth_records


def toy_sample(h=64, w=64, seed=0):
    rng = np.random.default_rng(seed)
    image = rng.random((h, w))
    finder = np.zeros((h, w), np.uint8)
    finder[4:16, 4:16] = 1
    timing = np.zeros((h, w), np.uint8)
    timing[20, 8:40] = 1
    box = np.zeros((h, w), np.uint8)
    box[2:50, 2:50] = 1
    return SampleRecord(sample_id="toy", image=image,
                        masks=StructureMasks(finder=finder, timing=timing,
                                             box=box),
                        label=1, fill_level=0.5,
                        provenance={"distortions": []})


class TestOcclusion:
    def test_changes_exactly_masked_pixels(self):
        sample = toy_sample()
        out = occlude_structure(sample, "finder", fill=0.5)
        changed = out != sample.image
        assert np.array_equal(changed, sample.masks.finder.astype(bool))
        assert np.all(out[sample.masks.finder.astype(bool)] == 0.5)

    def test_box_covers_whole_box(self):
        sample = toy_sample()
        out = occlude_structure(sample, "box", fill=0.3)
        assert np.all(out[sample.masks.box.astype(bool)] == 0.3)

    def test_random_background_matched_area(self):
        sample = toy_sample()
        out = occlude_structure(sample, "random-background", seed=5,
                                match_part="finder")
        changed = out != sample.image
        target = int(sample.masks.finder.sum())
        assert abs(int(changed.sum()) - target) <= 1
        assert not np.any(changed & sample.masks.box.astype(bool))

    def test_random_background_deterministic(self):
        sample = toy_sample()
        a = occlude_structure(sample, "random-background", seed=7)
        b = occlude_structure(sample, "random-background", seed=7)
        assert np.array_equal(a, b)

    def test_empty_part_raises(self):
        sample = toy_sample()
        empty = StructureMasks.zeros(64, 64)
        broken = SampleRecord(sample_id="x", image=sample.image, masks=empty,
                              label=1, fill_level=0.5, provenance={})
        with pytest.raises(EmptyStructure):
            occlude_structure(broken, "finder")


class TestSyntheticScorer:
    def test_flat_image_scores_bias(self):
        assert synthetic_score(np.full((224, 224), 0.5)) == -1.5
        assert synthetic_score(np.zeros((64, 64))) == -1.5

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(1)
        image = rng.random((128, 128))
        scorer = SyntheticScorer()
        assert scorer(image) == scorer(image)
        assert scorer(image) == SyntheticScorer()(image)

    def test_pristine_scene_above_threshold(self, small_positive):
        assert synthetic_score(small_positive.image) > DECISION_THRESHOLD

    def test_finder_occlusion_lowers_logit(self, small_positive):
        base = synthetic_score(small_positive.image)
        occluded = synthetic_score(
            occlude_structure(small_positive, "finder"))
        assert occluded < base


class TestInsertionDeletion:
    def test_constant_scorer_flat_curves(self, small_positive):
        sal = normalize(small_positive.masks.finder.astype(float))
        ins, dele, curves = insertion_deletion(
            sal, small_positive.image, lambda img: 0.75, steps=7)
        assert ins == pytest.approx(0.75)
        assert dele == pytest.approx(0.75)
        assert np.all(curves["deletion"] == 0.75)

    def test_endpoints(self):
        sample = toy_sample()
        sal = normalize(sample.masks.finder.astype(float))
        seen = []
        ins, dele, curves = insertion_deletion(
            sal, sample.image, lambda img: seen.append(img.copy()) or 0.0,
            steps=5)
        # deletion starts from the original, ends at the gray baseline
        assert np.array_equal(seen[0], sample.image)
        assert np.all(seen[4] == 0.5)
        # insertion starts from the blur baseline, ends at the original
        assert np.array_equal(seen[9], sample.image)

    def test_auc_matches_hand_trapezoid(self):
        sample = toy_sample()
        sal = normalize(sample.masks.finder.astype(float))
        outputs = iter(range(100))
        scorer = lambda img: float(next(outputs) % 7)  # noqa: E731
        ins, dele, curves = insertion_deletion(sal, sample.image, scorer,
                                               steps=5)
        f = curves["fractions"]
        want = np.trapezoid(curves["deletion"], f)
        assert dele == pytest.approx(float(want))

    def test_steps_validation(self):
        sample = toy_sample()
        sal = normalize(sample.masks.finder.astype(float))
        with pytest.raises(ValueError):
            insertion_deletion(sal, sample.image, lambda i: 0.0, steps=1)


class TestSpearman:
    def test_identity_and_reverse(self):
        x = [1.0, 2.0, 5.0, 9.0, 11.0]
        assert spearman(x, x) == pytest.approx(1.0)
        assert spearman(x, x[::-1]) == pytest.approx(-1.0)

    def test_ties_match_brute_force_oracle(self):
        x = [1.0, 2.0, 2.0, 3.0]
        y = [2.0, 1.0, 3.0, 3.0]

        def rank(v):
            order = sorted(range(len(v)), key=lambda i: v[i])
            ranks = [0.0] * len(v)
            i = 0
            while i < len(v):
                j = i
                while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                    j += 1
                for k in range(i, j + 1):
                    ranks[order[k]] = (i + j) / 2 + 1
                i = j + 1
            return ranks

        rx, ry = np.array(rank(x)), np.array(rank(y))
        want = float(np.corrcoef(rx, ry)[0, 1])
        assert spearman(x, y) == pytest.approx(want, abs=1e-12)

    def test_zero_variance_is_none(self):
        assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
        assert spearman([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.random(40)
        y = rng.random(40)
        base = spearman(x, y)
        assert spearman(np.exp(x), y) == pytest.approx(base, abs=1e-12)
        assert spearman(x, y ** 3) == pytest.approx(base, abs=1e-12)

    def test_too_short(self):
        with pytest.raises(NotEnoughData):
            spearman([1.0, 2.0], [3.0, 4.0])


@pytest.fixture(scope="module")
def positives():
    records = synth_records(12, 314, positive_ratio=1.0)
    return [(s, normalize(s.masks.structure_union().astype(float)))
            for s in records]


class TestCausalSweep:
    def test_sweep_positive_finder_rho(self, positives):
        summary, records = causal_sweep(positives, SyntheticScorer())
        assert summary.n == len(positives)
        assert summary.rho_finder is not None and summary.rho_finder > 0
        assert all(isinstance(r, CausalRecord) for r in records)

    def test_constant_fmr_gives_none(self, positives):
        # identical masks across "samples" force constant FMR
        sample, sal = positives[0]
        clones = [(sample, sal)] * 5
        summary, _ = causal_sweep(clones, SyntheticScorer())
        assert summary.rho_finder is None

    def test_permutation_invariance(self, positives):
        scorer = SyntheticScorer()
        s1, _ = causal_sweep(positives, scorer)
        s2, _ = causal_sweep(list(reversed(positives)), scorer)
        assert s1.rho_finder == pytest.approx(s2.rho_finder, abs=1e-12)
        assert s1.rho_timing == pytest.approx(s2.rho_timing, abs=1e-12)

    def test_not_enough_data(self, positives):
        with pytest.raises(NotEnoughData):
            causal_sweep(positives[:2], SyntheticScorer())
