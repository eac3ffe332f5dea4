#!/usr/bin/env python3
"""Calibration run for the built-in scorer's frozen constants.

Synthesizes the seeded development sets, prints the logit distributions
behind DECISION_THRESHOLD, and checks the causal-direction properties
the acceptance suite relies on. Re-run after touching the scorer.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cambench import normalize
from cambench.causal import (DECISION_THRESHOLD, SyntheticScorer,
                             insertion_deletion, occlude_structure,
                             spearman)
from cambench.config import load_config
from cambench.harness import build_sample


def dev_samples(n: int, seed: int, positive_ratio: float = 1.0,
                **synth_overrides):
    import json

    overrides = [f"seed={seed}", f"synth.n={n}",
                 f"synth.positive_ratio={positive_ratio}"]
    for key, value in synth_overrides.items():
        overrides.append(f"synth.{key}={json.dumps(value)}")
    cfg = load_config(overrides=overrides)
    for i in range(n):
        sample, _ = build_sample(cfg, i)
        yield sample


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n-dev", type=int, default=500)
    parser.add_argument("--n-causal", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20240)
    args = parser.parse_args()

    scorer = SyntheticScorer()

    print("== pristine v1/m4 dev set ==")
    t0 = time.time()
    logits = []
    for sample in dev_samples(args.n_dev, args.seed, versions=[1],
                              module_px=[4]):
        logits.append(scorer(sample.image))
    logits = np.asarray(logits)
    above = float((logits > DECISION_THRESHOLD).mean())
    print(f"n={logits.size} min={logits.min():.3f} p1={np.percentile(logits, 1):.3f} "
          f"median={np.median(logits):.3f} max={logits.max():.3f}")
    print(f"share above threshold {DECISION_THRESHOLD}: {above:.4f} "
          f"({time.time() - t0:.0f}s)")

    print("== hard negatives ==")
    neg_logits = []
    for sample in dev_samples(args.n_dev // 5, args.seed + 1,
                              positive_ratio=0.0):
        neg_logits.append(scorer(sample.image))
    neg_logits = np.asarray(neg_logits)
    print(f"n={neg_logits.size} min={neg_logits.min():.3f} "
          f"median={np.median(neg_logits):.3f} max={neg_logits.max():.3f}")
    print(f"share below threshold: {float((neg_logits < DECISION_THRESHOLD).mean()):.4f}")

    print("== causal direction on mixed positives ==")
    t0 = time.time()
    d_finder, d_bg, d_timing, fmrs, tmrs = [], [], [], [], []
    lowered = 0
    n = 0
    for sample in dev_samples(args.n_causal, args.seed + 2):
        base = scorer(sample.image)
        occ_f = scorer(occlude_structure(sample, "finder"))
        occ_t = scorer(occlude_structure(sample, "timing"))
        occ_b = scorer(occlude_structure(sample, "random-background",
                                         seed=args.seed + n))
        d_finder.append(base - occ_f)
        d_timing.append(base - occ_t)
        d_bg.append(base - occ_b)
        lowered += occ_f < base
        sal = normalize(sample.masks.structure_union().astype(np.float64))
        from cambench.metrics import mass_ratios
        fmr, tmr, _ = mass_ratios(sal, sample.masks)
        fmrs.append(fmr)
        tmrs.append(tmr)
        n += 1
    d_finder = np.asarray(d_finder)
    d_bg = np.asarray(d_bg)
    wins = int((d_finder > d_bg).sum())
    print(f"n={n} finder-occlusion lowers logit: {lowered}/{n}")
    print(f"delta_finder mean {d_finder.mean():.3f}  delta_bg mean {np.asarray(d_bg).mean():.3f}")
    print(f"finder delta > bg delta: {wins}/{n}")
    print(f"rho(FMR, d_finder) = {spearman(fmrs, d_finder)}")
    print(f"rho(TMR, d_timing) = {spearman(tmrs, d_timing)}")
    print(f"({time.time() - t0:.0f}s)")

    print("== insertion/deletion ordering (structure vs uniform saliency) ==")
    t0 = time.time()
    better = 0
    n_id = 0
    for sample in dev_samples(100, args.seed + 3):
        sal_struct = normalize(sample.masks.structure_union().astype(np.float64))
        uniform = normalize(np.full(sample.image.shape, 0.5))
        _, del_struct, _ = insertion_deletion(sal_struct, sample.image,
                                              scorer, steps=10)
        _, del_unif, _ = insertion_deletion(uniform, sample.image, scorer,
                                            steps=10)
        better += del_struct < del_unif
        n_id += 1
    print(f"deletion AUC(structure) < AUC(uniform): {better}/{n_id} "
          f"({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
