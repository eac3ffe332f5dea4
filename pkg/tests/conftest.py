import json

import numpy as np
import pytest

from cambench import _kernels
from cambench.config import load_config
from cambench.harness import build_sample


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    _kernels.warmup()


def synth_config(n, seed, **synth_overrides):
    overrides = [f"seed={seed}", f"synth.n={n}"]
    for key, value in synth_overrides.items():
        overrides.append(f"synth.{key}={json.dumps(value)}")
    return load_config(overrides=overrides)


def synth_records(n, seed, **synth_overrides):
    """In-memory SampleRecords from the seeded synthesis path."""
    cfg = synth_config(n, seed, **synth_overrides)
    return [build_sample(cfg, i)[0] for i in range(n)]


@pytest.fixture(scope="session")
def small_positive():
    """One deterministic positive scene (v1, module 4, flat background)."""
    [record] = synth_records(1, 99, positive_ratio=1.0, versions=[1],
                             module_px=[4], backgrounds=["flat"])
    return record


def kahan_sum(values) -> float:
    """Compensated summation oracle."""
    total = 0.0
    comp = 0.0
    for v in values:
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def brute_force_edt(mask: np.ndarray) -> np.ndarray:
    """O(N^2) nearest-set-pixel distances, the EDT oracle."""
    h, w = mask.shape
    pts = np.argwhere(mask > 0)
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            d2 = (pts[:, 0] - i) ** 2 + (pts[:, 1] - j) ** 2
            out[i, j] = np.sqrt(float(d2.min()))
    return out
