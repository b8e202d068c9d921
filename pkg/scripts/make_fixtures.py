#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures (model, samples, labels).

Everything is derived from fixed PCG64 seeds, so reruns are byte-stable.
Labels are the fault-free host-oracle predictions for the fixture samples,
which pins fault-free accuracy at 1.0 and makes accuracy degradation under
injected faults directly measurable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from limfault import bnn  # noqa: E402

MODEL_SEED = 7
SAMPLE_SEED = 11
N_SAMPLES = 120  # a few spares beyond the 100 the acceptance suite uses
OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def make_model() -> bnn.BnnModel:
    rng = np.random.Generator(np.random.PCG64(MODEL_SEED))
    k1 = rng.integers(0, 2, size=(32, 64)).astype(np.uint8)
    t1 = (2 * rng.integers(-4, 5, size=32)).astype(np.int64)
    k2 = rng.integers(0, 2, size=(10, 32)).astype(np.uint8)
    t2 = np.zeros(10, dtype=np.int64)
    return bnn.BnnModel(
        input_shape=(8, 8),
        class_count=10,
        layers=(
            bnn.Binarize(threshold=128),
            bnn.BinaryDense(64, 32, k1, t1),
            bnn.BinaryDense(32, 10, k2, t2),
        ),
    )


def make_samples(model: bnn.BnnModel):
    rng = np.random.Generator(np.random.PCG64(SAMPLE_SEED))
    samples = rng.integers(0, 256, size=(N_SAMPLES, 8, 8)).astype(np.int64)
    labels = [bnn.host_forward(model, s)[0] for s in samples]
    return samples, labels


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    model = make_model()
    (OUT_DIR / "fixture_model.json").write_bytes(bnn.save_model(model))
    samples, labels = make_samples(model)
    doc = {
        "shape": [8, 8],
        "samples": [s.reshape(-1).tolist() for s in samples],
        "labels": labels,
    }
    (OUT_DIR / "fixture_samples.json").write_text(json.dumps(doc) + "\n")
    counts = np.bincount(labels, minlength=10)
    print(f"wrote fixture model + {N_SAMPLES} samples; label histogram {counts.tolist()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
