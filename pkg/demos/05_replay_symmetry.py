#!/usr/bin/env python3
"""Fuse externally produced logits from files, no models involved.

Replay mode reads per-sample logit records (tab-separated: id, label
or ``-``, then one logit per class) and applies the same
normalize-weight-fuse arithmetic the live system uses.  Two stories:

* one file fused against itself is exactly neutral — every weight is
  0.5 and the fused accuracy equals the single-model accuracy;
* a sharp model fused with a noisy one lands between them or above,
  because the confidence weight leans toward whichever model is surer
  on each sample.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from sail import generalist, run_replay

N_SAMPLES = 400
N_CLASSES = 6


def synthetic_records(labels, rng, *, sharpness: float, noise: float):
    """Logit records for one synthetic model of tunable quality."""
    records = []
    for i, label in enumerate(labels):
        logits = rng.normal(0.0, noise, N_CLASSES)
        logits[label] += sharpness
        records.append(
            generalist.LogitRecord(sample_id=f"s{i:04d}", label=int(label), logits=logits)
        )
    return records


def main() -> int:
    labels = np.random.default_rng(5).integers(0, N_CLASSES, N_SAMPLES)
    with tempfile.TemporaryDirectory() as tmp:
        sharp_path = Path(tmp) / "sharp.tsv"
        noisy_path = Path(tmp) / "noisy.tsv"
        generalist.write_external_logits(
            sharp_path,
            synthetic_records(labels, np.random.default_rng(7), sharpness=2.0, noise=1.0),
        )
        generalist.write_external_logits(
            noisy_path,
            synthetic_records(labels, np.random.default_rng(8), sharpness=0.8, noise=1.2),
        )
        sharp = generalist.load_external_logits(sharp_path)
        noisy = generalist.load_external_logits(noisy_path)

        print("=== a file against itself ===")
        report = run_replay(sharp)
        print(f"fused / single accuracy: {report.acc_fused:.4f} / {report.acc_vlm:.4f}")
        print(f"mean weight: {report.lambda_mean:.6f} "
              f"(every sample: {all(p[5] == 0.5 for p in report.predictions)})")

        print()
        print("=== sharp model fused with a noisy one ===")
        report = run_replay(sharp, noisy)
        print(f"{'sharp alone':>14s}: {report.acc_vlm:.4f}")
        print(f"{'noisy alone':>14s}: {report.acc_ada:.4f}")
        print(f"{'fused':>14s}: {report.acc_fused:.4f}   (mean weight "
              f"{report.lambda_mean:.4f}, leaning toward the sharp side)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
