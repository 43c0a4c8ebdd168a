#!/usr/bin/env python3
"""Walk through the fusion arithmetic on a handful of crafted samples.

Shows the three facts the rest of the system leans on: lse
normalization maps logits to log-probabilities and is shift invariant,
the confidence weight is a logistic in the gap between the two models'
top probabilities (so it is bounded away from 0 and 1), and fusion at
weight 0 or 1 returns one operand exactly.
"""

from __future__ import annotations

import numpy as np

from sail import fusion


def main() -> int:
    rng = np.random.default_rng(1)

    print("=== lse normalization ===")
    z = rng.normal(0.0, 3.0, (3, 4))
    zn = fusion.normalize_logits(z)
    shifted = fusion.normalize_logits(z + 1000.0)
    print(f"row lse after normalization:  {np.asarray(fusion.log_sum_exp(zn)).round(12)}")
    print(f"max |normalize(z+1000) - normalize(z)|: {np.abs(shifted - zn).max():.2e}")
    print(f"max |softmax(z) - softmax(normalize(z))|: "
          f"{np.abs(fusion.softmax(z) - fusion.softmax(zn)).max():.2e}")

    print()
    print("=== confidence weights ===")
    print("lambda = sigmoid(max p_vlm - max p_ada); the probability gap lives in")
    print("(-1, 1), so lambda stays inside (sigmoid(-1), sigmoid(1)) = (0.269, 0.731).")
    cases = [
        ("generalist certain, adapter unsure", [0.97, 0.01, 0.01, 0.01], [0.25, 0.25, 0.25, 0.25]),
        ("adapter certain, generalist unsure", [0.25, 0.25, 0.25, 0.25], [0.97, 0.01, 0.01, 0.01]),
        ("both certain", [0.90, 0.04, 0.03, 0.03], [0.88, 0.04, 0.04, 0.04]),
        ("both unsure", [0.30, 0.25, 0.25, 0.20], [0.28, 0.26, 0.24, 0.22]),
    ]
    for name, pv, pa in cases:
        lam = fusion.interpolation_weight(np.array([pv]), np.array([pa]))[0]
        print(f"  {name:38s} lambda = {lam:.4f}")

    print()
    print("=== endpoint identities ===")
    za = fusion.normalize_logits(rng.normal(0.0, 3.0, (3, 4)))
    at_one = fusion.fuse(zn, za, np.ones(3))
    at_zero = fusion.fuse(zn, za, np.zeros(3))
    print(f"fuse(zv, za, 1) is zv bit-for-bit: {np.array_equal(at_one, zn)}")
    print(f"fuse(zv, za, 0) is za bit-for-bit: {np.array_equal(at_zero, za)}")

    mid = fusion.fuse(zn, za, 0.5)
    print(f"halfway fusion of a row:\n  zv    = {zn[0].round(3)}\n"
          f"  za    = {za[0].round(3)}\n  fused = {mid[0].round(3)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
