#!/usr/bin/env python3
"""Switch the loss terms and resets on and off and tabulate the effect.

Every combination of {alignment loss, entropy loss, strategic resets}
runs on the same corruption stream with the same seed.  Rows with both
losses off never move the adapter, so they reproduce the pure-fusion
baseline by construction; the canonical five-row table shows what each
ingredient adds, and the remaining rows complete the cube.
"""

from __future__ import annotations

from sail import build_world, run_ablation_grid
from sail.config import config_from_dict
from sail.harness import TABLE_ROWS

SCENARIO = {
    "run": {"seeds": [2022], "lr": 2.0},
    "loss": {"weighting_enabled": True},
    "generalist": {
        "broad_rotation_seeds": [0, 303, 303, 303],
        "broad_severities": [2, 1, 3, 5],
    },
    "stream": {
        "preset": "corruption",
        "rotation_seed": 303,
        "rotation_strength": 0.6,
        "batches_per_segment": 10,
        "batch_size": 64,
    },
}


def main() -> int:
    config = config_from_dict(SCENARIO)
    print("pretraining ...")
    world = build_world(config)
    print("running all eight switch combinations ...")
    cells = run_ablation_grid(config, world=world)

    def show(cell) -> None:
        print(f"  {cell.label:18s} {cell.mean_acc:7.4f} ± {cell.std_acc:.4f}")

    print()
    print("canonical table (fused accuracy):")
    for cell in cells[:TABLE_ROWS]:
        show(cell)
    print("remaining combinations:")
    for cell in cells[TABLE_ROWS:]:
        show(cell)

    baseline = cells[0].mean_acc
    best = max(cells, key=lambda c: c.mean_acc)
    print()
    print(f"best combination: {best.label} at {best.mean_acc:.4f} "
          f"({best.mean_acc - baseline:+.4f} over the frozen baseline)")
    print("resets trade a little steady-state accuracy for fast recovery")
    print("after shifts; their value shows on recurring and abrupt streams.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
