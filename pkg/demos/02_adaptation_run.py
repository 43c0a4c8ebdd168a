#!/usr/bin/env python3
"""Run one adaptation episode on a corruption stream and show the gains.

The scenario: a fixed style rotation plus Gaussian noise whose severity
rises 1..5 across five segments.  The frozen generalist saw the style
during broad pretraining; the adapter was pretrained on the clean
source domain only and adapts online from unlabeled batches.  The same
episode is repeated with training disabled (pure fusion of two frozen
models) to show what the self-supervised updates buy.
"""

from __future__ import annotations

from dataclasses import replace

from sail import build_world, run_episode
from sail.config import config_from_dict

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


def segment_table(title: str, report) -> None:
    print(f"--- {title} ---")
    print(f"{'segment':>8s} {'steps':>6s} {'fused':>7s} {'vlm':>7s} {'ada':>7s}")
    for seg in report.segments:
        print(
            f"{seg.domain_id:>8s} {seg.steps:6d} {seg.acc_fused:7.3f} "
            f"{seg.acc_vlm:7.3f} {seg.acc_ada:7.3f}"
        )
    o = report.overall
    print(
        f"{'overall':>8s} {o['steps']:6d} {o['acc_fused']:7.3f} "
        f"{o['acc_vlm']:7.3f} {o['acc_ada']:7.3f}"
        f"   (mean lambda {o['lambda_mean']:.3f}, resets {o['reset_count']})"
    )


def main() -> int:
    config = config_from_dict(SCENARIO)
    print("pretraining the source adapter and fitting the generalist ...")
    world = build_world(config)
    print(f"source-domain holdout accuracy: {world.holdout_accuracy:.3f}")
    print()

    report = run_episode(config, config.seeds[0], world=world)
    segment_table("full adaptation (alignment + entropy + resets)", report)
    print()

    frozen = run_episode(
        replace(config, no_backward=True), config.seeds[0], world=world
    )
    segment_table("no-backward baseline (both models frozen)", frozen)
    print()

    margin = report.overall["acc_fused"] - frozen.overall["acc_fused"]
    print(f"adaptation margin over the frozen baseline: {margin:+.3f}")
    print("note how the gap widens at the high-severity tail, where the")
    print("adapter has drifted furthest from its source pretraining.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
