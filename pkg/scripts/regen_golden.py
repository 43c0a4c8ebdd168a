#!/usr/bin/env python3
"""Regenerate the checked-in golden artifacts under tests/golden/.

Run from the repository root after an intentional behavior change:

    python3 scripts/regen_golden.py

Outputs, all deterministic for the pinned configs and seeds:

- ``<preset>_aggregates.json`` — per-seed aggregate summaries for the
  three golden configs (regression target for the determinism test).
- ``corruption_steps_2022.csv`` — full per-step trace of the first
  corruption seed (CSV-level regression target).
- ``source_adapter.params`` — the corruption world's source-pretrained
  adapter parameters (serializer regression target).
- ``thresholds.json`` — measured margins frozen as golden thresholds:
  the corruption full-vs-no-backward accuracy margin, the recurring
  forgetting ordering, and the abrupt-schedule detection counts.

Tests never invoke this script; they compare against its outputs.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

import sail

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def run_config(name: str):
    config = sail.load_config(GOLDEN / f"{name}.toml")
    world = sail.build_world(config)
    reports = sail.run_seeds(config, world=world)
    return config, world, reports


def main() -> int:
    thresholds = {}

    # Corruption: aggregates, one full step CSV, source params, and the
    # full-SAIL vs no-backward margin.
    config, world, reports = run_config("corruption")
    sail.harness.write_aggregates_json(reports, GOLDEN / "corruption_aggregates.json")
    sail.harness.write_step_csv(reports[0], GOLDEN / "corruption_steps_2022.csv")
    sail.adapter.save_params(world.params, GOLDEN / "source_adapter.params")
    full_mean = float(np.mean([r.overall["acc_fused"] for r in reports]))
    nb_reports = sail.run_seeds(replace(config, no_backward=True), world=world)
    nb_mean = float(np.mean([r.overall["acc_fused"] for r in nb_reports]))
    thresholds["corruption"] = {
        "mean_acc_full": round(full_mean, 9),
        "mean_acc_no_backward": round(nb_mean, 9),
        "margin": round(full_mean - nb_mean, 9),
        "holdout_accuracy": round(world.holdout_accuracy, 9),
    }

    # Recurring: aggregates and the forgetting ordering with/without resets.
    config, world, reports = run_config("recurring")
    sail.harness.write_aggregates_json(reports, GOLDEN / "recurring_aggregates.json")
    forget_reset = float(np.mean([r.forgetting["mean"] for r in reports]))
    nr_reports = sail.run_seeds(replace(config, disable_reset=True), world=world)
    forget_noreset = float(np.mean([r.forgetting["mean"] for r in nr_reports]))
    thresholds["recurring"] = {
        "forgetting_with_reset": round(forget_reset, 9),
        "forgetting_without_reset": round(forget_noreset, 9),
        "margin": round(forget_noreset - forget_reset, 9),
    }

    # Abrupt: aggregates and the transition-detection counts.
    config, world, reports = run_config("abrupt")
    sail.harness.write_aggregates_json(reports, GOLDEN / "abrupt_aggregates.json")
    detected = [int(r.detection["detected"]) for r in reports]
    fps = [int(r.detection["false_positives"]) for r in reports]
    total = int(sum(detected))
    n_transitions = len(reports[0].transitions) * len(reports)
    thresholds["abrupt"] = {
        "detected_per_seed": detected,
        "false_positives_per_seed": fps,
        "detected_total": total,
        "transitions_total": n_transitions,
        "detection_rate": round(total / n_transitions, 9),
    }

    with open(GOLDEN / "thresholds.json", "w", encoding="utf-8") as fh:
        json.dump(thresholds, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(json.dumps(thresholds, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
