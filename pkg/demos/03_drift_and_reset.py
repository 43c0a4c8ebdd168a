#!/usr/bin/env python3
"""Show the drift monitor: the indicator, a triggered reset, detection.

Part one scripts a parameter trajectory by hand — steady progress in
one direction, then an abrupt about-face — and prints the gradient
drift indicator (GDI) at every step.  The cosine between the latest
displacement and the displacement from the anchor stays near +1 while
the trajectory is consistent and snaps to -1 at the reversal, which
fires a strategic reset.

Part two runs the real thing: an abrupt-shift stream whose segments
alternate between two rotation strengths, so every boundary forces the
adapter to backtrack.  The monitor turns those reversals into reset
events, and the detection summary counts how many boundaries were
caught within the window.
"""

from __future__ import annotations

import numpy as np

from sail import build_world, drift, run_episode
from sail.config import config_from_dict

ABRUPT = {
    "run": {"seeds": [2022], "lr": 1.0},
    "loss": {"weighting_enabled": True},
    "generalist": {
        "broad_rotation_seeds": [0, 777, 777],
        "broad_severities": [1, 1, 3],
    },
    "stream": {
        "preset": "abrupt",
        "rotation_seeds": [777, 777, 777, 777, 777, 777],
        "abrupt_severities": [1, 1, 1, 1, 1, 1],
        "rotation_strengths": [0.6, 0.1, 0.6, 0.1, 0.6, 0.1],
        "rotation_strength": 0.45,
        "segment_lengths": [15, 10, 10, 10, 10, 13],
        "batch_size": 256,
    },
}


def scripted_reversal() -> None:
    print("=== part one: a scripted trajectory ===")
    rng = np.random.default_rng(3)
    theta0 = rng.normal(0.0, 1.0, 8)
    v = rng.normal(0.0, 0.5, 8)
    state = drift.initial_anchor_state(theta0, strategy="full", threshold=0.0)
    theta = theta0
    proposals = [theta0 + t * v for t in range(1, 6)]
    proposals.append(proposals[-1] - v)  # the about-face
    for proposal in proposals:
        delta_t, delta_anchor = drift.displacements(proposal, state.prev, state.anchor)
        g = drift.gdi(delta_t, delta_anchor)
        theta, event, state = drift.observe_step(state, proposal)
        flag = (
            f"  <-- reset ({event.strategy}, {event.num_params_reset} params restored)"
            if event
            else ""
        )
        print(f"  step {state.step}: gdi = {g:+.3f}{flag}")
    print(f"  parameters after the reset equal the source: {np.array_equal(theta, theta0)}")
    print()


def abrupt_stream() -> None:
    print("=== part two: an abrupt-shift stream ===")
    config = config_from_dict(ABRUPT)
    print("pretraining ...")
    world = build_world(config)
    report = run_episode(config, config.seeds[0], world=world)
    print(f"segment boundaries at steps: {report.transitions}")
    print("reset events:")
    for event in report.events:
        print(f"  step {event.step:3d}: gdi = {event.gdi:+.3f}, "
              f"{event.num_params_reset} params ({event.strategy})")
    det = report.detection
    print(
        f"detected {det['detected']}/{det['transitions']} boundaries within "
        f"{det['window']} steps; false positives: {det['false_positives']}"
    )
    print(f"per-boundary delay (steps): {det['delays']}")


def main() -> int:
    scripted_reversal()
    abrupt_stream()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
