"""Command-line interface.

Subcommands
-----------
pretrain
    Build the per-config artifacts (adapter + prototype classifier)
    and save them to disk.
run
    Run adaptation episodes and write per-step CSV, reset JSONL, and
    aggregate JSON reports.
ablate
    Run the loss/reset switch grid and print the ablation table.
sweep
    Re-run the configured episode over a grid of one reset parameter.
gen-stream
    Materialize a synthetic stream to a CSV file.
analyze
    Run one diagnostic episode and emit correlation statistics.
replay
    Fuse externally produced logit files without any training.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import adapter, analysis, drift, fusion, generalist, harness, streams
from .config import RunConfig, build_schedule, load_config, validate_config
from .errors import ConfigError, InvalidInputError, NumericalFailureError

SWEEP_PARAMS = ("threshold", "interval", "alpha", "strategy")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    sub.add_argument("--lr", type=float, help="test-time learning rate")
    sub.add_argument(
        "--normalization",
        choices=fusion.NORMALIZATION_STRATEGIES,
        help="logit normalization strategy",
    )
    sub.add_argument(
        "--weight-strategy",
        choices=fusion.WEIGHT_STRATEGIES,
        help="interpolation weight strategy",
    )
    sub.add_argument("--seeds", help="comma-separated episode seeds")
    sub.add_argument("--no-backward", action="store_true", help="disable all training")
    sub.add_argument("--disable-align", action="store_true", help="drop the alignment loss")
    sub.add_argument("--disable-ent", action="store_true", help="drop the entropy loss")
    sub.add_argument("--disable-reset", action="store_true", help="disable drift monitoring")
    sub.add_argument("--force-lambda", type=float, help="fixed interpolation weight (debug)")
    sub.add_argument("--detection-window", type=int, help="detection window in batches")
    sub.add_argument("--preset", help="stream preset name")
    sub.add_argument("--batch-size", type=int, help="stream batch size")
    sub.add_argument("--batches-per-segment", type=int, help="batches per stream segment")
    sub.add_argument("--base-seed", type=int, help="world seed (data, pretraining, prototypes)")
    sub.add_argument("--reset-threshold", type=float, help="drift threshold tau")
    sub.add_argument("--reset-interval", type=int, help="anchor refresh interval s")
    sub.add_argument("--reset-alpha", type=float, help="percentage of parameters to reset")
    sub.add_argument(
        "--reset-strategy", choices=drift.RESET_STRATEGIES, help="reset selection strategy"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sail",
        description="Confidence-weighted model fusion with test-time adaptation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="build and save per-config artifacts")
    _add_config_options(p)
    p.add_argument("--out-dir", default=".", help="artifact output directory")
    p.add_argument(
        "--encoding",
        choices=adapter.ENCODINGS,
        default="binary",
        help="adapter parameter file encoding",
    )
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("run", help="run adaptation episodes and write reports")
    _add_config_options(p)
    p.add_argument("--seed", type=int, help="run a single episode with this seed")
    p.add_argument("--out-dir", default=".", help="report output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="run the loss/reset switch grid")
    _add_config_options(p)
    p.add_argument("--out", help="write grid cells as JSON")
    p.add_argument(
        "--full-grid",
        action="store_true",
        help="print all eight switch combinations, not only the canonical five",
    )
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="sweep one reset parameter")
    _add_config_options(p)
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True, help="parameter to sweep")
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--out", help="write the sweep table as CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-stream", help="materialize a synthetic stream")
    _add_config_options(p)
    p.add_argument("--seed", type=int, help="episode seed (default: first config seed)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_stream)

    p = sub.add_parser("analyze", help="correlation statistics from a diagnostic episode")
    _add_config_options(p)
    p.add_argument("--seed", type=int, help="episode seed (default: first config seed)")
    p.add_argument("--out-dir", default=".", help="output directory for CSVs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay", help="fuse externally produced logit files")
    p.add_argument("--config", help="TOML config file providing [replay] paths")
    p.add_argument("--vlm-logits", help="logit file for the generalist side")
    p.add_argument("--ada-logits", help="logit file for the adapter side")
    p.add_argument(
        "--weight-strategy",
        choices=fusion.WEIGHT_STRATEGIES,
        default=None,
        help="interpolation weight strategy",
    )
    p.add_argument(
        "--normalization",
        choices=fusion.NORMALIZATION_STRATEGIES,
        default=None,
        help="logit normalization strategy",
    )
    p.add_argument("--out", help="write per-sample predictions as CSV")
    p.set_defaults(func=cmd_replay)

    return parser


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _parse_seed_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"invalid seed list {text!r}: {exc}") from exc


def _resolve_config(args) -> RunConfig:
    """Load the config file (or defaults) and apply flag overrides."""
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()

    run_updates = {}
    for attr, key in (
        ("lr", "lr"),
        ("normalization", "normalization"),
        ("weight_strategy", "weight_strategy"),
        ("force_lambda", "force_lambda"),
        ("detection_window", "detection_window"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            run_updates[key] = value
    if getattr(args, "seeds", None) is not None:
        run_updates["seeds"] = _parse_seed_list(args.seeds)
    for flag in ("no_backward", "disable_align", "disable_ent", "disable_reset"):
        if getattr(args, flag, False):
            run_updates[flag] = True
    if run_updates:
        config = replace(config, **run_updates)

    reset_updates = {}
    for attr, key in (
        ("reset_threshold", "threshold"),
        ("reset_interval", "interval"),
        ("reset_alpha", "alpha"),
        ("reset_strategy", "strategy"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            reset_updates[key] = value
    if reset_updates:
        config = replace(config, reset=replace(config.reset, **reset_updates))

    stream_updates = {}
    for attr, key in (
        ("preset", "preset"),
        ("batch_size", "batch_size"),
        ("batches_per_segment", "batches_per_segment"),
        ("base_seed", "base_seed"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            stream_updates[key] = value
    if stream_updates:
        config = replace(config, stream=replace(config.stream, **stream_updates))

    return validate_config(config)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_pretrain(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    world = harness.build_world(config)
    adapter_path = out / "adapter.params"
    classifier_path = out / "generalist.npz"
    adapter.save_params(world.params, adapter_path, encoding=args.encoding)
    generalist.save_classifier(world.classifier, classifier_path)
    print(f"holdout accuracy: {world.holdout_accuracy:.4f}")
    print(f"wrote {adapter_path}")
    print(f"wrote {classifier_path}")
    return 0


def cmd_run(args) -> int:
    config = _resolve_config(args)
    if args.seed is not None:
        config = validate_config(replace(config, seeds=(args.seed,)))
    out = _out_dir(args)
    world = harness.build_world(config)
    reports = harness.run_seeds(config, world=world)
    for report in reports:
        steps_path = out / f"steps_seed{report.seed}.csv"
        resets_path = out / f"resets_seed{report.seed}.jsonl"
        harness.write_step_csv(report, steps_path)
        harness.write_reset_jsonl(report, resets_path)
        print(
            f"seed {report.seed}: acc_fused={report.overall['acc_fused']:.4f} "
            f"acc_vlm={report.overall['acc_vlm']:.4f} "
            f"acc_ada={report.overall['acc_ada']:.4f} "
            f"resets={report.overall['reset_count']}"
        )
    aggregates_path = out / "aggregates.json"
    harness.write_aggregates_json(reports, aggregates_path)
    print(f"wrote reports to {out}")
    return 0


def _mark(flag: bool) -> str:
    return "x" if flag else "-"


def cmd_ablate(args) -> int:
    config = _resolve_config(args)
    cells = harness.run_ablation_grid(config)
    shown = cells if args.full_grid else cells[: harness.TABLE_ROWS]
    print(f"{'combination':<18} {'align':>5} {'ent':>4} {'reset':>5}  accuracy")
    for cell in shown:
        print(
            f"{cell.label:<18} {_mark(cell.align):>5} {_mark(cell.ent):>4} "
            f"{_mark(cell.reset):>5}  {cell.mean_acc:.4f} ± {cell.std_acc:.4f}"
        )
    if args.out:
        payload = [
            {
                "label": cell.label,
                "align": cell.align,
                "ent": cell.ent,
                "reset": cell.reset,
                "mean_acc": float(f"{cell.mean_acc:.9g}"),
                "std_acc": float(f"{cell.std_acc:.9g}"),
                "per_seed": [float(f"{a:.9g}") for a in cell.per_seed],
            }
            for cell in cells
        ]
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def _parse_sweep_values(param: str, text: str):
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise ConfigError("sweep values must be a non-empty comma-separated list")
    try:
        if param in ("threshold", "alpha"):
            return [float(p) for p in parts]
        if param == "interval":
            return [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"invalid sweep value in {text!r}: {exc}") from exc
    for p in parts:
        if p not in drift.RESET_STRATEGIES:
            raise ConfigError(
                f"unknown reset strategy {p!r}; expected one of {drift.RESET_STRATEGIES}"
            )
    return parts


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    values = _parse_sweep_values(args.param, args.values)
    world = harness.build_world(config)
    rows = []
    for value in values:
        cell_config = validate_config(
            replace(config, reset=replace(config.reset, **{args.param: value}))
        )
        reports = harness.run_seeds(cell_config, world=world)
        accs = [r.overall["acc_fused"] for r in reports]
        rates = [r.detection["rate"] for r in reports]
        fps = [r.detection["false_positives"] for r in reports]
        resets = [r.overall["reset_count"] for r in reports]
        rows.append(
            (
                value,
                float(np.mean(accs)),
                float(np.std(accs)),
                float(np.mean(rates)),
                float(np.mean(fps)),
                float(np.mean(resets)),
            )
        )
    header = f"{args.param:<12} {'acc_mean':>9} {'acc_std':>8} {'det_rate':>9} {'fp_mean':>8} {'resets':>7}"
    print(header)
    for value, acc_mean, acc_std, rate, fp, reset_count in rows:
        print(
            f"{value!s:<12} {acc_mean:>9.4f} {acc_std:>8.4f} {rate:>9.3f} "
            f"{fp:>8.2f} {reset_count:>7.2f}"
        )
    if args.out:
        lines = [f"{args.param},acc_mean,acc_std,det_rate_mean,fp_mean,reset_count_mean"]
        for value, acc_mean, acc_std, rate, fp, reset_count in rows:
            lines.append(
                f"{value},{acc_mean:.9g},{acc_std:.9g},{rate:.9g},{fp:.9g},{reset_count:.9g}"
            )
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_gen_stream(args) -> int:
    config = _resolve_config(args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    schedule = build_schedule(config, seed)
    base = streams.make_base(config.arch.n_classes, config.arch.d_in, config.stream.base_seed)
    transitions = [int(t) for t in streams.transition_steps(schedule)]
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "domain_id", "label"] + [f"x{i}" for i in range(config.arch.d_in)]
        )
        for step, batch in enumerate(streams.schedule_stream(base, schedule), start=1):
            for label, row in zip(batch.labels, batch.features):
                writer.writerow(
                    [step, batch.domain_id, int(label)]
                    + [f"{v:.9g}" for v in row]
                )
    print(
        f"wrote {path}: {schedule.total_steps} batches of {schedule.batch_size}, "
        f"{len(schedule.segments)} segments, transitions at {transitions}"
    )
    return 0


def cmd_analyze(args) -> int:
    config = _resolve_config(args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    config = validate_config(replace(config, keep_diagnostics=True))
    out = _out_dir(args)
    world = harness.build_world(config)
    report = harness.run_episode(config, seed, world=world)
    result = analysis.analyze_correlations(report)
    scatter_path = out / f"scatter_seed{seed}.csv"
    summary_path = out / f"correlations_seed{seed}.csv"
    analysis.write_scatter_csv(report, scatter_path)
    analysis.write_summary_csv(result, summary_path)
    print(f"samples: {result.n_samples}")
    for quadrant in analysis.QUADRANTS:
        print(f"  {quadrant}: {result.quadrant_counts[quadrant]}")
    for cell in result.cells:
        r_text = cell.note if cell.skipped else f"r={cell.r:+.4f}"
        print(f"{cell.quadrant:<13} {cell.model:<4} {cell.predictor:<11} {r_text}")
    print(f"wrote {scatter_path}")
    print(f"wrote {summary_path}")
    return 0


def cmd_replay(args) -> int:
    config = load_config(args.config) if args.config else None
    vlm_path = args.vlm_logits or (config.replay_vlm if config else None)
    ada_path = args.ada_logits or (config.replay_ada if config else None)
    if vlm_path is None and ada_path is None:
        raise ConfigError("replay requires --vlm-logits and/or --ada-logits (or [replay] config keys)")
    if vlm_path is None:
        vlm_path = ada_path
    try:
        vlm_source = generalist.load_external_logits(vlm_path)
        ada_source = generalist.load_external_logits(ada_path) if ada_path else vlm_source
    except OSError as exc:
        raise ConfigError(f"cannot read logits file: {exc}") from exc
    weight_strategy = args.weight_strategy or (
        config.weight_strategy if config else fusion.CONFIDENCE
    )
    normalization = args.normalization or (config.normalization if config else fusion.LSE)
    report = harness.run_replay(
        vlm_source,
        ada_source,
        weight_strategy=weight_strategy,
        normalization=normalization,
    )
    print(f"samples: {report.n_samples} ({report.n_labeled} labeled)")
    print(f"acc_fused={report.acc_fused:.4f} acc_vlm={report.acc_vlm:.4f} acc_ada={report.acc_ada:.4f}")
    print(f"lambda_mean={report.lambda_mean:.6f}")
    if args.out:
        lines = ["sample_id,label,pred_fused,pred_vlm,pred_ada,lambda"]
        for sample_id, label, pred_f, pred_v, pred_a, lam in report.predictions:
            label_text = "-" if label is None else str(label)
            lines.append(f"{sample_id},{label_text},{pred_f},{pred_v},{pred_a},{lam:.9g}")
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
