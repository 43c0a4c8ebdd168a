"""Orchestration: build artifacts, run episodes, aggregate reports.

An episode walks a synthetic stream batch by batch.  Each step predicts
with the frozen generalist and the current adapter, fuses the
normalized logits with a per-sample interpolation weight, and — unless
backward is disabled — takes one SGD step on the self-supervised
objective and lets the drift monitor inspect (and possibly reset) the
updated parameters.  Adaptation therefore only affects the next batch.

Reports carry per-step records, per-segment and overall accuracies, a
forgetting metric for revisited domains, reset events, and detection
statistics against the schedule's ground-truth transitions.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import adapter, drift, fusion, generalist, objectives, streams
from .config import RunConfig, build_schedule, optional_rotation, validate_config
from .errors import ConfigError, NumericalFailureError
from .generalist import ExternalLogitSource

THREADS_ENV_VAR = "SAIL_STREAM_THREADS"

CSV_COLUMNS = (
    "step",
    "domain_id",
    "acc_fused",
    "acc_vlm",
    "acc_ada",
    "lambda_mean",
    "loss_align",
    "loss_balance",
    "loss_ent",
    "loss_total",
    "gdi",
    "reset_flag",
)


@dataclass(frozen=True)
class World:
    """Frozen per-config artifacts shared by every episode."""

    base: streams.StreamBase
    source_domain: streams.DomainSpec
    classifier: generalist.PrototypeClassifier
    params: adapter.AdapterParams
    snapshot: adapter.SourceSnapshot
    holdout_accuracy: float


@dataclass(frozen=True)
class StepRecord:
    """Telemetry of one adaptation step."""

    step: int
    domain_id: str
    acc_fused: float
    acc_vlm: float
    acc_ada: float
    lambda_mean: float
    loss_align: float
    loss_balance: float
    loss_ent: float
    loss_total: float
    gdi: float
    reset_flag: int
    mean_entropy_vlm_correct: float = float("nan")
    mean_entropy_vlm_wrong: float = float("nan")
    mean_entropy_ada_correct: float = float("nan")
    mean_entropy_ada_wrong: float = float("nan")


@dataclass(frozen=True)
class SegmentStats:
    index: int
    domain_id: str
    steps: int
    acc_fused: float
    acc_vlm: float
    acc_ada: float


@dataclass
class SampleDiagnostics:
    """Per-sample quantities retained when diagnostics are enabled."""

    step: list = field(default_factory=list)
    entropy_vlm: list = field(default_factory=list)
    entropy_ada: list = field(default_factory=list)
    confidence_vlm: list = field(default_factory=list)
    confidence_ada: list = field(default_factory=list)
    cross_entropy_vlm: list = field(default_factory=list)
    cross_entropy_ada: list = field(default_factory=list)
    correct_vlm: list = field(default_factory=list)
    correct_ada: list = field(default_factory=list)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "step": np.array(self.step),
            "entropy_vlm": np.array(self.entropy_vlm),
            "entropy_ada": np.array(self.entropy_ada),
            "confidence_vlm": np.array(self.confidence_vlm),
            "confidence_ada": np.array(self.confidence_ada),
            "cross_entropy_vlm": np.array(self.cross_entropy_vlm),
            "cross_entropy_ada": np.array(self.cross_entropy_ada),
            "correct_vlm": np.array(self.correct_vlm, dtype=bool),
            "correct_ada": np.array(self.correct_ada, dtype=bool),
        }


@dataclass
class RunReport:
    """Everything one episode produced."""

    seed: int
    records: list[StepRecord]
    events: list[drift.ResetEvent]
    segments: list[SegmentStats]
    transitions: list[int]
    detection_window: int
    overall: dict
    forgetting: dict
    detection: dict
    wall_time: float
    diagnostics: SampleDiagnostics | None = None


def max_concurrent_episodes(requested: int) -> int:
    """Requested worker count, capped by the SAIL_STREAM_THREADS variable."""
    cap = os.environ.get(THREADS_ENV_VAR)
    if cap is None:
        return max(1, requested)
    try:
        cap_value = int(cap)
    except ValueError as exc:
        raise ConfigError(
            f"{THREADS_ENV_VAR} must be an integer, got {cap!r}"
        ) from exc
    if cap_value < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be at least 1, got {cap_value}")
    return max(1, min(requested, cap_value))


def build_world(config: RunConfig) -> World:
    """Create the frozen artifacts every episode shares.

    Draws source-domain data, pretrains the adapter, fits prototypes on
    a broad multi-domain sample (the source plus the configured rotated
    domains), and measures source holdout accuracy.  All randomness
    derives from ``stream.base_seed``, so the world is independent of
    the episode seeds.
    """
    validate_config(config)
    arch = config.arch
    base_seed = config.stream.base_seed
    base = streams.make_base(arch.n_classes, arch.d_in, base_seed)
    source_domain = streams.DomainSpec(domain_id="source", rotation_seed=None, severity=1)

    data_rng = np.random.default_rng([base_seed, 1])
    train = streams.sample_batch(base, source_domain, config.pretrain.n_samples, data_rng)
    params, snapshot = adapter.pretrain(
        arch,
        train.features,
        train.labels,
        epochs=config.pretrain.epochs,
        lr=config.pretrain.lr,
        seed=[base_seed, 2],
        batch_size=config.pretrain.batch_size,
    )

    holdout_rng = np.random.default_rng([base_seed, 3])
    holdout = streams.sample_batch(
        base, source_domain, config.pretrain.holdout_samples, holdout_rng
    )
    logits, _ = adapter.forward(params, holdout.features)
    holdout_accuracy = float(np.mean(np.argmax(logits, axis=1) == holdout.labels))

    broad_rng = np.random.default_rng([base_seed, 4])
    broad_domains = [source_domain] + [
        streams.DomainSpec(
            domain_id=f"broad{i}",
            rotation_seed=optional_rotation(rot),
            severity=sev,
            rotation_strength=config.stream.rotation_strength,
        )
        for i, (rot, sev) in enumerate(
            zip(config.generalist.broad_rotation_seeds, config.generalist.broad_severities)
        )
    ]
    feats, labels = [], []
    for domain in broad_domains:
        batch = streams.sample_batch(
            base, domain, config.generalist.samples_per_domain, broad_rng
        )
        feats.append(batch.features)
        labels.append(batch.labels)
    classifier = generalist.fit_prototypes(
        np.concatenate(feats),
        np.concatenate(labels),
        arch.n_classes,
        [base_seed, 5],
        feature_dim=config.generalist.feature_dim,
        temperature=config.generalist.temperature,
        cone_offset=config.generalist.cone_offset,
    )
    return World(
        base=base,
        source_domain=source_domain,
        classifier=classifier,
        params=params,
        snapshot=snapshot,
        holdout_accuracy=holdout_accuracy,
    )


def _mean_or_nan(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else float("nan")


def _loss_telemetry(config, hyper, p_fused, p_ada):
    """Loss values without gradients, for no-backward runs."""
    if hyper.align_enabled:
        ce, _ = objectives.alignment_loss(p_fused, p_ada, 0.0)
        q_source = p_ada if hyper.balance_on_adapter else p_fused
        balance = (
            objectives.balance_penalty(q_source, hyper.balance_coef)
            if hyper.balance_coef > 0.0
            else 0.0
        )
    else:
        ce, balance = 0.0, 0.0
    if hyper.entropy_enabled:
        if hyper.weighting_enabled:
            weights = objectives.sample_weight(
                fusion.entropy(p_fused), hyper.entropy_threshold
            )
        else:
            weights = np.ones(p_fused.shape[0])
        ent = objectives.entropy_loss(p_fused, weights)
        mean_weight = float(np.mean(weights))
    else:
        ent, mean_weight = 0.0, 1.0
    total = ce + balance + hyper.entropy_coef * ent
    return objectives.LossBreakdown(
        align_ce=ce, balance=balance, ent=ent, total=total, mean_weight=mean_weight
    )


def run_episode(
    config: RunConfig,
    seed: int,
    *,
    world: World | None = None,
) -> RunReport:
    """Run one adaptation episode over the configured stream.

    Deterministic for a fixed (config, seed): the world derives from
    the base seed, the stream and the random reset strategy derive from
    the episode seed.

    Raises
    ------
    NumericalFailureError
        If the objective or an update produces non-finite values; the
        failing step index is attached.
    ConfigError
        If the config requests replay (use :func:`run_replay`).
    """
    validate_config(config)
    if config.replay_vlm or config.replay_ada:
        raise ConfigError(
            "this config routes one or both models to external logits; "
            "use replay mode instead of a synthetic episode"
        )
    if world is None:
        world = build_world(config)
    t_start = time.perf_counter()
    schedule = build_schedule(config, seed)
    hyper = config.loss_hyperparams()
    params = world.params
    anchor_state = drift.initial_anchor_state(
        world.snapshot.trainable,
        interval=config.reset.interval,
        threshold=config.reset.threshold,
        alpha=config.reset.alpha,
        strategy=config.reset.strategy,
        seed=[seed, 101],
    )
    records: list[StepRecord] = []
    events: list[drift.ResetEvent] = []
    diagnostics = SampleDiagnostics() if config.keep_diagnostics else None

    for step, batch in enumerate(streams.schedule_stream(world.base, schedule), start=1):
        x, y = batch.features, batch.labels
        z_vlm = generalist.predict(world.classifier, x)
        z_ada, cache = adapter.forward(params, x)
        p_vlm = fusion.softmax(z_vlm)
        p_ada = fusion.softmax(z_ada)
        if config.force_lambda is not None:
            lam = np.full(x.shape[0], float(config.force_lambda))
        else:
            lam = fusion.interpolation_weight(p_vlm, p_ada, config.weight_strategy)
        z_vlm_norm = fusion.normalize_logits(z_vlm, config.normalization)
        z_ada_norm = fusion.normalize_logits(z_ada, config.normalization)
        z_fused = fusion.fuse(z_vlm_norm, z_ada_norm, lam)

        pred_fused = np.argmax(z_fused, axis=1)
        pred_vlm = np.argmax(z_vlm, axis=1)
        pred_ada = np.argmax(z_ada, axis=1)
        acc_fused = float(np.mean(pred_fused == y))
        acc_vlm = float(np.mean(pred_vlm == y))
        acc_ada = float(np.mean(pred_ada == y))

        if diagnostics is not None:
            idx = np.arange(x.shape[0])
            diagnostics.step.extend([step] * x.shape[0])
            diagnostics.entropy_vlm.extend(fusion.entropy(p_vlm).tolist())
            diagnostics.entropy_ada.extend(fusion.entropy(p_ada).tolist())
            diagnostics.confidence_vlm.extend(p_vlm.max(axis=1).tolist())
            diagnostics.confidence_ada.extend(p_ada.max(axis=1).tolist())
            diagnostics.cross_entropy_vlm.extend(
                (-np.log(np.maximum(p_vlm[idx, y], objectives.PROB_CLAMP))).tolist()
            )
            diagnostics.cross_entropy_ada.extend(
                (-np.log(np.maximum(p_ada[idx, y], objectives.PROB_CLAMP))).tolist()
            )
            diagnostics.correct_vlm.extend((pred_vlm == y).tolist())
            diagnostics.correct_ada.extend((pred_ada == y).tolist())

        entropy_vlm = fusion.entropy(p_vlm)
        entropy_ada = fusion.entropy(p_ada)

        if config.training_enabled:
            try:
                breakdown, grads = objectives.total_loss_and_grad(
                    z_vlm_norm, z_ada_norm, lam, hyper, step=step
                )
                grad_theta = adapter.backward(params, cache, grads.d_total_d_zada)
                params = adapter.sgd_step(params, grad_theta, config.lr)
            except NumericalFailureError as exc:
                if exc.step is None:
                    raise NumericalFailureError(str(exc), step=step) from exc
                raise
        else:
            p_fused_now = fusion.softmax(z_fused)
            breakdown = _loss_telemetry(config, hyper, p_fused_now, p_ada)

        reset_flag = 0
        gdi_value = float("nan")
        if not config.disable_reset:
            theta = adapter.flatten_trainable(params)
            gdi_value = drift.gdi(
                *drift.displacements(theta, anchor_state.prev, anchor_state.anchor)
            )
            theta_out, event, anchor_state = drift.observe_step(anchor_state, theta)
            if event is not None:
                events.append(event)
                reset_flag = 1
                if event.num_params_reset > 0:
                    params = adapter.unflatten_trainable(params, theta_out)

        correct_v = pred_vlm == y
        correct_a = pred_ada == y
        records.append(
            StepRecord(
                step=step,
                domain_id=batch.domain_id,
                acc_fused=acc_fused,
                acc_vlm=acc_vlm,
                acc_ada=acc_ada,
                lambda_mean=float(np.mean(lam)),
                loss_align=breakdown.align_ce,
                loss_balance=breakdown.balance,
                loss_ent=breakdown.ent,
                loss_total=breakdown.total,
                gdi=gdi_value,
                reset_flag=reset_flag,
                mean_entropy_vlm_correct=_mean_or_nan(entropy_vlm[correct_v]),
                mean_entropy_vlm_wrong=_mean_or_nan(entropy_vlm[~correct_v]),
                mean_entropy_ada_correct=_mean_or_nan(entropy_ada[correct_a]),
                mean_entropy_ada_wrong=_mean_or_nan(entropy_ada[~correct_a]),
            )
        )

    transitions = [int(t) for t in streams.transition_steps(schedule)]
    segments = _segment_stats(schedule, records)
    overall = _overall_stats(records)
    forgetting = _forgetting_stats(segments)
    detection = detection_stats(
        transitions, [e.step for e in events], config.detection_window
    )
    return RunReport(
        seed=seed,
        records=records,
        events=events,
        segments=segments,
        transitions=transitions,
        detection_window=config.detection_window,
        overall=overall,
        forgetting=forgetting,
        detection=detection,
        wall_time=time.perf_counter() - t_start,
        diagnostics=diagnostics,
    )


def _segment_stats(schedule, records) -> list[SegmentStats]:
    stats = []
    start = 0
    for index, (domain, count) in enumerate(schedule.segments):
        chunk = records[start : start + count]
        stats.append(
            SegmentStats(
                index=index,
                domain_id=domain.domain_id,
                steps=count,
                acc_fused=float(np.mean([r.acc_fused for r in chunk])),
                acc_vlm=float(np.mean([r.acc_vlm for r in chunk])),
                acc_ada=float(np.mean([r.acc_ada for r in chunk])),
            )
        )
        start += count
    return stats


def _overall_stats(records) -> dict:
    return {
        "acc_fused": float(np.mean([r.acc_fused for r in records])),
        "acc_vlm": float(np.mean([r.acc_vlm for r in records])),
        "acc_ada": float(np.mean([r.acc_ada for r in records])),
        "lambda_mean": float(np.mean([r.lambda_mean for r in records])),
        "loss_total_mean": float(np.mean([r.loss_total for r in records])),
        "reset_count": int(sum(r.reset_flag for r in records)),
        "steps": len(records),
    }


def _forgetting_stats(segments) -> dict:
    """Per revisited domain: first-visit accuracy minus mean revisit accuracy."""
    by_domain: dict[str, list[SegmentStats]] = {}
    for seg in segments:
        by_domain.setdefault(seg.domain_id, []).append(seg)
    per_domain = {}
    for domain_id, segs in by_domain.items():
        if len(segs) < 2:
            continue
        first = segs[0].acc_fused
        revisit = float(np.mean([s.acc_fused for s in segs[1:]]))
        per_domain[domain_id] = first - revisit
    mean = float(np.mean(list(per_domain.values()))) if per_domain else float("nan")
    return {"per_domain": per_domain, "mean": mean}


def detection_stats(transitions, event_steps, window: int) -> dict:
    """Match reset events to ground-truth transitions.

    A transition at step t* is detected when some event falls in
    (t*, t* + window]; its delay is the gap to the first such event.
    Events outside every window count as false positives.
    """
    transitions = [int(t) for t in transitions]
    event_steps = sorted(int(s) for s in event_steps)
    delays: dict[str, int] = {}
    detected = 0
    covered = set()
    for t_star in transitions:
        in_window = [s for s in event_steps if t_star < s <= t_star + window]
        if in_window:
            detected += 1
            delays[str(t_star)] = in_window[0] - t_star
        covered.update(
            s for s in event_steps if any(t < s <= t + window for t in transitions)
        )
    false_positives = sum(1 for s in event_steps if s not in covered) if transitions else len(event_steps)
    return {
        "transitions": len(transitions),
        "detected": detected,
        "rate": float(detected / len(transitions)) if transitions else float("nan"),
        "delays": delays,
        "false_positives": int(false_positives),
        "window": int(window),
    }


def run_seeds(config: RunConfig, *, world: World | None = None) -> list[RunReport]:
    """Run every configured seed, possibly concurrently.

    The worker count is ``min(len(seeds), cpu_count)`` capped by the
    SAIL_STREAM_THREADS environment variable; reports come back in seed
    order regardless of scheduling.
    """
    if world is None:
        world = build_world(config)
    workers = max_concurrent_episodes(min(len(config.seeds), os.cpu_count() or 1))
    if workers == 1:
        return [run_episode(config, seed, world=world) for seed in config.seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_episode, config, seed, world=world) for seed in config.seeds
        ]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Ablation grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationCell:
    """Mean and spread of fused accuracy for one switch combination."""

    align: bool
    ent: bool
    reset: bool
    label: str
    mean_acc: float
    std_acc: float
    per_seed: tuple[float, ...]


# First five rows form the canonical ablation table (baseline, each loss
# alone, both losses, both losses + reset); the rest complete the cube.
GRID_ORDER = (
    (False, False, False),
    (False, True, False),
    (True, False, False),
    (True, True, False),
    (True, True, True),
    (False, True, True),
    (True, False, True),
    (False, False, True),
)

TABLE_ROWS = 5


def _cell_label(align: bool, ent: bool, reset: bool) -> str:
    if not (align or ent):
        return "no-backward"
    parts = [name for flag, name in ((align, "align"), (ent, "ent"), (reset, "reset")) if flag]
    return "+".join(parts)


def run_ablation_grid(config: RunConfig, *, world: World | None = None) -> list[AblationCell]:
    """Fused accuracy for every loss/reset switch combination.

    Combinations with both losses off never move the parameters, so
    they reproduce the pure-fusion baseline by construction.
    """
    validate_config(config)
    if world is None:
        world = build_world(config)
    cells = []
    for align, ent, reset in GRID_ORDER:
        no_backward = not (align or ent)
        cell_config = replace(
            config,
            no_backward=no_backward,
            disable_align=not align,
            disable_ent=not ent,
            disable_reset=not reset,
        )
        reports = run_seeds(cell_config, world=world)
        accs = tuple(r.overall["acc_fused"] for r in reports)
        cells.append(
            AblationCell(
                align=align,
                ent=ent,
                reset=reset,
                label=_cell_label(align, ent, reset),
                mean_acc=float(np.mean(accs)),
                std_acc=float(np.std(accs)),
                per_seed=accs,
            )
        )
    return cells


# ---------------------------------------------------------------------------
# Replay mode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplayReport:
    """Fusion-only evaluation of externally produced logits."""

    n_samples: int
    n_labeled: int
    acc_fused: float
    acc_vlm: float
    acc_ada: float
    lambda_mean: float
    predictions: tuple[tuple[str, int | None, int, int, int, float], ...]


def run_replay(
    vlm_source: ExternalLogitSource,
    ada_source: ExternalLogitSource | None = None,
    *,
    weight_strategy: str = fusion.CONFIDENCE,
    normalization: str = fusion.LSE,
    batch_size: int = 64,
) -> ReplayReport:
    """Fuse two externally produced logit files without any training.

    Records pair positionally; when only one source is given it serves
    both models.  Sample ids must agree pairwise, and accuracies are
    computed over the labeled records (NaN when none carry labels).
    """
    if ada_source is None:
        ada_source = vlm_source
    if len(vlm_source.records) != len(ada_source.records):
        raise ConfigError(
            f"record counts differ: {len(vlm_source.records)} vs {len(ada_source.records)}"
        )
    if vlm_source.records and vlm_source.n_classes != ada_source.n_classes:
        raise ConfigError(
            f"class counts differ: {vlm_source.n_classes} vs {ada_source.n_classes}"
        )
    if batch_size < 1:
        raise ConfigError("batch_size must be at least 1")
    predictions = []
    lam_values = []
    hits_fused = hits_vlm = hits_ada = 0
    n_labeled = 0
    n = len(vlm_source.records)
    for start in range(0, n, batch_size):
        chunk_v = vlm_source.records[start : start + batch_size]
        chunk_a = ada_source.records[start : start + batch_size]
        for rv, ra in zip(chunk_v, chunk_a):
            if rv.sample_id != ra.sample_id:
                raise ConfigError(
                    f"sample ids disagree at position {start}: {rv.sample_id!r} vs {ra.sample_id!r}"
                )
            if rv.label is not None and ra.label is not None and rv.label != ra.label:
                raise ConfigError(
                    f"labels disagree for sample {rv.sample_id!r}: {rv.label} vs {ra.label}"
                )
        z_vlm = np.stack([r.logits for r in chunk_v])
        z_ada = np.stack([r.logits for r in chunk_a])
        p_vlm = fusion.softmax(z_vlm)
        p_ada = fusion.softmax(z_ada)
        lam = fusion.interpolation_weight(p_vlm, p_ada, weight_strategy)
        z_fused = fusion.fuse(
            fusion.normalize_logits(z_vlm, normalization),
            fusion.normalize_logits(z_ada, normalization),
            lam,
        )
        pred_f = np.argmax(z_fused, axis=1)
        pred_v = np.argmax(z_vlm, axis=1)
        pred_a = np.argmax(z_ada, axis=1)
        lam_values.extend(lam.tolist())
        for i, (rv, ra) in enumerate(zip(chunk_v, chunk_a)):
            label = rv.label if rv.label is not None else ra.label
            if label is not None:
                n_labeled += 1
                hits_fused += int(pred_f[i] == label)
                hits_vlm += int(pred_v[i] == label)
                hits_ada += int(pred_a[i] == label)
            predictions.append(
                (rv.sample_id, label, int(pred_f[i]), int(pred_v[i]), int(pred_a[i]), float(lam[i]))
            )
    def _rate(hits):
        return float(hits / n_labeled) if n_labeled else float("nan")
    return ReplayReport(
        n_samples=n,
        n_labeled=n_labeled,
        acc_fused=_rate(hits_fused),
        acc_vlm=_rate(hits_vlm),
        acc_ada=_rate(hits_ada),
        lambda_mean=float(np.mean(lam_values)) if lam_values else float("nan"),
        predictions=tuple(predictions),
    )


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def _round_sig(value: float, digits: int = 9) -> float:
    if isinstance(value, float) and np.isfinite(value):
        return float(f"{value:.{digits}g}")
    return value


def _round_tree(obj, digits: int = 9):
    if isinstance(obj, dict):
        return {k: _round_tree(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v, digits) for v in obj]
    if isinstance(obj, float):
        return _round_sig(obj, digits)
    return obj


def write_step_csv(report: RunReport, path) -> None:
    """Per-step CSV with the fixed column set, floats at 9 significant digits."""
    lines = [",".join(CSV_COLUMNS)]
    for r in report.records:
        lines.append(
            ",".join(
                [
                    str(r.step),
                    r.domain_id,
                    f"{r.acc_fused:.9g}",
                    f"{r.acc_vlm:.9g}",
                    f"{r.acc_ada:.9g}",
                    f"{r.lambda_mean:.9g}",
                    f"{r.loss_align:.9g}",
                    f"{r.loss_balance:.9g}",
                    f"{r.loss_ent:.9g}",
                    f"{r.loss_total:.9g}",
                    f"{r.gdi:.9g}",
                    str(r.reset_flag),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_reset_jsonl(report: RunReport, path) -> None:
    """One JSON object per reset event."""
    with open(path, "w", encoding="utf-8") as fh:
        for event in report.events:
            fh.write(
                json.dumps(
                    {
                        "step": event.step,
                        "gdi": _round_sig(event.gdi),
                        "num_params_reset": event.num_params_reset,
                        "strategy": event.strategy,
                    }
                )
                + "\n"
            )


def aggregates_dict(report: RunReport) -> dict:
    """Deterministic aggregate summary of one episode (no wall time)."""
    return _round_tree(
        {
            "seed": report.seed,
            "overall": report.overall,
            "segments": [
                {
                    "index": s.index,
                    "domain_id": s.domain_id,
                    "steps": s.steps,
                    "acc_fused": s.acc_fused,
                    "acc_vlm": s.acc_vlm,
                    "acc_ada": s.acc_ada,
                }
                for s in report.segments
            ],
            "forgetting": report.forgetting,
            "detection": report.detection,
            "transitions": report.transitions,
        }
    )


def write_aggregates_json(reports: list[RunReport], path) -> None:
    """Aggregates of several episodes plus their cross-seed mean accuracy."""
    payload = {
        "per_seed": [aggregates_dict(r) for r in reports],
        "mean_acc_fused": _round_sig(
            float(np.mean([r.overall["acc_fused"] for r in reports]))
        ),
        "mean_acc_vlm": _round_sig(
            float(np.mean([r.overall["acc_vlm"] for r in reports]))
        ),
        "mean_acc_ada": _round_sig(
            float(np.mean([r.overall["acc_ada"] for r in reports]))
        ),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
