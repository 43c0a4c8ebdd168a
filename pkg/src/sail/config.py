"""Run configuration: typed settings, TOML loading, and validation.

A run is described by a TOML file with the sections ``[run]``,
``[adapter]``, ``[pretrain]``, ``[generalist]``, ``[loss]``,
``[reset]``, ``[stream]``, and optionally ``[replay]``.  Every key has
a default; unknown keys are rejected so typos fail loudly.  CLI flags
override file keys.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on older interpreters
    import tomli as tomllib

from . import drift, fusion, streams
from .adapter import AdapterArchitecture
from .errors import ConfigError
from .objectives import LossHyperparams, default_entropy_threshold

STREAM_PRESETS = ("corruption", "recurring", "abrupt", "domain-generalization")


@dataclass(frozen=True)
class PretrainSettings:
    epochs: int = 40
    lr: float = 0.05
    batch_size: int = 32
    n_samples: int = 1600
    holdout_samples: int = 512


@dataclass(frozen=True)
class GeneralistSettings:
    """Broad fitting data for the frozen classifier.

    Each (rotation seed, severity) pair describes one broad domain
    beyond the source; rotation seed 0 means no rotation, so the
    domain shares the source geometry at a different noise level.
    """

    feature_dim: int = 64
    temperature: float = 100.0
    cone_offset: float = 1.5
    samples_per_domain: int = 400
    broad_rotation_seeds: tuple[int, ...] = (0, 0, 0, 303)
    broad_severities: tuple[int, ...] = (2, 4, 5, 3)


@dataclass(frozen=True)
class ResetSettings:
    threshold: float = drift.DEFAULT_THRESHOLD
    interval: int = drift.DEFAULT_INTERVAL
    alpha: float = drift.DEFAULT_ALPHA
    strategy: str = drift.DEEP


@dataclass(frozen=True)
class LossSettings:
    balance_coef: float = 1.0
    entropy_coef: float = 1.0
    weighting_enabled: bool = False
    entropy_threshold: float | None = None
    balance_on_adapter: bool = False


@dataclass(frozen=True)
class StreamSettings:
    preset: str = "corruption"
    base_seed: int = 2022
    batch_size: int = 64
    batches_per_segment: int = 10
    rotation_strength: float = 1.0
    # corruption
    severities: tuple[int, ...] = (1, 2, 3, 4, 5)
    rotation_seed: int | None = None
    scale: float = 1.0
    # abrupt / domain-generalization
    rotation_seeds: tuple[int, ...] = (11, 22, 33, 44, 55, 66)
    abrupt_severities: tuple[int, ...] | None = None
    segment_lengths: tuple[int, ...] | None = None
    rotation_strengths: tuple[float, ...] | None = None
    shift_scale: float = 1.0
    shift_seed: int = 0
    severity: int = 1
    # recurring
    a_rotation_seed: int = 101
    b_rotation_seed: int = 202
    a_severity: int = 2
    b_severity: int = 2


@dataclass(frozen=True)
class RunConfig:
    """Complete description of a run; see the module docstring."""

    seeds: tuple[int, ...] = (2022, 2023, 2024)
    lr: float = 1e-3
    normalization: str = fusion.LSE
    weight_strategy: str = fusion.CONFIDENCE
    no_backward: bool = False
    disable_align: bool = False
    disable_ent: bool = False
    disable_reset: bool = False
    detection_window: int = 5
    keep_diagnostics: bool = False
    force_lambda: float | None = None
    arch: AdapterArchitecture = field(
        default_factory=lambda: AdapterArchitecture(d_in=32, widths=(32, 24, 16), n_classes=10)
    )
    pretrain: PretrainSettings = field(default_factory=PretrainSettings)
    generalist: GeneralistSettings = field(default_factory=GeneralistSettings)
    loss: LossSettings = field(default_factory=LossSettings)
    reset: ResetSettings = field(default_factory=ResetSettings)
    stream: StreamSettings = field(default_factory=StreamSettings)
    replay_vlm: str | None = None
    replay_ada: str | None = None

    @property
    def training_enabled(self) -> bool:
        return not self.no_backward

    def loss_hyperparams(self) -> LossHyperparams:
        """Resolve the loss settings and ablation switches."""
        threshold = self.loss.entropy_threshold
        if threshold is None:
            threshold = (
                default_entropy_threshold(self.arch.n_classes)
                if self.loss.weighting_enabled
                else 0.0
            )
        return LossHyperparams(
            balance_coef=self.loss.balance_coef,
            entropy_coef=self.loss.entropy_coef,
            weighting_enabled=self.loss.weighting_enabled,
            entropy_threshold=threshold,
            align_enabled=not self.disable_align,
            entropy_enabled=not self.disable_ent,
            balance_on_adapter=self.loss.balance_on_adapter,
        )


def validate_config(config: RunConfig) -> RunConfig:
    """Check cross-field consistency; returns the config for chaining."""
    if not config.seeds:
        raise ConfigError("at least one seed is required")
    if config.normalization not in fusion.NORMALIZATION_STRATEGIES:
        raise ConfigError(
            f"unknown normalization {config.normalization!r}; "
            f"expected one of {fusion.NORMALIZATION_STRATEGIES}"
        )
    if config.weight_strategy not in fusion.WEIGHT_STRATEGIES:
        raise ConfigError(
            f"unknown weight strategy {config.weight_strategy!r}; "
            f"expected one of {fusion.WEIGHT_STRATEGIES}"
        )
    if config.reset.strategy not in drift.RESET_STRATEGIES:
        raise ConfigError(
            f"unknown reset strategy {config.reset.strategy!r}; "
            f"expected one of {drift.RESET_STRATEGIES}"
        )
    if config.training_enabled:
        if not config.lr > 0.0:
            raise ConfigError("lr must be positive when training is enabled")
        if config.normalization != fusion.LSE:
            raise ConfigError(
                "backward training is only supported with lse normalization; "
                "run other normalization strategies with no_backward = true"
            )
    if config.force_lambda is not None and not 0.0 <= config.force_lambda <= 1.0:
        raise ConfigError("force_lambda must lie in [0, 1]")
    if config.detection_window < 1:
        raise ConfigError("detection_window must be at least 1")
    if not -1.0 <= config.reset.threshold <= 1.0:
        raise ConfigError("reset threshold must lie in [-1, 1]")
    if not 0.0 <= config.reset.alpha <= 100.0:
        raise ConfigError("reset alpha must lie in [0, 100]")
    if config.reset.interval < 1:
        raise ConfigError("reset interval must be at least 1")
    if config.stream.preset not in STREAM_PRESETS:
        raise ConfigError(
            f"unknown stream preset {config.stream.preset!r}; expected one of {STREAM_PRESETS}"
        )
    if not 0.0 <= config.stream.rotation_strength <= 1.0:
        raise ConfigError("rotation_strength must lie in [0, 1]")
    if config.stream.segment_lengths is not None and any(
        n <= 0 for n in config.stream.segment_lengths
    ):
        raise ConfigError("segment_lengths entries must be positive")
    if config.stream.rotation_strengths is not None and any(
        not 0.0 <= s <= 1.0 for s in config.stream.rotation_strengths
    ):
        raise ConfigError("rotation_strengths entries must lie in [0, 1]")
    if config.loss.entropy_threshold is not None and not config.loss.entropy_threshold > 0.0:
        raise ConfigError("entropy_threshold must be positive when given")
    if config.loss.balance_coef < 0.0 or config.loss.entropy_coef < 0.0:
        raise ConfigError("loss coefficients must be nonnegative")
    if len(config.generalist.broad_rotation_seeds) != len(config.generalist.broad_severities):
        raise ConfigError("broad_rotation_seeds and broad_severities must match in length")
    if len(config.generalist.broad_rotation_seeds) < 2:
        raise ConfigError(
            "at least two broad domains beyond the source are required for prototype fitting"
        )
    return config


def optional_rotation(seed: int | None) -> int | None:
    """Interpret rotation seed 0 as "no rotation" (identity transform)."""
    if seed is None or int(seed) == 0:
        return None
    return int(seed)


def build_schedule(config: RunConfig, seed: int) -> streams.StreamSchedule:
    """Instantiate the configured stream preset for one episode seed."""
    s = config.stream
    if s.preset == "corruption":
        return streams.corruption_schedule(
            severities=s.severities,
            batches_per_segment=s.batches_per_segment,
            batch_size=s.batch_size,
            seed=seed,
            rotation_seed=optional_rotation(s.rotation_seed),
            rotation_strength=s.rotation_strength,
            scale=s.scale,
        )
    if s.preset == "recurring":
        domain_a = streams.DomainSpec(
            domain_id="A",
            rotation_seed=optional_rotation(s.a_rotation_seed),
            severity=s.a_severity,
            rotation_strength=s.rotation_strength,
        )
        domain_b = streams.DomainSpec(
            domain_id="B",
            rotation_seed=optional_rotation(s.b_rotation_seed),
            severity=s.b_severity,
            rotation_strength=s.rotation_strength,
        )
        return streams.recurring_schedule(
            domain_a=domain_a,
            domain_b=domain_b,
            batches_per_segment=s.batches_per_segment,
            batch_size=s.batch_size,
            seed=seed,
        )
    if s.preset == "abrupt":
        return streams.abrupt_schedule(
            rotation_seeds=tuple(optional_rotation(r) for r in s.rotation_seeds),
            rotation_strength=s.rotation_strength,
            rotation_strengths=s.rotation_strengths,
            severities=s.abrupt_severities,
            batches_per_segment=s.batches_per_segment,
            segment_lengths=s.segment_lengths,
            batch_size=s.batch_size,
            seed=seed,
        )
    if s.preset == "domain-generalization":
        return streams.domain_generalization_schedule(
            d_in=config.arch.d_in,
            rotation_seeds=tuple(optional_rotation(r) for r in s.rotation_seeds),
            rotation_strength=s.rotation_strength,
            shift_scale=s.shift_scale,
            shift_seed=s.shift_seed,
            severity=s.severity,
            batches_per_segment=s.batches_per_segment,
            batch_size=s.batch_size,
            seed=seed,
        )
    raise ConfigError(f"unknown stream preset {s.preset!r}")


# ---------------------------------------------------------------------------
# TOML loading
# ---------------------------------------------------------------------------

_SECTION_KEYS = {
    "run": {
        "seeds",
        "lr",
        "normalization",
        "weight_strategy",
        "no_backward",
        "disable_align",
        "disable_ent",
        "disable_reset",
        "detection_window",
        "keep_diagnostics",
        "force_lambda",
    },
    "adapter": {"d_in", "widths", "n_classes", "eps_norm"},
    "pretrain": {"epochs", "lr", "batch_size", "n_samples", "holdout_samples"},
    "generalist": {
        "feature_dim",
        "temperature",
        "cone_offset",
        "samples_per_domain",
        "broad_rotation_seeds",
        "broad_severities",
    },
    "loss": {
        "balance_coef",
        "entropy_coef",
        "weighting_enabled",
        "entropy_threshold",
        "balance_on_adapter",
    },
    "reset": {"threshold", "interval", "alpha", "strategy"},
    "stream": {
        "preset",
        "base_seed",
        "batch_size",
        "batches_per_segment",
        "rotation_strength",
        "severities",
        "rotation_seed",
        "scale",
        "rotation_seeds",
        "abrupt_severities",
        "segment_lengths",
        "rotation_strengths",
        "shift_scale",
        "shift_seed",
        "severity",
        "a_rotation_seed",
        "b_rotation_seed",
        "a_severity",
        "b_severity",
    },
    "replay": {"vlm_logits", "ada_logits"},
}


def _check_keys(data: dict, path) -> None:
    for section, content in data.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        unknown = set(content) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown key(s) {sorted(unknown)} in [{section}]"
            )


def _get(table: dict, key: str, default, caster):
    if key not in table or table[key] is None:
        return default
    try:
        return caster(table[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {exc}") from exc


def _int_tuple(value) -> tuple[int, ...]:
    return tuple(int(v) for v in value)


def _float_tuple(value) -> tuple[float, ...]:
    return tuple(float(v) for v in value)


def config_from_dict(data: dict, path="<config>") -> RunConfig:
    """Build and validate a RunConfig from parsed TOML data."""
    _check_keys(data, path)
    run = data.get("run", {})
    adapter_tbl = data.get("adapter", {})
    pretrain_tbl = data.get("pretrain", {})
    generalist_tbl = data.get("generalist", {})
    loss_tbl = data.get("loss", {})
    reset_tbl = data.get("reset", {})
    stream_tbl = data.get("stream", {})
    replay_tbl = data.get("replay", {})

    arch_defaults = RunConfig().arch
    try:
        arch = AdapterArchitecture(
            d_in=_get(adapter_tbl, "d_in", arch_defaults.d_in, int),
            widths=_get(adapter_tbl, "widths", arch_defaults.widths, _int_tuple),
            n_classes=_get(adapter_tbl, "n_classes", arch_defaults.n_classes, int),
            eps_norm=_get(adapter_tbl, "eps_norm", arch_defaults.eps_norm, float),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid [adapter]: {exc}") from exc

    config = RunConfig(
        seeds=_get(run, "seeds", RunConfig().seeds, _int_tuple),
        lr=_get(run, "lr", RunConfig().lr, float),
        normalization=_get(run, "normalization", fusion.LSE, str),
        weight_strategy=_get(run, "weight_strategy", fusion.CONFIDENCE, str),
        no_backward=_get(run, "no_backward", False, bool),
        disable_align=_get(run, "disable_align", False, bool),
        disable_ent=_get(run, "disable_ent", False, bool),
        disable_reset=_get(run, "disable_reset", False, bool),
        detection_window=_get(run, "detection_window", 5, int),
        keep_diagnostics=_get(run, "keep_diagnostics", False, bool),
        force_lambda=_get(run, "force_lambda", None, float),
        arch=arch,
        pretrain=PretrainSettings(
            epochs=_get(pretrain_tbl, "epochs", PretrainSettings.epochs, int),
            lr=_get(pretrain_tbl, "lr", PretrainSettings.lr, float),
            batch_size=_get(pretrain_tbl, "batch_size", PretrainSettings.batch_size, int),
            n_samples=_get(pretrain_tbl, "n_samples", PretrainSettings.n_samples, int),
            holdout_samples=_get(
                pretrain_tbl, "holdout_samples", PretrainSettings.holdout_samples, int
            ),
        ),
        generalist=GeneralistSettings(
            feature_dim=_get(generalist_tbl, "feature_dim", GeneralistSettings.feature_dim, int),
            temperature=_get(
                generalist_tbl, "temperature", GeneralistSettings.temperature, float
            ),
            cone_offset=_get(
                generalist_tbl, "cone_offset", GeneralistSettings.cone_offset, float
            ),
            samples_per_domain=_get(
                generalist_tbl,
                "samples_per_domain",
                GeneralistSettings.samples_per_domain,
                int,
            ),
            broad_rotation_seeds=_get(
                generalist_tbl,
                "broad_rotation_seeds",
                GeneralistSettings.broad_rotation_seeds,
                _int_tuple,
            ),
            broad_severities=_get(
                generalist_tbl,
                "broad_severities",
                GeneralistSettings.broad_severities,
                _int_tuple,
            ),
        ),
        loss=LossSettings(
            balance_coef=_get(loss_tbl, "balance_coef", LossSettings.balance_coef, float),
            entropy_coef=_get(loss_tbl, "entropy_coef", LossSettings.entropy_coef, float),
            weighting_enabled=_get(
                loss_tbl, "weighting_enabled", LossSettings.weighting_enabled, bool
            ),
            entropy_threshold=_get(loss_tbl, "entropy_threshold", None, float),
            balance_on_adapter=_get(
                loss_tbl, "balance_on_adapter", LossSettings.balance_on_adapter, bool
            ),
        ),
        reset=ResetSettings(
            threshold=_get(reset_tbl, "threshold", ResetSettings.threshold, float),
            interval=_get(reset_tbl, "interval", ResetSettings.interval, int),
            alpha=_get(reset_tbl, "alpha", ResetSettings.alpha, float),
            strategy=_get(reset_tbl, "strategy", ResetSettings.strategy, str),
        ),
        stream=StreamSettings(
            preset=_get(stream_tbl, "preset", StreamSettings.preset, str),
            base_seed=_get(stream_tbl, "base_seed", StreamSettings.base_seed, int),
            batch_size=_get(stream_tbl, "batch_size", StreamSettings.batch_size, int),
            batches_per_segment=_get(
                stream_tbl, "batches_per_segment", StreamSettings.batches_per_segment, int
            ),
            rotation_strength=_get(
                stream_tbl, "rotation_strength", StreamSettings.rotation_strength, float
            ),
            severities=_get(stream_tbl, "severities", StreamSettings.severities, _int_tuple),
            rotation_seed=_get(stream_tbl, "rotation_seed", None, int),
            scale=_get(stream_tbl, "scale", StreamSettings.scale, float),
            rotation_seeds=_get(
                stream_tbl, "rotation_seeds", StreamSettings.rotation_seeds, _int_tuple
            ),
            abrupt_severities=_get(stream_tbl, "abrupt_severities", None, _int_tuple),
            segment_lengths=_get(stream_tbl, "segment_lengths", None, _int_tuple),
            rotation_strengths=_get(stream_tbl, "rotation_strengths", None, _float_tuple),
            shift_scale=_get(stream_tbl, "shift_scale", StreamSettings.shift_scale, float),
            shift_seed=_get(stream_tbl, "shift_seed", StreamSettings.shift_seed, int),
            severity=_get(stream_tbl, "severity", StreamSettings.severity, int),
            a_rotation_seed=_get(
                stream_tbl, "a_rotation_seed", StreamSettings.a_rotation_seed, int
            ),
            b_rotation_seed=_get(
                stream_tbl, "b_rotation_seed", StreamSettings.b_rotation_seed, int
            ),
            a_severity=_get(stream_tbl, "a_severity", StreamSettings.a_severity, int),
            b_severity=_get(stream_tbl, "b_severity", StreamSettings.b_severity, int),
        ),
        replay_vlm=_get(replay_tbl, "vlm_logits", None, str),
        replay_ada=_get(replay_tbl, "ada_logits", None, str),
    )
    return validate_config(config)


def load_config(path) -> RunConfig:
    """Parse and validate a TOML config file."""
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: invalid TOML: {exc}") from exc
    return config_from_dict(data, path=p)
