"""Confidence-weighted fusion of a frozen generalist and a test-time adapter.

The package couples an immutable prototype classifier with a small
trainable network whose normalization affine parameters adapt online
from unlabeled batches.  Per-sample interpolation weights fuse the two
models' normalized logits; a self-supervised objective (alignment to
the fused distribution plus weighted entropy) drives the updates, and
a drift monitor on the parameter trajectory restores depth-selected
parameters to their pretrained values when the update direction turns
against the accumulated displacement.

Submodules
----------
fusion
    Logit normalization, interpolation weights, and the fusion rule.
objectives
    The self-supervised losses and their analytic gradients.
adapter
    The trainable network: forward, backward, updates, serialization.
generalist
    The frozen prototype classifier and the external logit file format.
drift
    Drift indicator, anchor bookkeeping, and strategic resets.
streams
    Synthetic shifting-domain batch streams and schedule presets.
config
    TOML-backed run configuration.
harness
    Episode orchestration, ablation grid, replay, report writers.
analysis
    Per-sample correlation statistics.
cli
    The ``sail`` command-line entry point.
"""

from __future__ import annotations

from . import (
    adapter,
    analysis,
    cli,
    config,
    drift,
    fusion,
    generalist,
    harness,
    objectives,
    streams,
)
from .adapter import (
    AdapterArchitecture,
    AdapterParams,
    backward,
    forward,
    init_params,
    load_params,
    pretrain,
    save_params,
    sgd_step,
)
from .analysis import analyze_correlations, pearson_r
from .config import RunConfig, load_config, validate_config
from .drift import AnchorState, ResetEvent, gdi, initial_anchor_state, observe_step
from .errors import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    LogitParseError,
    NumericalFailureError,
    PretrainingError,
    SailError,
)
from .fusion import entropy, fuse, interpolation_weight, normalize_logits, softmax
from .generalist import PrototypeClassifier, fit_prototypes, predict
from .harness import (
    RunReport,
    World,
    build_world,
    run_ablation_grid,
    run_episode,
    run_replay,
    run_seeds,
)
from .objectives import LossHyperparams, sample_weight, total_loss_and_grad
from .streams import DomainSpec, StreamSchedule, make_base, sample_batch, schedule_stream

__version__ = "0.1.0"

__all__ = [
    "AdapterArchitecture",
    "AdapterParams",
    "AnchorState",
    "ConfigError",
    "DegenerateInputError",
    "DomainSpec",
    "InvalidInputError",
    "LogitParseError",
    "LossHyperparams",
    "NumericalFailureError",
    "PretrainingError",
    "PrototypeClassifier",
    "ResetEvent",
    "RunConfig",
    "RunReport",
    "SailError",
    "StreamSchedule",
    "World",
    "adapter",
    "analysis",
    "analyze_correlations",
    "backward",
    "build_world",
    "cli",
    "config",
    "drift",
    "entropy",
    "fit_prototypes",
    "forward",
    "fuse",
    "fusion",
    "gdi",
    "generalist",
    "harness",
    "init_params",
    "initial_anchor_state",
    "interpolation_weight",
    "load_config",
    "load_params",
    "make_base",
    "normalize_logits",
    "objectives",
    "observe_step",
    "pearson_r",
    "predict",
    "pretrain",
    "run_ablation_grid",
    "run_episode",
    "run_replay",
    "run_seeds",
    "sample_batch",
    "sample_weight",
    "save_params",
    "schedule_stream",
    "sgd_step",
    "softmax",
    "streams",
    "total_loss_and_grad",
    "validate_config",
    "__version__",
]
