"""Deterministic synthetic data streams with controlled distribution shift.

A base task places class means on a radius-4 sphere with unit isotropic
within-class covariance.  A domain transforms samples by a seeded
orthogonal rotation, a feature scale, a mean shift, and additive noise
whose standard deviation grows with an integer severity level:

    x = scale * R @ (mu_class + eps1) + mean_shift + sigma(severity) * eps2

Schedules concatenate per-domain segments into a stream of batches with
known ground-truth transition steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import InvalidInputError

SEVERITY_NOISE_STD = {1: 0.1, 2: 0.2, 3: 0.4, 4: 0.8, 5: 1.2}
MEAN_RADIUS = 4.0


@dataclass(frozen=True)
class DomainSpec:
    """One synthetic domain.

    ``rotation_seed`` of None means the identity rotation; ``clean``
    switches the severity noise off entirely (a diagnostics mode —
    samples are then exactly the transformed base clusters).
    ``mean_shift`` may be a scalar or a per-feature tuple.
    ``rotation_strength`` in [0, 1] blends the seeded rotation from the
    identity (0) to the full random orthogonal transform (1), so style
    shifts can be dialed to a realistic difficulty.
    """

    domain_id: str
    rotation_seed: int | None = None
    mean_shift: float | tuple[float, ...] = 0.0
    severity: int = 1
    scale: float = 1.0
    clean: bool = False
    rotation_strength: float = 1.0

    def __post_init__(self):
        if self.severity not in SEVERITY_NOISE_STD:
            raise InvalidInputError(
                f"severity must be in {sorted(SEVERITY_NOISE_STD)}, got {self.severity}"
            )
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise InvalidInputError("scale must be positive")
        if not (np.isfinite(self.rotation_strength) and 0.0 <= self.rotation_strength <= 1.0):
            raise InvalidInputError("rotation_strength must lie in [0, 1]")

    @property
    def noise_std(self) -> float:
        return 0.0 if self.clean else SEVERITY_NOISE_STD[self.severity]


@dataclass(frozen=True)
class StreamSchedule:
    """Ordered (domain, batch_count) segments plus the sampling seed."""

    segments: tuple[tuple[DomainSpec, int], ...]
    batch_size: int
    seed: int

    def __post_init__(self):
        if not self.segments:
            raise InvalidInputError("a schedule needs at least one segment")
        if any(count < 1 for _, count in self.segments):
            raise InvalidInputError("segment batch counts must be at least 1")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be at least 2")

    @property
    def total_steps(self) -> int:
        return sum(count for _, count in self.segments)


@dataclass(frozen=True)
class Batch:
    """One mini-batch of the stream."""

    features: np.ndarray
    labels: np.ndarray
    domain_id: str


@dataclass(frozen=True)
class StreamBase:
    """Class means (rows on the radius-4 sphere) and diagonal covariances."""

    means: np.ndarray
    cov_diag: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def d_in(self) -> int:
        return self.means.shape[1]


def make_base(n_classes: int, d_in: int, seed) -> StreamBase:
    """Sample class means uniformly on the radius-4 sphere; unit covariance."""
    if n_classes < 2 or d_in < 2:
        raise InvalidInputError("need n_classes >= 2 and d_in >= 2")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_classes, d_in))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    means = MEAN_RADIUS * raw / norms
    return StreamBase(means=means, cov_diag=np.ones((n_classes, d_in)))


def _sign_fixed_qr(m: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(m)
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


def rotation_matrix(d: int, seed, strength: float = 1.0) -> np.ndarray:
    """Seeded orthogonal matrix via QR with a deterministic sign convention.

    ``strength`` blends between the identity (0) and the full seeded
    rotation (1) by orthogonalizing the convex combination, giving a
    deterministic family of progressively stronger transforms.
    """
    if not (np.isfinite(strength) and 0.0 <= strength <= 1.0):
        raise InvalidInputError("strength must lie in [0, 1]")
    if strength == 0.0:
        return np.eye(d)
    rng = np.random.default_rng(seed)
    q = _sign_fixed_qr(rng.standard_normal((d, d)))
    if strength >= 1.0:
        return q
    return _sign_fixed_qr((1.0 - strength) * np.eye(d) + strength * q)


def _domain_rotation(domain: DomainSpec, d: int) -> np.ndarray | None:
    if domain.rotation_seed is None or domain.rotation_strength == 0.0:
        return None
    return rotation_matrix(d, domain.rotation_seed, domain.rotation_strength)


def sample_batch(
    base: StreamBase,
    domain: DomainSpec,
    n: int,
    rng: np.random.Generator,
    rotation: np.ndarray | None = None,
) -> Batch:
    """Draw one batch from a domain.

    Labels are balanced up to the remainder by a shuffled round-robin.
    The rng is consumed in a fixed order (label shuffle, within-class
    noise, severity noise) so identical seeds reproduce identical
    batches; the severity noise draw happens even in clean mode to keep
    streams at different severities draw-aligned.
    """
    if n < 2:
        raise InvalidInputError("batch size must be at least 2")
    k, d = base.means.shape
    labels = np.tile(np.arange(k), (n + k - 1) // k)[:n]
    rng.shuffle(labels)
    eps1 = rng.standard_normal((n, d))
    eps2 = rng.standard_normal((n, d))
    core = base.means[labels] + eps1 * np.sqrt(base.cov_diag[labels])
    if rotation is None:
        rotation = _domain_rotation(domain, d)
    if rotation is not None:
        core = core @ rotation.T
    shift = np.asarray(domain.mean_shift, dtype=float)
    x = domain.scale * core + shift + domain.noise_std * eps2
    return Batch(features=x, labels=labels, domain_id=domain.domain_id)


def transition_steps(schedule: StreamSchedule) -> list[int]:
    """Ground-truth transition steps: prefix sums of all but the last segment."""
    counts = [count for _, count in schedule.segments]
    return list(np.cumsum(counts[:-1]))


def schedule_stream(base: StreamBase, schedule: StreamSchedule) -> Iterator[Batch]:
    """Yield the schedule's batches in order, deterministically per seed."""
    rng = np.random.default_rng(schedule.seed)
    for domain, count in schedule.segments:
        rotation = _domain_rotation(domain, base.d_in)
        for _ in range(count):
            yield sample_batch(base, domain, schedule.batch_size, rng, rotation=rotation)


# ---------------------------------------------------------------------------
# Schedule presets
# ---------------------------------------------------------------------------

def corruption_schedule(
    *,
    severities=(1, 2, 3, 4, 5),
    batches_per_segment: int = 10,
    batch_size: int = 64,
    seed: int,
    rotation_seed: int | None = None,
    rotation_strength: float = 1.0,
    scale: float = 1.0,
) -> StreamSchedule:
    """Severity sweep under one fixed rotation (corruption analog)."""
    segments = tuple(
        (
            DomainSpec(
                domain_id=f"sev{s}",
                rotation_seed=rotation_seed,
                severity=int(s),
                scale=scale,
                rotation_strength=rotation_strength,
            ),
            batches_per_segment,
        )
        for s in severities
    )
    return StreamSchedule(segments=segments, batch_size=batch_size, seed=seed)


def domain_generalization_schedule(
    *,
    d_in: int,
    rotation_seeds=(11, 22, 33, 44),
    rotation_strength: float = 1.0,
    shift_scale: float = 1.0,
    shift_seed: int = 0,
    severity: int = 1,
    batches_per_segment: int = 10,
    batch_size: int = 64,
    seed: int,
) -> StreamSchedule:
    """Style-like shifts: per-domain rotation and mean shift at low severity."""
    shift_rng = np.random.default_rng(shift_seed)
    segments = []
    for i, rot in enumerate(rotation_seeds):
        shift = tuple(shift_rng.normal(0.0, shift_scale, size=d_in))
        segments.append(
            (
                DomainSpec(
                    domain_id=f"style{i}",
                    rotation_seed=None if rot is None else int(rot),
                    mean_shift=shift,
                    severity=severity,
                    rotation_strength=rotation_strength,
                ),
                batches_per_segment,
            )
        )
    return StreamSchedule(segments=tuple(segments), batch_size=batch_size, seed=seed)


def recurring_schedule(
    *,
    domain_a: DomainSpec,
    domain_b: DomainSpec,
    batches_per_segment: int = 10,
    batch_size: int = 64,
    seed: int,
) -> StreamSchedule:
    """A, B, A — the revisit exposes forgetting of the first domain."""
    segments = (
        (domain_a, batches_per_segment),
        (domain_b, batches_per_segment),
        (domain_a, batches_per_segment),
    )
    return StreamSchedule(segments=segments, batch_size=batch_size, seed=seed)


def abrupt_schedule(
    *,
    rotation_seeds=(11, 22, 33, 44, 55, 66),
    rotation_strength: float = 1.0,
    rotation_strengths=None,
    severities=None,
    batches_per_segment: int = 13,
    segment_lengths=None,
    batch_size: int = 64,
    seed: int,
) -> StreamSchedule:
    """Successive strongly contrasting domains for transition detection.

    ``segment_lengths`` overrides the uniform ``batches_per_segment``
    with a per-segment batch count; this controls where transitions
    fall relative to the drift detector's periodic anchor refresh.
    ``rotation_strengths`` overrides the uniform ``rotation_strength``
    per segment; alternating strengths over a shared rotation seed make
    consecutive segments pull the adapter in opposite directions, which
    is what the drift indicator responds to.
    """
    if severities is None:
        severities = tuple(1 for _ in rotation_seeds)
    if len(severities) != len(rotation_seeds):
        raise InvalidInputError("severities must match rotation_seeds in length")
    if segment_lengths is None:
        segment_lengths = tuple(batches_per_segment for _ in rotation_seeds)
    else:
        segment_lengths = tuple(int(n) for n in segment_lengths)
        if len(segment_lengths) != len(rotation_seeds):
            raise InvalidInputError(
                "segment_lengths must match rotation_seeds in length"
            )
        if any(n <= 0 for n in segment_lengths):
            raise InvalidInputError("segment_lengths entries must be positive")
    if rotation_strengths is None:
        rotation_strengths = tuple(rotation_strength for _ in rotation_seeds)
    else:
        rotation_strengths = tuple(float(s) for s in rotation_strengths)
        if len(rotation_strengths) != len(rotation_seeds):
            raise InvalidInputError(
                "rotation_strengths must match rotation_seeds in length"
            )
    segments = tuple(
        (
            DomainSpec(
                domain_id=f"abrupt{i}",
                rotation_seed=None if rot is None else int(rot),
                severity=int(sev),
                rotation_strength=strength,
            ),
            count,
        )
        for i, (rot, sev, count, strength) in enumerate(
            zip(rotation_seeds, severities, segment_lengths, rotation_strengths)
        )
    )
    return StreamSchedule(segments=segments, batch_size=batch_size, seed=seed)
