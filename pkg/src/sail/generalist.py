"""The frozen generalist: a prototype-based cosine classifier.

A fixed random affine map followed by tanh embeds inputs into a feature
space; each class is represented by the unit-normalized mean feature of
its training samples.  Logits are temperature-scaled cosine
similarities between the embedded input and the class prototypes.  The
classifier is immutable after fitting.

This module also reads and writes the external logits file format used
by replay runs: UTF-8 lines of ``sample_id,label_or_dash,l_1,...,l_K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, InvalidInputError, LogitParseError

DEFAULT_FEATURE_DIM = 64
DEFAULT_TEMPERATURE = 100.0
DEFAULT_CONE_OFFSET = 1.5


@dataclass(frozen=True)
class PrototypeClassifier:
    """Fitted cosine classifier with unit-norm class prototypes."""

    weight: np.ndarray
    bias: np.ndarray
    prototypes: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    @property
    def n_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def fit_prototypes(
    features,
    labels,
    n_classes: int,
    seed,
    *,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    temperature: float = DEFAULT_TEMPERATURE,
    cone_offset: float = DEFAULT_CONE_OFFSET,
) -> PrototypeClassifier:
    """Fit class prototypes from a broad labeled sample.

    The feature map is drawn once from ``seed``; each prototype is the
    unit-normalized mean feature of its class.  Deterministic given the
    seed and the data.

    ``cone_offset`` centers the bias of the feature map away from zero,
    which concentrates all features in a narrow cone the way learned
    embedding spaces do.  Cosine gaps then stay small enough that the
    temperature-scaled softmax spreads over a realistic confidence
    range instead of saturating.

    Raises
    ------
    InvalidInputError
        If some class in ``range(n_classes)`` has no samples.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise InvalidInputError("features must be (n, d) with one label per row")
    if n_classes < 2:
        raise InvalidInputError("n_classes must be at least 2")
    if not (np.isfinite(temperature) and temperature > 0.0):
        raise InvalidInputError("temperature must be positive")
    if not np.isfinite(cone_offset):
        raise InvalidInputError("cone_offset must be finite")
    rng = np.random.default_rng(seed)
    weight = rng.normal(0.0, 1.0 / np.sqrt(x.shape[1]), size=(feature_dim, x.shape[1]))
    bias = rng.normal(cone_offset, 0.1, size=feature_dim)
    feats = np.tanh(x @ weight.T + bias)
    prototypes = np.empty((n_classes, feature_dim))
    for c in range(n_classes):
        mask = y == c
        if not np.any(mask):
            raise InvalidInputError(f"class {c} has no samples")
        mean = feats[mask].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise InvalidInputError(f"class {c} has a zero mean feature")
        prototypes[c] = mean / norm
    return PrototypeClassifier(
        weight=_read_only(weight),
        bias=_read_only(bias),
        prototypes=_read_only(prototypes),
        temperature=float(temperature),
    )


def cosine_logits(features, prototypes, temperature: float) -> np.ndarray:
    """Temperature-scaled cosine similarity of feature rows to prototype rows.

    A zero feature vector has cosine 0 to every prototype by convention.
    Invariant to positive rescaling of the feature rows.
    """
    f = np.atleast_2d(np.asarray(features, dtype=float))
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    unit = f / np.where(norms > 0.0, norms, 1.0)
    return temperature * (unit @ np.asarray(prototypes).T)


def predict(classifier: PrototypeClassifier, batch) -> np.ndarray:
    """Logits of a batch, shape (n, n_classes)."""
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != classifier.d_in:
        raise InvalidInputError(
            f"batch must have shape (n, {classifier.d_in}), got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("batch contains non-finite values")
    feats = np.tanh(x @ classifier.weight.T + classifier.bias)
    return cosine_logits(feats, classifier.prototypes, classifier.temperature)


def save_classifier(classifier: PrototypeClassifier, path) -> None:
    """Persist a fitted classifier as an .npz archive."""
    np.savez(
        path,
        weight=classifier.weight,
        bias=classifier.bias,
        prototypes=classifier.prototypes,
        temperature=np.array(classifier.temperature),
    )


def load_classifier(path) -> PrototypeClassifier:
    """Load a classifier saved by :func:`save_classifier`."""
    try:
        with np.load(path) as data:
            return PrototypeClassifier(
                weight=_read_only(data["weight"]),
                bias=_read_only(data["bias"]),
                prototypes=_read_only(data["prototypes"]),
                temperature=float(data["temperature"]),
            )
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load classifier from {path}: {exc}") from exc


@dataclass(frozen=True)
class LogitRecord:
    """One parsed line of an external logits file."""

    sample_id: str
    label: int | None
    logits: np.ndarray


@dataclass(frozen=True)
class ExternalLogitSource:
    """A fully validated external logits file."""

    path: str
    records: tuple[LogitRecord, ...]
    n_classes: int


def iter_external_logits(path) -> Iterator[LogitRecord]:
    """Stream records from an external logits file, validating as it goes.

    Grammar per line: ``sample_id,label_or_dash,l_1,...,l_K`` with a
    constant K >= 2 across the file and unique sample ids.  Violations
    raise :class:`LogitParseError` naming the file and line.
    """
    path = Path(path)
    seen: set[str] = set()
    n_classes: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line == "":
                raise LogitParseError("empty line", str(path), lineno)
            parts = line.split(",")
            if len(parts) < 4:
                raise LogitParseError(
                    "expected sample_id,label_or_dash,l_1,...,l_K with at least 2 classes",
                    str(path),
                    lineno,
                )
            sample_id = parts[0].strip()
            if sample_id == "":
                raise LogitParseError("empty sample_id", str(path), lineno)
            if sample_id in seen:
                raise LogitParseError(
                    f"duplicate sample_id {sample_id!r}", str(path), lineno
                )
            seen.add(sample_id)
            label_token = parts[1].strip()
            if label_token == "-":
                label = None
            else:
                try:
                    label = int(label_token)
                except ValueError:
                    raise LogitParseError(
                        f"label must be an integer or '-', got {label_token!r}",
                        str(path),
                        lineno,
                    ) from None
            try:
                values = np.array([float(tok) for tok in parts[2:]])
            except ValueError:
                raise LogitParseError("malformed logit value", str(path), lineno) from None
            if not np.all(np.isfinite(values)):
                raise LogitParseError("non-finite logit value", str(path), lineno)
            if n_classes is None:
                n_classes = values.size
            elif values.size != n_classes:
                raise LogitParseError(
                    f"expected {n_classes} logits, found {values.size}",
                    str(path),
                    lineno,
                )
            if label is not None and not 0 <= label < n_classes:
                raise LogitParseError(
                    f"label {label} outside [0, {n_classes})", str(path), lineno
                )
            values.flags.writeable = False
            yield LogitRecord(sample_id=sample_id, label=label, logits=values)


def load_external_logits(path) -> ExternalLogitSource:
    """Materialize and validate a whole external logits file.

    An empty file yields an empty source with ``n_classes == 0``.
    """
    records = tuple(iter_external_logits(path))
    n_classes = records[0].logits.size if records else 0
    return ExternalLogitSource(path=str(path), records=records, n_classes=n_classes)


def write_external_logits(path, records) -> None:
    """Write records in the external logits grammar; values round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            label = "-" if rec.label is None else str(int(rec.label))
            values = ",".join(repr(float(v)) for v in np.asarray(rec.logits).ravel())
            fh.write(f"{rec.sample_id},{label},{values}\n")
