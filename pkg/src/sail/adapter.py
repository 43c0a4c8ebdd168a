"""The trainable adapter: a small dense network with frozen weights.

Each block applies a frozen linear map, standardizes every feature over
the batch (population variance, guarded by ``eps_norm``), applies a
trainable affine pair (gamma, beta), and a tanh.  A frozen linear output
layer produces class logits.  Only the affine parameters train at test
time; they flatten into a single depth-ordered vector

    [gamma_0, beta_0, gamma_1, beta_1, ...]

so "deeper" always means a larger flat index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalFailureError,
    PretrainingError,
)

FORMAT_NAME = "sail-adapter-params"
FORMAT_VERSION = 1
ENCODINGS = ("binary", "text")


@dataclass(frozen=True)
class AdapterArchitecture:
    """Shape of the adapter network.

    Parameters
    ----------
    d_in : int
        Input feature dimension.
    widths : tuple of int
        Hidden width of each block; at least two blocks so the
        deep/shallow distinction is meaningful.
    n_classes : int
        Number of output classes (>= 2).
    eps_norm : float
        Variance guard of the batch standardization.
    """

    d_in: int
    widths: tuple[int, ...]
    n_classes: int
    eps_norm: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise InvalidInputError("at least two blocks are required")
        if any(w < 1 for w in self.widths):
            raise InvalidInputError("block widths must be positive")
        if self.d_in < 1:
            raise InvalidInputError("d_in must be positive")
        if self.n_classes < 2:
            raise InvalidInputError("n_classes must be at least 2")
        if not self.eps_norm > 0.0:
            raise InvalidInputError("eps_norm must be positive")

    @property
    def n_blocks(self) -> int:
        return len(self.widths)

    @property
    def n_trainable(self) -> int:
        """Length of the flattened trainable vector, ``2 * sum(widths)``."""
        return 2 * sum(self.widths)


@dataclass(frozen=True)
class AdapterParams:
    """Frozen weights plus trainable per-block affine parameters.

    The arrays are read-only; updates go through :func:`sgd_step` or
    :func:`unflatten_trainable`, which return new instances sharing the
    frozen arrays.
    """

    arch: AdapterArchitecture
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    w_out: np.ndarray
    b_out: np.ndarray
    gammas: tuple[np.ndarray, ...]
    betas: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class ForwardCache:
    """Batch quantities retained by :func:`forward` for :func:`backward`."""

    inputs: np.ndarray
    pre_standardization: tuple[np.ndarray, ...]
    means: tuple[np.ndarray, ...]
    variances: tuple[np.ndarray, ...]
    inv_stds: tuple[np.ndarray, ...]
    standardized: tuple[np.ndarray, ...]
    post_affine: tuple[np.ndarray, ...]
    outputs: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class SourceSnapshot:
    """Immutable copy of the trainable vector at pretraining completion."""

    trainable: np.ndarray
    arch: AdapterArchitecture


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def _pack(arch, weights, biases, w_out, b_out, gammas, betas) -> AdapterParams:
    return AdapterParams(
        arch=arch,
        weights=tuple(_read_only(w) for w in weights),
        biases=tuple(_read_only(b) for b in biases),
        w_out=_read_only(w_out),
        b_out=_read_only(b_out),
        gammas=tuple(_read_only(g) for g in gammas),
        betas=tuple(_read_only(b) for b in betas),
    )


def init_params(arch: AdapterArchitecture, seed) -> AdapterParams:
    """Draw fresh parameters: scaled-normal weights, identity affine pairs."""
    rng = np.random.default_rng(seed)
    dims = (arch.d_in,) + arch.widths
    weights = [
        rng.normal(0.0, 1.0 / np.sqrt(dims[i]), size=(dims[i + 1], dims[i]))
        for i in range(arch.n_blocks)
    ]
    biases = [np.zeros(w) for w in arch.widths]
    w_out = rng.normal(0.0, 1.0 / np.sqrt(arch.widths[-1]), size=(arch.n_classes, arch.widths[-1]))
    b_out = np.zeros(arch.n_classes)
    gammas = [np.ones(w) for w in arch.widths]
    betas = [np.zeros(w) for w in arch.widths]
    return _pack(arch, weights, biases, w_out, b_out, gammas, betas)


def forward(params: AdapterParams, batch) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a batch and cache everything backward needs.

    Parameters
    ----------
    params : AdapterParams
    batch : array_like, shape (n, d_in)
        At least two samples, since the standardization uses batch
        statistics.

    Returns
    -------
    logits : np.ndarray, shape (n, n_classes)
    cache : ForwardCache
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.arch.d_in:
        raise InvalidInputError(
            f"batch must have shape (n, {params.arch.d_in}), got {x.shape}"
        )
    if x.shape[0] < 2:
        raise InvalidInputError("batch standardization requires at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("batch contains non-finite values")

    eps = params.arch.eps_norm
    h = x
    pre, means, variances, inv_stds, standardized, post_affine, outputs = (
        [], [], [], [], [], [], []
    )
    for w, b, gamma, beta in zip(params.weights, params.biases, params.gammas, params.betas):
        a = h @ w.T + b
        mu = a.mean(axis=0)
        var = a.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (a - mu) * inv_std
        s = gamma * xhat + beta
        h = np.tanh(s)
        pre.append(a)
        means.append(mu)
        variances.append(var)
        inv_stds.append(inv_std)
        standardized.append(xhat)
        post_affine.append(s)
        outputs.append(h)
    logits = h @ params.w_out.T + params.b_out
    cache = ForwardCache(
        inputs=x,
        pre_standardization=tuple(pre),
        means=tuple(means),
        variances=tuple(variances),
        inv_stds=tuple(inv_stds),
        standardized=tuple(standardized),
        post_affine=tuple(post_affine),
        outputs=tuple(outputs),
    )
    return logits, cache


def _standardization_backward(d_xhat, xhat, inv_std):
    """Gradient through per-feature batch standardization with population variance."""
    n = d_xhat.shape[0]
    sum_d = d_xhat.sum(axis=0)
    sum_dx = (d_xhat * xhat).sum(axis=0)
    return (inv_std / n) * (n * d_xhat - sum_d - xhat * sum_dx)


def _block_gradients(params, cache, d_logits):
    """Reverse-mode sweep; returns per-block affine grads, frozen grads, and d_input."""
    d_h = d_logits @ params.w_out
    d_w_out = d_logits.T @ cache.outputs[-1]
    d_b_out = d_logits.sum(axis=0)
    d_gammas, d_betas, d_weights, d_biases = [], [], [], []
    for idx in range(params.arch.n_blocks - 1, -1, -1):
        t = cache.outputs[idx]
        xhat = cache.standardized[idx]
        d_s = d_h * (1.0 - t * t)
        d_betas.append(d_s.sum(axis=0))
        d_gammas.append((d_s * xhat).sum(axis=0))
        d_xhat = d_s * params.gammas[idx]
        d_a = _standardization_backward(d_xhat, xhat, cache.inv_stds[idx])
        block_in = cache.inputs if idx == 0 else cache.outputs[idx - 1]
        d_weights.append(d_a.T @ block_in)
        d_biases.append(d_a.sum(axis=0))
        d_h = d_a @ params.weights[idx]
    d_gammas.reverse()
    d_betas.reverse()
    d_weights.reverse()
    d_biases.reverse()
    return d_gammas, d_betas, d_weights, d_biases, d_w_out, d_b_out, d_h


def backward(params: AdapterParams, cache: ForwardCache, d_loss_d_logits) -> np.ndarray:
    """Exact gradient of the loss w.r.t. the trainable affine parameters.

    Chains through the output layer, tanh, the affine pairs, and the
    batch standardization (including the dependence of the batch mean
    and variance on every sample).  Returns a flat vector in depth
    order.
    """
    d_logits = np.asarray(d_loss_d_logits, dtype=float)
    n = cache.inputs.shape[0]
    if d_logits.shape != (n, params.arch.n_classes):
        raise InvalidInputError(
            f"d_loss_d_logits must have shape ({n}, {params.arch.n_classes}), got {d_logits.shape}"
        )
    d_gammas, d_betas, *_ = _block_gradients(params, cache, d_logits)
    parts = []
    for dg, db in zip(d_gammas, d_betas):
        parts.append(dg)
        parts.append(db)
    return np.concatenate(parts)


def sgd_step(params: AdapterParams, grads, lr: float) -> AdapterParams:
    """One SGD update of the affine parameters; frozen weights untouched."""
    g = np.asarray(grads, dtype=float)
    if g.shape != (params.arch.n_trainable,):
        raise InvalidInputError(
            f"grads must have shape ({params.arch.n_trainable},), got {g.shape}"
        )
    if not np.all(np.isfinite(g)):
        raise NumericalFailureError("non-finite gradients in sgd_step")
    if not (np.isfinite(lr) and lr >= 0.0):
        raise InvalidInputError("lr must be finite and nonnegative")
    theta = flatten_trainable(params) - lr * g
    return unflatten_trainable(params, theta)


def flatten_trainable(params: AdapterParams) -> np.ndarray:
    """Depth-ordered trainable vector [gamma_0, beta_0, gamma_1, beta_1, ...]."""
    parts = []
    for g, b in zip(params.gammas, params.betas):
        parts.append(g)
        parts.append(b)
    return np.concatenate(parts)


def unflatten_trainable(params: AdapterParams, theta) -> AdapterParams:
    """Inverse of :func:`flatten_trainable`; returns updated params."""
    vec = np.asarray(theta, dtype=float)
    if vec.shape != (params.arch.n_trainable,):
        raise InvalidInputError(
            f"trainable vector must have length {params.arch.n_trainable}, got {vec.shape}"
        )
    gammas, betas = [], []
    offset = 0
    for w in params.arch.widths:
        gammas.append(_read_only(vec[offset : offset + w]))
        offset += w
        betas.append(_read_only(vec[offset : offset + w]))
        offset += w
    return replace(params, gammas=tuple(gammas), betas=tuple(betas))


def snapshot_trainable(params: AdapterParams) -> SourceSnapshot:
    """Immutable copy of the current trainable vector."""
    return SourceSnapshot(trainable=_read_only(flatten_trainable(params)), arch=params.arch)


def pretrain(
    arch: AdapterArchitecture,
    features,
    labels,
    *,
    epochs: int,
    lr: float,
    seed,
    batch_size: int = 32,
) -> tuple[AdapterParams, SourceSnapshot]:
    """Supervised pretraining of every parameter on labeled source data.

    Runs mini-batch SGD on the softmax cross-entropy, training the
    soon-to-be-frozen weights together with the affine pairs.  The
    result is packaged with the weights frozen and the trainable vector
    snapshotted.  Deterministic for a fixed seed.

    Raises
    ------
    PretrainingError
        If the training loss becomes non-finite.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[1] != arch.d_in or y.shape != (x.shape[0],):
        raise InvalidInputError("features/labels shapes do not match the architecture")
    if epochs < 0 or batch_size < 2:
        raise InvalidInputError("epochs must be >= 0 and batch_size >= 2")
    rng = np.random.default_rng(seed)
    params = init_params(arch, rng)
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            if idx.size < 2:
                continue
            xb, yb = x[idx], y[idx]
            logits, cache = forward(params, xb)
            shifted = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(shifted)
            p /= p.sum(axis=1, keepdims=True)
            loss = -np.mean(np.log(np.maximum(p[np.arange(idx.size), yb], 1e-300)))
            if not np.isfinite(loss):
                raise PretrainingError("pretraining loss became non-finite")
            d_logits = p.copy()
            d_logits[np.arange(idx.size), yb] -= 1.0
            d_logits /= idx.size
            dg, dbta, dw, dbias, d_w_out, d_b_out, _ = _block_gradients(
                params, cache, d_logits
            )
            params = _pack(
                arch,
                [w - lr * d for w, d in zip(params.weights, dw)],
                [b - lr * d for b, d in zip(params.biases, dbias)],
                params.w_out - lr * d_w_out,
                params.b_out - lr * d_b_out,
                [g - lr * d for g, d in zip(params.gammas, dg)],
                [b - lr * d for b, d in zip(params.betas, dbta)],
            )
    return params, snapshot_trainable(params)


def save_params(params: AdapterParams, path, encoding: str = "binary") -> None:
    """Write parameters to a versioned file.

    The first line is a JSON header carrying the format version, the
    encoding, and the architecture.  Binary files follow with one block
    of little-endian 64-bit floats; text files follow with one line of
    decimal values per array.  Array order: block weights, block biases,
    output weight, output bias, gammas, betas.
    """
    if encoding not in ENCODINGS:
        raise InvalidInputError(f"encoding must be one of {ENCODINGS}")
    arch = params.arch
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "encoding": encoding,
        "d_in": arch.d_in,
        "widths": list(arch.widths),
        "n_classes": arch.n_classes,
        "eps_norm": arch.eps_norm,
    }
    arrays = _array_sequence(params)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        if encoding == "binary":
            flat = np.concatenate([a.ravel() for a in arrays]).astype("<f8")
            fh.write(flat.tobytes())
        else:
            for arr in arrays:
                line = " ".join(repr(float(v)) for v in arr.ravel())
                fh.write((line + "\n").encode("utf-8"))


def load_params(path) -> AdapterParams:
    """Read a file written by :func:`save_params`; exact round-trip."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: not an adapter parameter file ({exc})") from exc
        if header.get("format") != FORMAT_NAME:
            raise ConfigError(f"{path}: unrecognized format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ConfigError(
                f"{path}: unsupported version {header.get('version')!r}; "
                f"this build reads version {FORMAT_VERSION}"
            )
        encoding = header.get("encoding")
        if encoding not in ENCODINGS:
            raise ConfigError(f"{path}: unknown encoding {encoding!r}")
        arch = AdapterArchitecture(
            d_in=int(header["d_in"]),
            widths=tuple(header["widths"]),
            n_classes=int(header["n_classes"]),
            eps_norm=float(header["eps_norm"]),
        )
        shapes = _array_shapes(arch)
        total = sum(int(np.prod(s)) for s in shapes)
        if encoding == "binary":
            raw = fh.read()
            flat = np.frombuffer(raw, dtype="<f8")
            if flat.size != total:
                raise ConfigError(
                    f"{path}: expected {total} values, found {flat.size}"
                )
        else:
            lines = fh.read().decode("utf-8").splitlines()
            if len(lines) != len(shapes):
                raise ConfigError(
                    f"{path}: expected {len(shapes)} array lines, found {len(lines)}"
                )
            try:
                flat = np.concatenate(
                    [np.array([float(tok) for tok in line.split()]) for line in lines]
                )
            except ValueError as exc:
                raise ConfigError(f"{path}: malformed value ({exc})") from exc
            if flat.size != total:
                raise ConfigError(f"{path}: expected {total} values, found {flat.size}")
    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[offset : offset + size].reshape(shape))
        offset += size
    L = arch.n_blocks
    return _pack(
        arch,
        arrays[0:L],
        arrays[L : 2 * L],
        arrays[2 * L],
        arrays[2 * L + 1],
        arrays[2 * L + 2 : 3 * L + 2],
        arrays[3 * L + 2 : 4 * L + 2],
    )


def _array_sequence(params: AdapterParams):
    return (
        list(params.weights)
        + list(params.biases)
        + [params.w_out, params.b_out]
        + list(params.gammas)
        + list(params.betas)
    )


def _array_shapes(arch: AdapterArchitecture):
    dims = (arch.d_in,) + arch.widths
    shapes = [(dims[i + 1], dims[i]) for i in range(arch.n_blocks)]
    shapes += [(w,) for w in arch.widths]
    shapes += [(arch.n_classes, arch.widths[-1]), (arch.n_classes,)]
    shapes += [(w,) for w in arch.widths]
    shapes += [(w,) for w in arch.widths]
    return shapes
