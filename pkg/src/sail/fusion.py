"""Per-sample logit mathematics: normalization, softmax, entropy, and fusion.

Every function accepts either a single vector of class scores or a batch
with classes on the last axis, and is vectorized over leading axes.
Logits are plain ``float`` arrays; probability vectors are nonnegative
and sum to one along the last axis.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

# Normalization strategy tags.
LSE = "lse"
SOFTMAX = "softmax"
ZSCORE = "z-score"
L2 = "l2"
MINMAX = "min-max"
NORMALIZATION_STRATEGIES = (LSE, SOFTMAX, ZSCORE, L2, MINMAX)

# Interpolation-weight strategy tags.
CONFIDENCE = "confidence"
AVERAGE = "average"
BATCH_ENTROPY = "batch-entropy"
SAMPLE_ENTROPY = "sample-entropy"
WEIGHT_STRATEGIES = (CONFIDENCE, AVERAGE, BATCH_ENTROPY, SAMPLE_ENTROPY)

# Guard added to the standard deviation in z-score normalization.
_STD_GUARD = 1e-12


def _as_finite_array(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sum_exp(z, axis: int = -1):
    """Compute ``log(sum(exp(z)))`` along ``axis`` without overflow.

    Uses the max-subtraction stabilization, so inputs with entries up to
    about +/-700 are handled exactly where naive evaluation would
    overflow.

    Parameters
    ----------
    z : array_like
        Finite class scores; the reduction runs along ``axis``.

    Returns
    -------
    float or np.ndarray
        The log-sum-exp value(s); scalar for a single vector.
    """
    arr = _as_finite_array("z", z)
    m = np.max(arr, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(arr - m), axis=axis)) + np.squeeze(m, axis=axis)
    return float(out) if out.ndim == 0 else out


def softmax(z, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis``, shift-invariant and overflow-safe."""
    arr = _as_finite_array("z", z)
    m = np.max(arr, axis=axis, keepdims=True)
    e = np.exp(arr - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def normalize_logits(z, strategy: str = LSE) -> np.ndarray:
    """Normalize logit vectors with the chosen strategy.

    Strategies
    ----------
    lse
        Subtract the log-sum-exp, turning logits into log-probabilities;
        the log-sum-exp of the output is zero.
    softmax
        Replace the logits by their softmax probabilities.
    z-score
        Center and scale by the population standard deviation
        (guarded by 1e-12).
    l2
        Divide by the Euclidean norm.
    min-max
        Affinely map onto [0, 1].

    Raises
    ------
    DegenerateInputError
        Constant vectors for min-max / z-score, zero vectors for l2.
    InvalidInputError
        Non-finite input or an unknown strategy tag.
    """
    arr = _as_finite_array("z", z)
    if strategy == LSE:
        lse = log_sum_exp(arr)
        return arr - np.expand_dims(np.asarray(lse), -1)
    if strategy == SOFTMAX:
        return softmax(arr)
    if strategy == ZSCORE:
        mean = arr.mean(axis=-1, keepdims=True)
        std = arr.std(axis=-1, keepdims=True)
        if np.any(std == 0.0):
            raise DegenerateInputError("z-score normalization of a constant vector")
        return (arr - mean) / np.maximum(std, _STD_GUARD)
    if strategy == L2:
        norm = np.linalg.norm(arr, axis=-1, keepdims=True)
        if np.any(norm == 0.0):
            raise DegenerateInputError("l2 normalization of a zero vector")
        return arr / norm
    if strategy == MINMAX:
        lo = arr.min(axis=-1, keepdims=True)
        hi = arr.max(axis=-1, keepdims=True)
        if np.any(hi == lo):
            raise DegenerateInputError("min-max normalization of a constant vector")
        return (arr - lo) / (hi - lo)
    raise InvalidInputError(
        f"unknown normalization strategy {strategy!r}; expected one of {NORMALIZATION_STRATEGIES}"
    )


def entropy(p, axis: int = -1):
    """Shannon entropy ``-sum(p * ln p)`` in nats, with 0*ln(0) = 0.

    The result lies in [0, ln K] for a valid probability vector of K
    classes.
    """
    arr = np.asarray(p, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("p must be non-empty")
    if np.any(arr < 0.0):
        raise InvalidInputError("probabilities must be nonnegative")
    logs = np.log(np.where(arr > 0.0, arr, 1.0))
    out = -np.sum(arr * logs, axis=axis)
    return float(out) if out.ndim == 0 else out


def interpolation_weight(p_vlm, p_ada, strategy: str = CONFIDENCE) -> np.ndarray:
    """Per-sample convex weight for fusing generalist and adapter logits.

    Parameters
    ----------
    p_vlm, p_ada : array_like, shape (n, K) or (K,)
        Probability vectors of the two models for the same samples.
    strategy : str
        ``confidence``
            lambda_i = exp(max p_i^vlm) / (exp(max p_i^vlm) + exp(max p_i^ada)),
            i.e. a logistic in the difference of maximum probabilities.
        ``average``
            lambda_i = 0.5 for every sample.
        ``sample-entropy``
            Same ratio form with the negated per-sample entropies in
            place of the maximum probabilities.
        ``batch-entropy``
            Ratio of exponentiated negated batch-mean entropies; one
            shared weight, broadcast to every sample.

    Returns
    -------
    np.ndarray, shape (n,)
        Weights in [0, 1], one per sample.
    """
    pv = np.atleast_2d(_as_finite_array("p_vlm", p_vlm))
    pa = np.atleast_2d(_as_finite_array("p_ada", p_ada))
    if pv.shape != pa.shape:
        raise InvalidInputError(
            f"probability batches must share a shape, got {pv.shape} and {pa.shape}"
        )
    n = pv.shape[0]
    if strategy == CONFIDENCE:
        return _sigmoid(pv.max(axis=-1) - pa.max(axis=-1))
    if strategy == AVERAGE:
        return np.full(n, 0.5)
    if strategy == SAMPLE_ENTROPY:
        return _sigmoid(np.asarray(entropy(pa)) - np.asarray(entropy(pv)))
    if strategy == BATCH_ENTROPY:
        shared = _sigmoid(
            np.asarray(np.mean(entropy(pa)) - np.mean(entropy(pv)))[np.newaxis]
        )[0]
        return np.full(n, shared)
    raise InvalidInputError(
        f"unknown weight strategy {strategy!r}; expected one of {WEIGHT_STRATEGIES}"
    )


def fuse(z_vlm, z_ada, lam) -> np.ndarray:
    """Convex combination ``lam * z_vlm + (1 - lam) * z_ada``.

    ``lam`` may be a scalar or one weight per sample; both logit arrays
    must already be normalized by the configured strategy and share a
    shape.
    """
    zv = _as_finite_array("z_vlm", z_vlm)
    za = _as_finite_array("z_ada", z_ada)
    if zv.shape != za.shape:
        raise InvalidInputError(
            f"logit arrays must share a shape, got {zv.shape} and {za.shape}"
        )
    lam_arr = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(lam_arr)):
        raise InvalidInputError("lam contains non-finite values")
    if np.any(lam_arr < 0.0) or np.any(lam_arr > 1.0):
        raise InvalidInputError("lam must lie in [0, 1]")
    if lam_arr.ndim == zv.ndim - 1:
        lam_arr = lam_arr[..., np.newaxis]
    return lam_arr * zv + (1.0 - lam_arr) * za
