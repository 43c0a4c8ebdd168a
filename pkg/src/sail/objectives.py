"""Self-supervised losses and their analytic gradients.

The training signal has three parts: a cross-entropy that aligns the
adapter's distribution with the (detached) fused distribution, a
category-balance penalty that discourages collapse onto few classes,
and a weighted entropy term that sharpens the fused prediction.  The
total objective is

    L = L_align_ce + balance + entropy_coef * L_ent

and :func:`total_loss_and_grad` returns both the loss breakdown and the
exact gradient with respect to the adapter's raw logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .fusion import entropy

# Probabilities are clamped to this floor before logs are taken.
PROB_CLAMP = 1e-12
_LOG_CLAMP = float(np.log(PROB_CLAMP))


@dataclass(frozen=True)
class LossHyperparams:
    """Coefficients and switches of the adaptation objective.

    Parameters
    ----------
    balance_coef : float
        Weight of the category-balance penalty (>= 0).
    entropy_coef : float
        Weight of the entropy term in the total objective (>= 0).
    weighting_enabled : bool
        When True, each sample's entropy contribution is scaled by
        ``sample_weight`` of its fused prediction entropy.
    entropy_threshold : float
        Threshold E0 for sample weighting, in nats.  Must be positive
        whenever weighting is enabled; a common choice is
        0.4 * ln(n_classes).
    align_enabled, entropy_enabled : bool
        Ablation switches; a disabled term contributes exactly zero to
        both the loss and the gradient.
    balance_on_adapter : bool
        When True, the balance penalty is computed from the adapter's
        own distribution instead of the fused one.
    """

    balance_coef: float = 1.0
    entropy_coef: float = 1.0
    weighting_enabled: bool = False
    entropy_threshold: float = 0.0
    align_enabled: bool = True
    entropy_enabled: bool = True
    balance_on_adapter: bool = False

    def __post_init__(self):
        for name in ("balance_coef", "entropy_coef"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise InvalidInputError(f"{name} must be finite and nonnegative")
        if self.weighting_enabled and not self.entropy_threshold > 0.0:
            raise InvalidInputError(
                "entropy_threshold must be positive when weighting is enabled"
            )


@dataclass(frozen=True)
class LossBreakdown:
    """Loss components of one batch; ``total = align_ce + balance + entropy_coef * ent``."""

    align_ce: float
    balance: float
    ent: float
    total: float
    mean_weight: float


@dataclass(frozen=True)
class BatchGradients:
    """Gradient of the total objective w.r.t. the adapter's raw logits, shape (n, K)."""

    d_total_d_zada: np.ndarray


def default_entropy_threshold(n_classes: int) -> float:
    """Default sample-weighting threshold, ``0.4 * ln(n_classes)``."""
    if n_classes < 2:
        raise InvalidInputError("n_classes must be at least 2")
    return 0.4 * float(np.log(n_classes))


def sample_weight(h, e0: float):
    """Entropy-gated sample weight ``exp(e0 - h)`` for ``h < e0``, else 0.

    The gate uses a strict inequality, so a sample sitting exactly at
    the threshold is excluded.  Accepts a scalar or an array of
    entropies.
    """
    if not e0 > 0.0:
        raise InvalidInputError("e0 must be positive")
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0.0):
        raise InvalidInputError("entropies must be nonnegative")
    out = np.where(arr < e0, np.exp(np.minimum(e0 - arr, 700.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def balance_penalty(p_batch, coef: float) -> float:
    """Category-balance penalty ``coef * sum_c qbar_c ln qbar_c``.

    ``qbar`` is the batch-mean distribution; the penalty is minimized
    (at ``-coef * ln K``) when the batch mean is uniform.
    """
    p = np.atleast_2d(np.asarray(p_batch, dtype=float))
    qbar = p.mean(axis=0)
    return float(coef * np.sum(qbar * np.log(np.maximum(qbar, PROB_CLAMP))))


def alignment_loss(p_fused, p_ada, balance_coef: float):
    """Alignment loss value and its direct partials w.r.t. the adapter's log-probabilities.

    Parameters
    ----------
    p_fused : array_like, shape (n, K)
        Target distribution, treated as constant.
    p_ada : array_like, shape (n, K)
        Adapter distribution.
    balance_coef : float
        Weight of the balance penalty, computed here from ``p_fused``.

    Returns
    -------
    value : float
        ``-(1/n) sum_i sum_c p_fused[i,c] ln p_ada[i,c] + balance``.
    partials : np.ndarray, shape (n, K)
        Derivative of the cross-entropy part with respect to
        ``ln p_ada``; the balance part has no direct dependence on the
        adapter distribution given fixed inputs, so it contributes
        nothing here.
    """
    pf = np.atleast_2d(np.asarray(p_fused, dtype=float))
    pa = np.atleast_2d(np.asarray(p_ada, dtype=float))
    if pf.shape != pa.shape:
        raise InvalidInputError(
            f"distributions must share a shape, got {pf.shape} and {pa.shape}"
        )
    n = pf.shape[0]
    ce = -np.sum(pf * np.log(np.maximum(pa, PROB_CLAMP))) / n
    value = ce + balance_penalty(pf, balance_coef)
    partials = -(pf / n) * (pa > PROB_CLAMP)
    return float(value), partials


def entropy_loss(p_fused, weights) -> float:
    """Weighted mean entropy ``(1/n) sum_i w_i H(p_i)`` of the fused distributions."""
    pf = np.atleast_2d(np.asarray(p_fused, dtype=float))
    w = np.asarray(weights, dtype=float)
    if w.shape != (pf.shape[0],):
        raise InvalidInputError(
            f"weights must have shape ({pf.shape[0]},), got {w.shape}"
        )
    if np.any(w < 0.0):
        raise InvalidInputError("weights must be nonnegative")
    return float(np.mean(w * entropy(pf)))


def total_loss_and_grad(
    z_vlm_norm,
    z_ada_norm,
    lam,
    hyper: LossHyperparams,
    step: int | None = None,
) -> tuple[LossBreakdown, BatchGradients]:
    """Evaluate the full objective and its gradient w.r.t. the adapter's raw logits.

    Both logit arrays must be log-probabilities (lse-normalized); the
    gradient chains through that normalization, whose Jacobian maps an
    upstream vector ``v`` to ``v - softmax(z) * sum(v)``.  The fused
    target of the cross-entropy, the interpolation weights ``lam``, and
    the entropy-gating sample weights are all treated as constants; the
    balance penalty and the entropy term differentiate through the
    fused distribution along the ``(1 - lam)`` adapter path.

    Parameters
    ----------
    z_vlm_norm, z_ada_norm : array_like, shape (n, K)
        Normalized logits of the generalist and the adapter.
    lam : array_like, shape (n,) or scalar
        Interpolation weights in [0, 1], constant w.r.t. the gradient.
    hyper : LossHyperparams
        Coefficients and switches.
    step : int, optional
        Adaptation step index, attached to numerical-failure errors.

    Returns
    -------
    (LossBreakdown, BatchGradients)

    Raises
    ------
    NumericalFailureError
        If any intermediate quantity is non-finite.
    """
    zv = np.atleast_2d(np.asarray(z_vlm_norm, dtype=float))
    za = np.atleast_2d(np.asarray(z_ada_norm, dtype=float))
    if zv.shape != za.shape:
        raise InvalidInputError(
            f"logit arrays must share a shape, got {zv.shape} and {za.shape}"
        )
    n, n_classes = za.shape
    lam_arr = np.broadcast_to(np.asarray(lam, dtype=float), (n,)).astype(float)
    if np.any(lam_arr < 0.0) or np.any(lam_arr > 1.0):
        raise InvalidInputError("lam must lie in [0, 1]")
    if not (np.all(np.isfinite(zv)) and np.all(np.isfinite(za))):
        raise NumericalFailureError("non-finite logits entering the objective", step)
    # Guard against callers passing raw (un-normalized) adapter logits:
    # the gradient chain below is only correct for log-probabilities.
    lse_za = np.log(np.sum(np.exp(za - za.max(axis=1, keepdims=True)), axis=1)) + za.max(
        axis=1
    )
    if np.any(np.abs(lse_za) > 1e-6):
        raise InvalidInputError(
            "z_ada_norm must be log-probabilities (lse-normalized logits)"
        )

    p_ada = np.exp(za)
    z_fused = lam_arr[:, None] * zv + (1.0 - lam_arr[:, None]) * za
    shifted = z_fused - z_fused.max(axis=1, keepdims=True)
    exp_f = np.exp(shifted)
    p_fused = exp_f / exp_f.sum(axis=1, keepdims=True)

    log_p_fused = np.log(np.maximum(p_fused, PROB_CLAMP))
    fused_unclamped = p_fused > PROB_CLAMP

    # Sample weights (constants) from the fused prediction entropies.
    if hyper.weighting_enabled:
        h_fused = -np.sum(p_fused * log_p_fused, axis=1)
        weights = np.asarray(sample_weight(h_fused, hyper.entropy_threshold))
    else:
        weights = np.ones(n)
    mean_weight = float(weights.mean())

    # d(total)/d(p_fused) accumulated over the differentiable fused paths.
    d_p_fused = np.zeros_like(p_fused)
    d_za_direct = np.zeros_like(za)

    if hyper.align_enabled:
        za_clamped = np.maximum(za, _LOG_CLAMP)
        align_ce = float(-np.sum(p_fused * za_clamped) / n)
        d_za_direct += -(p_fused / n) * (za > _LOG_CLAMP)
        if hyper.balance_coef > 0.0:
            q_source = p_ada if hyper.balance_on_adapter else p_fused
            qbar = q_source.mean(axis=0)
            q_clamped = np.maximum(qbar, PROB_CLAMP)
            balance = float(hyper.balance_coef * np.sum(qbar * np.log(q_clamped)))
            d_qbar = hyper.balance_coef * (np.log(q_clamped) + (qbar > PROB_CLAMP))
            if hyper.balance_on_adapter:
                # qbar depends on p_ada = exp(za) elementwise.
                d_za_direct += (d_qbar[None, :] / n) * p_ada
            else:
                d_p_fused += d_qbar[None, :] / n
        else:
            balance = 0.0
    else:
        align_ce = 0.0
        balance = 0.0

    if hyper.entropy_enabled:
        ent = float(-np.sum(weights[:, None] * p_fused * log_p_fused) / n)
        d_p_fused += (
            hyper.entropy_coef
            * -(weights[:, None] / n)
            * (log_p_fused + fused_unclamped)
        )
    else:
        ent = 0.0

    total = align_ce + balance + hyper.entropy_coef * ent

    # Chain d/d(p_fused) -> d/d(z_fused) -> d/d(z_ada_norm).
    inner = np.sum(d_p_fused * p_fused, axis=1, keepdims=True)
    d_z_fused = p_fused * (d_p_fused - inner)
    v = d_za_direct + (1.0 - lam_arr[:, None]) * d_z_fused

    # Chain through the lse normalization to the raw adapter logits.
    d_raw = v - p_ada * v.sum(axis=1, keepdims=True)

    if not (np.isfinite(total) and np.all(np.isfinite(d_raw))):
        raise NumericalFailureError("non-finite loss or gradient", step)
    breakdown = LossBreakdown(
        align_ce=align_ce,
        balance=balance,
        ent=ent,
        total=total,
        mean_weight=mean_weight,
    )
    return breakdown, BatchGradients(d_total_d_zada=d_raw)
