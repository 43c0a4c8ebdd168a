"""Gradient-drift detection and strategic parameter resets.

The monitor tracks two displacement vectors of the flattened trainable
parameters: the latest step ``delta_t = theta_t - theta_{t-1}`` and the
anchor displacement ``delta_anchor = theta_{t-1} - theta_anchor``,
where the anchor is refreshed every ``interval`` completed steps.
Their cosine similarity is the gradient drift indicator (GDI); a value
below the threshold triggers a reset that restores a depth-selected
fraction of the parameters to their source-pretrained values.  Within a
step the anchor refresh happens after the reset, so an anchor captured
on a coinciding step holds the post-reset vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError

DEEP = "deep"
SHALLOW = "shallow"
RANDOM = "random"
MAX_DRIFT = "max-drift"
FULL = "full"
NONE = "none"
RESET_STRATEGIES = (DEEP, SHALLOW, RANDOM, MAX_DRIFT, FULL, NONE)

DEFAULT_INTERVAL = 10
DEFAULT_THRESHOLD = 0.0
DEFAULT_ALPHA = 50.0

# Displacements with a norm below this are treated as "no movement".
ZERO_NORM = 1e-12


@dataclass(frozen=True)
class ResetEvent:
    """Telemetry for one triggered reset."""

    step: int
    gdi: float
    num_params_reset: int
    strategy: str


@dataclass
class AnchorState:
    """Mutable-by-replacement state of the drift monitor.

    ``anchor``, ``prev``, and ``source`` are flattened trainable
    vectors; ``step`` counts completed adaptation steps.  ``rng`` feeds
    the random reset strategy and is only required for it.
    """

    anchor: np.ndarray
    prev: np.ndarray
    source: np.ndarray
    step: int = 0
    interval: int = DEFAULT_INTERVAL
    threshold: float = DEFAULT_THRESHOLD
    alpha: float = DEFAULT_ALPHA
    strategy: str = DEEP
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (len(self.anchor) == len(self.prev) == len(self.source)):
            raise InvalidInputError("anchor, prev, and source must share a length")
        if self.interval < 1:
            raise InvalidInputError("interval must be at least 1")
        if not -1.0 <= self.threshold <= 1.0:
            raise InvalidInputError("threshold must lie in [-1, 1]")
        if not 0.0 <= self.alpha <= 100.0:
            raise InvalidInputError("alpha must lie in [0, 100]")
        if self.strategy not in RESET_STRATEGIES:
            raise InvalidInputError(
                f"unknown reset strategy {self.strategy!r}; expected one of {RESET_STRATEGIES}"
            )


def initial_anchor_state(
    theta0,
    *,
    source=None,
    interval: int = DEFAULT_INTERVAL,
    threshold: float = DEFAULT_THRESHOLD,
    alpha: float = DEFAULT_ALPHA,
    strategy: str = DEEP,
    seed=None,
) -> AnchorState:
    """State at t = 0 with the anchor and previous vector at ``theta0``.

    ``source`` defaults to ``theta0`` (the usual case, where monitoring
    starts from the source-pretrained parameters).
    """
    start = np.array(theta0, dtype=float)
    src = start.copy() if source is None else np.array(source, dtype=float)
    rng = np.random.default_rng(seed) if strategy == RANDOM else None
    return AnchorState(
        anchor=start.copy(),
        prev=start.copy(),
        source=src,
        interval=interval,
        threshold=threshold,
        alpha=alpha,
        strategy=strategy,
        rng=rng,
    )


def displacements(current, prev, anchor) -> tuple[np.ndarray, np.ndarray]:
    """Latest-step and anchor displacement vectors."""
    cur = np.asarray(current, dtype=float)
    prv = np.asarray(prev, dtype=float)
    anc = np.asarray(anchor, dtype=float)
    if not (cur.shape == prv.shape == anc.shape):
        raise InvalidInputError("parameter vectors must share a shape")
    return cur - prv, prv - anc


def gdi(delta_t, delta_anchor) -> float:
    """Cosine similarity of the two displacements, in [-1, 1].

    If either displacement has (near-)zero norm there is no evidence of
    drift and the indicator is +1.
    """
    dt = np.asarray(delta_t, dtype=float)
    da = np.asarray(delta_anchor, dtype=float)
    nt = float(np.linalg.norm(dt))
    na = float(np.linalg.norm(da))
    if nt < ZERO_NORM or na < ZERO_NORM:
        return 1.0
    return float(np.clip(np.dot(dt, da) / (nt * na), -1.0, 1.0))


def select_reset_indices(
    n_params: int,
    alpha: float,
    strategy: str,
    *,
    depth_index=None,
    drift_magnitudes=None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Indices restored by a reset, sorted ascending.

    The count is ``ceil(alpha% * n_params)`` except for ``full`` (all)
    and ``none`` (empty).  Strategies select by depth (deepest or
    shallowest first), uniformly at random, or by largest drift from
    source; ties in drift magnitude break toward the lower index.
    """
    if strategy not in RESET_STRATEGIES:
        raise InvalidInputError(
            f"unknown reset strategy {strategy!r}; expected one of {RESET_STRATEGIES}"
        )
    if not 0.0 <= alpha <= 100.0:
        raise InvalidInputError("alpha must lie in [0, 100]")
    if strategy == NONE:
        return np.empty(0, dtype=int)
    if strategy == FULL:
        return np.arange(n_params)
    count = math.ceil(alpha * n_params / 100.0)
    if count == 0:
        return np.empty(0, dtype=int)
    if depth_index is None:
        depth = np.arange(n_params)
    else:
        depth = np.asarray(depth_index)
        if depth.shape != (n_params,):
            raise InvalidInputError("depth_index must have one entry per parameter")
    if strategy == DEEP:
        order = np.argsort(depth, kind="stable")
        return np.sort(order[n_params - count :])
    if strategy == SHALLOW:
        order = np.argsort(depth, kind="stable")
        return np.sort(order[:count])
    if strategy == RANDOM:
        if rng is None:
            raise InvalidInputError("the random strategy requires an rng")
        return np.sort(rng.choice(n_params, size=count, replace=False))
    # max-drift
    if drift_magnitudes is None:
        raise InvalidInputError("the max-drift strategy requires drift magnitudes")
    mags = np.asarray(drift_magnitudes, dtype=float)
    if mags.shape != (n_params,):
        raise InvalidInputError("drift_magnitudes must have one entry per parameter")
    order = np.lexsort((np.arange(n_params), -mags))
    return np.sort(order[:count])


def strategic_reset(
    current,
    source,
    alpha: float,
    strategy: str,
    *,
    depth_index=None,
    drift_magnitudes=None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Restore the selected parameters to their source values.

    Returns the new vector together with the restored indices;
    non-selected entries are preserved bitwise.
    """
    cur = np.asarray(current, dtype=float)
    src = np.asarray(source, dtype=float)
    if cur.shape != src.shape:
        raise InvalidInputError("current and source must share a shape")
    indices = select_reset_indices(
        cur.size,
        alpha,
        strategy,
        depth_index=depth_index,
        drift_magnitudes=drift_magnitudes,
        rng=rng,
    )
    out = cur.copy()
    out[indices] = src[indices]
    return out, indices


def observe_step(state: AnchorState, theta_t) -> tuple[np.ndarray, ResetEvent | None, AnchorState]:
    """Advance the monitor by one completed adaptation step.

    Computes the displacements and the GDI for the incoming parameter
    vector; if the GDI falls below the threshold (and the strategy is
    not ``none``), applies a strategic reset and records an event.
    Afterwards — on multiples of ``interval`` — the anchor is refreshed
    to the current (possibly reset) vector; finally the previous-step
    vector and the step count advance.

    Returns
    -------
    (theta_out, event, new_state)
        ``theta_out`` is the possibly reset parameter vector the run
        must continue from; ``event`` is None when no reset fired.
    """
    theta = np.asarray(theta_t, dtype=float)
    if theta.shape != state.prev.shape:
        raise InvalidInputError("theta_t length does not match the monitor state")
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta_t contains non-finite values")
    delta_t, delta_anchor = displacements(theta, state.prev, state.anchor)
    g = gdi(delta_t, delta_anchor)
    t = state.step + 1
    event = None
    theta_out = theta
    if g < state.threshold and state.strategy != NONE:
        mags = np.abs(theta - state.source) if state.strategy == MAX_DRIFT else None
        theta_out, indices = strategic_reset(
            theta,
            state.source,
            state.alpha,
            state.strategy,
            drift_magnitudes=mags,
            rng=state.rng,
        )
        event = ResetEvent(
            step=t, gdi=g, num_params_reset=int(indices.size), strategy=state.strategy
        )
    anchor = theta_out.copy() if t % state.interval == 0 else state.anchor
    new_state = replace(state, anchor=anchor, prev=theta_out.copy(), step=t)
    return theta_out, event, new_state
