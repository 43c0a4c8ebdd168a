"""Unit and property tests for the logit mathematics."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sail.errors import DegenerateInputError, InvalidInputError
from sail.fusion import (
    entropy,
    fuse,
    interpolation_weight,
    log_sum_exp,
    normalize_logits,
    softmax,
)

SIGMOID_1 = 1.0 / (1.0 + math.exp(-1.0))  # 0.7310585786300049


def logit_vectors(min_k=2, max_k=10, lo=-50.0, hi=50.0):
    return st.lists(
        st.floats(min_value=lo, max_value=hi, allow_nan=False),
        min_size=min_k,
        max_size=max_k,
    ).map(np.array)


def prob_vectors(min_k=2, max_k=10):
    return (
        st.lists(
            st.floats(min_value=0.01, max_value=10.0),
            min_size=min_k,
            max_size=max_k,
        )
        .map(np.array)
        .map(lambda v: v / v.sum())
    )


# ---------------------------------------------------------------------------
# log_sum_exp
# ---------------------------------------------------------------------------

def test_lse_symmetric_pair():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0), abs=1e-12)


def test_lse_constant_shift():
    assert log_sum_exp([5.0, 5.0]) == pytest.approx(5.0 + math.log(2.0), abs=1e-12)


def test_lse_against_naive_summation():
    naive = math.log(math.exp(1.0) + math.exp(2.0) + math.exp(3.0))
    assert log_sum_exp([1.0, 2.0, 3.0]) == pytest.approx(naive, abs=1e-12)
    assert log_sum_exp([1.0, 2.0, 3.0]) == pytest.approx(3.40760596444438, abs=1e-10)


def test_lse_no_overflow_for_large_entries():
    out = log_sum_exp([700.0, 699.0])
    assert np.isfinite(out)
    assert out == pytest.approx(700.0 + math.log(1.0 + math.exp(-1.0)), abs=1e-9)


def test_lse_batch_axis():
    out = log_sum_exp(np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert np.allclose(out, [math.log(2.0), 1.0 + math.log(2.0)], atol=1e-12)


def test_lse_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        log_sum_exp([np.inf, 0.0])
    with pytest.raises(InvalidInputError):
        log_sum_exp([np.nan, 0.0])
    with pytest.raises(InvalidInputError):
        log_sum_exp([])


# ---------------------------------------------------------------------------
# normalize_logits
# ---------------------------------------------------------------------------

def test_lse_normalization_uniform():
    out = normalize_logits([0.0, 0.0], "lse")
    assert np.allclose(out, [-math.log(2.0)] * 2, atol=1e-12)


def test_lse_normalization_subtracts_oracle():
    naive = math.log(math.exp(1.0) + math.exp(2.0) + math.exp(3.0))
    out = normalize_logits([1.0, 2.0, 3.0], "lse")
    assert np.allclose(out, np.array([1.0, 2.0, 3.0]) - naive, atol=1e-12)


@given(z=logit_vectors(), c=st.floats(min_value=-100.0, max_value=100.0))
@settings(max_examples=60, deadline=None)
def test_lse_normalization_shift_invariant(z, c):
    a = normalize_logits(z, "lse")
    b = normalize_logits(z + c, "lse")
    assert np.max(np.abs(a - b)) < 1e-10


@given(z=logit_vectors())
@settings(max_examples=60, deadline=None)
def test_lse_normalization_output_has_zero_lse(z):
    out = normalize_logits(z, "lse")
    assert abs(log_sum_exp(out)) < 1e-9


def test_softmax_strategy_returns_probabilities():
    out = normalize_logits([1.0, 2.0, 3.0], "softmax")
    assert np.allclose(out, softmax([1.0, 2.0, 3.0]), atol=0.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)


def test_zscore_strategy_population_moments():
    out = normalize_logits([1.0, 2.0, 3.0, 4.0], "z-score")
    assert out.mean() == pytest.approx(0.0, abs=1e-12)
    assert out.std() == pytest.approx(1.0, rel=1e-9)


def test_l2_strategy_unit_norm():
    out = normalize_logits([3.0, 4.0], "l2")
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out, [0.6, 0.8], atol=1e-12)


def test_minmax_strategy_maps_to_unit_interval():
    out = normalize_logits([2.0, 4.0, 6.0], "min-max")
    assert np.allclose(out, [0.0, 0.5, 1.0], atol=1e-12)


def test_normalize_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        normalize_logits([1.0, 1.0], "min-max")
    with pytest.raises(DegenerateInputError):
        normalize_logits([1.0, 1.0], "z-score")
    with pytest.raises(DegenerateInputError):
        normalize_logits([0.0, 0.0], "l2")


def test_normalize_unknown_strategy():
    with pytest.raises(InvalidInputError, match="unknown normalization"):
        normalize_logits([1.0, 2.0], "does-not-exist")


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def test_softmax_uniform():
    assert np.allclose(softmax([0.0] * 4), [0.25] * 4, atol=1e-12)


def test_softmax_large_gap_no_overflow():
    out = softmax([100.0, 0.0])
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(1.0, abs=1e-12)
    assert out[1] == pytest.approx(0.0, abs=1e-12)


def test_softmax_two_class_sigmoid_oracle():
    out = softmax([1.0, 2.0])
    assert out[1] == pytest.approx(SIGMOID_1, abs=1e-12)
    assert out[0] == pytest.approx(1.0 - SIGMOID_1, abs=1e-12)


@given(z=logit_vectors())
@settings(max_examples=60, deadline=None)
def test_softmax_sums_to_one(z):
    assert abs(softmax(z).sum() - 1.0) < 1e-9


@given(z=logit_vectors())
@settings(max_examples=60, deadline=None)
def test_softmax_unchanged_by_lse_normalization(z):
    direct = softmax(z)
    via_norm = softmax(normalize_logits(z, "lse"))
    assert np.max(np.abs(direct - via_norm)) < 1e-12


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

def test_entropy_one_hot_is_zero():
    assert entropy([1.0, 0.0, 0.0]) == 0.0


def test_entropy_uniform_is_log_k():
    assert entropy([0.1] * 10) == pytest.approx(math.log(10.0), abs=1e-12)


def test_entropy_direct_evaluation_oracle():
    naive = -(0.9 * math.log(0.9) + 0.1 * math.log(0.1))
    assert entropy([0.9, 0.1]) == pytest.approx(naive, abs=1e-12)
    assert entropy([0.9, 0.1]) == pytest.approx(0.325083, abs=1e-6)


@given(p=prob_vectors())
@settings(max_examples=60, deadline=None)
def test_entropy_bounds(p):
    h = entropy(p)
    assert -1e-12 <= h <= math.log(p.size) + 1e-12


def test_entropy_positive_unless_one_hot():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.dirichlet(np.ones(5))
        h = entropy(p)
        if h < 1e-12:
            assert p.max() > 1.0 - 1e-9
        else:
            assert h > 0.0


def test_entropy_rejects_negative_and_empty():
    with pytest.raises(InvalidInputError):
        entropy([-0.1, 1.1])
    with pytest.raises(InvalidInputError):
        entropy([])


# ---------------------------------------------------------------------------
# interpolation_weight
# ---------------------------------------------------------------------------

def test_weight_equal_confidence_is_half():
    p = np.array([[0.7, 0.3]])
    assert interpolation_weight(p, p, "confidence")[0] == 0.5


def test_weight_confidence_scalar_oracle():
    # max probabilities 0.9 vs 0.6 -> logistic of the 0.3 difference
    lam = interpolation_weight([[0.9, 0.1]], [[0.6, 0.4]], "confidence")
    assert lam[0] == pytest.approx(1.0 / (1.0 + math.exp(-0.3)), abs=1e-12)
    assert lam[0] == pytest.approx(0.574443, abs=1e-6)


@given(
    pair=st.integers(min_value=1, max_value=6).flatmap(
        lambda n: st.tuples(
            st.lists(prob_vectors(min_k=4, max_k=4), min_size=n, max_size=n),
            st.lists(prob_vectors(min_k=4, max_k=4), min_size=n, max_size=n),
        )
    )
)
@settings(max_examples=60, deadline=None)
def test_weight_confidence_strict_bounds(pair):
    pv, pa = np.array(pair[0]), np.array(pair[1])
    lam = interpolation_weight(pv, pa, "confidence")
    assert np.all(lam > 1.0 - SIGMOID_1)
    assert np.all(lam < SIGMOID_1)


def test_weight_confidence_monotone_in_vlm_confidence():
    p_ada = np.array([[0.5, 0.5]])
    lams = [
        interpolation_weight([[c, 1.0 - c]], p_ada, "confidence")[0]
        for c in (0.5, 0.6, 0.7, 0.8, 0.9)
    ]
    assert all(a < b for a, b in zip(lams, lams[1:]))


def test_weight_confidence_monotone_in_ada_confidence():
    p_vlm = np.array([[0.5, 0.5]])
    lams = [
        interpolation_weight(p_vlm, [[c, 1.0 - c]], "confidence")[0]
        for c in (0.5, 0.6, 0.7, 0.8, 0.9)
    ]
    assert all(a > b for a, b in zip(lams, lams[1:]))


def test_weight_average_strategy():
    pv = np.array([[0.9, 0.1], [0.2, 0.8]])
    pa = np.array([[0.5, 0.5], [0.6, 0.4]])
    assert np.all(interpolation_weight(pv, pa, "average") == 0.5)


def test_weight_sample_entropy_oracle():
    pv = np.array([[0.9, 0.1]])
    pa = np.array([[0.6, 0.4]])
    h_v = entropy(pv[0])
    h_a = entropy(pa[0])
    expected = math.exp(-h_v) / (math.exp(-h_v) + math.exp(-h_a))
    lam = interpolation_weight(pv, pa, "sample-entropy")
    assert lam[0] == pytest.approx(expected, abs=1e-12)


def test_weight_batch_entropy_shared_across_batch():
    pv = np.array([[0.9, 0.1], [0.5, 0.5], [0.7, 0.3]])
    pa = np.array([[0.6, 0.4], [0.8, 0.2], [0.55, 0.45]])
    lam = interpolation_weight(pv, pa, "batch-entropy")
    assert lam.shape == (3,)
    assert np.all(lam == lam[0])
    mean_hv = float(np.mean(entropy(pv)))
    mean_ha = float(np.mean(entropy(pa)))
    expected = 1.0 / (1.0 + math.exp(-(mean_ha - mean_hv)))
    assert lam[0] == pytest.approx(expected, abs=1e-12)


def test_weight_errors():
    with pytest.raises(InvalidInputError):
        interpolation_weight([], [], "confidence")
    with pytest.raises(InvalidInputError):
        interpolation_weight([[0.5, 0.5]], [[0.3, 0.3, 0.4]], "confidence")
    with pytest.raises(InvalidInputError, match="unknown weight strategy"):
        interpolation_weight([[0.5, 0.5]], [[0.5, 0.5]], "nope")


# ---------------------------------------------------------------------------
# fuse
# ---------------------------------------------------------------------------

def test_fuse_endpoint_identities():
    rng = np.random.default_rng(1)
    zv = rng.normal(size=(5, 4))
    za = rng.normal(size=(5, 4))
    assert np.array_equal(fuse(zv, za, 1.0), zv)
    assert np.array_equal(fuse(zv, za, 0.0), za)


def test_fuse_midpoint_example():
    assert np.allclose(fuse([0.0, 2.0], [2.0, 0.0], 0.5), [1.0, 1.0], atol=0.0)


def test_fuse_per_sample_weights():
    zv = np.array([[1.0, 0.0], [1.0, 0.0]])
    za = np.array([[0.0, 1.0], [0.0, 1.0]])
    out = fuse(zv, za, np.array([1.0, 0.0]))
    assert np.array_equal(out[0], zv[0])
    assert np.array_equal(out[1], za[1])


@given(z=logit_vectors(), lam=st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_fuse_self_fusion_preserves_argmax(z, lam):
    assert np.argmax(fuse(z, z, lam)) == np.argmax(z)


def test_fuse_rejects_bad_lambda_and_shapes():
    with pytest.raises(InvalidInputError):
        fuse([1.0, 2.0], [1.0, 2.0], 1.5)
    with pytest.raises(InvalidInputError):
        fuse([1.0, 2.0], [1.0, 2.0], -0.1)
    with pytest.raises(InvalidInputError):
        fuse([1.0, 2.0], [1.0, 2.0, 3.0], 0.5)
    with pytest.raises(InvalidInputError):
        fuse([1.0, 2.0], [1.0, 2.0], np.nan)
