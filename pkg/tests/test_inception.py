"""Batch diversity score: closed forms, protocol details, oracle contract."""

import numpy as np
import pytest

from gdgan.data import ImageBatch
from gdgan.errors import IndivisibleBatch, OracleFailure
from gdgan.metrics import FixedProbabilityOracle, inception_score


def blank_batch(n):
    return ImageBatch(np.zeros((n, 1, 64, 64), dtype=np.float32))


def uniform_oracle(k):
    return FixedProbabilityOracle(lambda b: np.full((len(b), k), 1.0 / k), k, "uniform")


def test_uniform_oracle_scores_exactly_one():
    result = inception_score(blank_batch(50), uniform_oracle(7), n_splits=10)
    assert result.per_batch_scores == pytest.approx(np.ones(10), abs=1e-9)
    assert result.mean == pytest.approx(1.0, abs=1e-9)
    assert result.sd == pytest.approx(0.0, abs=1e-9)


def test_balanced_one_hots_score_k():
    k = 4
    oracle = FixedProbabilityOracle(lambda b: np.eye(k)[np.arange(len(b)) % k], k, "onehot")
    result = inception_score(blank_batch(40), oracle, n_splits=10)
    assert result.per_batch_scores == pytest.approx(np.full(10, float(k)), abs=1e-9)
    assert result.mean == pytest.approx(float(k), abs=1e-9)


def test_zero_probability_terms_contribute_nothing():
    # rows with zeros: [1, 0] and [0, 1]; marginal [0.5, 0.5]; KL = log 2 each
    oracle = FixedProbabilityOracle(lambda b: np.eye(2)[np.arange(len(b)) % 2], 2, "hard")
    result = inception_score(blank_batch(8), oracle, n_splits=1)
    assert np.isfinite(result.per_batch_scores).all()
    assert result.mean == pytest.approx(2.0, abs=1e-12)


def test_scores_within_one_and_k():
    rng = np.random.default_rng(3)
    k = 5

    def soft(batch):
        raw = rng.random((len(batch), k))
        return raw / raw.sum(axis=1, keepdims=True)

    result = inception_score(blank_batch(60), FixedProbabilityOracle(soft, k), n_splits=6)
    assert np.all(result.per_batch_scores >= 1.0 - 1e-12)
    assert np.all(result.per_batch_scores <= k + 1e-12)
    assert min(result.per_batch_scores) <= result.mean <= max(result.per_batch_scores)


def test_permutation_within_batch_is_invariant():
    k = 3
    probs = np.random.default_rng(9).dirichlet(np.ones(k), size=30)

    def fixed(batch):
        return probs[: len(batch)]

    base = inception_score(blank_batch(30), FixedProbabilityOracle(fixed, k), n_splits=1)
    perm = np.random.default_rng(1).permutation(30)

    def permuted(batch):
        return probs[perm][: len(batch)]

    shuffled = inception_score(blank_batch(30), FixedProbabilityOracle(permuted, k), n_splits=1)
    assert shuffled.per_batch_scores == pytest.approx(base.per_batch_scores, rel=1e-12)


def test_chunked_source_equals_concatenated():
    k = 4
    rng = np.random.default_rng(5)
    probs = rng.dirichlet(np.ones(k), size=40)
    calls = {"offset": 0}

    def stateful(batch):
        start = calls["offset"]
        calls["offset"] += len(batch)
        return probs[start:start + len(batch)]

    oracle = FixedProbabilityOracle(stateful, k)
    whole = inception_score(blank_batch(40), oracle, n_splits=4)
    calls["offset"] = 0
    chunked = inception_score([blank_batch(15), blank_batch(15), blank_batch(10)], oracle, n_splits=4)
    assert chunked.per_batch_scores == pytest.approx(whole.per_batch_scores, rel=1e-14)


def test_sample_sd_uses_n_minus_one():
    k = 2
    probs = np.array([[1.0, 0.0], [0.5, 0.5], [1.0, 0.0], [1.0, 0.0]])
    oracle = FixedProbabilityOracle(lambda b: probs[: len(b)], k)
    result = inception_score(blank_batch(4), oracle, n_splits=2)
    assert result.sd == pytest.approx(np.std(result.per_batch_scores, ddof=1), rel=1e-12)


def test_indivisible_count_rejected():
    with pytest.raises(IndivisibleBatch):
        inception_score(blank_batch(25), uniform_oracle(3), n_splits=10)


def test_malformed_oracle_rejected():
    negative = FixedProbabilityOracle(lambda b: np.full((len(b), 3), -0.5), 3)
    with pytest.raises(OracleFailure):
        inception_score(blank_batch(10), negative, n_splits=1)
    unnormalized = FixedProbabilityOracle(lambda b: np.full((len(b), 3), 0.5), 3)
    with pytest.raises(OracleFailure):
        inception_score(blank_batch(10), unnormalized, n_splits=1)
    wrong_rows = FixedProbabilityOracle(lambda b: np.full((len(b) + 1, 3), 1 / 3), 3)
    with pytest.raises(OracleFailure):
        inception_score(blank_batch(10), wrong_rows, n_splits=1)
