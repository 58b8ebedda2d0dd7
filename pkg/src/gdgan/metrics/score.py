"""Inception score over equal-size batches of images.

The image source is scored by a pluggable label-probability oracle, split
into ``n_splits`` consecutive batches, and each batch gets its own score
exp(mean_x KL(p(y|x) || p(y))) with p(y) the batch marginal. Mean and
sample SD (n-1 denominator) over the batch scores are reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from ..data.images import ImageBatch
from ..errors import IndivisibleBatch, OracleFailure
from .oracles import LabelProbabilityOracle


@dataclass(frozen=True)
class InceptionScoreResult:
    per_batch_scores: np.ndarray
    mean: float
    sd: float
    n_images: int
    oracle: str

    def to_dict(self) -> dict:
        return {
            "per_batch_scores": [float(s) for s in self.per_batch_scores],
            "mean": self.mean,
            "sd": self.sd,
            "n_images": self.n_images,
            "oracle": self.oracle,
        }


def _batch_score(probs: np.ndarray) -> float:
    """exp of mean KL between rows of ``probs`` and their column mean.

    Zero entries of p(y|x) contribute nothing to the KL sum.
    """
    p_y = probs.mean(axis=0, keepdims=True)
    ratio = np.ones_like(probs)
    nz = probs > 0
    ratio[nz] = probs[nz] / np.broadcast_to(p_y, probs.shape)[nz]
    kl_per_image = np.where(nz, probs * np.log(ratio), 0.0).sum(axis=1)
    return float(np.exp(kl_per_image.mean()))


def inception_score(
    images: Union[ImageBatch, Iterable[ImageBatch]],
    oracle: LabelProbabilityOracle,
    n_splits: int = 10,
) -> InceptionScoreResult:
    """Score an image source in ``n_splits`` equal consecutive batches.

    ``images`` is a single ImageBatch or an iterable of them (chunked
    sources score identically to the concatenated batch). The total image
    count must be divisible by ``n_splits``.
    """
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    if isinstance(images, ImageBatch):
        chunks = [images]
    else:
        chunks = list(images)
    if not chunks:
        raise IndivisibleBatch("empty image source")

    prob_rows = []
    for chunk in chunks:
        p = np.asarray(oracle.predict_proba(chunk), dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != chunk.data.shape[0]:
            raise OracleFailure(f"oracle returned shape {p.shape} for batch of {chunk.data.shape[0]}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-5):
            raise OracleFailure("oracle rows must be non-negative and sum to 1")
        prob_rows.append(p)
    probs = np.concatenate(prob_rows, axis=0)

    n = probs.shape[0]
    if n % n_splits != 0:
        raise IndivisibleBatch(f"{n} images not divisible into {n_splits} batches")
    per = n // n_splits
    scores = np.array([_batch_score(probs[i * per:(i + 1) * per]) for i in range(n_splits)])
    mean = float(scores.mean())
    sd = float(scores.std(ddof=1)) if n_splits > 1 else 0.0
    return InceptionScoreResult(
        per_batch_scores=scores, mean=mean, sd=sd, n_images=n, oracle=oracle.descriptor
    )
