"""Two-stage conditional GAN augmentation pipeline for imbalanced image corpora.

The library splits into:

- ``gdgan.data``: manifests, splits, preprocessing, the procedural toy corpus
- ``gdgan.gan``: both generative stages, the single-stage baseline, losses,
  training loops, checkpoints
- ``gdgan.augment``: the five training regimes as explicit countable plans
- ``gdgan.metrics``: inception score, Welch's t-test, ROC/AUC, oracles
- ``gdgan.classifier``: the downstream multi-label VGG-19-style classifier
- ``gdgan.harness``: experiment orchestration, resumable artifacts, reports
"""

from . import augment, classifier, data, errors, gan, harness, metrics

__version__ = "0.1.0"

__all__ = ["augment", "classifier", "data", "errors", "gan", "harness", "metrics", "__version__"]
