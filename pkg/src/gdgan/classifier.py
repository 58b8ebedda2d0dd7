"""Multi-label disease classifier: VGG-19 layout adapted to 1-channel 64x64.

The 16-conv/5-pool VGG-19 stack is kept; the first conv takes one channel,
the dense head is sized for the 2x2 feature maps a 64x64 input leaves, and
a width multiplier scales every layer so desk-scale corpora can train in
seconds. One sigmoid output per detailed label, binary cross-entropy per
label, model selection by best validation mean AUC.
"""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data.images import IMAGE_SIZE, ImageBatch, ImageStore
from .data.schema import LabelRecord, LabelSchema
from .errors import DivergenceDetected, SingleClass, VersionMismatch
from .gan.checkpoint import read_checkpoint, write_checkpoint
from .gan.nets import arrays_to_state, describe_layers, state_to_arrays
from .metrics.roc import ROCCurve, roc_curve
from .rng import derive_int_seed, np_rng

VGG19_CONV_PLAN = (64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
                   512, 512, 512, 512, "M", 512, 512, 512, 512, "M")

CLASSIFIER_TAG = "classifier"


@dataclass(frozen=True)
class ClassifierConfig:
    learning_rate: float = 2e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    batch_size: int = 64
    epochs: int = 10
    width_multiplier: float = 1.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        return cls(**d)


def _scaled(channels: int, multiplier: float) -> int:
    return max(8, int(round(channels * multiplier)))


class Vgg19Classifier(nn.Module):
    def __init__(self, n_labels: int, width_multiplier: float = 1.0):
        super().__init__()
        self.n_labels = n_labels
        self.width_multiplier = width_multiplier
        layers: list[nn.Module] = []
        in_ch = 1
        for v in VGG19_CONV_PLAN:
            if v == "M":
                layers.append(nn.MaxPool2d(2))
            else:
                out_ch = _scaled(int(v), width_multiplier)
                layers += [nn.Conv2d(in_ch, out_ch, 3, padding=1), nn.ReLU(inplace=True)]
                in_ch = out_ch
        self.features = nn.Sequential(*layers)
        dense = _scaled(512, width_multiplier)
        feat = in_ch * (IMAGE_SIZE // 32) ** 2  # five pools: 64 -> 2
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(feat, dense), nn.ReLU(inplace=True),
            nn.Linear(dense, dense), nn.ReLU(inplace=True),
            nn.Linear(dense, n_labels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


@dataclass
class ClassifierBundle:
    model: Vgg19Classifier
    schema: LabelSchema = field(repr=False)
    config: ClassifierConfig
    arch: dict

    def state_arrays(self) -> dict[str, np.ndarray]:
        return state_to_arrays(self.model, "model.")

    @torch.no_grad()
    def predict_logits(self, images: ImageBatch, batch_size: int = 256) -> np.ndarray:
        self.model.eval()
        x = torch.from_numpy(images.data)
        out = [self.model(x[s:s + batch_size]).numpy() for s in range(0, x.shape[0], batch_size)]
        return np.concatenate(out, axis=0)

    def save(self, path: str | Path, config_hash: str = "") -> Path:
        return write_checkpoint(path, CLASSIFIER_TAG, self.arch, self.state_arrays(), config_hash)

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierBundle":
        data = read_checkpoint(path, expected_stage=CLASSIFIER_TAG)
        if data.arch.get("kind") != "vgg19_classifier":
            raise VersionMismatch(f"{path}: not a classifier checkpoint")
        schema = LabelSchema.from_dict(data.arch["schema"])
        config = ClassifierConfig.from_dict(data.arch["config"])
        model = Vgg19Classifier(schema.n_detailed, config.width_multiplier)
        arrays_to_state(model, data.params, "model.")
        return cls(model=model, schema=schema, config=config, arch=data.arch)


def build_classifier(schema: LabelSchema, config: ClassifierConfig) -> ClassifierBundle:
    model = Vgg19Classifier(schema.n_detailed, config.width_multiplier)
    gen = torch.Generator().manual_seed(derive_int_seed(config.seed, CLASSIFIER_TAG, "init"))
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            fan_in = m.weight.shape[1] * (m.weight[0, 0].numel() if m.weight.ndim == 4 else 1)
            nn.init.normal_(m.weight, 0.0, math.sqrt(2.0 / fan_in), generator=gen)
            nn.init.zeros_(m.bias)
    arch = {
        "kind": "vgg19_classifier",
        "image_size": IMAGE_SIZE,
        "schema": schema.to_dict(),
        "config": config.to_dict(),
        "layers": describe_layers(model),
    }
    return ClassifierBundle(model=model, schema=schema, config=config, arch=arch)


def _labels_array(records: Sequence[LabelRecord]) -> np.ndarray:
    return np.array([r.detailed for r in records], dtype=np.float32)


def mean_auc(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean AUC across labels that have both classes present; 0.5 if none do."""
    aucs = []
    for j in range(targets.shape[1]):
        col = targets[:, j]
        if 0 < col.sum() < col.size:
            aucs.append(roc_curve(logits[:, j], col).auc)
    return float(np.mean(aucs)) if aucs else 0.5


def train_classifier(
    train_records: Sequence[LabelRecord],
    train_store: ImageStore,
    val_records: Sequence[LabelRecord],
    val_store: ImageStore,
    schema: LabelSchema,
    config: ClassifierConfig,
    log_path: Optional[str | Path] = None,
) -> tuple[ClassifierBundle, list[dict]]:
    """Train on the (augmented) train set, select the best-validation epoch.

    Returns the bundle carrying the selected epoch's parameters plus a
    per-epoch history of train loss and validation mean AUC. Zero epochs
    return the initialized bundle and an empty history.
    """
    train_ids = {r.image_id for r in train_records}
    if train_ids & {r.image_id for r in val_records}:
        raise ValueError("train and validation sets overlap")

    bundle = build_classifier(schema, config)
    if config.epochs == 0:
        return bundle, []

    x_train = torch.from_numpy(train_store.load_batch([r.image_id for r in train_records]).data)
    y_train = torch.from_numpy(_labels_array(train_records))
    val_images = val_store.load_batch([r.image_id for r in val_records])
    y_val = _labels_array(val_records)

    opt = torch.optim.Adam(
        bundle.model.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    order_rng = np_rng(config.seed, CLASSIFIER_TAG, "batches")
    history: list[dict] = []
    best_auc = -1.0
    best_state = None
    t0 = time.monotonic()
    for epoch in range(config.epochs):
        bundle.model.train()
        epoch_losses = []
        order = order_rng.permutation(x_train.shape[0])
        for start in range(0, x_train.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            logits = bundle.model(x_train[idx])
            loss = F.binary_cross_entropy_with_logits(logits, y_train[idx], reduction="none").sum(1).mean()
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            val = float(loss.detach())
            if not math.isfinite(val):
                raise DivergenceDetected(epoch)
            epoch_losses.append(val)

        val_logits = bundle.predict_logits(val_images)
        val_auc = mean_auc(val_logits, y_val)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "val_mean_auc": val_auc,
            "wall_time": time.monotonic() - t0,
        })
        if val_auc > best_auc:
            best_auc = val_auc
            best_state = copy.deepcopy(bundle.model.state_dict())

    if best_state is not None:
        bundle.model.load_state_dict(best_state)
    if log_path:
        import json

        with open(log_path, "w") as fh:
            for rec in history:
                fh.write(json.dumps(rec) + "\n")
    return bundle, history


def evaluate_classifier(
    bundle: ClassifierBundle,
    test_records: Sequence[LabelRecord],
    test_store: ImageStore,
    focus_label: str,
    expected_test_hash: Optional[str] = None,
) -> tuple[dict[str, ROCCurve], float]:
    """Per-label ROC curves on the untouched test set, plus the focus AUC.

    When ``expected_test_hash`` is given the test id set is verified against
    it first, so an augmented or tampered split cannot slip in. Labels with a
    single class present are skipped; a missing focus label raises SingleClass.
    """
    if expected_test_hash is not None:
        import hashlib

        ids = sorted(r.image_id for r in test_records)
        got = hashlib.sha256("\n".join(ids).encode()).hexdigest()
        if got != expected_test_hash:
            raise ValueError(f"test id set hash {got[:12]}... != expected {expected_test_hash[:12]}...")

    images = test_store.load_batch([r.image_id for r in test_records])
    logits = bundle.predict_logits(images)
    targets = _labels_array(test_records)
    curves: dict[str, ROCCurve] = {}
    for j, name in enumerate(bundle.schema.detailed_labels):
        col = targets[:, j]
        if 0 < col.sum() < col.size:
            curves[name] = roc_curve(logits[:, j], col)
    if focus_label not in curves:
        raise SingleClass(focus_label)
    return curves, curves[focus_label].auc
