"""Label-probability oracles that back the batch diversity score.

An oracle maps an ImageBatch to per-image probability vectors over K
classes. Production full-scale scoring adapts a pretrained Inception v3;
desk-scale runs use a small CNN trained on the toy corpus's mark classes
(K = 5: the four marks plus "no mark").
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.images import IMAGE_SIZE, ImageBatch
from ..data.toy import render_toy_image
from ..errors import VersionMismatch
from ..rng import derive_int_seed, np_rng
from ..gan.checkpoint import read_checkpoint, write_checkpoint
from ..gan.nets import arrays_to_state, state_to_arrays

TOY_ORACLE_CLASSES = ("no_mark", "disc_mark", "square_mark", "ring_mark", "bar_mark")


@runtime_checkable
class LabelProbabilityOracle(Protocol):
    """Classifier interface: images -> (n, K) rows of probabilities summing to 1."""

    descriptor: str
    num_classes: int

    def predict_proba(self, images: ImageBatch) -> np.ndarray: ...


class _ToyOracleNet(nn.Module):
    def __init__(self, n_classes: int = 5, width: int = 16):
        super().__init__()
        self.width = width
        self.features = nn.Sequential(
            nn.Conv2d(1, width, 5, 2, 2), nn.ReLU(),
            nn.Conv2d(width, width * 2, 5, 2, 2), nn.ReLU(),
            nn.Conv2d(width * 2, width * 4, 3, 2, 1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(4), nn.Flatten(),
        )
        self.head = nn.Linear(width * 4 * 16, n_classes)

    def forward(self, x):
        return self.head(self.features(x))


class ToyMarkOracle:
    """CNN scoring the five toy mark classes; reproducible training recipe below."""

    def __init__(self, net: _ToyOracleNet, seed: int):
        self.net = net.eval()
        self.seed = seed
        self.num_classes = len(TOY_ORACLE_CLASSES)
        self.descriptor = f"toy-mark-cnn(seed={seed})"

    @torch.no_grad()
    def predict_proba(self, images: ImageBatch) -> np.ndarray:
        probs = []
        x = torch.from_numpy(images.data)
        for start in range(0, x.shape[0], 256):
            logits = self.net(x[start:start + 256])
            probs.append(F.softmax(logits, dim=1).numpy())
        return np.concatenate(probs, axis=0).astype(np.float64)

    def save(self, path: str | Path) -> Path:
        arch = {"kind": "toy_oracle", "width": self.net.width,
                "n_classes": self.num_classes, "seed": self.seed}
        return write_checkpoint(path, "toy_oracle", arch, state_to_arrays(self.net, "model."))

    @classmethod
    def load(cls, path: str | Path) -> "ToyMarkOracle":
        data = read_checkpoint(path, expected_stage="toy_oracle")
        if data.arch.get("kind") != "toy_oracle":
            raise VersionMismatch(f"{path}: not a toy oracle checkpoint")
        net = _ToyOracleNet(data.arch["n_classes"], data.arch["width"])
        arrays_to_state(net, data.params, "model.")
        return cls(net, data.arch["seed"])


def _render_single_mark(cls_index: int, rng: np.random.Generator) -> np.ndarray:
    general = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
    detailed = [0, 0, 0, 0]
    if cls_index > 0:
        detailed[cls_index - 1] = 1
    return render_toy_image(general, detailed, rng)


def train_toy_oracle(
    seed: int = 0,
    per_class: int = 240,
    epochs: int = 4,
    batch_size: int = 64,
    width: int = 16,
) -> ToyMarkOracle:
    """Train the toy oracle on freshly rendered single-mark images.

    Independent of any corpus or split: the renderer itself provides the
    supervision. Deterministic per seed.
    """
    render_rng = np_rng(seed, "toy_oracle", "render")
    n_classes = len(TOY_ORACLE_CLASSES)
    xs, ys = [], []
    for cls in range(n_classes):
        for _ in range(per_class):
            img = _render_single_mark(cls, render_rng).astype(np.float32) / 127.5 - 1.0
            xs.append(img)
            ys.append(cls)
    x = torch.from_numpy(np.stack(xs)[:, None, :, :])
    y = torch.tensor(ys)

    torch_gen = torch.Generator().manual_seed(derive_int_seed(seed, "toy_oracle", "init"))
    net = _ToyOracleNet(n_classes, width)
    for m in net.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, 0.05, generator=torch_gen)
            nn.init.zeros_(m.bias)

    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    order_rng = np_rng(seed, "toy_oracle", "batches")
    net.train()
    for _ in range(epochs):
        order = order_rng.permutation(x.shape[0])
        for start in range(0, x.shape[0] - batch_size + 1, batch_size):
            idx = order[start:start + batch_size]
            loss = F.cross_entropy(net(x[idx]), y[idx])
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
    return ToyMarkOracle(net.eval(), seed)


class InceptionV3Oracle:
    """Adapter for scoring grayscale 64x64 batches with a pretrained Inception v3.

    Inputs are bilinearly upsampled to the backbone's native 299x299, the
    channel replicated 3x, and normalized with the backbone's training
    statistics. Needs torchvision and its pretrained weights; intended for
    full-scale runs, not the desk-scale suite.
    """

    INPUT_SIZE = 299
    _MEAN = (0.485, 0.456, 0.406)
    _STD = (0.229, 0.224, 0.225)

    def __init__(self, backbone: nn.Module | None = None, batch_size: int = 64):
        if backbone is None:
            from torchvision.models import Inception_V3_Weights, inception_v3

            backbone = inception_v3(weights=Inception_V3_Weights.IMAGENET1K_V1)
        self.backbone = backbone.eval()
        self.batch_size = batch_size
        self.num_classes = 1000
        self.descriptor = "inception-v3-imagenet"

    def _prepare(self, data: np.ndarray) -> torch.Tensor:
        x = torch.from_numpy(data)
        x = F.interpolate(x, size=self.INPUT_SIZE, mode="bilinear", align_corners=False)
        x = (x + 1.0) / 2.0  # [-1,1] -> [0,1]
        x = x.repeat(1, 3, 1, 1)
        mean = torch.tensor(self._MEAN).view(1, 3, 1, 1)
        std = torch.tensor(self._STD).view(1, 3, 1, 1)
        return (x - mean) / std

    @torch.no_grad()
    def predict_proba(self, images: ImageBatch) -> np.ndarray:
        probs = []
        for start in range(0, len(images), self.batch_size):
            x = self._prepare(images.data[start:start + self.batch_size])
            logits = self.backbone(x)
            probs.append(F.softmax(logits, dim=1).numpy())
        return np.concatenate(probs, axis=0).astype(np.float64)


class FixedProbabilityOracle:
    """Deterministic oracle returning precomputed rows; for tests and audits."""

    def __init__(self, fn, num_classes: int, descriptor: str = "fixed"):
        self._fn = fn
        self.num_classes = num_classes
        self.descriptor = descriptor

    def predict_proba(self, images: ImageBatch) -> np.ndarray:
        return np.asarray(self._fn(images), dtype=np.float64)
