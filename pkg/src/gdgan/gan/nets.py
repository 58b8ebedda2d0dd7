"""Network definitions for both generative stages and the single-stage baseline.

All nets work on 1-channel 64x64 images. Critics use layer normalization
(GroupNorm with one group) instead of batch statistics so every output is a
per-sample function of its own input; generators use the same normalization,
which keeps forward passes independent of batch composition and identical in
train and eval mode.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch
import torch.nn as nn

from ..data.images import IMAGE_SIZE
from ..data.schema import LabelSchema
from ..errors import ShapeMismatch
from ..rng import derive_int_seed

STAGE1 = "stage1"
STAGE2 = "stage2"
ACGAN = "acgan"


class CriticOutput(NamedTuple):
    scores: torch.Tensor              # (n,) unbounded scalar per image
    class_logits: dict[str, torch.Tensor]  # head name -> (n, k) unnormalized logits


def _layer_norm(channels: int) -> nn.GroupNorm:
    # one group == layer norm over (C, H, W), per-sample
    return nn.GroupNorm(1, channels)


def general_to_onehot(general: torch.Tensor, schema: LabelSchema) -> torch.Tensor:
    """(n, n_groups) integer labels -> concatenated one-hot (n, sum of cardinalities)."""
    if general.ndim != 2 or general.shape[1] != len(schema.general_labels):
        raise ShapeMismatch(f"general labels shape {tuple(general.shape)} vs {len(schema.general_labels)} groups")
    parts = []
    for i, g in enumerate(schema.general_labels):
        parts.append(torch.nn.functional.one_hot(general[:, i].long(), g.cardinality))
    return torch.cat(parts, dim=1)


def labels_to_channels(labels: torch.Tensor, size: int = IMAGE_SIZE) -> torch.Tensor:
    """(n, k) label vector -> (n, k, size, size) broadcast constant channels."""
    return labels[:, :, None, None].expand(-1, -1, size, size).to(memory_format=torch.contiguous_format).clone()


class Stage1Generator(nn.Module):
    """Noise + general-label one-hots -> image; project/reshape then 4 stride-2 up-convs."""

    def __init__(self, noise_dim: int, cond_dim: int, base_width: int):
        super().__init__()
        self.noise_dim = noise_dim
        self.cond_dim = cond_dim
        self.base_width = base_width
        b = base_width
        self.project = nn.Linear(noise_dim + cond_dim, b * 8 * 4 * 4)
        self.up = nn.Sequential(
            _layer_norm(b * 8), nn.ReLU(),
            nn.ConvTranspose2d(b * 8, b * 4, 4, 2, 1), _layer_norm(b * 4), nn.ReLU(),
            nn.ConvTranspose2d(b * 4, b * 2, 4, 2, 1), _layer_norm(b * 2), nn.ReLU(),
            nn.ConvTranspose2d(b * 2, b, 4, 2, 1), _layer_norm(b), nn.ReLU(),
            nn.ConvTranspose2d(b, 1, 4, 2, 1), nn.Tanh(),
        )

    def forward(self, z: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if z.shape[0] != cond.shape[0]:
            raise ShapeMismatch(f"batch axes disagree: z {z.shape[0]} vs labels {cond.shape[0]}")
        h = self.project(torch.cat([z, cond.to(z.dtype)], dim=1))
        return self.up(h.view(-1, self.base_width * 8, 4, 4))


class Stage2Generator(nn.Module):
    """Image + detailed-label channels -> image; 3-level encoder-decoder with skips."""

    def __init__(self, n_detailed: int, base_width: int):
        super().__init__()
        self.n_detailed = n_detailed
        self.base_width = base_width
        b = base_width
        self.enc1 = nn.Sequential(nn.Conv2d(1 + n_detailed, b, 4, 2, 1), _layer_norm(b), nn.LeakyReLU(0.2))
        self.enc2 = nn.Sequential(nn.Conv2d(b, b * 2, 4, 2, 1), _layer_norm(b * 2), nn.LeakyReLU(0.2))
        self.enc3 = nn.Sequential(nn.Conv2d(b * 2, b * 4, 4, 2, 1), _layer_norm(b * 4), nn.LeakyReLU(0.2))
        self.mid = nn.Sequential(nn.Conv2d(b * 4, b * 4, 3, 1, 1), _layer_norm(b * 4), nn.ReLU())
        self.dec3 = nn.Sequential(nn.ConvTranspose2d(b * 4, b * 2, 4, 2, 1), _layer_norm(b * 2), nn.ReLU())
        self.dec2 = nn.Sequential(nn.ConvTranspose2d(b * 4, b, 4, 2, 1), _layer_norm(b), nn.ReLU())
        self.dec1 = nn.Sequential(nn.ConvTranspose2d(b * 2, 1, 4, 2, 1), nn.Tanh())

    def forward(self, images: torch.Tensor, detailed: torch.Tensor) -> torch.Tensor:
        if images.shape[0] != detailed.shape[0]:
            raise ShapeMismatch(f"batch axes disagree: images {images.shape[0]} vs labels {detailed.shape[0]}")
        if detailed.shape[1] != self.n_detailed:
            raise ShapeMismatch(f"expected {self.n_detailed} detailed labels, got {detailed.shape[1]}")
        x = torch.cat([images, labels_to_channels(detailed.to(images.dtype), images.shape[-1])], dim=1)
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        h = self.mid(e3)
        h = self.dec3(h)
        h = self.dec2(torch.cat([h, e2], dim=1))
        return self.dec1(torch.cat([h, e1], dim=1))


class ACGANGenerator(Stage1Generator):
    """Same trunk as the stage-1 generator, conditioned on general + detailed jointly."""


class Critic(nn.Module):
    """Shared conv trunk with one scalar score head plus named classification heads.

    ``heads`` maps head name -> logit width. The scalar (Wasserstein) head is
    always present and unnamed.
    """

    def __init__(self, heads: dict[str, int], base_width: int, in_channels: int = 1):
        super().__init__()
        b = base_width
        self.base_width = base_width
        self.trunk = nn.Sequential(
            nn.Conv2d(in_channels, b, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(b, b * 2, 4, 2, 1), _layer_norm(b * 2), nn.LeakyReLU(0.2),
            nn.Conv2d(b * 2, b * 4, 4, 2, 1), _layer_norm(b * 4), nn.LeakyReLU(0.2),
            nn.Conv2d(b * 4, b * 8, 4, 2, 1), _layer_norm(b * 8), nn.LeakyReLU(0.2),
            nn.Flatten(),
        )
        feat = b * 8 * 4 * 4
        self.score_head = nn.Linear(feat, 1)
        self.class_heads = nn.ModuleDict({name: nn.Linear(feat, k) for name, k in heads.items()})

    def forward(self, images: torch.Tensor) -> CriticOutput:
        h = self.trunk(images)
        scores = self.score_head(h).squeeze(1)
        return CriticOutput(scores, {name: head(h) for name, head in self.class_heads.items()})


def _init_weights(module: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, 0.02, generator=gen)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.GroupNorm):
            nn.init.normal_(m.weight, 1.0, 0.02, generator=gen)
            nn.init.zeros_(m.bias)


def _conv_entry(m: nn.Module, norm: str, act: str) -> dict:
    return {
        "kind": type(m).__name__,
        "in_channels": m.in_channels if hasattr(m, "in_channels") else m.in_features,
        "out_channels": m.out_channels if hasattr(m, "out_channels") else m.out_features,
        "kernel": list(m.kernel_size) if hasattr(m, "kernel_size") else None,
        "stride": list(m.stride) if hasattr(m, "stride") else None,
        "normalization": norm,
        "activation": act,
    }


def describe_layers(module: nn.Module) -> list[dict]:
    """Flat (kind, channels, kernel, stride, normalization, activation) list."""
    entries = []
    pending = None
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            if pending is not None:
                entries.append(pending)
            pending = _conv_entry(m, "none", "none")
        elif isinstance(m, nn.GroupNorm) and pending is not None:
            pending["normalization"] = "layer_norm"
        elif isinstance(m, nn.ReLU) and pending is not None:
            pending["activation"] = "relu"
        elif isinstance(m, nn.LeakyReLU) and pending is not None:
            pending["activation"] = f"leaky_relu({m.negative_slope})"
        elif isinstance(m, nn.Tanh) and pending is not None:
            pending["activation"] = "tanh"
    if pending is not None:
        entries.append(pending)
    return entries


def critic_head_spec(stage_tag: str, schema: LabelSchema) -> dict[str, int]:
    if stage_tag == STAGE1:
        return {g.name: g.cardinality for g in schema.general_labels}
    if stage_tag == STAGE2:
        return {"detailed": schema.n_detailed}
    if stage_tag == ACGAN:
        heads = {g.name: g.cardinality for g in schema.general_labels}
        heads["detailed"] = schema.n_detailed
        heads["real_fake"] = 1
        return heads
    raise ValueError(f"unknown stage tag {stage_tag!r}")


def build_generator(stage_tag: str, schema: LabelSchema, noise_dim: int, base_width: int) -> nn.Module:
    if stage_tag == STAGE1:
        return Stage1Generator(noise_dim, schema.general_onehot_dim, base_width)
    if stage_tag == STAGE2:
        return Stage2Generator(schema.n_detailed, base_width)
    if stage_tag == ACGAN:
        return ACGANGenerator(noise_dim, schema.general_onehot_dim + schema.n_detailed, base_width)
    raise ValueError(f"unknown stage tag {stage_tag!r}")


def build_networks(
    stage_tag: str,
    schema: LabelSchema,
    noise_dim: int = 100,
    base_width: int = 64,
    seed: int = 0,
) -> tuple[nn.Module, nn.Module, dict]:
    """Construct (generator, critic, arch descriptor) for one stage.

    The descriptor is sufficient to rebuild identical module shapes; weights
    are initialized DCGAN-style from ``seed``.
    """
    generator = build_generator(stage_tag, schema, noise_dim, base_width)
    critic = Critic(critic_head_spec(stage_tag, schema), base_width)
    _init_weights(generator, derive_int_seed(seed, stage_tag, "generator_init"))
    _init_weights(critic, derive_int_seed(seed, stage_tag, "critic_init"))
    arch = {
        "kind": "gan_bundle",
        "stage_tag": stage_tag,
        "image_size": IMAGE_SIZE,
        "noise_dim": noise_dim,
        "base_width": base_width,
        "schema": schema.to_dict(),
        "generator_layers": describe_layers(generator),
        "critic_layers": describe_layers(critic),
    }
    return generator, critic, arch


def rebuild_networks(arch: dict) -> tuple[nn.Module, nn.Module]:
    """Reconstruct module shapes from a stored arch descriptor."""
    schema = LabelSchema.from_dict(arch["schema"])
    stage_tag = arch["stage_tag"]
    generator = build_generator(stage_tag, schema, arch["noise_dim"], arch["base_width"])
    critic = Critic(critic_head_spec(stage_tag, schema), arch["base_width"])
    return generator, critic


def state_to_arrays(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for name, tensor in module.state_dict().items():
        arr = tensor.detach().cpu().numpy()
        if arr.dtype != np.float32:
            raise TypeError(f"{prefix}{name}: checkpoint container only carries float32, got {arr.dtype}")
        out[prefix + name] = arr
    return out


def arrays_to_state(module: nn.Module, arrays: dict[str, np.ndarray], prefix: str) -> None:
    state = {}
    for name in module.state_dict():
        key = prefix + name
        if key not in arrays:
            raise KeyError(f"checkpoint missing parameter {key}")
        state[name] = torch.from_numpy(np.ascontiguousarray(arrays[key]))
    module.load_state_dict(state)
