"""Generator/critic pairs as first-class, checkpointable values.

The forward operations below accept either torch tensors (returned as
tensors, differentiable, used inside training) or numpy/ImageBatch inputs
(returned as validated ImageBatch values for downstream consumers).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import torch

from ..data.images import IMAGE_SIZE, ImageBatch
from ..data.schema import LabelSchema
from ..errors import ShapeMismatch
from . import nets
from .nets import ACGAN, STAGE1, STAGE2, CriticOutput


@dataclass(frozen=True)
class NoiseSpec:
    """Latent input: per-coordinate uniform on [-1, 1]."""

    dim: int = 100

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("noise dim must be positive")


def sample_noise(
    n: int,
    spec: NoiseSpec,
    seed_state: torch.Generator,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """(n, dim) i.i.d. uniform [-1, 1] noise, deterministic per generator state."""
    if n < 1:
        raise ValueError("need n >= 1")
    return torch.rand(n, spec.dim, generator=seed_state, dtype=dtype) * 2.0 - 1.0


@dataclass
class GanBundle:
    """One generator/critic pair plus the metadata needed to rebuild it."""

    stage_tag: str
    generator: torch.nn.Module
    critic: torch.nn.Module
    arch: dict
    schema: LabelSchema = field(repr=False)

    @property
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.arch["noise_dim"])

    def generator_state(self) -> dict[str, np.ndarray]:
        return nets.state_to_arrays(self.generator, "generator.")

    def critic_state(self) -> dict[str, np.ndarray]:
        return nets.state_to_arrays(self.critic, "critic.")

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {**self.generator_state(), **self.critic_state()}

    def clone(self) -> "GanBundle":
        return GanBundle(
            stage_tag=self.stage_tag,
            generator=copy.deepcopy(self.generator),
            critic=copy.deepcopy(self.critic),
            arch=copy.deepcopy(self.arch),
            schema=self.schema,
        )

    def to_dtype(self, dtype: torch.dtype) -> "GanBundle":
        clone = self.clone()
        clone.generator.to(dtype)
        clone.critic.to(dtype)
        return clone


def build_bundle(
    stage_tag: str,
    schema: LabelSchema,
    noise_dim: int = 100,
    base_width: int = 64,
    seed: int = 0,
) -> GanBundle:
    generator, critic, arch = nets.build_networks(stage_tag, schema, noise_dim, base_width, seed)
    return GanBundle(stage_tag=stage_tag, generator=generator, critic=critic, arch=arch, schema=schema)


def rebuild_bundle(arch: dict) -> GanBundle:
    generator, critic = nets.rebuild_networks(arch)
    return GanBundle(
        stage_tag=arch["stage_tag"],
        generator=generator,
        critic=critic,
        arch=arch,
        schema=LabelSchema.from_dict(arch["schema"]),
    )


ArrayLike = Union[np.ndarray, torch.Tensor]


def _as_tensor(x: ArrayLike, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.from_numpy(np.asarray(x)).to(dtype)


def _model_dtype(module: torch.nn.Module) -> torch.dtype:
    return next(module.parameters()).dtype


def generator1_forward(bundle: GanBundle, z: ArrayLike, general: ArrayLike):
    """Stage-1 (or baseline) generator pass: noise + general labels -> images.

    Torch inputs stay torch (differentiable); numpy inputs come back as a
    validated ImageBatch.
    """
    if bundle.stage_tag not in (STAGE1, ACGAN):
        raise ValueError(f"generator1_forward needs a stage1/acgan bundle, got {bundle.stage_tag}")
    torch_mode = isinstance(z, torch.Tensor)
    dtype = _model_dtype(bundle.generator)
    zt = _as_tensor(z, dtype)
    gt = _as_tensor(general, torch.int64)
    cond = nets.general_to_onehot(gt, bundle.schema)
    out = bundle.generator(zt, cond)
    if torch_mode:
        return out
    with torch.no_grad():
        return ImageBatch(out.detach().cpu().to(torch.float32).numpy())


def acgan_generator_forward(bundle: GanBundle, z: ArrayLike, general: ArrayLike, detailed: ArrayLike):
    """Baseline generator pass conditioned on general and detailed labels jointly."""
    if bundle.stage_tag != ACGAN:
        raise ValueError(f"need an acgan bundle, got {bundle.stage_tag}")
    torch_mode = isinstance(z, torch.Tensor)
    dtype = _model_dtype(bundle.generator)
    zt = _as_tensor(z, dtype)
    gt = _as_tensor(general, torch.int64)
    dt = _as_tensor(detailed, dtype)
    cond = torch.cat([nets.general_to_onehot(gt, bundle.schema).to(dtype), dt], dim=1)
    if zt.shape[0] != cond.shape[0]:
        raise ShapeMismatch(f"batch axes disagree: z {zt.shape[0]} vs labels {cond.shape[0]}")
    out = bundle.generator(zt, cond)
    if torch_mode:
        return out
    with torch.no_grad():
        return ImageBatch(out.detach().cpu().to(torch.float32).numpy())


def generator2_forward(bundle: GanBundle, base_images: Union[ImageBatch, torch.Tensor], detailed: ArrayLike):
    """Stage-2 generator pass: base images + detailed labels -> refined images."""
    if bundle.stage_tag != STAGE2:
        raise ValueError(f"generator2_forward needs a stage2 bundle, got {bundle.stage_tag}")
    torch_mode = isinstance(base_images, torch.Tensor)
    dtype = _model_dtype(bundle.generator)
    xt = base_images if torch_mode else torch.from_numpy(base_images.data).to(dtype)
    dt = _as_tensor(detailed, dtype)
    out = bundle.generator(xt, dt)
    if torch_mode:
        return out
    with torch.no_grad():
        return ImageBatch(out.detach().cpu().to(torch.float32).numpy())


def critic_forward(
    bundle: GanBundle,
    images: Union[ImageBatch, torch.Tensor],
    which_heads: Optional[list[str]] = None,
):
    """Critic pass: per-image Wasserstein score plus selected class logits.

    Scores carry no squashing; logits are unnormalized. Numpy mode returns
    (scores array, dict of logit arrays).
    """
    torch_mode = isinstance(images, torch.Tensor)
    dtype = _model_dtype(bundle.critic)
    xt = images if torch_mode else torch.from_numpy(images.data).to(dtype)
    if xt.shape[-2:] != (IMAGE_SIZE, IMAGE_SIZE) or xt.shape[1] != 1:
        raise ShapeMismatch(f"critic expects (n, 1, {IMAGE_SIZE}, {IMAGE_SIZE}), got {tuple(xt.shape)}")
    out: CriticOutput = bundle.critic(xt)
    logits = out.class_logits
    if which_heads is not None:
        unknown = set(which_heads) - set(logits)
        if unknown:
            raise KeyError(f"unknown critic heads {sorted(unknown)}; available: {sorted(logits)}")
        logits = {k: v for k, v in logits.items() if k in which_heads}
    if torch_mode:
        return CriticOutput(out.scores, logits)
    with torch.no_grad():
        return (
            out.scores.detach().cpu().numpy(),
            {k: v.detach().cpu().numpy() for k, v in logits.items()},
        )


@dataclass(frozen=True)
class GeneratedBatch:
    """Sampled images together with the labels they were conditioned on."""

    images: ImageBatch
    general: np.ndarray
    detailed: np.ndarray


def sample_gdgan(
    bundle1: GanBundle,
    bundle2: GanBundle,
    n: int,
    general: ArrayLike,
    detailed: ArrayLike,
    seed_state: torch.Generator,
) -> GeneratedBatch:
    """Serial two-stage sampling: refine stage-1 output with detailed labels.

    Exactly the composition of the two generator passes; the requested labels
    ride along as metadata.
    """
    general = np.asarray(general)
    detailed = np.asarray(detailed)
    if general.shape[0] != n or detailed.shape[0] != n:
        raise ShapeMismatch(f"label batches must have length {n}")
    with torch.no_grad():
        z = sample_noise(n, bundle1.noise_spec, seed_state, dtype=_model_dtype(bundle1.generator))
        base = generator1_forward(bundle1, z, torch.from_numpy(general).long())
        out = generator2_forward(bundle2, base, torch.from_numpy(detailed))
        images = ImageBatch(out.detach().cpu().to(torch.float32).numpy())
    return GeneratedBatch(images=images, general=general, detailed=detailed)


def sample_acgan(
    bundle: GanBundle,
    n: int,
    general: ArrayLike,
    detailed: ArrayLike,
    seed_state: torch.Generator,
) -> GeneratedBatch:
    """Single-stage baseline sampling conditioned on both label groups."""
    general = np.asarray(general)
    detailed = np.asarray(detailed)
    if general.shape[0] != n or detailed.shape[0] != n:
        raise ShapeMismatch(f"label batches must have length {n}")
    with torch.no_grad():
        z = sample_noise(n, bundle.noise_spec, seed_state, dtype=_model_dtype(bundle.generator))
        out = acgan_generator_forward(bundle, z, torch.from_numpy(general).long(), torch.from_numpy(detailed))
        images = ImageBatch(out.detach().cpu().to(torch.float32).numpy())
    return GeneratedBatch(images=images, general=general, detailed=detailed)
