"""Alternating critic/generator training with deterministic seeding.

Each stage trains independently: the first stage on general labels, the
second on detailed labels with the first stage frozen, and the baseline on
both groups jointly. All randomness (batch order, noise, interpolation
draws) is keyed off the config seed and the stage tag, so runs repeat
bit-for-bit and stages can be retrained in isolation.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
import torch

from ..data.images import ImageBatch, ImageStore
from ..data.schema import LabelRecord, LabelSchema
from ..errors import DivergenceDetected
from ..rng import derive_int_seed, np_rng
from . import losses
from .bundle import GanBundle, sample_noise
from .checkpoint import save_gan_checkpoint
from .nets import ACGAN, STAGE1, STAGE2, general_to_onehot


@dataclass
class TrainingData:
    """In-memory training arrays in batch-iterator form."""

    images: np.ndarray    # (n, 1, 64, 64) float32 in [-1, 1]
    general: np.ndarray   # (n, n_groups) int64
    detailed: np.ndarray  # (n, n_detailed) float32 multi-hot
    schema: LabelSchema

    def __post_init__(self):
        n = self.images.shape[0]
        if self.general.shape[0] != n or self.detailed.shape[0] != n:
            raise ValueError("image and label arrays disagree on batch axis")

    def __len__(self) -> int:
        return self.images.shape[0]

    @classmethod
    def from_records(
        cls, records: Sequence[LabelRecord], store: ImageStore, schema: LabelSchema
    ) -> "TrainingData":
        batch = store.load_batch([r.image_id for r in records])
        return cls(
            images=batch.data,
            general=np.array([r.general for r in records], dtype=np.int64),
            detailed=np.array([r.detailed for r in records], dtype=np.float32),
            schema=schema,
        )

    def batches(self, batch_size: int, rng: np.random.Generator) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Endless shuffled batches; reshuffles each epoch."""
        n = len(self)
        while True:
            order = rng.permutation(n)
            for start in range(0, n - batch_size + 1, batch_size):
                idx = order[start:start + batch_size]
                yield self.images[idx], self.general[idx], self.detailed[idx]


def _to_torch(images: np.ndarray, general: np.ndarray, detailed: np.ndarray, dtype: torch.dtype):
    return (
        torch.from_numpy(images).to(dtype),
        torch.from_numpy(general),
        torch.from_numpy(detailed).to(dtype),
    )


class TrainingLog:
    """Per-step loss records, optionally mirrored to an ndjson file."""

    def __init__(self, path: Optional[Path] = None):
        self.records: list[dict] = []
        self._fh = open(path, "w") if path else None

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self._fh:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def _check_finite(total: float, step: int, last_checkpoint) -> None:
    if not math.isfinite(total):
        raise DivergenceDetected(step, last_checkpoint)


def train_stage(
    bundle: GanBundle,
    data: TrainingData,
    config: losses.TrainConfig,
    *,
    frozen_stage1: Optional[GanBundle] = None,
    log_path: Optional[str | Path] = None,
    checkpoint_dir: Optional[str | Path] = None,
    step_callback: Optional[Callable[[int, str], None]] = None,
) -> tuple[GanBundle, list[dict]]:
    """Train one stage in place for ``config.total_generator_steps`` steps.

    Each generator step is preceded by ``config.n_critic`` critic steps on
    fresh batches. Critic steps never touch generator parameters and vice
    versa. Any non-finite loss aborts with DivergenceDetected carrying the
    last interval checkpoint, when checkpointing is on.

    ``step_callback(step, phase)`` fires after every optimizer step with
    phase "critic" or "generator".
    """
    stage = bundle.stage_tag
    if stage == STAGE2 and frozen_stage1 is None:
        raise ValueError("stage2 training needs the trained frozen stage1 bundle")
    if stage == ACGAN:
        return _train_acgan_loop(bundle, data, config, log_path, checkpoint_dir, step_callback)
    if stage not in (STAGE1, STAGE2):
        raise ValueError(f"unknown stage {stage!r}")

    dtype = next(bundle.generator.parameters()).dtype
    opt_c = torch.optim.Adam(
        bundle.critic.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    opt_g = torch.optim.Adam(
        bundle.generator.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    batch_rng = np_rng(config.seed, stage, "batches")
    noise_gen = torch.Generator().manual_seed(derive_int_seed(config.seed, stage, "noise"))
    gp_gen = torch.Generator().manual_seed(derive_int_seed(config.seed, stage, "gp"))
    batch_iter = data.batches(config.batch_size, batch_rng)

    if frozen_stage1 is not None:
        frozen_stage1.generator.requires_grad_(False)
        frozen_stage1.critic.requires_grad_(False)

    log = TrainingLog(Path(log_path) if log_path else None)
    last_ckpt = None
    t0 = time.monotonic()
    try:
        for step in range(config.total_generator_steps):
            for _ in range(config.n_critic):
                imgs, gen_lbl, det_lbl = _to_torch(*next(batch_iter), dtype)
                z = sample_noise(config.batch_size, bundle.noise_spec if stage == STAGE1 else frozen_stage1.noise_spec, noise_gen, dtype)
                with torch.no_grad():
                    if stage == STAGE1:
                        fake = bundle.generator(z, general_to_onehot(gen_lbl, bundle.schema))
                    else:
                        base = frozen_stage1.generator(z, general_to_onehot(gen_lbl, frozen_stage1.schema))
                        fake = bundle.generator(base, det_lbl)
                if stage == STAGE1:
                    total, breakdown = losses.stage1_critic_loss(
                        bundle, imgs, gen_lbl, fake, gen_lbl, config, gp_gen
                    )
                else:
                    total, breakdown = losses.stage2_critic_loss(
                        bundle, imgs, det_lbl, fake, det_lbl, config, gp_gen
                    )
                opt_c.zero_grad(set_to_none=True)
                total.backward()
                opt_c.step()
                _check_finite(breakdown.total, step, last_ckpt)
                log.append({"step": step, "phase": "critic", **breakdown.to_dict(),
                            "wall_time": time.monotonic() - t0})
                if step_callback is not None:
                    step_callback(step, "critic")

            imgs, gen_lbl, det_lbl = _to_torch(*next(batch_iter), dtype)
            z = sample_noise(config.batch_size, bundle.noise_spec if stage == STAGE1 else frozen_stage1.noise_spec, noise_gen, dtype)
            if stage == STAGE1:
                total, breakdown = losses.stage1_generator_loss(bundle, z, gen_lbl, config)
            else:
                with torch.no_grad():
                    base = frozen_stage1.generator(z, general_to_onehot(gen_lbl, frozen_stage1.schema))
                total, breakdown = losses.stage2_generator_loss(
                    bundle, frozen_stage1, base, det_lbl, gen_lbl, config
                )
            opt_g.zero_grad(set_to_none=True)
            opt_c.zero_grad(set_to_none=True)  # discard critic grads from the generator pass
            total.backward()
            opt_g.step()
            opt_c.zero_grad(set_to_none=True)
            _check_finite(breakdown.total, step, last_ckpt)
            log.append({"step": step, "phase": "generator", **breakdown.to_dict(),
                        "wall_time": time.monotonic() - t0})

            last_ckpt = _interval_checkpoint(bundle, config, step, checkpoint_dir, last_ckpt)
            if step_callback is not None:
                step_callback(step, "generator")
    finally:
        log.close()
    return bundle, log.records


def _train_acgan_loop(
    bundle: GanBundle,
    data: TrainingData,
    config: losses.TrainConfig,
    log_path,
    checkpoint_dir,
    step_callback,
) -> tuple[GanBundle, list[dict]]:
    dtype = next(bundle.generator.parameters()).dtype
    opt_d = torch.optim.Adam(
        bundle.critic.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    opt_g = torch.optim.Adam(
        bundle.generator.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    batch_rng = np_rng(config.seed, ACGAN, "batches")
    noise_gen = torch.Generator().manual_seed(derive_int_seed(config.seed, ACGAN, "noise"))
    batch_iter = data.batches(config.batch_size, batch_rng)

    def fake_from(gen_lbl, det_lbl):
        z = sample_noise(config.batch_size, bundle.noise_spec, noise_gen, dtype)
        cond = torch.cat(
            [general_to_onehot(gen_lbl, bundle.schema).to(dtype), det_lbl], dim=1
        )
        return z, bundle.generator(z, cond)

    log = TrainingLog(Path(log_path) if log_path else None)
    last_ckpt = None
    t0 = time.monotonic()
    try:
        for step in range(config.total_generator_steps):
            for _ in range(config.n_critic):
                imgs, gen_lbl, det_lbl = _to_torch(*next(batch_iter), dtype)
                with torch.no_grad():
                    _, fake = fake_from(gen_lbl, det_lbl)
                total, breakdown = losses.acgan_discriminator_loss(
                    bundle, imgs, gen_lbl, det_lbl, fake, gen_lbl, det_lbl, config
                )
                opt_d.zero_grad(set_to_none=True)
                total.backward()
                opt_d.step()
                _check_finite(breakdown.total, step, last_ckpt)
                log.append({"step": step, "phase": "critic", **breakdown.to_dict(),
                            "wall_time": time.monotonic() - t0})
                if step_callback is not None:
                    step_callback(step, "critic")

            imgs, gen_lbl, det_lbl = _to_torch(*next(batch_iter), dtype)
            z = sample_noise(config.batch_size, bundle.noise_spec, noise_gen, dtype)
            total, breakdown = losses.acgan_generator_loss(bundle, z, gen_lbl, det_lbl, config)
            opt_g.zero_grad(set_to_none=True)
            opt_d.zero_grad(set_to_none=True)
            total.backward()
            opt_g.step()
            opt_d.zero_grad(set_to_none=True)
            _check_finite(breakdown.total, step, last_ckpt)
            log.append({"step": step, "phase": "generator", **breakdown.to_dict(),
                        "wall_time": time.monotonic() - t0})

            last_ckpt = _interval_checkpoint(bundle, config, step, checkpoint_dir, last_ckpt)
            if step_callback is not None:
                step_callback(step, "generator")
    finally:
        log.close()
    return bundle, log.records


def train_acgan(
    bundle: GanBundle,
    data: TrainingData,
    config: losses.TrainConfig,
    **kwargs,
) -> tuple[GanBundle, list[dict]]:
    """Train the single-stage baseline; same contract as train_stage."""
    if bundle.stage_tag != ACGAN:
        raise ValueError(f"train_acgan needs an acgan bundle, got {bundle.stage_tag}")
    return train_stage(bundle, data, config, **kwargs)


def _interval_checkpoint(bundle, config, step, checkpoint_dir, last_ckpt):
    if config.checkpoint_every > 0 and checkpoint_dir is not None:
        if (step + 1) % config.checkpoint_every == 0:
            path = Path(checkpoint_dir) / f"{bundle.stage_tag}_step{step + 1:07d}.ckpt"
            save_gan_checkpoint(bundle, path, config_hash="")
            return path
    return last_ckpt


def generated_batch_iterator(
    sample_fn: Callable[[int], ImageBatch], total: int, chunk: int = 256
) -> Iterator[ImageBatch]:
    """Yield ``total`` generated images in chunks; helper for scoring pipelines."""
    done = 0
    while done < total:
        take = min(chunk, total - done)
        yield sample_fn(take)
        done += take
