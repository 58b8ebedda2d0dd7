"""Loss composition for both stages and the single-stage baseline.

Critic losses follow the gradient-penalty Wasserstein formulation with an
auxiliary class log-likelihood term; the stage-2 generator additionally
pays a reconstruction MSE against its input and a general-class NLL judged
by the frozen stage-1 critic. Every loss reports its raw components next
to the weighted total so the composition can be audited.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import torch
import torch.nn.functional as F

from ..data.schema import LabelSchema
from ..errors import ShapeMismatch
from .bundle import GanBundle
from .nets import CriticOutput, general_to_onehot


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters; weights multiply the raw loss components."""

    learning_rate: float = 2e-4
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    batch_size: int = 64
    n_critic: int = 5
    lambda_gp: float = 10.0
    w_cls_general: float = 1.0
    w_cls_detailed: float = 1.0
    w_mse: float = 10.0
    total_generator_steps: int = 1000
    seed: int = 0
    checkpoint_every: int = 0
    aux_nll_on_fake: bool = True  # apply the critic's class NLL to generated samples too

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.n_critic < 1:
            raise ValueError("n_critic must be >= 1")
        for name in ("lambda_gp", "w_cls_general", "w_cls_detailed", "w_mse"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True)
class LossBreakdown:
    """Raw loss components plus the weighted total actually optimized.

    total = wasserstein_term + lambda_gp * gradient_penalty_term
          + w_cls_general * general_class_nll
          + w_cls_detailed * detailed_class_nll
          + w_mse * reconstruction_mse

    For the single-stage baseline the adversarial binary cross-entropy is
    reported in ``wasserstein_term`` (weight 1); the identity above still
    holds.
    """

    wasserstein_term: float = 0.0
    gradient_penalty_term: float = 0.0
    general_class_nll: float = 0.0
    detailed_class_nll: float = 0.0
    reconstruction_mse: float = 0.0
    total: float = 0.0

    def weighted_sum(self, config: TrainConfig) -> float:
        return (
            self.wasserstein_term
            + config.lambda_gp * self.gradient_penalty_term
            + config.w_cls_general * self.general_class_nll
            + config.w_cls_detailed * self.detailed_class_nll
            + config.w_mse * self.reconstruction_mse
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _f(x) -> float:
    return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)


def general_class_nll(
    logits: dict[str, torch.Tensor], general: torch.Tensor, schema: LabelSchema
) -> torch.Tensor:
    """Mean negative log-likelihood of the correct general classes, summed over label groups."""
    if general.shape[1] != len(schema.general_labels):
        raise ShapeMismatch(f"{general.shape[1]} general columns vs {len(schema.general_labels)} groups")
    total = None
    for i, g in enumerate(schema.general_labels):
        nll = F.cross_entropy(logits[g.name], general[:, i].long())
        total = nll if total is None else total + nll
    return total


def detailed_class_nll(logits: torch.Tensor, detailed: torch.Tensor) -> torch.Tensor:
    """Mean NLL of the multi-hot detailed vector under independent Bernoulli heads."""
    if logits.shape != detailed.shape:
        raise ShapeMismatch(f"detailed logits {tuple(logits.shape)} vs targets {tuple(detailed.shape)}")
    per_label = F.binary_cross_entropy_with_logits(logits, detailed.to(logits.dtype), reduction="none")
    return per_label.sum(dim=1).mean()


def _critic_scores(critic, images: torch.Tensor) -> torch.Tensor:
    out = critic(images)
    if isinstance(out, CriticOutput):
        return out.scores
    if isinstance(out, tuple):
        return out[0]
    return out.reshape(out.shape[0], -1).squeeze(1) if out.ndim > 1 else out


def gradient_penalty(
    critic,
    real: torch.Tensor,
    fake: torch.Tensor,
    seed_state: torch.Generator,
) -> torch.Tensor:
    """Mean squared deviation of interpolate gradient norms from 1.

    Interpolates are eps*real + (1-eps)*fake with eps ~ U[0,1] drawn per
    sample; the result is non-negative and differentiable w.r.t. the
    critic's parameters.
    """
    critic_fn = critic.critic if isinstance(critic, GanBundle) else critic
    if real.shape != fake.shape:
        raise ShapeMismatch(f"real {tuple(real.shape)} vs fake {tuple(fake.shape)}")
    n = real.shape[0]
    eps = torch.rand(n, 1, 1, 1, generator=seed_state, dtype=real.dtype)
    interp = (eps * real.detach() + (1.0 - eps) * fake.detach()).requires_grad_(True)
    scores = _critic_scores(critic_fn, interp)
    if not scores.requires_grad:
        # critic ignores its input: gradient is identically zero
        return torch.ones((), dtype=real.dtype) * ((0.0 - 1.0) ** 2)
    grads = torch.autograd.grad(
        outputs=scores.sum(), inputs=interp, create_graph=True, retain_graph=True,
        allow_unused=True,
    )[0]
    if grads is None:
        grads = torch.zeros_like(interp)
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def interpolate_gradients(
    critic, real: torch.Tensor, fake: torch.Tensor, seed_state: torch.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """(interpolates, per-sample input gradients) behind the penalty, for auditing."""
    critic_fn = critic.critic if isinstance(critic, GanBundle) else critic
    n = real.shape[0]
    eps = torch.rand(n, 1, 1, 1, generator=seed_state, dtype=real.dtype)
    interp = (eps * real.detach() + (1.0 - eps) * fake.detach()).requires_grad_(True)
    scores = _critic_scores(critic_fn, interp)
    if not scores.requires_grad:
        return interp.detach(), torch.zeros_like(interp)
    grads = torch.autograd.grad(scores.sum(), interp, allow_unused=True)[0]
    if grads is None:
        grads = torch.zeros_like(interp)
    return interp.detach(), grads.detach()


def stage1_critic_loss(
    bundle: GanBundle,
    real: torch.Tensor,
    real_general: torch.Tensor,
    fake: torch.Tensor,
    fake_general: torch.Tensor,
    config: TrainConfig,
    gp_seed_state: torch.Generator,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Critic objective: Wasserstein gap + gradient penalty + general-class NLL.

    The class NLL covers real samples against their labels and (by default)
    generated samples against their conditioning labels.
    """
    fake = fake.detach()
    out_real: CriticOutput = bundle.critic(real)
    out_fake: CriticOutput = bundle.critic(fake)
    wasserstein = out_fake.scores.mean() - out_real.scores.mean()
    gp = gradient_penalty(bundle.critic, real, fake, gp_seed_state)
    nll = general_class_nll(out_real.class_logits, real_general, bundle.schema)
    if config.aux_nll_on_fake:
        nll = nll + general_class_nll(out_fake.class_logits, fake_general, bundle.schema)
    total = wasserstein + config.lambda_gp * gp + config.w_cls_general * nll
    return total, LossBreakdown(
        wasserstein_term=_f(wasserstein),
        gradient_penalty_term=_f(gp),
        general_class_nll=_f(nll),
        total=_f(total),
    )


def stage1_generator_loss(
    bundle: GanBundle,
    z: torch.Tensor,
    general: torch.Tensor,
    config: TrainConfig,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Generator objective: fool the critic and match the conditioning classes."""
    cond = general_to_onehot(general, bundle.schema)
    fake = bundle.generator(z, cond)
    out: CriticOutput = bundle.critic(fake)
    wasserstein = -out.scores.mean()
    nll = general_class_nll(out.class_logits, general, bundle.schema)
    total = wasserstein + config.w_cls_general * nll
    return total, LossBreakdown(
        wasserstein_term=_f(wasserstein),
        general_class_nll=_f(nll),
        total=_f(total),
    )


def stage2_critic_loss(
    bundle: GanBundle,
    real: torch.Tensor,
    real_detailed: torch.Tensor,
    fake: torch.Tensor,
    fake_detailed: torch.Tensor,
    config: TrainConfig,
    gp_seed_state: torch.Generator,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Stage-2 critic objective; mirrors stage 1 with the detailed head."""
    fake = fake.detach()
    out_real: CriticOutput = bundle.critic(real)
    out_fake: CriticOutput = bundle.critic(fake)
    wasserstein = out_fake.scores.mean() - out_real.scores.mean()
    gp = gradient_penalty(bundle.critic, real, fake, gp_seed_state)
    nll = detailed_class_nll(out_real.class_logits["detailed"], real_detailed)
    if config.aux_nll_on_fake:
        nll = nll + detailed_class_nll(out_fake.class_logits["detailed"], fake_detailed)
    total = wasserstein + config.lambda_gp * gp + config.w_cls_detailed * nll
    return total, LossBreakdown(
        wasserstein_term=_f(wasserstein),
        gradient_penalty_term=_f(gp),
        detailed_class_nll=_f(nll),
        total=_f(total),
    )


def stage2_generator_loss(
    bundle2: GanBundle,
    bundle1_frozen: GanBundle,
    base_images: torch.Tensor,
    detailed: torch.Tensor,
    general_used_for_base: torch.Tensor,
    config: TrainConfig,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Stage-2 generator objective.

    Fool the stage-2 critic, match the detailed conditioning classes, keep
    the general classes recognizable to the frozen stage-1 critic, and stay
    close to the input images. Gradients reach only the stage-2 generator's
    parameters during optimization; the stage-1 critic is treated as a fixed
    auxiliary classifier.
    """
    fake = bundle2.generator(base_images, detailed)
    out2: CriticOutput = bundle2.critic(fake)
    wasserstein = -out2.scores.mean()
    det_nll = detailed_class_nll(out2.class_logits["detailed"], detailed)
    out1: CriticOutput = bundle1_frozen.critic(fake)
    gen_nll = general_class_nll(out1.class_logits, general_used_for_base, bundle1_frozen.schema)
    mse = ((fake - base_images) ** 2).mean()
    total = (
        wasserstein
        + config.w_cls_detailed * det_nll
        + config.w_cls_general * gen_nll
        + config.w_mse * mse
    )
    return total, LossBreakdown(
        wasserstein_term=_f(wasserstein),
        general_class_nll=_f(gen_nll),
        detailed_class_nll=_f(det_nll),
        reconstruction_mse=_f(mse),
        total=_f(total),
    )


def _binary_logit(out: CriticOutput) -> torch.Tensor:
    return out.class_logits["real_fake"].squeeze(1)


def acgan_discriminator_loss(
    bundle: GanBundle,
    real: torch.Tensor,
    real_general: torch.Tensor,
    real_detailed: torch.Tensor,
    fake: torch.Tensor,
    fake_general: torch.Tensor,
    fake_detailed: torch.Tensor,
    config: TrainConfig,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Baseline discriminator: real/fake BCE plus class NLL on both label groups.

    The adversarial BCE lands in the ``wasserstein_term`` slot of the
    breakdown (weight 1); there is no gradient penalty.
    """
    fake = fake.detach()
    out_real: CriticOutput = bundle.critic(real)
    out_fake: CriticOutput = bundle.critic(fake)
    adv = F.binary_cross_entropy_with_logits(
        _binary_logit(out_real), torch.ones(real.shape[0], dtype=real.dtype)
    ) + F.binary_cross_entropy_with_logits(
        _binary_logit(out_fake), torch.zeros(fake.shape[0], dtype=fake.dtype)
    )
    gen_nll = general_class_nll(out_real.class_logits, real_general, bundle.schema)
    det_nll = detailed_class_nll(out_real.class_logits["detailed"], real_detailed)
    if config.aux_nll_on_fake:
        gen_nll = gen_nll + general_class_nll(out_fake.class_logits, fake_general, bundle.schema)
        det_nll = det_nll + detailed_class_nll(out_fake.class_logits["detailed"], fake_detailed)
    total = adv + config.w_cls_general * gen_nll + config.w_cls_detailed * det_nll
    return total, LossBreakdown(
        wasserstein_term=_f(adv),
        general_class_nll=_f(gen_nll),
        detailed_class_nll=_f(det_nll),
        total=_f(total),
    )


def acgan_generator_loss(
    bundle: GanBundle,
    z: torch.Tensor,
    general: torch.Tensor,
    detailed: torch.Tensor,
    config: TrainConfig,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Baseline generator: be judged real and match both conditioning label groups."""
    cond = torch.cat(
        [general_to_onehot(general, bundle.schema).to(z.dtype), detailed.to(z.dtype)], dim=1
    )
    fake = bundle.generator(z, cond)
    out: CriticOutput = bundle.critic(fake)
    adv = F.binary_cross_entropy_with_logits(
        _binary_logit(out), torch.ones(z.shape[0], dtype=z.dtype)
    )
    gen_nll = general_class_nll(out.class_logits, general, bundle.schema)
    det_nll = detailed_class_nll(out.class_logits["detailed"], detailed)
    total = adv + config.w_cls_general * gen_nll + config.w_cls_detailed * det_nll
    return total, LossBreakdown(
        wasserstein_term=_f(adv),
        general_class_nll=_f(gen_nll),
        detailed_class_nll=_f(det_nll),
        total=_f(total),
    )
