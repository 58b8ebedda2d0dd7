"""Loss composition: closed forms, degeneracies, and the component-sum audit."""

import math

import numpy as np
import pytest
import torch
import torch.nn as nn

from gdgan.data import toy_schema
from gdgan.gan import (
    GanBundle,
    TrainConfig,
    acgan_discriminator_loss,
    acgan_generator_loss,
    build_bundle,
    stage1_critic_loss,
    stage1_generator_loss,
    stage2_critic_loss,
    stage2_generator_loss,
)
from gdgan.gan.nets import CriticOutput

SCHEMA = toy_schema()


class ZeroCritic(nn.Module):
    """Zero score, uniform class heads: every term has a closed form."""

    def __init__(self, heads):
        super().__init__()
        self.heads = heads
        self.dummy = nn.Parameter(torch.zeros(1, dtype=torch.float64))

    def forward(self, x):
        n = x.shape[0]
        zero = x.flatten(1).sum(dim=1) * 0.0
        return CriticOutput(
            zero, {name: torch.zeros(n, k, dtype=x.dtype) for name, k in self.heads.items()}
        )


class UnitLinearScoreCritic(nn.Module):
    """Unit-gradient linear score plus uniform class heads."""

    def __init__(self, heads, seed=0):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        w = torch.randn(64 * 64, generator=g, dtype=torch.float64)
        self.w = nn.Parameter(w / w.norm())
        self.heads = heads

    def forward(self, x):
        n = x.shape[0]
        return CriticOutput(
            x.flatten(1) @ self.w,
            {name: torch.zeros(n, k, dtype=x.dtype) for name, k in self.heads.items()},
        )


class IdentityGenerator(nn.Module):
    def forward(self, images, detailed):
        return images


def f64_bundle(stage, seed=0):
    return build_bundle(stage, SCHEMA, noise_dim=16, base_width=8, seed=seed).to_dtype(torch.float64)


def with_critic(stage, critic):
    b = f64_bundle(stage)
    return GanBundle(stage_tag=stage, generator=b.generator, critic=critic,
                     arch=b.arch, schema=SCHEMA)


def rand_images(n, seed):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 1, 64, 64, generator=g, dtype=torch.float64) * 2 - 1


def rand_labels(n, seed):
    g = torch.Generator().manual_seed(seed)
    general = torch.randint(0, 2, (n, 2), generator=g)
    detailed = torch.randint(0, 2, (n, 4), generator=g).double()
    return general, detailed


def test_stage1_critic_closed_form():
    heads = {g.name: g.cardinality for g in SCHEMA.general_labels}
    bundle = with_critic("stage1", ZeroCritic(heads))
    cfg = TrainConfig(lambda_gp=3.0, w_cls_general=2.0)
    real, fake = rand_images(8, 0), rand_images(8, 1)
    general, _ = rand_labels(8, 2)
    total, br = stage1_critic_loss(bundle, real, general, fake, general, cfg,
                                   torch.Generator().manual_seed(5))
    # zero critic: W term 0, penalty exactly 1, uniform heads log2 per group on real and fake
    want_nll = 2 * math.log(2) * len(SCHEMA.general_labels)
    assert br.wasserstein_term == pytest.approx(0.0, abs=1e-12)
    assert br.gradient_penalty_term == pytest.approx(1.0, abs=1e-12)
    assert br.general_class_nll == pytest.approx(want_nll, rel=1e-12)
    assert br.total == pytest.approx(3.0 * 1.0 + 2.0 * want_nll, rel=1e-12)
    assert float(total.detach()) == pytest.approx(br.total, rel=1e-12)


def test_stage1_critic_aux_on_fake_flag():
    heads = {g.name: g.cardinality for g in SCHEMA.general_labels}
    bundle = with_critic("stage1", ZeroCritic(heads))
    cfg = TrainConfig(aux_nll_on_fake=False)
    real, fake = rand_images(6, 0), rand_images(6, 1)
    general, _ = rand_labels(6, 2)
    _, br = stage1_critic_loss(bundle, real, general, fake, general, cfg,
                               torch.Generator().manual_seed(5))
    assert br.general_class_nll == pytest.approx(math.log(2) * 2, rel=1e-12)


def test_real_equals_fake_zeroes_wasserstein_gap():
    heads = {g.name: g.cardinality for g in SCHEMA.general_labels}
    bundle = with_critic("stage1", UnitLinearScoreCritic(heads))
    imgs = rand_images(8, 3)
    general, _ = rand_labels(8, 4)
    _, br = stage1_critic_loss(bundle, imgs, general, imgs.clone(), general,
                               TrainConfig(), torch.Generator().manual_seed(1))
    assert br.wasserstein_term == pytest.approx(0.0, abs=1e-12)
    assert br.gradient_penalty_term == pytest.approx(0.0, abs=1e-12)


def test_stage2_generator_identity_map_has_zero_mse():
    b2 = f64_bundle("stage2")
    bundle2 = GanBundle(stage_tag="stage2", generator=IdentityGenerator(),
                        critic=b2.critic, arch=b2.arch, schema=SCHEMA)
    b1 = f64_bundle("stage1")
    base = rand_images(5, 7)
    general, detailed = rand_labels(5, 8)
    _, br = stage2_generator_loss(bundle2, b1, base, detailed, general, TrainConfig())
    assert br.reconstruction_mse == 0.0


def test_weight_degeneracy_reduces_to_plain_adversarial_loss():
    b2 = f64_bundle("stage2")
    b1 = f64_bundle("stage1")
    base = rand_images(5, 9)
    general, detailed = rand_labels(5, 10)
    cfg = TrainConfig(w_cls_general=0.0, w_cls_detailed=0.0, w_mse=0.0)
    total, br = stage2_generator_loss(b2, b1, base, detailed, general, cfg)
    assert br.total == pytest.approx(br.wasserstein_term, rel=1e-12)
    fake = b2.generator(base, detailed)
    want = -b2.critic(fake).scores.mean()
    assert float(total.detach()) == pytest.approx(float(want.detach()), rel=1e-12)


def _random_config(rng):
    return TrainConfig(
        lambda_gp=float(rng.uniform(0, 5)),
        w_cls_general=float(rng.uniform(0, 3)),
        w_cls_detailed=float(rng.uniform(0, 3)),
        w_mse=float(rng.uniform(0, 5)),
        aux_nll_on_fake=bool(rng.integers(0, 2)),
    )


def _zeroed_variants(cfg):
    yield cfg
    for name in ("lambda_gp", "w_cls_general", "w_cls_detailed", "w_mse"):
        yield TrainConfig(**{**cfg.to_dict(), name: 0.0})


def all_loss_breakdowns(seed):
    """Evaluate every loss once under one random setup; yields (config, breakdown, total)."""
    rng = np.random.default_rng(seed)
    b1 = f64_bundle("stage1", seed=int(rng.integers(1000)))
    b2 = f64_bundle("stage2", seed=int(rng.integers(1000)))
    ba = f64_bundle("acgan", seed=int(rng.integers(1000)))
    n = 5
    real, fake = rand_images(n, seed * 13 + 1), rand_images(n, seed * 13 + 2)
    general, detailed = rand_labels(n, seed * 13 + 3)
    z = torch.rand(n, 16, generator=torch.Generator().manual_seed(seed), dtype=torch.float64) * 2 - 1
    for cfg in _zeroed_variants(_random_config(rng)):
        evaluations = [
            stage1_critic_loss(b1, real, general, fake, general, cfg,
                               torch.Generator().manual_seed(seed)),
            stage1_generator_loss(b1, z, general, cfg),
            stage2_critic_loss(b2, real, detailed, fake, detailed, cfg,
                               torch.Generator().manual_seed(seed)),
            stage2_generator_loss(b2, b1, real, detailed, general, cfg),
            acgan_discriminator_loss(ba, real, general, detailed, fake, general, detailed, cfg),
            acgan_generator_loss(ba, z, general, detailed, cfg),
        ]
        for total, breakdown in evaluations:
            yield cfg, breakdown, total


def test_totals_equal_weighted_component_sums():
    checked = 0
    for seed in range(4):
        for cfg, breakdown, total in all_loss_breakdowns(seed):
            recomputed = breakdown.weighted_sum(cfg)
            assert breakdown.total == pytest.approx(recomputed, abs=1e-6), cfg
            assert float(total.detach()) == pytest.approx(recomputed, abs=1e-6)
            checked += 1
    assert checked >= 100


def test_gradients_reach_only_stage2_generator():
    b1 = f64_bundle("stage1")
    b2 = f64_bundle("stage2")
    base = rand_images(4, 20)
    general, detailed = rand_labels(4, 21)
    total, _ = stage2_generator_loss(b2, b1, base, detailed, general, TrainConfig())
    grads = torch.autograd.grad(total, list(b2.generator.parameters()), allow_unused=True)
    assert any(g is not None and g.abs().sum() > 0 for g in grads)
    for p in b1.generator.parameters():
        assert p.grad is None
    for p in b1.critic.parameters():
        assert p.grad is None
