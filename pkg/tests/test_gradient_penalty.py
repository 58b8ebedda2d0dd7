"""Gradient penalty: closed forms and a central finite-difference oracle."""

import numpy as np
import pytest
import torch
import torch.nn as nn

from gdgan.errors import ShapeMismatch
from gdgan.gan import gradient_penalty, interpolate_gradients


class UnitLinearCritic(nn.Module):
    """D(x) = <w, x> with ||w|| = 1: gradient norm is exactly 1 everywhere."""

    def __init__(self, seed=0, dtype=torch.float64):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        w = torch.randn(64 * 64, generator=g, dtype=dtype)
        self.w = nn.Parameter(w / w.norm())

    def forward(self, x):
        return x.flatten(1) @ self.w


class ConstantCritic(nn.Module):
    def forward(self, x):
        return torch.zeros(x.shape[0], dtype=x.dtype)


class SmallCritic(nn.Module):
    """Nonlinear critic under 10k parameters for the finite-difference check."""

    def __init__(self, seed, dtype=torch.float64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(1, 2, 5, stride=4, padding=2), nn.Tanh(),
            nn.Conv2d(2, 4, 5, stride=4, padding=2), nn.Tanh(),
            nn.Flatten(), nn.Linear(4 * 16, 1),
        )
        g = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.randn(p.shape, generator=g) * 0.3)
        self.to(dtype)

    def forward(self, x):
        return self.net(x).squeeze(1)


def rand_batch(n, seed, dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 1, 64, 64, generator=g, dtype=dtype) * 2 - 1


def test_unit_gradient_linear_critic_gives_zero():
    gp = gradient_penalty(UnitLinearCritic(), rand_batch(8, 0), rand_batch(8, 1),
                          torch.Generator().manual_seed(2))
    assert float(gp.detach()) == pytest.approx(0.0, abs=1e-6)


def test_constant_critic_gives_one():
    gp = gradient_penalty(ConstantCritic(), rand_batch(8, 0), rand_batch(8, 1),
                          torch.Generator().manual_seed(2))
    assert float(gp) == pytest.approx(1.0, abs=1e-6)


def test_penalty_nonnegative_and_deterministic():
    critic = SmallCritic(seed=5)
    real, fake = rand_batch(6, 3), rand_batch(6, 4)
    a = gradient_penalty(critic, real, fake, torch.Generator().manual_seed(9)).detach()
    b = gradient_penalty(critic, real, fake, torch.Generator().manual_seed(9)).detach()
    c = gradient_penalty(critic, real, fake, torch.Generator().manual_seed(10)).detach()
    assert float(a) >= 0.0
    assert float(a) == float(b)
    assert float(a) != float(c)


def fd_gradient(critic, x, h=1e-5):
    """Central differences over every pixel, batched for speed."""
    n = x.shape[0]
    flat = x.reshape(n, -1)
    d = flat.shape[1]
    grads = torch.empty_like(flat)
    eye = torch.eye(d, dtype=x.dtype)
    for i in range(n):
        plus = (flat[i][None] + h * eye).reshape(d, 1, 64, 64)
        minus = (flat[i][None] - h * eye).reshape(d, 1, 64, 64)
        with torch.no_grad():
            f_plus = torch.cat([critic(plus[s:s + 512]) for s in range(0, d, 512)])
            f_minus = torch.cat([critic(minus[s:s + 512]) for s in range(0, d, 512)])
        grads[i] = (f_plus - f_minus) / (2 * h)
    return grads.reshape(x.shape)


def test_analytic_gradients_match_finite_differences():
    critic = SmallCritic(seed=1)
    n_params = sum(p.numel() for p in critic.parameters())
    assert n_params <= 10_000
    real, fake = rand_batch(2, 11), rand_batch(2, 12)
    interp, analytic = interpolate_gradients(critic, real, fake, torch.Generator().manual_seed(7))
    numeric = fd_gradient(critic, interp)
    norm_a = analytic.flatten(1).norm(dim=1)
    norm_n = numeric.flatten(1).norm(dim=1)
    assert norm_a.numpy() == pytest.approx(norm_n.numpy(), rel=1e-3)
    # pointwise agreement too, not just the norms
    assert analytic.numpy() == pytest.approx(numeric.numpy(), abs=1e-6)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        gradient_penalty(ConstantCritic(), rand_batch(4, 0), rand_batch(5, 1),
                         torch.Generator().manual_seed(0))
