"""Training loop contracts: scoping, determinism, divergence, convergence."""

import copy

import numpy as np
import pytest
import torch

from gdgan.errors import DivergenceDetected
from gdgan.gan import TrainConfig, train_acgan, train_stage
from tests.conftest import small_bundle


def snapshot(module):
    return {k: v.clone() for k, v in module.state_dict().items()}


def states_equal(a, b):
    return all(torch.equal(a[k], b[k]) for k in a)


def test_zero_steps_returns_identical_bundle(schema, training_data):
    bundle = small_bundle("stage1", schema)
    before_g, before_c = snapshot(bundle.generator), snapshot(bundle.critic)
    out, log = train_stage(bundle, training_data, TrainConfig(total_generator_steps=0, batch_size=16))
    assert out is bundle
    assert log == []
    assert states_equal(before_g, snapshot(bundle.generator))
    assert states_equal(before_c, snapshot(bundle.critic))


@pytest.mark.parametrize("stage", ["stage1", "acgan"])
def test_optimizer_scoping_is_bitwise(schema, training_data, stage):
    bundle = small_bundle(stage, schema)
    gen_state = snapshot(bundle.generator)
    critic_state = snapshot(bundle.critic)
    violations = []

    def watch(step, phase):
        nonlocal gen_state, critic_state
        if phase == "critic":
            if not states_equal(gen_state, snapshot(bundle.generator)):
                violations.append(("critic step touched generator", step))
            critic_state = snapshot(bundle.critic)
        else:
            if not states_equal(critic_state, snapshot(bundle.critic)):
                violations.append(("generator step touched critic", step))
            gen_state = snapshot(bundle.generator)

    cfg = TrainConfig(batch_size=16, n_critic=3, total_generator_steps=3)
    train_stage(bundle, training_data, cfg, step_callback=watch)
    assert violations == []


def test_stage2_training_leaves_frozen_stage1_bitwise(schema, training_data):
    frozen = small_bundle("stage1", schema, seed=2)
    before_g, before_c = snapshot(frozen.generator), snapshot(frozen.critic)
    bundle = small_bundle("stage2", schema)
    cfg = TrainConfig(batch_size=16, n_critic=2, total_generator_steps=3)
    train_stage(bundle, training_data, cfg, frozen_stage1=frozen)
    assert states_equal(before_g, snapshot(frozen.generator))
    assert states_equal(before_c, snapshot(frozen.critic))


def test_stage2_requires_frozen_stage1(schema, training_data):
    with pytest.raises(ValueError, match="frozen stage1"):
        train_stage(small_bundle("stage2", schema), training_data,
                    TrainConfig(total_generator_steps=1, batch_size=16))


def test_training_is_deterministic_per_seed(schema, training_data):
    torch.set_num_threads(1)
    runs = []
    for _ in range(2):
        bundle = small_bundle("stage1", schema, seed=9)
        cfg = TrainConfig(batch_size=16, n_critic=2, total_generator_steps=4, seed=13)
        _, log = train_stage(bundle, training_data, cfg)
        runs.append((snapshot(bundle.generator), snapshot(bundle.critic),
                     [{k: v for k, v in r.items() if k != "wall_time"} for r in log]))
    assert states_equal(runs[0][0], runs[1][0])
    assert states_equal(runs[0][1], runs[1][1])
    assert runs[0][2] == runs[1][2]


def test_divergence_detected_on_exploding_lr(schema, training_data):
    # one step at this rate overflows the score head to inf
    bundle = small_bundle("stage1", schema)
    cfg = TrainConfig(batch_size=16, n_critic=1, total_generator_steps=10,
                      learning_rate=1e30)
    with pytest.raises(DivergenceDetected):
        train_stage(bundle, training_data, cfg)


def test_interval_checkpoints_written(schema, training_data, tmp_path):
    bundle = small_bundle("stage1", schema)
    cfg = TrainConfig(batch_size=16, n_critic=1, total_generator_steps=4, checkpoint_every=2)
    train_stage(bundle, training_data, cfg, checkpoint_dir=tmp_path)
    names = sorted(p.name for p in tmp_path.glob("*.ckpt"))
    assert names == ["stage1_step0000002.ckpt", "stage1_step0000004.ckpt"]


def test_log_file_is_ndjson(schema, training_data, tmp_path):
    import json

    bundle = small_bundle("acgan", schema)
    cfg = TrainConfig(batch_size=16, n_critic=1, total_generator_steps=2)
    _, log = train_acgan(bundle, training_data, cfg, log_path=tmp_path / "log.ndjson")
    lines = (tmp_path / "log.ndjson").read_text().strip().splitlines()
    assert len(lines) == len(log) == 4  # 2 critic + 2 generator records
    parsed = [json.loads(l) for l in lines]
    assert all({"step", "phase", "total", "wall_time"} <= set(r) for r in parsed)


def test_acgan_needs_acgan_bundle(schema, training_data):
    with pytest.raises(ValueError):
        train_acgan(small_bundle("stage1", schema), training_data,
                    TrainConfig(total_generator_steps=1, batch_size=16))


def test_acgan_class_nll_decreases(schema, training_data):
    bundle = small_bundle("acgan", schema, seed=1)
    cfg = TrainConfig(batch_size=16, n_critic=1, total_generator_steps=120, seed=3)
    _, log = train_stage(bundle, training_data, cfg)
    nll = [r["general_class_nll"] + r["detailed_class_nll"]
           for r in log if r["phase"] == "critic"]
    assert np.mean(nll[-30:]) < np.mean(nll[:30])


def test_wasserstein_gap_shrinks_with_training(schema, training_data):
    # seeded convergence oracle: the critic's distance estimate collapses
    # from its early peak once the generator catches up
    bundle = small_bundle("stage1", schema, seed=1)
    cfg = TrainConfig(batch_size=16, n_critic=5, total_generator_steps=400, seed=1)
    _, log = train_stage(bundle, training_data, cfg)
    by_step = {}
    for r in log:
        if r["phase"] == "critic":
            by_step.setdefault(r["step"], []).append(abs(r["wasserstein_term"]))
    per_step = np.array([np.mean(v) for _, v in sorted(by_step.items())])
    assert per_step[-100:].mean() < per_step[:100].mean()
