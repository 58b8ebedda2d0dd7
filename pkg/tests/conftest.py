import numpy as np
import pytest
import torch

from gdgan.data import ImageStore, generate_toy_corpus, save_manifest, toy_schema
from gdgan.gan import TrainConfig, TrainingData, build_bundle, train_stage


@pytest.fixture(scope="session")
def schema():
    return toy_schema()


@pytest.fixture(scope="session")
def toy_corpus():
    """160-image toy corpus kept in memory: (records, id -> uint8 image)."""
    return generate_toy_corpus(160, 0.15, seed=11)


@pytest.fixture(scope="session")
def toy_store(toy_corpus, tmp_path_factory, schema):
    """The same corpus written out in the standard store layout."""
    root = tmp_path_factory.mktemp("toy_store")
    records, images = toy_corpus
    store = ImageStore(root / "images")
    for image_id, pixels in images.items():
        store.write(image_id, pixels)
    save_manifest(records, schema, root / "manifest.csv")
    return root, store


@pytest.fixture(scope="session")
def training_data(toy_corpus, schema):
    records, images = toy_corpus
    data = np.stack([images[r.image_id] for r in records])[:, None].astype(np.float32) / 127.5 - 1.0
    return TrainingData(
        images=data,
        general=np.array([r.general for r in records], dtype=np.int64),
        detailed=np.array([r.detailed for r in records], dtype=np.float32),
        schema=schema,
    )


def small_bundle(stage, schema, seed=0):
    return build_bundle(stage, schema, noise_dim=16, base_width=8, seed=seed)


@pytest.fixture(scope="session")
def untrained_bundles(schema):
    return {stage: small_bundle(stage, schema) for stage in ("stage1", "stage2", "acgan")}


@pytest.fixture(scope="session")
def trained_stage1(schema, training_data):
    """Briefly trained stage-1 bundle; enough for label sensitivity to emerge."""
    bundle = small_bundle("stage1", schema, seed=3)
    cfg = TrainConfig(batch_size=16, n_critic=2, total_generator_steps=60, seed=7,
                      w_cls_general=2.0)
    train_stage(bundle, training_data, cfg)
    return bundle


@pytest.fixture(scope="session")
def trained_stage2(schema, training_data, trained_stage1):
    """Stage-2 bundle trained with a heavy reconstruction weight."""
    bundle = small_bundle("stage2", schema, seed=4)
    cfg = TrainConfig(batch_size=16, n_critic=1, total_generator_steps=80, seed=8,
                      w_mse=50.0)
    train_stage(bundle, training_data, cfg, frozen_stage1=trained_stage1)
    return bundle


@pytest.fixture(autouse=True)
def _reset_torch_threads():
    """Deterministic-mode tests shrink the thread pool; restore it afterwards."""
    n = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    yield
    torch.set_num_threads(n)
    torch.use_deterministic_algorithms(deterministic)
