"""Procedural corpus: determinism, rates, and mark visibility."""

import numpy as np
import pytest

from gdgan.data import generate_toy_corpus, load_manifest, toy_schema, write_toy_corpus
from gdgan.errors import BadRate


def test_same_seed_is_byte_identical():
    recs_a, imgs_a = generate_toy_corpus(120, 0.1, seed=21)
    recs_b, imgs_b = generate_toy_corpus(120, 0.1, seed=21)
    assert recs_a == recs_b
    assert all(np.array_equal(imgs_a[k], imgs_b[k]) for k in imgs_a)


def test_different_seed_differs():
    _, imgs_a = generate_toy_corpus(120, 0.1, seed=1)
    _, imgs_b = generate_toy_corpus(120, 0.1, seed=2)
    assert any(not np.array_equal(imgs_a[k], imgs_b[k]) for k in imgs_a)


def test_rare_rate_controls_focus_frequency():
    records, _ = generate_toy_corpus(10_000, 0.025, seed=5)
    count = sum(r.detailed[0] for r in records)
    assert 200 <= count <= 300  # binomial(10000, 0.025) within ~3 sigma


def test_half_rate_is_balanced():
    records, _ = generate_toy_corpus(4000, 0.5, seed=5)
    count = sum(r.detailed[0] for r in records)
    assert abs(count - 2000) < 150


def test_bad_rate_rejected():
    with pytest.raises(BadRate):
        generate_toy_corpus(200, 0.0, seed=0)
    with pytest.raises(BadRate):
        generate_toy_corpus(200, 0.6, seed=0)
    with pytest.raises(ValueError):
        generate_toy_corpus(50, 0.1, seed=0)


def test_images_are_valid_grayscale():
    _, imgs = generate_toy_corpus(150, 0.2, seed=2)
    for arr in imgs.values():
        assert arr.shape == (64, 64)
        assert arr.dtype == np.uint8


def test_marks_are_visibly_rendered():
    records, imgs = generate_toy_corpus(400, 0.3, seed=8)
    # the focus mark lives in the top-left quadrant and is bright
    with_mark = [imgs[r.image_id] for r in records if r.detailed[0]][:20]
    without = [imgs[r.image_id] for r in records if not any(r.detailed)][:20]
    assert with_mark and without
    mark_region = lambda a: a[4:30, 4:30].max()
    assert np.mean([mark_region(a) for a in with_mark]) > np.mean([mark_region(a) for a in without]) + 30


def test_patients_group_images():
    records, _ = generate_toy_corpus(300, 0.2, seed=4)
    patients = {}
    for r in records:
        patients.setdefault(r.patient_id, []).append(r.image_id)
    sizes = [len(v) for v in patients.values()]
    assert max(sizes) <= 4
    assert len(patients) < 300


def test_written_corpus_round_trips(tmp_path):
    manifest, image_dir = write_toy_corpus(tmp_path, 120, 0.2, seed=13)
    records = load_manifest(manifest, toy_schema())
    assert len(records) == 120
    assert sorted(p.stem for p in image_dir.glob("*.png")) == sorted(r.image_id for r in records)
