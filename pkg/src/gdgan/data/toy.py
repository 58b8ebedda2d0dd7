"""Procedural desk-scale corpus.

Renders 64x64 grayscale images whose labels are visible by construction:
the two general labels are global properties (stroke orientation, frame
size) and the four detailed labels are localized marks, one per quadrant.
disc_mark plays the role of the rare class; its frequency is the
``rare_rate`` argument. Fully deterministic per seed.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import BadRate
from ..rng import np_rng
from .images import IMAGE_SIZE, ImageStore, bilinear_resize
from .manifest import save_manifest
from .schema import LabelRecord, toy_schema

# fixed rates for the non-focus marks; bar_mark is deliberately
# sub-threshold so minority-oversampling rules have something to act on
MARK_RATES = (None, 0.30, 0.22, 0.08)

_MARK_CENTERS = ((16, 16), (16, 48), (48, 16), (48, 48))


def _background(rng: np.random.Generator) -> np.ndarray:
    coarse = rng.uniform(60.0, 120.0, size=(8, 8))
    return bilinear_resize(coarse, IMAGE_SIZE, IMAGE_SIZE)


def _draw_strokes(img: np.ndarray, vertical: bool, rng: np.random.Generator) -> None:
    for base in (18, 32, 46):
        pos = base + int(rng.integers(-2, 3))
        if vertical:
            img[:, pos:pos + 2] += 45.0
        else:
            img[pos:pos + 2, :] += 45.0


def _draw_frame(img: np.ndarray, large: bool) -> None:
    margin, width = (6, 4) if large else (2, 2)
    lo, hi = margin, IMAGE_SIZE - margin
    img[lo:lo + width, lo:hi] = 170.0
    img[hi - width:hi, lo:hi] = 170.0
    img[lo:hi, lo:lo + width] = 170.0
    img[lo:hi, hi - width:hi] = 170.0


def _draw_mark(img: np.ndarray, which: int, rng: np.random.Generator) -> None:
    cy, cx = _MARK_CENTERS[which]
    cy += int(rng.integers(-2, 3))
    cx += int(rng.integers(-2, 3))
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    if which == 0:  # disc_mark (the rare one): filled disc
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= 36] = 235.0
    elif which == 1:  # square_mark: filled square
        img[cy - 5:cy + 5, cx - 5:cx + 5] = 225.0
    elif which == 2:  # ring_mark: annulus
        r2 = (yy - cy) ** 2 + (xx - cx) ** 2
        img[(r2 <= 64) & (r2 >= 25)] = 230.0
    else:  # bar_mark: thick diagonal bar
        mask = (np.abs((yy - cy) - (xx - cx)) <= 2) & (np.abs(yy - cy) <= 9) & (np.abs(xx - cx) <= 9)
        img[mask] = 220.0


def render_toy_image(
    general: Sequence[int], detailed: Sequence[int], rng: np.random.Generator
) -> np.ndarray:
    """One uint8 toy image carrying the given labels."""
    img = _background(rng)
    _draw_strokes(img, vertical=bool(general[0]), rng=rng)
    _draw_frame(img, large=bool(general[1]))
    for k, flag in enumerate(detailed):
        if flag:
            _draw_mark(img, k, rng)
    return np.clip(img, 0, 255).astype(np.uint8)


def generate_toy_corpus(
    n: int, rare_rate: float, seed: int
) -> tuple[list[LabelRecord], dict[str, np.ndarray]]:
    """Procedural corpus of ``n`` labeled images.

    Returns (records, id -> uint8 image). Label draws are independent
    Bernoulli; patients group 1-4 consecutive images so by_patient splits
    are meaningful.
    """
    if not 0.0 < rare_rate <= 0.5:
        raise BadRate(f"rare_rate must be in (0, 0.5], got {rare_rate}")
    if n < 100:
        raise ValueError(f"toy corpus needs n >= 100, got {n}")

    schema = toy_schema()
    label_rng = np_rng(seed, "toy", "labels")
    render_rng = np_rng(seed, "toy", "render")

    rates = [rare_rate] + [r for r in MARK_RATES[1:]]
    records: list[LabelRecord] = []
    images: dict[str, np.ndarray] = {}
    patient_no = 0
    left_in_patient = 0
    for i in range(n):
        if left_in_patient == 0:
            patient_no += 1
            left_in_patient = int(label_rng.integers(1, 5))
        left_in_patient -= 1
        general = tuple(int(label_rng.integers(0, g.cardinality)) for g in schema.general_labels)
        detailed = tuple(int(label_rng.random() < r) for r in rates)
        image_id = f"toy_{i:06d}"
        rec = LabelRecord(
            image_id=image_id,
            patient_id=f"p{patient_no:05d}",
            general=general,
            detailed=detailed,
            age=int(label_rng.integers(18, 91)),
        )
        records.append(rec)
        images[image_id] = render_toy_image(general, detailed, render_rng)
    return records, images


def write_toy_corpus(
    out_dir: str | Path, n: int, rare_rate: float, seed: int
) -> tuple[Path, Path]:
    """Generate and persist a toy corpus in the standard store layout.

    Returns (manifest path, image directory).
    """
    out_dir = Path(out_dir)
    records, images = generate_toy_corpus(n, rare_rate, seed)
    image_dir = out_dir / "images"
    store = ImageStore(image_dir)
    for image_id, pixels in images.items():
        store.write(image_id, pixels)
    manifest_path = save_manifest(records, toy_schema(), out_dir / "manifest.csv")
    return manifest_path, image_dir
