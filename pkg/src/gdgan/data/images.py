"""Image batches, preprocessing, and the PNG image store.

Everything downstream works on normalized rank-4 batches: float32,
shape (n, 1, 64, 64), values in [-1, 1]. The invariants are checked at
construction so a bad batch never crosses a module boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..errors import EmptyImage, ShapeMismatch

IMAGE_SIZE = 64


@dataclass(frozen=True)
class ImageBatch:
    """Normalized grayscale batch: (n, 1, 64, 64) float32 in [-1, 1]."""

    data: np.ndarray
    ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        d = self.data
        if d.ndim != 4 or d.shape[1] != 1 or d.shape[2] != IMAGE_SIZE or d.shape[3] != IMAGE_SIZE:
            raise ShapeMismatch(f"expected (n, 1, {IMAGE_SIZE}, {IMAGE_SIZE}), got {d.shape}")
        if d.dtype != np.float32:
            object.__setattr__(self, "data", d.astype(np.float32))
            d = self.data
        if not np.isfinite(d).all():
            raise ValueError("image batch contains non-finite values")
        if d.size and (d.min() < -1.0 or d.max() > 1.0):
            raise ValueError(f"image batch outside [-1, 1]: [{d.min()}, {d.max()}]")
        if self.ids is not None:
            if not isinstance(self.ids, tuple):
                object.__setattr__(self, "ids", tuple(self.ids))
            if len(self.ids) != d.shape[0]:
                raise ShapeMismatch(f"{len(self.ids)} ids for batch of {d.shape[0]}")

    def __len__(self) -> int:
        return self.data.shape[0]

    def subset(self, idx) -> "ImageBatch":
        ids = tuple(self.ids[i] for i in idx) if self.ids is not None else None
        return ImageBatch(self.data[idx], ids)

    @staticmethod
    def concat(batches: Sequence["ImageBatch"]) -> "ImageBatch":
        data = np.concatenate([b.data for b in batches], axis=0)
        ids = None
        if all(b.ids is not None for b in batches):
            ids = tuple(i for b in batches for i in b.ids)
        return ImageBatch(data, ids)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resampling with half-pixel-center alignment.

    No antialiasing; edge neighbors are clamped. Resizing to the input
    size is the identity.
    """
    img = np.asarray(img, dtype=np.float64)
    in_h, in_w = img.shape
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = ys - y0
    wx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    y0c = np.clip(y0, 0, in_h - 1)
    y1c = np.clip(y0 + 1, 0, in_h - 1)
    x0c = np.clip(x0, 0, in_w - 1)
    x1c = np.clip(x0 + 1, 0, in_w - 1)
    top = img[y0c][:, x0c] * (1.0 - wx) + img[y0c][:, x1c] * wx
    bot = img[y1c][:, x0c] * (1.0 - wx) + img[y1c][:, x1c] * wx
    return top * (1.0 - wy)[:, None] + bot * wy[:, None]


def preprocess(raw_image: np.ndarray, target: int = IMAGE_SIZE) -> np.ndarray:
    """Resize a raw image to ``target`` square and normalize to [-1, 1].

    Accepts (h, w) or (h, w, 3) arrays; color inputs are luminance-converted
    first. Integer inputs are mapped from [0, 255]; float inputs already
    within [-1, 1] are treated as normalized, which makes the function
    idempotent on its own output.
    """
    raw = np.asarray(raw_image)
    if raw.size == 0:
        raise EmptyImage("empty raw image")
    if raw.ndim == 3:
        if raw.shape[2] != 3:
            raise ShapeMismatch(f"expected (h, w) or (h, w, 3), got {raw.shape}")
        raw = raw @ np.array([0.299, 0.587, 0.114])
    elif raw.ndim != 2:
        raise ShapeMismatch(f"expected (h, w) or (h, w, 3), got {raw.shape}")

    already_normalized = (
        np.issubdtype(raw.dtype, np.floating)
        and raw.size > 0
        and float(raw.min()) >= -1.0
        and float(raw.max()) <= 1.0
    )
    resized = bilinear_resize(raw.astype(np.float64), target, target)
    if not already_normalized:
        resized = resized / 127.5 - 1.0
    return np.clip(resized, -1.0, 1.0).astype(np.float32)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] image back to uint8 [0, 255] (rounding to nearest)."""
    arr = np.asarray(image, dtype=np.float64)
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


class ImageStore:
    """Directory (or lookup chain of directories) of ``<image_id>.png`` files.

    Writes always go to the first root; reads fall through the chain, so an
    augmentation delta can sit in front of the base corpus without copying it.
    """

    def __init__(self, roots):
        if isinstance(roots, (str, Path)):
            roots = [roots]
        self.roots = [Path(r) for r in roots]

    @property
    def write_root(self) -> Path:
        return self.roots[0]

    def path_for(self, image_id: str) -> Path:
        for root in self.roots:
            p = root / f"{image_id}.png"
            if p.exists():
                return p
        raise FileNotFoundError(f"{image_id}.png not found under {[str(r) for r in self.roots]}")

    def exists(self, image_id: str) -> bool:
        return any((root / f"{image_id}.png").exists() for root in self.roots)

    def write(self, image_id: str, pixels: np.ndarray) -> Path:
        """Write a uint8 (h, w) image as PNG into the write root."""
        self.write_root.mkdir(parents=True, exist_ok=True)
        path = self.write_root / f"{image_id}.png"
        Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(path)
        return path

    def read_raw(self, image_id: str) -> np.ndarray:
        with Image.open(self.path_for(image_id)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)

    def load_batch(self, image_ids: Sequence[str]) -> ImageBatch:
        """Load and preprocess ``image_ids`` into a normalized batch."""
        data = np.stack([preprocess(self.read_raw(i)) for i in image_ids])[:, None, :, :]
        return ImageBatch(data, tuple(image_ids))

    def layered(self, delta_root) -> "ImageStore":
        """Store that reads/writes ``delta_root`` first, then falls back here."""
        return ImageStore([Path(delta_root), *self.roots])
