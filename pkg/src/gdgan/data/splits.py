"""Reproducible train/validation/test splits.

Splits are value objects keyed by (records, seed, mode); by_patient mode
keeps all images of one patient inside one partition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import EmptyInput
from ..rng import np_rng
from .schema import LabelRecord

DEFAULT_RATIOS = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    mode: str

    def __post_init__(self):
        parts = [set(self.train), set(self.validation), set(self.test)]
        total = sum(len(p) for p in parts)
        if len(parts[0] | parts[1] | parts[2]) != total:
            raise ValueError("split partitions overlap")

    @property
    def all_ids(self) -> frozenset[str]:
        return frozenset(self.train) | frozenset(self.validation) | frozenset(self.test)

    def ids_hash(self, part: str) -> str:
        """sha256 over the sorted ids of one partition."""
        ids = sorted(getattr(self, part))
        return hashlib.sha256("\n".join(ids).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSplit":
        return cls(
            train=tuple(d["train"]),
            validation=tuple(d["validation"]),
            test=tuple(d["test"]),
            seed=int(d["seed"]),
            mode=d["mode"],
        )


def make_split(
    records: Sequence[LabelRecord],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
    mode: str = "by_image",
) -> DatasetSplit:
    """Partition records into train/validation/test at the given ratios.

    Deterministic for fixed (records, seed, mode). In by_patient mode whole
    patients are assigned to partitions, so proportions are only as exact
    as the patient group sizes allow.
    """
    if not records:
        raise EmptyInput("no records to split")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if mode not in ("by_image", "by_patient"):
        raise ValueError(f"unknown split mode {mode!r}")

    rng = np_rng(seed, "split", mode)
    n = len(records)
    cut_train = round(ratios[0] * n)
    cut_val = round((ratios[0] + ratios[1]) * n)

    if mode == "by_image":
        order = rng.permutation(n)
        ids = [records[i].image_id for i in order]
        train, val, test = ids[:cut_train], ids[cut_train:cut_val], ids[cut_val:]
    else:
        groups: dict[str, list[str]] = {}
        patient_order: list[str] = []
        for r in records:
            if r.patient_id not in groups:
                groups[r.patient_id] = []
                patient_order.append(r.patient_id)
            groups[r.patient_id].append(r.image_id)
        perm = rng.permutation(len(patient_order))
        train, val, test = [], [], []
        filled = 0
        for pi in perm:
            imgs = groups[patient_order[pi]]
            # a patient straddling a boundary goes to whichever side leaves
            # the partition size closer to its target
            if filled < cut_train and (filled + len(imgs) <= cut_train
                                       or cut_train - filled >= (filled + len(imgs)) - cut_train):
                train.extend(imgs)
            elif filled < cut_val and (filled + len(imgs) <= cut_val
                                       or cut_val - filled >= (filled + len(imgs)) - cut_val):
                val.extend(imgs)
            else:
                test.extend(imgs)
            filled += len(imgs)

    return DatasetSplit(
        train=tuple(train), validation=tuple(val), test=tuple(test), seed=seed, mode=mode
    )


def save_split(split: DatasetSplit, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(split.to_dict(), indent=1, sort_keys=True))
    return path


def load_split(path: str | Path) -> DatasetSplit:
    return DatasetSplit.from_dict(json.loads(Path(path).read_text()))
