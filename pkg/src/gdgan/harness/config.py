"""Declarative experiment configuration.

One JSON file mirrors the whole experiment: corpus source, split policy,
per-stage GAN settings, augmentation targets, classifier settings, and the
scoring block. The canonical hash of the resolved config keys the artifact
directory, so two runs with the same config share (and resume) artifacts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..augment import DEFAULT_MINORITY_THRESHOLD, STRATEGIES
from ..classifier import ClassifierConfig
from ..data.schema import LabelSchema, nih_chest_xray_schema, toy_schema
from ..gan.losses import TrainConfig


@dataclass(frozen=True)
class ToyCorpusConfig:
    kind: str = "toy"
    n: int = 4000
    rare_rate: float = 0.025
    seed: int = 7


@dataclass(frozen=True)
class ManifestCorpusConfig:
    kind: str = "manifest"
    manifest: str = ""
    images: str = ""
    schema: str = "nih"  # "nih" or "toy"


@dataclass(frozen=True)
class SplitConfig:
    mode: str = "by_image"
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class GanConfig:
    noise_dim: int = 100
    base_width: int = 64
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=TrainConfig)
    acgan: TrainConfig = field(default_factory=lambda: TrainConfig(n_critic=1))


@dataclass(frozen=True)
class AugmentTargetsConfig:
    """Per-seed targets derived from the actual train split counts."""

    undersample_total_fraction: float = 0.82
    focus_multiplier: float = 7.0
    extra_fraction: float = 0.0  # extra minority additions beyond the focus block
    minority_threshold: float = DEFAULT_MINORITY_THRESHOLD

    def targets_for(self, strategy: str, n_train: int, n_focus: int) -> dict | None:
        if strategy == "none":
            return None
        if strategy == "undersample":
            return {"total": max(n_focus, round(self.undersample_total_fraction * n_train))}
        focus = round(self.focus_multiplier * n_focus)
        extra = round(self.extra_fraction * n_train)
        return {"total": n_train + (focus - n_focus) + extra, "focus": focus}


@dataclass(frozen=True)
class InceptionConfig:
    n_images: int = 2000
    n_splits: int = 10
    label_source: str = "empirical"  # or "uniform"


@dataclass(frozen=True)
class OracleConfig:
    kind: str = "toy"  # "toy" or "inception_v3"
    seed: int = 0
    per_class: int = 240
    epochs: int = 4
    width: int = 16


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str = "gdgan-out"
    focus_label: str = "disc_mark"
    strategies: tuple[str, ...] = STRATEGIES
    seeds: tuple[int, ...] = (1, 2, 3)
    deterministic: bool = False
    corpus: ToyCorpusConfig | ManifestCorpusConfig = field(default_factory=ToyCorpusConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    augment: AugmentTargetsConfig = field(default_factory=AugmentTargetsConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    inception: InceptionConfig = field(default_factory=InceptionConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("need at least one strategy")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.focus_label not in self.schema().detailed_labels:
            raise ValueError(f"focus label {self.focus_label!r} not in schema")

    def schema(self) -> LabelSchema:
        if isinstance(self.corpus, ToyCorpusConfig):
            return toy_schema()
        return nih_chest_xray_schema() if self.corpus.schema == "nih" else toy_schema()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = list(self.strategies)
        d["seeds"] = list(self.seeds)
        d["split"]["ratios"] = list(self.split.ratios)
        return d

    def config_hash(self) -> str:
        """Hash of everything that affects artifacts (not out_dir or determinism mode)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("deterministic")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        corpus_d = dict(d.get("corpus", {}))
        kind = corpus_d.pop("kind", "toy")
        corpus = ToyCorpusConfig(**corpus_d) if kind == "toy" else ManifestCorpusConfig(kind="manifest", **corpus_d)
        gan_d = dict(d.get("gan", {}))
        stage_cfgs = {}
        for stage in ("stage1", "stage2", "acgan"):
            sub = dict(gan_d.pop(stage, {}))
            if stage == "acgan":
                sub.setdefault("n_critic", 1)
            stage_cfgs[stage] = TrainConfig(**sub)
        split_d = dict(d.get("split", {}))
        if "ratios" in split_d:
            split_d["ratios"] = tuple(split_d["ratios"])
        return cls(
            out_dir=d.get("out_dir", "gdgan-out"),
            focus_label=d.get("focus_label", "disc_mark"),
            strategies=tuple(d.get("strategies", STRATEGIES)),
            seeds=tuple(d.get("seeds", (1, 2, 3))),
            deterministic=bool(d.get("deterministic", False)),
            corpus=corpus,
            split=SplitConfig(**split_d),
            gan=GanConfig(
                noise_dim=gan_d.get("noise_dim", 100),
                base_width=gan_d.get("base_width", 64),
                **stage_cfgs,
            ),
            augment=AugmentTargetsConfig(**d.get("augment", {})),
            classifier=ClassifierConfig(**d.get("classifier", {})),
            inception=InceptionConfig(**d.get("inception", {})),
            oracle=OracleConfig(**d.get("oracle", {})),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        return path
