"""Experiment orchestration with content-addressed, resumable artifacts.

Every produced artifact lives under ``out_dir/runs/<config hash>/`` keyed by
(seed, strategy, stage); an ensure-style accessor loads the artifact when it
already exists and creates it atomically otherwise, so an interrupted run
picks up where it stopped and repeated runs are no-ops. Within one seed all
strategies consume the identical split and GAN checkpoints.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..augment import AugmentationPlan, build_plan, load_plan, materialize, save_plan
from ..classifier import ClassifierBundle, ClassifierConfig, evaluate_classifier, train_classifier
from ..data.images import ImageStore
from ..data.manifest import load_manifest, save_manifest
from ..data.schema import LabelRecord, LabelSchema
from ..data.splits import DatasetSplit, load_split, make_split, save_split
from ..data.toy import write_toy_corpus
from ..errors import MissingArtifact
from ..gan.bundle import GanBundle, build_bundle, sample_acgan, sample_gdgan
from ..gan.checkpoint import load_gan_checkpoint, save_gan_checkpoint
from ..gan.losses import TrainConfig
from ..gan.nets import ACGAN, STAGE1, STAGE2
from ..gan.train import TrainingData, train_stage
from ..metrics.oracles import InceptionV3Oracle, ToyMarkOracle, train_toy_oracle
from ..metrics.score import inception_score
from ..metrics.stats import welch_t_test
from ..rng import derive_int_seed, np_rng
from .config import ExperimentConfig, ManifestCorpusConfig, ToyCorpusConfig

GAN_STAGES = (STAGE1, STAGE2, ACGAN)

ArtifactHook = Callable[[str, bool], None]


def _write_json_atomic(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
    tmp.replace(path)


def apply_determinism(enabled: bool) -> None:
    if enabled:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


class Experiment:
    """Runs and resumes the full pipeline described by one config."""

    def __init__(self, config: ExperimentConfig, on_artifact: Optional[ArtifactHook] = None):
        self.config = config
        self.schema: LabelSchema = config.schema()
        self.hash = config.config_hash()
        self.out_dir = Path(config.out_dir)
        self.run_dir = self.out_dir / "runs" / self.hash
        self.on_artifact = on_artifact
        self._corpus_cache: Optional[tuple[list[LabelRecord], ImageStore]] = None
        apply_determinism(config.deterministic)

    # ---- bookkeeping -------------------------------------------------

    def _emit(self, name: str, created: bool) -> None:
        if self.on_artifact is not None:
            self.on_artifact(name, created)

    def seed_dir(self, seed: int) -> Path:
        return self.run_dir / f"seed{seed}"

    def strategy_dir(self, strategy: str, seed: int) -> Path:
        return self.seed_dir(seed) / "strategies" / strategy

    # ---- corpus and oracle --------------------------------------------

    def corpus(self) -> tuple[list[LabelRecord], ImageStore]:
        """Labeled records plus the image store backing them."""
        if self._corpus_cache is not None:
            return self._corpus_cache
        cfg = self.config.corpus
        if isinstance(cfg, ToyCorpusConfig):
            corpus_dir = self.out_dir / f"corpus-n{cfg.n}-r{cfg.rare_rate:g}-s{cfg.seed}"
            manifest = corpus_dir / "manifest.csv"
            created = False
            if not manifest.exists():
                write_toy_corpus(corpus_dir, cfg.n, cfg.rare_rate, cfg.seed)
                created = True
            records = load_manifest(manifest, self.schema)
            store = ImageStore(corpus_dir / "images")
            self._emit("corpus", created)
        else:
            assert isinstance(cfg, ManifestCorpusConfig)
            records = load_manifest(cfg.manifest, self.schema)
            store = ImageStore(cfg.images)
            self._emit("corpus", False)
        self._corpus_cache = (records, store)
        return self._corpus_cache

    def oracle(self):
        """The shared label-probability oracle used for every score block."""
        ocfg = self.config.oracle
        if ocfg.kind == "inception_v3":
            self._emit("oracle", False)
            return InceptionV3Oracle()
        path = self.out_dir / f"oracle-s{ocfg.seed}-p{ocfg.per_class}-e{ocfg.epochs}-w{ocfg.width}.ckpt"
        if path.exists():
            self._emit("oracle", False)
            return ToyMarkOracle.load(path)
        oracle = train_toy_oracle(
            seed=ocfg.seed, per_class=ocfg.per_class, epochs=ocfg.epochs, width=ocfg.width
        )
        oracle.save(path)
        self._emit("oracle", True)
        return oracle

    # ---- splits --------------------------------------------------------

    def split(self, seed: int) -> DatasetSplit:
        path = self.seed_dir(seed) / "split.json"
        if path.exists():
            self._emit(f"split/seed{seed}", False)
            return load_split(path)
        records, _ = self.corpus()
        split = make_split(records, self.config.split.ratios, seed, self.config.split.mode)
        save_split(split, path)
        self._emit(f"split/seed{seed}", True)
        return split

    def _records_for(self, ids: Sequence[str]) -> list[LabelRecord]:
        records, _ = self.corpus()
        by_id = {r.image_id: r for r in records}
        return [by_id[i] for i in ids]

    # ---- GAN stages ------------------------------------------------------

    def _stage_config(self, stage: str, seed: int) -> TrainConfig:
        base = getattr(self.config.gan, stage)
        return TrainConfig(**{**base.to_dict(), "seed": derive_int_seed(seed, "gan", stage)})

    def gan_bundle(self, stage: str, seed: int) -> GanBundle:
        """Train (or load) one GAN stage on the unaugmented train split."""
        if stage not in GAN_STAGES:
            raise ValueError(f"unknown GAN stage {stage!r}")
        path = self.seed_dir(seed) / f"{stage}.ckpt"
        if path.exists():
            self._emit(f"gan/{stage}/seed{seed}", False)
            return load_gan_checkpoint(path, expected_stage=stage)
        frozen = self.gan_bundle(STAGE1, seed) if stage == STAGE2 else None
        split = self.split(seed)
        records, store = self.corpus()
        data = TrainingData.from_records(self._records_for(split.train), store, self.schema)
        bundle = build_bundle(
            stage, self.schema,
            noise_dim=self.config.gan.noise_dim,
            base_width=self.config.gan.base_width,
            seed=derive_int_seed(seed, "gan_init", stage),
        )
        cfg = self._stage_config(stage, seed)
        train_stage(
            bundle, data, cfg,
            frozen_stage1=frozen,
            log_path=self.seed_dir(seed) / f"{stage}_log.ndjson",
        )
        save_gan_checkpoint(bundle, path, config_hash=self.hash)
        self._emit(f"gan/{stage}/seed{seed}", True)
        return bundle

    # ---- augmentation ----------------------------------------------------

    def plan(self, strategy: str, seed: int) -> AugmentationPlan:
        path = self.strategy_dir(strategy, seed) / "plan.json"
        split = self.split(seed)
        if path.exists():
            self._emit(f"plan/{strategy}/seed{seed}", False)
            return load_plan(path, train_ids=split.train)
        train_records = self._records_for(split.train)
        focus_idx = self.schema.detailed_index(self.config.focus_label)
        n_focus = sum(r.detailed[focus_idx] for r in train_records)
        targets = self.config.augment.targets_for(strategy, len(train_records), n_focus)
        plan = build_plan(
            strategy, train_records, self.config.focus_label, targets, seed,
            self.schema, minority_threshold=self.config.augment.minority_threshold,
        )
        save_plan(plan, path)
        self._emit(f"plan/{strategy}/seed{seed}", True)
        return plan

    def augmented(self, strategy: str, seed: int) -> tuple[list[LabelRecord], ImageStore]:
        """Materialized augmented train manifest plus its layered store."""
        sdir = self.strategy_dir(strategy, seed)
        manifest_path = sdir / "train_manifest.csv"
        delta_dir = sdir / "synth"
        records, store = self.corpus()
        if manifest_path.exists():
            self._emit(f"augmented/{strategy}/seed{seed}", False)
            return load_manifest(manifest_path, self.schema), store.layered(delta_dir)
        plan = self.plan(strategy, seed)
        split = self.split(seed)
        generators = None
        if strategy == "gdgan":
            generators = {STAGE1: self.gan_bundle(STAGE1, seed), STAGE2: self.gan_bundle(STAGE2, seed)}
        elif strategy == "acgan":
            generators = {ACGAN: self.gan_bundle(ACGAN, seed)}
        train_records = self._records_for(split.train)
        aug_records, aug_store = materialize(
            plan, train_records, store, self.schema, delta_dir, generators, seed=seed
        )
        tmp = manifest_path.with_suffix(".csv.tmp")
        save_manifest(aug_records, self.schema, tmp)
        tmp.replace(manifest_path)
        self._emit(f"augmented/{strategy}/seed{seed}", True)
        return aug_records, aug_store

    # ---- classifier ------------------------------------------------------

    def classifier(self, strategy: str, seed: int) -> ClassifierBundle:
        path = self.strategy_dir(strategy, seed) / "classifier.ckpt"
        if path.exists():
            self._emit(f"classifier/{strategy}/seed{seed}", False)
            return ClassifierBundle.load(path)
        aug_records, aug_store = self.augmented(strategy, seed)
        split = self.split(seed)
        records, store = self.corpus()
        cfg = ClassifierConfig(**{**self.config.classifier.to_dict(), "seed": derive_int_seed(seed, "classifier")})
        bundle, history = train_classifier(
            aug_records, aug_store,
            self._records_for(split.validation), store,
            self.schema, cfg,
            log_path=None,
        )
        _write_json_atomic(self.strategy_dir(strategy, seed) / "history.json", {"history": history})
        bundle.save(path, config_hash=self.hash)
        self._emit(f"classifier/{strategy}/seed{seed}", True)
        return bundle

    def evaluation(self, strategy: str, seed: int) -> dict:
        """Per-label test ROC/AUC artifact for one (strategy, seed) cell."""
        sdir = self.strategy_dir(strategy, seed)
        path = sdir / "eval.json"
        if path.exists():
            self._emit(f"eval/{strategy}/seed{seed}", False)
            return json.loads(path.read_text())
        bundle = self.classifier(strategy, seed)
        split = self.split(seed)
        records, store = self.corpus()
        plan = self.plan(strategy, seed)
        test_records = self._records_for(split.test)
        curves, focus_auc = evaluate_classifier(
            bundle, test_records, store, self.config.focus_label,
            expected_test_hash=split.ids_hash("test"),
        )
        per_label = {}
        for name, curve in curves.items():
            csv_path = sdir / f"roc_{name}.csv"
            curve.write_csv(csv_path)
            per_label[name] = {"auc": curve.auc, "roc_csv": csv_path.name}
        by_id = {r.image_id: r for r in self._records_for(split.train)}
        payload = {
            "strategy": strategy,
            "seed": seed,
            "n_total": plan.realized_total,
            "n_focus": plan.realized_focus(by_id, self.schema),
            "focus_label": self.config.focus_label,
            "focus_auc": focus_auc,
            "per_label": per_label,
            "split_hash": {p: split.ids_hash(p) for p in ("train", "validation", "test")},
        }
        _write_json_atomic(path, payload)
        self._emit(f"eval/{strategy}/seed{seed}", True)
        return payload

    # ---- score comparison --------------------------------------------------

    def _empirical_labels(self, seed: int, n: int, stream: str) -> tuple[np.ndarray, np.ndarray]:
        split = self.split(seed)
        train_records = self._records_for(split.train)
        rng = np_rng(seed, "inception", stream)
        if self.config.inception.label_source == "uniform":
            general = np.stack([
                rng.integers(0, g.cardinality, size=n) for g in self.schema.general_labels
            ], axis=1)
            detailed = (rng.random((n, self.schema.n_detailed)) < 0.5).astype(np.float32)
            return general.astype(np.int64), detailed
        idx = rng.integers(0, len(train_records), size=n)
        general = np.array([train_records[i].general for i in idx], dtype=np.int64)
        detailed = np.array([train_records[i].detailed for i in idx], dtype=np.float32)
        return general, detailed

    def inception_block(self, seed: int) -> dict:
        """Real vs ACGAN vs GDGAN score comparison plus pairwise Welch tests."""
        path = self.seed_dir(seed) / "inception.json"
        if path.exists():
            self._emit(f"inception/seed{seed}", False)
            return json.loads(path.read_text())
        icfg = self.config.inception
        oracle = self.oracle()
        split = self.split(seed)
        records, store = self.corpus()
        rng = np_rng(seed, "inception", "real")
        train_ids = list(split.train)
        replace = len(train_ids) < icfg.n_images
        pick = rng.choice(len(train_ids), size=icfg.n_images, replace=replace)
        real = store.load_batch([train_ids[i] for i in pick])

        g_acgan, d_acgan = self._empirical_labels(seed, icfg.n_images, "acgan_labels")
        g_gdgan, d_gdgan = self._empirical_labels(seed, icfg.n_images, "gdgan_labels")
        acgan_imgs = sample_acgan(
            self.gan_bundle(ACGAN, seed), icfg.n_images, g_acgan, d_acgan,
            torch.Generator().manual_seed(derive_int_seed(seed, "inception", "acgan_noise")),
        ).images
        gdgan_imgs = sample_gdgan(
            self.gan_bundle(STAGE1, seed), self.gan_bundle(STAGE2, seed),
            icfg.n_images, g_gdgan, d_gdgan,
            torch.Generator().manual_seed(derive_int_seed(seed, "inception", "gdgan_noise")),
        ).images

        results = {
            "real": inception_score(real, oracle, icfg.n_splits),
            "acgan": inception_score(acgan_imgs, oracle, icfg.n_splits),
            "gdgan": inception_score(gdgan_imgs, oracle, icfg.n_splits),
        }
        t_tests = {}
        for a, b in (("real", "acgan"), ("real", "gdgan"), ("acgan", "gdgan")):
            res = welch_t_test(results[a].per_batch_scores, results[b].per_batch_scores)
            t_tests[f"{a}_vs_{b}"] = {"t": res.t, "dof": res.dof, "p_two_sided": res.p_two_sided}
        payload = {
            "seed": seed,
            "n_images": icfg.n_images,
            "n_splits": icfg.n_splits,
            "scores": {k: v.to_dict() for k, v in results.items()},
            "t_tests": t_tests,
        }
        _write_json_atomic(path, payload)
        self._emit(f"inception/seed{seed}", True)
        return payload

    # ---- experiment-level --------------------------------------------------

    def run_all(self) -> dict:
        """Full pipeline over all seeds and strategies; returns the report."""
        self.config.save(self.run_dir / "resolved_config.json")
        for seed in self.config.seeds:
            self.split(seed)
            need_gans = any(s in ("acgan", "gdgan") for s in self.config.strategies)
            if need_gans:
                for stage in GAN_STAGES:
                    self.gan_bundle(stage, seed)
            for strategy in self.config.strategies:
                self.evaluation(strategy, seed)
            if need_gans:
                self.inception_block(seed)
        return self.report()

    def report(self) -> dict:
        """Aggregate stored per-cell artifacts into the report payload.

        Pure function of the artifacts: raises MissingArtifact rather than
        recomputing anything, so a regenerated report is bit-identical.
        """
        cells = []
        for seed in self.config.seeds:
            for strategy in self.config.strategies:
                path = self.strategy_dir(strategy, seed) / "eval.json"
                if not path.exists():
                    raise MissingArtifact(f"missing evaluation artifact {path}")
                cells.append(json.loads(path.read_text()))
        per_strategy = {}
        for strategy in self.config.strategies:
            aucs = np.array([c["focus_auc"] for c in cells if c["strategy"] == strategy])
            per_strategy[strategy] = {
                "mean_auc": float(aucs.mean()),
                "sd_auc": float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0,
                "seeds": [int(c["seed"]) for c in cells if c["strategy"] == strategy],
                "n_total": [int(c["n_total"]) for c in cells if c["strategy"] == strategy],
                "n_focus": [int(c["n_focus"]) for c in cells if c["strategy"] == strategy],
            }
        inception = {}
        for seed in self.config.seeds:
            path = self.seed_dir(seed) / "inception.json"
            if path.exists():
                inception[str(seed)] = json.loads(path.read_text())
        payload = {
            "config_hash": self.hash,
            "focus_label": self.config.focus_label,
            "strategies": list(self.config.strategies),
            "seeds": list(self.config.seeds),
            "cells": cells,
            "per_strategy": per_strategy,
            "inception": inception,
        }
        _write_json_atomic(self.run_dir / "report" / "report.json", payload)
        self._emit("report", True)
        return payload
