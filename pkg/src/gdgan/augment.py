"""Five training regimes as explicit, countable plans.

A plan is a declarative recipe over the train split only: which records to
keep, which to duplicate, and which label combinations to synthesize. Plans
realize their (total, focus) targets exactly and are serialized artifacts,
so an augmented training set can be audited and re-materialized at will.
"""

from __future__ import annotations

import json
import shutil
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .data.images import ImageStore, to_uint8
from .data.schema import LabelRecord, LabelSchema
from .errors import MissingGenerator, StoreWriteFailure, UnachievableTarget
from .gan.bundle import GanBundle, sample_acgan, sample_gdgan
from .rng import derive_int_seed, np_rng

STRATEGIES = ("none", "undersample", "oversample", "acgan", "gdgan")

# a non-focus detailed label counts as "minority" when its positive rate in
# the train split is below this fraction; extra oversampling/synthesis draws
# come from records positive for such labels
DEFAULT_MINORITY_THRESHOLD = 0.1


@dataclass(frozen=True)
class SynthEntry:
    general: tuple[int, ...]
    detailed: tuple[int, ...]
    count: int


@dataclass(frozen=True)
class AugmentationPlan:
    strategy: str
    focus_label: str
    seed: int
    keep: tuple[str, ...]
    duplicate: tuple[tuple[str, int], ...]
    synthesize: tuple[SynthEntry, ...]
    target_total: int
    target_focus: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "none" and (self.duplicate or self.synthesize):
            raise ValueError("strategy 'none' must not duplicate or synthesize")
        if self.strategy == "undersample" and (self.duplicate or self.synthesize):
            raise ValueError("undersample only shrinks the keep set")
        if self.strategy == "oversample" and self.synthesize:
            raise ValueError("oversample must not synthesize")
        if self.strategy in ("acgan", "gdgan") and self.duplicate:
            raise ValueError(f"{self.strategy} must not duplicate")
        if any(c < 0 for _, c in self.duplicate) or any(e.count < 0 for e in self.synthesize):
            raise ValueError("negative counts in plan")

    @property
    def n_duplicates(self) -> int:
        return sum(c for _, c in self.duplicate)

    @property
    def n_synthesized(self) -> int:
        return sum(e.count for e in self.synthesize)

    @property
    def realized_total(self) -> int:
        return len(self.keep) + self.n_duplicates + self.n_synthesized

    def realized_focus(self, records_by_id: dict[str, LabelRecord], schema: LabelSchema) -> int:
        j = schema.detailed_index(self.focus_label)
        n = sum(records_by_id[i].detailed[j] for i in self.keep)
        n += sum(c for i, c in self.duplicate if records_by_id[i].detailed[j])
        n += sum(e.count for e in self.synthesize if e.detailed[j])
        return n

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy,
            "focus_label": self.focus_label,
            "seed": self.seed,
            "targets": {"total": self.target_total, "focus": self.target_focus},
            "keep_count": len(self.keep),
            "duplicates": [{"id": i, "count": c} for i, c in self.duplicate],
            "synthesize": [
                {"general": list(e.general), "detailed": list(e.detailed), "count": e.count}
                for e in self.synthesize
            ],
        }
        if self.strategy == "undersample":
            d["keep"] = list(self.keep)  # the shrunken keep set is not recoverable otherwise
        return d

    @classmethod
    def from_dict(cls, d: dict, train_ids: Optional[Sequence[str]] = None) -> "AugmentationPlan":
        if "keep" in d:
            keep = tuple(d["keep"])
        elif train_ids is not None:
            keep = tuple(train_ids)
        else:
            raise ValueError("plan file has no keep list; pass the train split ids")
        return cls(
            strategy=d["strategy"],
            focus_label=d["focus_label"],
            seed=int(d["seed"]),
            keep=keep,
            duplicate=tuple((e["id"], int(e["count"])) for e in d["duplicates"]),
            synthesize=tuple(
                SynthEntry(tuple(e["general"]), tuple(e["detailed"]), int(e["count"]))
                for e in d["synthesize"]
            ),
            target_total=int(d["targets"]["total"]),
            target_focus=int(d["targets"]["focus"]),
        )


def save_plan(plan: AugmentationPlan, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plan.to_dict(), indent=1, sort_keys=True))
    return path


def load_plan(path: str | Path, train_ids: Optional[Sequence[str]] = None) -> AugmentationPlan:
    return AugmentationPlan.from_dict(json.loads(Path(path).read_text()), train_ids)


def _minority_labels(
    records: Sequence[LabelRecord], schema: LabelSchema, focus_idx: int, threshold: float
) -> list[int]:
    n = len(records)
    counts = np.array([r.detailed for r in records]).sum(axis=0)
    return [
        j for j in range(schema.n_detailed)
        if j != focus_idx and 0 < counts[j] < threshold * n
    ]


def build_plan(
    strategy: str,
    train_records: Sequence[LabelRecord],
    focus_label: str,
    targets: Optional[dict[str, int]],
    seed: int,
    schema: LabelSchema,
    minority_threshold: float = DEFAULT_MINORITY_THRESHOLD,
) -> AugmentationPlan:
    """Construct one regime's plan; realized counts equal the targets exactly.

    - none: identity, targets optional.
    - undersample: drop focus-negative records uniformly until the total
      target; focus-positives are never removed.
    - oversample: duplicate focus-positives (uniform with replacement) up to
      the focus target, then duplicate focus-negative records carrying some
      sub-threshold minority label until the total target.
    - acgan/gdgan: same counts as oversample, but the additions are synthesis
      instructions: general labels from the empirical train distribution,
      detailed vectors from the empirical focus-positive (resp. minority)
      co-occurrence.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not train_records:
        raise UnachievableTarget("no train records")
    focus_idx = schema.detailed_index(focus_label)
    ids = [r.image_id for r in train_records]
    n = len(train_records)
    pos_ids = [r.image_id for r in train_records if r.detailed[focus_idx]]
    n_pos = len(pos_ids)
    rng = np_rng(seed, "plan", strategy, focus_label)

    def finish(keep, duplicate, synthesize, total, focus):
        plan = AugmentationPlan(
            strategy=strategy, focus_label=focus_label, seed=seed,
            keep=tuple(keep), duplicate=tuple(duplicate), synthesize=tuple(synthesize),
            target_total=total, target_focus=focus,
        )
        by_id = {r.image_id: r for r in train_records}
        if plan.realized_total != total or plan.realized_focus(by_id, schema) != focus:
            raise UnachievableTarget(
                f"{strategy}: realized ({plan.realized_total}, {plan.realized_focus(by_id, schema)})"
                f" != targets ({total}, {focus})"
            )
        return plan

    if strategy == "none":
        total = n if targets is None else int(targets.get("total", n))
        focus = n_pos if targets is None else int(targets.get("focus", n_pos))
        if total != n or focus != n_pos:
            raise UnachievableTarget(f"'none' cannot change counts: have ({n}, {n_pos})")
        return finish(ids, (), (), n, n_pos)

    if targets is None or "total" not in targets:
        raise UnachievableTarget(f"{strategy} needs a total target")
    total = int(targets["total"])

    if strategy == "undersample":
        focus = int(targets.get("focus", n_pos))
        if focus != n_pos:
            raise UnachievableTarget("undersampling cannot change the focus count")
        if total > n:
            raise UnachievableTarget(f"undersample total {total} above current {n}")
        if total < n_pos:
            raise UnachievableTarget(f"total {total} below focus-positive count {n_pos}")
        neg_ids = [r.image_id for r in train_records if not r.detailed[focus_idx]]
        keep_neg = set(np.asarray(neg_ids, dtype=object)[
            rng.choice(len(neg_ids), size=total - n_pos, replace=False)
        ]) if total - n_pos < len(neg_ids) else set(neg_ids)
        keep = [i for i in ids if i in keep_neg or i in set(pos_ids)]
        return finish(keep, (), (), total, n_pos)

    # growth strategies
    if "focus" not in targets:
        raise UnachievableTarget(f"{strategy} needs a focus target")
    focus = int(targets["focus"])
    if focus < n_pos:
        raise UnachievableTarget(f"focus target {focus} below current {n_pos}")
    if n_pos == 0 and focus > 0:
        raise UnachievableTarget("no focus-positive records to draw from")
    n_focus_add = focus - n_pos
    n_extra = total - n - n_focus_add
    if n_extra < 0:
        raise UnachievableTarget(
            f"total target {total} below current {n} plus focus additions {n_focus_add}"
        )

    minority = _minority_labels(train_records, schema, focus_idx, minority_threshold)
    extra_pool = [
        r for r in train_records
        if not r.detailed[focus_idx] and any(r.detailed[j] for j in minority)
    ]
    if n_extra > 0 and not extra_pool:
        raise UnachievableTarget(
            f"{n_extra} extra additions requested but no focus-negative records carry a "
            f"sub-{minority_threshold:g} minority label"
        )

    if strategy == "oversample":
        dup_counter: Counter[str] = Counter()
        if n_focus_add:
            for i in rng.choice(len(pos_ids), size=n_focus_add, replace=True):
                dup_counter[pos_ids[i]] += 1
        if n_extra:
            pool_ids = [r.image_id for r in extra_pool]
            for i in rng.choice(len(pool_ids), size=n_extra, replace=True):
                dup_counter[pool_ids[i]] += 1
        duplicate = tuple(sorted(dup_counter.items()))
        return finish(ids, duplicate, (), total, focus)

    # synthesis strategies: sample label templates from the empirical distributions
    general_pool = [r.general for r in train_records]
    focus_templates = [r.detailed for r in train_records if r.detailed[focus_idx]]
    synth_counter: Counter[tuple] = Counter()
    for _ in range(n_focus_add):
        general = general_pool[int(rng.integers(0, len(general_pool)))]
        detailed = focus_templates[int(rng.integers(0, len(focus_templates)))]
        synth_counter[(general, detailed)] += 1
    for _ in range(n_extra):
        general = general_pool[int(rng.integers(0, len(general_pool)))]
        detailed = extra_pool[int(rng.integers(0, len(extra_pool)))].detailed
        synth_counter[(general, detailed)] += 1
    synthesize = tuple(
        SynthEntry(general=g, detailed=d, count=c)
        for (g, d), c in sorted(synth_counter.items())
    )
    return finish(ids, (), synthesize, total, focus)


def materialize(
    plan: AugmentationPlan,
    train_records: Sequence[LabelRecord],
    store: ImageStore,
    schema: LabelSchema,
    delta_dir: str | Path,
    generators: Optional[dict[str, GanBundle]] = None,
    seed: Optional[int] = None,
    chunk: int = 256,
) -> tuple[list[LabelRecord], ImageStore]:
    """Turn a plan into an augmented train manifest plus an image-store delta.

    Duplicated records become fresh ``dup*`` ids backed by byte-copies of
    their source PNG; synthesized entries become ``syn_*`` ids generated by
    the matching trained bundle(s) and labeled with their conditioning
    labels. Deterministic per seed; the returned store layers the delta over
    the input store.
    """
    seed = plan.seed if seed is None else seed
    by_id = {r.image_id: r for r in train_records}
    missing = [i for i in plan.keep if i not in by_id]
    if missing:
        raise ValueError(f"plan keeps unknown ids, e.g. {missing[:3]}")
    delta_dir = Path(delta_dir)
    out_store = store.layered(delta_dir)

    records: list[LabelRecord] = [by_id[i] for i in plan.keep]

    for source_id, count in plan.duplicate:
        src = by_id[source_id]
        try:
            src_path = store.path_for(source_id)
            for k in range(count):
                new_id = f"dup{k:03d}_{source_id}"
                delta_dir.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(src_path, delta_dir / f"{new_id}.png")
                records.append(LabelRecord(
                    image_id=new_id, patient_id=src.patient_id,
                    general=src.general, detailed=src.detailed, age=src.age,
                ))
        except OSError as exc:
            raise StoreWriteFailure(f"duplicating {source_id}: {exc}") from exc

    if plan.synthesize:
        if plan.strategy == "gdgan":
            if not generators or "stage1" not in generators or "stage2" not in generators:
                raise MissingGenerator("gdgan synthesis needs stage1 and stage2 bundles")
        elif plan.strategy == "acgan":
            if not generators or "acgan" not in generators:
                raise MissingGenerator("acgan synthesis needs the acgan bundle")

        general_rows = []
        detailed_rows = []
        for entry in plan.synthesize:
            general_rows += [entry.general] * entry.count
            detailed_rows += [entry.detailed] * entry.count
        general_arr = np.array(general_rows, dtype=np.int64)
        detailed_arr = np.array(detailed_rows, dtype=np.float32)

        torch_gen = torch.Generator().manual_seed(
            derive_int_seed(seed, "materialize", plan.strategy)
        )
        seq = 0
        try:
            for start in range(0, len(general_rows), chunk):
                g = general_arr[start:start + chunk]
                d = detailed_arr[start:start + chunk]
                if plan.strategy == "gdgan":
                    batch = sample_gdgan(
                        generators["stage1"], generators["stage2"], len(g), g, d, torch_gen
                    )
                else:
                    batch = sample_acgan(generators["acgan"], len(g), g, d, torch_gen)
                for i in range(len(g)):
                    new_id = f"syn_{seq:06d}"
                    seq += 1
                    out_store.write(new_id, to_uint8(batch.images.data[i, 0]))
                    records.append(LabelRecord(
                        image_id=new_id, patient_id=f"syn_{plan.strategy}",
                        general=tuple(int(v) for v in g[i]),
                        detailed=tuple(int(v) for v in d[i]),
                        age=0,
                    ))
        except OSError as exc:
            raise StoreWriteFailure(f"writing synthetic image: {exc}") from exc

    if len(records) != plan.target_total:
        raise UnachievableTarget(
            f"materialized {len(records)} records, plan targets {plan.target_total}"
        )
    return records, out_store
