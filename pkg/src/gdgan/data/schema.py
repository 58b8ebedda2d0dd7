"""Label schemas and per-image label records.

A schema distinguishes coarse *general* labels (small categorical
alphabets every image carries, e.g. gender or view position) from binary
multi-hot *detailed* labels (e.g. disease phenotypes). The first GAN stage
is conditioned on the general group, the second on the detailed group.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class GeneralLabel:
    name: str
    values: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.values)

    def index_of(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise ValueError(f"{value!r} not in alphabet of {self.name}: {self.values}") from None


@dataclass(frozen=True)
class LabelSchema:
    general_labels: tuple[GeneralLabel, ...]
    detailed_labels: tuple[str, ...]
    metadata_fields: tuple[str, ...] = ("patient_id", "age")

    def __post_init__(self):
        if not self.general_labels or not self.detailed_labels:
            raise ValueError("schema needs at least one general and one detailed label")
        names = [g.name for g in self.general_labels] + list(self.detailed_labels)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate label names in schema: {names}")
        for g in self.general_labels:
            if g.cardinality < 2:
                raise ValueError(f"general label {g.name} needs cardinality >= 2")

    @property
    def n_detailed(self) -> int:
        return len(self.detailed_labels)

    @property
    def general_cardinalities(self) -> tuple[int, ...]:
        return tuple(g.cardinality for g in self.general_labels)

    @property
    def general_onehot_dim(self) -> int:
        return sum(self.general_cardinalities)

    def detailed_index(self, name: str) -> int:
        try:
            return self.detailed_labels.index(name)
        except ValueError:
            raise ValueError(f"unknown detailed label {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "general_labels": [[g.name, list(g.values)] for g in self.general_labels],
            "detailed_labels": list(self.detailed_labels),
            "metadata_fields": list(self.metadata_fields),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSchema":
        return cls(
            general_labels=tuple(GeneralLabel(name, tuple(vals)) for name, vals in d["general_labels"]),
            detailed_labels=tuple(d["detailed_labels"]),
            metadata_fields=tuple(d.get("metadata_fields", ("patient_id", "age"))),
        )


@dataclass(frozen=True)
class LabelRecord:
    """One manifest row: ids, general label indices, detailed multi-hot vector."""

    image_id: str
    patient_id: str
    general: tuple[int, ...]
    detailed: tuple[int, ...]
    age: int = 0

    def validate(self, schema: LabelSchema) -> None:
        if len(self.general) != len(schema.general_labels):
            raise ValueError(
                f"{self.image_id}: {len(self.general)} general entries, schema has {len(schema.general_labels)}"
            )
        for v, g in zip(self.general, schema.general_labels):
            if not 0 <= v < g.cardinality:
                raise ValueError(f"{self.image_id}: general label {g.name}={v} outside [0, {g.cardinality})")
        if len(self.detailed) != schema.n_detailed:
            raise ValueError(
                f"{self.image_id}: detailed vector length {len(self.detailed)}, schema has {schema.n_detailed}"
            )
        if any(v not in (0, 1) for v in self.detailed):
            raise ValueError(f"{self.image_id}: detailed vector must be binary")


NIH_DISEASE_LABELS = (
    "Atelectasis", "Cardiomegaly", "Consolidation", "Edema", "Effusion",
    "Emphysema", "Fibrosis", "Hernia", "Infiltration", "Mass", "Nodule",
    "Pleural_Thickening", "Pneumonia", "Pneumothorax",
)


def nih_chest_xray_schema() -> LabelSchema:
    """Schema of the NIH chest X-ray manifest: gender/view + 14 phenotypes."""
    return LabelSchema(
        general_labels=(
            GeneralLabel("gender", ("M", "F")),
            GeneralLabel("view_position", ("PA", "AP")),
        ),
        detailed_labels=NIH_DISEASE_LABELS,
    )


TOY_MARK_LABELS = ("disc_mark", "square_mark", "ring_mark", "bar_mark")


def toy_schema() -> LabelSchema:
    """Schema of the procedurally generated toy corpus.

    Two binary general labels rendered as global image properties and four
    binary detailed labels rendered as localized marks; disc_mark is the
    rare one.
    """
    return LabelSchema(
        general_labels=(
            GeneralLabel("stroke_orientation", ("H", "V")),
            GeneralLabel("frame_size", ("S", "L")),
        ),
        detailed_labels=TOY_MARK_LABELS,
    )
