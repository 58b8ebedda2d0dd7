"""CSV manifest ingestion and emission.

Manifest format: header ``image_id,patient_id,age,<general names>,<detailed
names>``. General labels are written by their alphabet symbols (e.g. M/F),
detailed labels as 0/1 flags.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from ..errors import BadLabelValue, DuplicateImageId, MissingColumn
from .schema import LabelRecord, LabelSchema


def manifest_columns(schema: LabelSchema) -> list[str]:
    return (
        ["image_id", "patient_id", "age"]
        + [g.name for g in schema.general_labels]
        + list(schema.detailed_labels)
    )


def load_manifest(path: str | Path, schema: LabelSchema) -> list[LabelRecord]:
    """Parse a manifest CSV into validated records.

    Any row violating the schema aborts the load with its 1-based data row
    number; duplicate image ids and missing header columns are rejected.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header") from None
        header = [h.strip() for h in header]
        required = manifest_columns(schema)
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        col = {name: header.index(name) for name in required}

        records: list[LabelRecord] = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise BadLabelValue(row_no, f"{len(row)} cells, header has {len(header)}")
            image_id = row[col["image_id"]].strip()
            if not image_id:
                raise BadLabelValue(row_no, "empty image_id")
            if image_id in seen:
                raise DuplicateImageId(f"{path}: image_id {image_id!r} repeated at row {row_no}")
            seen.add(image_id)
            try:
                age = int(row[col["age"]])
                general = tuple(g.index_of(row[col[g.name]].strip()) for g in schema.general_labels)
                detailed = tuple(_binary(row[col[name]]) for name in schema.detailed_labels)
            except ValueError as exc:
                raise BadLabelValue(row_no, str(exc)) from None
            rec = LabelRecord(
                image_id=image_id,
                patient_id=row[col["patient_id"]].strip(),
                general=general,
                detailed=detailed,
                age=age,
            )
            try:
                rec.validate(schema)
            except ValueError as exc:
                raise BadLabelValue(row_no, str(exc)) from None
            records.append(rec)
    return records


def _binary(cell: str) -> int:
    v = cell.strip()
    if v not in ("0", "1"):
        raise ValueError(f"detailed label must be 0 or 1, got {v!r}")
    return int(v)


def save_manifest(records: Sequence[LabelRecord], schema: LabelSchema, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(manifest_columns(schema))
        for r in records:
            writer.writerow(
                [r.image_id, r.patient_id, r.age]
                + [g.values[v] for g, v in zip(schema.general_labels, r.general)]
                + list(r.detailed)
            )
    return path
