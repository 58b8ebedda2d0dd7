from .images import IMAGE_SIZE, ImageBatch, ImageStore, bilinear_resize, preprocess, to_uint8
from .manifest import load_manifest, manifest_columns, save_manifest
from .schema import (
    NIH_DISEASE_LABELS,
    TOY_MARK_LABELS,
    GeneralLabel,
    LabelRecord,
    LabelSchema,
    nih_chest_xray_schema,
    toy_schema,
)
from .splits import DEFAULT_RATIOS, DatasetSplit, load_split, make_split, save_split
from .toy import generate_toy_corpus, render_toy_image, write_toy_corpus

__all__ = [
    "IMAGE_SIZE",
    "ImageBatch",
    "ImageStore",
    "bilinear_resize",
    "preprocess",
    "to_uint8",
    "load_manifest",
    "manifest_columns",
    "save_manifest",
    "NIH_DISEASE_LABELS",
    "TOY_MARK_LABELS",
    "GeneralLabel",
    "LabelRecord",
    "LabelSchema",
    "nih_chest_xray_schema",
    "toy_schema",
    "DEFAULT_RATIOS",
    "DatasetSplit",
    "load_split",
    "make_split",
    "save_split",
    "generate_toy_corpus",
    "render_toy_image",
    "write_toy_corpus",
]
