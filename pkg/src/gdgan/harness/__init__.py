from .config import (
    AugmentTargetsConfig,
    ExperimentConfig,
    GanConfig,
    InceptionConfig,
    ManifestCorpusConfig,
    OracleConfig,
    SplitConfig,
    ToyCorpusConfig,
)
from .report import render_report, sample_grid, write_table
from .run import Experiment, apply_determinism

__all__ = [
    "AugmentTargetsConfig",
    "ExperimentConfig",
    "GanConfig",
    "InceptionConfig",
    "ManifestCorpusConfig",
    "OracleConfig",
    "SplitConfig",
    "ToyCorpusConfig",
    "render_report",
    "sample_grid",
    "write_table",
    "Experiment",
    "apply_determinism",
]
