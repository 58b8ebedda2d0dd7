from .oracles import (
    TOY_ORACLE_CLASSES,
    FixedProbabilityOracle,
    InceptionV3Oracle,
    LabelProbabilityOracle,
    ToyMarkOracle,
    train_toy_oracle,
)
from .roc import ROCCurve, pairwise_auc, roc_curve
from .score import InceptionScoreResult, inception_score
from .stats import (
    WelchResult,
    regularized_incomplete_beta,
    student_t_sf,
    student_t_two_sided_p,
    welch_t_test,
)

__all__ = [
    "TOY_ORACLE_CLASSES",
    "FixedProbabilityOracle",
    "InceptionV3Oracle",
    "LabelProbabilityOracle",
    "ToyMarkOracle",
    "train_toy_oracle",
    "ROCCurve",
    "pairwise_auc",
    "roc_curve",
    "InceptionScoreResult",
    "inception_score",
    "WelchResult",
    "regularized_incomplete_beta",
    "student_t_sf",
    "student_t_two_sided_p",
    "welch_t_test",
]
