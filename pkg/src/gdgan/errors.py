"""Exception types shared across the package.

Every operation that can fail raises one of these rather than a bare
ValueError, so callers can route failures without string matching.
"""


class GdganError(Exception):
    """Base class for all package errors."""


# --- manifest / data ingestion ---

class MissingColumn(GdganError):
    """Manifest header lacks a required column."""


class BadLabelValue(GdganError):
    """A manifest row carries a label outside its schema alphabet."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DuplicateImageId(GdganError):
    """The same image_id appears twice in one manifest."""


class EmptyInput(GdganError):
    """An operation that needs records received none."""


class EmptyImage(GdganError):
    """A raw image with zero pixels was passed to preprocessing."""


class BadRate(GdganError):
    """Toy-corpus rare rate outside (0, 0.5)."""


# --- model plumbing ---

class ShapeMismatch(GdganError):
    """Batch axes or image shapes of two inputs disagree."""


class DivergenceDetected(GdganError):
    """A non-finite loss appeared during training."""

    def __init__(self, step: int, last_checkpoint=None):
        msg = f"non-finite loss at step {step}"
        if last_checkpoint is not None:
            msg += f" (last good checkpoint: {last_checkpoint})"
        super().__init__(msg)
        self.step = step
        self.last_checkpoint = last_checkpoint


class VersionMismatch(GdganError):
    """Checkpoint format version or stage tag does not match expectation."""


class CorruptFile(GdganError):
    """Checkpoint failed its integrity check or is structurally invalid."""


# --- augmentation ---

class UnachievableTarget(GdganError):
    """Plan targets cannot be realized from the given records."""


class MissingGenerator(GdganError):
    """A synthesis plan was materialized without the trained bundle it needs."""


class StoreWriteFailure(GdganError):
    """Writing a synthetic image to the store failed."""


# --- metrics ---

class IndivisibleBatch(GdganError):
    """Image count is not divisible by the requested number of score splits."""


class OracleFailure(GdganError):
    """The label-probability oracle returned malformed output."""


class DegenerateSample(GdganError):
    """A sample too small or with zero variance was passed to a test statistic."""


class SingleClass(GdganError):
    """ROC requested for a label with only one class present."""

    def __init__(self, label: str = ""):
        super().__init__(f"only one class present{f' for label {label!r}' if label else ''}")
        self.label = label


# --- harness ---

class MissingArtifact(GdganError):
    """Report rendering referenced an artifact that does not exist."""
