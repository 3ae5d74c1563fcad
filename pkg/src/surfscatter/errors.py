"""Exception types raised across the package.

Every error derives from :class:`SurfScatterError` so callers (the CLI in
particular) can map data/config problems to a single exit code.
"""


class SurfScatterError(ValueError):
    """Base class for all data, configuration and usage errors."""


# cloud_io
class MissingColumn(SurfScatterError):
    pass


class MalformedRow(SurfScatterError):
    def __init__(self, row_number, message):
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


class EmptyCloud(SurfScatterError):
    pass


class NegativeIntensity(SurfScatterError):
    pass


class DuplicateMaterial(SurfScatterError):
    pass


class ManifestError(SurfScatterError):
    pass


class DatasetLoadError(SurfScatterError):
    """Aggregates per-file failures; ``failures`` maps file path -> error."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"{path}: {err}" for path, err in self.failures.items()]
        super().__init__("failed to load dataset:\n  " + "\n  ".join(lines))


# patching / features
class DegenerateCloud(SurfScatterError):
    pass


class ZeroHorizontalRange(SurfScatterError):
    pass


class AllZeroIntensities(SurfScatterError):
    pass


class EmptyPatch(SurfScatterError):
    pass


# learners
class EmptyTrainingSet(SurfScatterError):
    pass


class SingleClassTrainingSet(SurfScatterError):
    pass


class DimensionMismatch(SurfScatterError):
    pass


class DegenerateFeature(SurfScatterError):
    pass


class ModelFormatError(SurfScatterError):
    pass


class NonStandardizedInput(UserWarning):
    """Network inputs look unscaled (some training-column mean outside [-3, 3])."""


# evaluation
class KTooLarge(SurfScatterError):
    pass


class UnknownTestSurface(SurfScatterError):
    pass


class InvalidSplit(SurfScatterError):
    pass


class SingleClassLabels(SurfScatterError):
    pass


# synth
class GrazingIncidence(SurfScatterError):
    pass


class InvalidSpec(SurfScatterError):
    pass


class ConfigError(SurfScatterError):
    pass
