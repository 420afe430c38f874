"""Exception hierarchy.

Errors are grouped so the CLI can map them onto exit codes: ``DataError`` (2),
``ConfigError`` (1, usage) and everything else derived from ``ScgnetError`` (3).
"""


class ScgnetError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ScgnetError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, name):
        super().__init__(f"unknown configuration key: {name!r}")
        self.name = name


class ConfigTypeError(ConfigError):
    def __init__(self, key, message):
        super().__init__(f"bad value for {key!r}: {message}")
        self.key = key


class MissingFile(ConfigError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = path


class DataError(ScgnetError):
    pass


class FieldCountMismatch(DataError):
    def __init__(self, line_no, found, expected):
        super().__init__(f"line {line_no}: expected {expected} fields, found {found}")
        self.line_no = line_no
        self.found = found
        self.expected = expected


class NumericParseError(DataError):
    def __init__(self, line_no, col, value):
        super().__init__(f"line {line_no}, column {col}: not a finite number: {value!r}")
        self.line_no = line_no
        self.col = col
        self.value = value


class UnknownSubclass(DataError):
    def __init__(self, name):
        super().__init__(
            f"subclass {name!r} is not in the attack taxonomy; extend the taxonomy file "
            "or ingest with --coerce-unknown-to-attack"
        )
        self.name = name


class EmptyTrainingSet(DataError):
    pass


class TooFewSamples(DataError):
    def __init__(self, n_samples, k, label=None):
        where = f" (class {label})" if label is not None else ""
        super().__init__(f"{n_samples} samples cannot support k={k} neighbours{where}")
        self.n_samples = n_samples
        self.k = k
        self.label = label


class DegenerateClass(DataError):
    def __init__(self, label, count, k):
        super().__init__(f"class {label} has {count} members, fewer than k={k} folds")
        self.label = label
        self.count = count


class NegativeFeature(DataError):
    pass


class LengthMismatch(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class ShapeMismatch(ScgnetError):
    pass


class ShapeUnderflow(ScgnetError):
    pass


class UnpopulatedRunningStats(ScgnetError):
    pass


class NonDeterministicLayer(ScgnetError):
    pass


class NonFiniteLoss(ScgnetError):
    pass


class ExhaustedRetries(ScgnetError):
    pass


class AllTrialsFailed(ScgnetError):
    pass


class WeightFileError(ScgnetError):
    pass


class BadMagic(WeightFileError):
    pass


class VersionMismatch(WeightFileError):
    pass


class ChecksumMismatch(WeightFileError):
    pass


class TruncatedFile(WeightFileError):
    pass
