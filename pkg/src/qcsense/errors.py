"""Exception hierarchy. Every error carries a stable machine-readable code
(the same codes appear in gateway JSON error bodies and CLI messages)."""


class QcError(Exception):
    code = "error"


class InvalidRange(QcError):
    code = "invalid-range"


class UncoveredScenario(QcError):
    code = "uncovered-scenario"


class OutOfRange(QcError):
    code = "out-of-range"


class InvalidParameter(QcError):
    code = "invalid-parameter"


class NonPositiveSignal(QcError):
    code = "non-positive-signal"


class ValidationError(QcError):
    code = "validation"

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid value for field {field!r}")


class ParseError(QcError):
    code = "parse-error"

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConflictError(QcError):
    code = "conflict"


class StorageError(QcError):
    code = "storage-error"


class UnknownNode(QcError):
    code = "unknown-node"


class NoData(QcError):
    code = "no-data"


class LoneNode(QcError):
    code = "lone-node"


class InsufficientData(QcError):
    code = "insufficient-data"


class DegeneratePredictor(QcError):
    code = "degenerate-predictor"


class NoOverlap(QcError):
    code = "no-overlap"


class EmptySignature(QcError):
    code = "empty-signature"


class InsufficientGps(QcError):
    code = "insufficient-gps"


class InsufficientPairs(QcError):
    code = "insufficient-pairs"
