"""Exception hierarchy shared by the library and the command line."""


class SmeFilterError(Exception):
    """Base class for every error raised by this package."""

    code = "Error"


class NotHermitian(SmeFilterError, ValueError):
    code = "NotHermitian"


class NotPSD(SmeFilterError, ValueError):
    code = "NotPSD"


class BadDim(SmeFilterError, ValueError):
    code = "BadDim"


class NotUnitBloch(SmeFilterError, ValueError):
    code = "NotUnitBloch"


class InvalidState(SmeFilterError, ValueError):
    code = "InvalidState"


class ModelError(SmeFilterError, ValueError):
    code = "ModelError"


class NonCommuting(ModelError):
    code = "NonCommuting"


class DegenerateBloch(SmeFilterError, ValueError):
    code = "DegenerateBloch"


class ConfigInvalid(SmeFilterError, ValueError):
    code = "ConfigInvalid"


class QuantizationUnsupported(ConfigInvalid):
    code = "QuantizationUnsupported"


class SchemeNotRecordDriven(ConfigInvalid):
    code = "SchemeNotRecordDriven"


class RecordMismatch(SmeFilterError, ValueError):
    code = "RecordMismatch"


class NumericalFailure(SmeFilterError, ArithmeticError):
    """A trajectory could not be continued."""

    code = "NumericalFailure"


class DegenerateNorm(NumericalFailure):
    code = "DegenerateNorm"


class PositivityBreach(NumericalFailure):
    code = "PositivityBreach"
