"""Exception hierarchy. Every error carries a stable ``code`` surfaced by the CLI."""


class JointVCTError(Exception):
    code = "E_GENERIC"
    exit_status = 1


class DataValidationError(JointVCTError, ValueError):
    code = "E_DATA"
    exit_status = 3


class InvalidDosageError(DataValidationError):
    code = "E_DOSAGE"


class DimensionMismatchError(DataValidationError):
    code = "E_DIMENSION"


class RankDeficientError(JointVCTError):
    code = "E_RANK"
    exit_status = 4


class SeparationError(JointVCTError):
    code = "E_SEPARATION"
    exit_status = 4


class ConvergenceError(JointVCTError):
    code = "E_CONVERGENCE"
    exit_status = 4


class WeightingError(JointVCTError, ValueError):
    code = "E_WEIGHTS"
    exit_status = 5


class DegenerateSpectrumError(JointVCTError):
    code = "E_SPECTRUM"
    exit_status = 5


class DaviesError(JointVCTError):
    """Characteristic-function inversion did not reach the requested accuracy."""

    code = "E_DAVIES"
    exit_status = 5


class InsufficientSamplesError(JointVCTError, ValueError):
    code = "E_SAMPLE"
    exit_status = 6


class ConfigError(JointVCTError, ValueError):
    code = "E_CONFIG"
    exit_status = 2
