"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
TrainingError -> 3. Shape/input errors are programming-contract violations
and surface as ValueError subclasses.
"""


class ShapeError(ValueError):
    """Array dimensions do not match what the operation requires."""


class InputError(ValueError):
    """Array contents violate a precondition (non-finite, not normalized...)."""


class ConfigError(ValueError):
    """Invalid configuration value or unusable run specification."""


class DataError(ValueError):
    """The input data cannot be ingested or encoded."""


class AuditError(RuntimeError):
    """The audit protocol cannot run or reports cannot be paired."""


class TrainingError(RuntimeError):
    """Training diverged or was otherwise aborted.

    Carries the last good ``ratchet`` snapshot and the partial ``trace``
    when they exist, so callers can salvage the best state seen so far.
    """

    def __init__(self, message, ratchet=None, trace=None):
        super().__init__(message)
        self.ratchet = ratchet
        self.trace = trace
