"""Exception hierarchy.

``ValidationError`` covers bad input (CLI exit code 2); ``ExecutionError``
covers failures while running a campaign (exit code 1).
"""


class SliceBenchError(Exception):
    """Base class for every error raised by slicebench."""


class ValidationError(SliceBenchError, ValueError):
    """Input does not satisfy a documented contract."""


class DesignError(ValidationError):
    pass


class ResponseError(ValidationError):
    """A response vector or recorded-responses file is unusable."""


class SummaryFormatError(ValidationError):
    """A stress summary line could not be parsed."""


class MissingFieldError(SummaryFormatError):
    pass


class UnitError(SummaryFormatError):
    pass


class PlanError(ValidationError):
    """An experiment plan failed schema or semantic validation."""


class DegenerateInputError(ValidationError):
    """Zero total variation where percentages are required."""


class IncompleteResultError(ValidationError):
    """A result has failed or missing cells and cannot be analyzed."""


class ExecutionError(SliceBenchError, RuntimeError):
    """A campaign or workload failed while running."""


class TargetUnreachable(ExecutionError):
    pass


class WorkloadAborted(ExecutionError):
    """Raised when a workload completes no operations or times out too often."""


class ReadinessTimeout(ExecutionError):
    pass


class AdapterError(ExecutionError):
    pass
