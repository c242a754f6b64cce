"""Exception hierarchy shared by every module."""


class CoarseDecompError(Exception):
    """Base class for all errors raised by the package."""


class OverlappingSubspacesError(CoarseDecompError):
    pass


class EmptySubspaceError(CoarseDecompError):
    pass


class MetricAxiomError(CoarseDecompError):
    pass


class SizeLimitError(CoarseDecompError):
    pass


class DisconnectedGraphError(CoarseDecompError):
    pass


class SequenceExhaustedError(CoarseDecompError):
    """A construction needed more entries of R than the finite prefix holds."""


class NotFoundError(CoarseDecompError):
    """A search ran out of options within its budget."""


class SupplierFailureError(CoarseDecompError):
    pass


class PreconditionError(CoarseDecompError):
    pass


class ExcisionInsufficientError(CoarseDecompError):
    pass


class ControlFunctionViolationError(CoarseDecompError):
    pass


class SplitterViolationError(CoarseDecompError):
    pass


class NormDeficitError(CoarseDecompError):
    def __init__(self, points):
        self.points = list(points)
        super().__init__(f"rows with l1 norm < 1 at points {self.points[:20]}")


class InvalidWitnessError(CoarseDecompError):
    pass


class CertificateError(CoarseDecompError):
    """Malformed or inconsistent certificate / space file."""
