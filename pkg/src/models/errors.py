"""
Exception hierarchy for the co-BPM divergence estimator
"""


class CoBPMError(Exception):
    """Base class for every error raised by this package"""


class InvalidDimensionError(CoBPMError, ValueError):
    """Dimension is zero or two inputs disagree on dimension"""


class InvalidPartitionError(CoBPMError, ValueError):
    """Malformed dyadic region or unparsable partition sequence"""


class InvalidActionError(CoBPMError, ValueError):
    """Split action targets a missing region or axis"""


class CannotShrinkError(CoBPMError, ValueError):
    """Shrink requested on the root partition"""


class DepthLimitError(CoBPMError, ValueError):
    """Split exponent or chain depth cap exceeded"""


class OutOfDomainError(CoBPMError, ValueError):
    """Point outside the unit cube"""


class SampleFormatError(CoBPMError, ValueError):
    """Malformed sample file"""


class AlignmentError(CoBPMError, ValueError):
    """Counts or masses not aligned with the partition they describe"""


class SingularMassError(CoBPMError, ValueError):
    """Zero mass where the discrepancy functional divides by it"""


class EmptyTraceError(CoBPMError, ValueError):
    """Summary requested for a trace with no retained draws"""


class DensitySpecError(CoBPMError, ValueError):
    """Invalid density parameters or unparsable density text"""


class EstimatorError(CoBPMError, ValueError):
    """Baseline estimator called outside its valid range"""


class ConfigError(CoBPMError, ValueError):
    """Invalid experiment configuration"""
