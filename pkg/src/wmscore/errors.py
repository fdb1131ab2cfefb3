"""Exception hierarchy shared by every wmscore module."""


class WmscoreError(ValueError):
    """Base class for all errors raised by wmscore."""


class InvalidDimensionsError(WmscoreError):
    pass


class InvalidAnnotationError(WmscoreError):
    pass


class InvalidParameterError(WmscoreError):
    pass


class DimensionMismatchError(WmscoreError):
    pass


class DegenerateDataError(WmscoreError):
    """Raised when a dataset cannot constrain the scoring parameters."""


class InfeasibleSpecError(WmscoreError):
    pass
