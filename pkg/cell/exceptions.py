class CellError(Exception):
    """Base class for every error raised by the simulated sorting cell."""


class ConfigError(CellError):
    pass


class SceneCapacityError(CellError):
    """The requested scene does not fit into the basket."""


class BasketAbsentError(CellError):
    def __init__(self, message='basket absent'):
        super().__init__(message)


class UnknownItemError(CellError):
    pass


class PlacementError(CellError):
    pass


class ChannelMismatchError(CellError):
    pass


class NoGraspedItemError(CellError):
    pass


class BaselineError(CellError):
    pass


class FrameMismatchError(CellError):
    pass


class ProtocolViolation(CellError):
    """An undefined (state, event) pair reached the state machine."""


class UnknownServiceError(CellError):
    pass


class DuplicateCorrelationError(CellError):
    pass


class ServiceTimeoutError(CellError):
    """A service did not answer within its timeout."""
