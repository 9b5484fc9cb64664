class ClassifierError(Exception):
    """Base class for classifier client failures."""


class ClassifierTimeout(ClassifierError):
    pass


class TransportError(ClassifierError):
    pass


class UnknownRequestError(ClassifierError):
    """The replay log holds no response for a request id."""


class ProfileError(ClassifierError):
    pass


class BackendConfigError(ClassifierError):
    pass
