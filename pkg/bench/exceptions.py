class BenchError(Exception):
    """Base class for benchmark harness errors."""


class ManifestError(BenchError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f'line {line}: {message}' if line is not None else message)


class DuplicateRecordError(ManifestError):
    pass


class UnknownLabelError(ManifestError):
    pass


class CoverageError(BenchError):
    """A response log does not cover the dataset exactly once."""


class EnsembleSpecError(BenchError):
    pass
