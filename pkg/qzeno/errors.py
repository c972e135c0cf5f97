"""Exception hierarchy shared by every qzeno module."""


class QzenoError(Exception):
    """Base class for all qzeno errors."""


class DomainError(QzenoError, ValueError):
    """Parameter outside the domain where an operation is defined."""


class ConfigError(QzenoError, ValueError):
    """Malformed configuration, flag or unit string."""


class RecordParseError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotFoundError(QzenoError):
    """No transition or crossing inside the search bracket."""


class NumericalError(QzenoError):
    def __init__(self, message, matrix=None):
        self.matrix = matrix
        if matrix is not None:
            message = f"{message}\nmatrix=\n{matrix!r}"
        super().__init__(message)


class FitError(QzenoError):
    def __init__(self, message, last=None):
        self.last = last
        super().__init__(message)


class MappingError(QzenoError):
    """Empirical theta(t) is not monotone over the requested range."""


class HmmFaultError(QzenoError):
    """Baum-Welch log-likelihood decreased beyond tolerance."""


class StorageError(QzenoError):
    """Output could not be written; partial results were flushed first."""
