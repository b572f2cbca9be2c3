class TopoligError(Exception):
    """Base class for all errors raised by topolig."""


class InvalidGeometry(TopoligError):
    pass


class NotInDomain(TopoligError):
    pass


class InvalidMaterial(TopoligError):
    pass


class InvalidDirection(TopoligError):
    pass


class SingularSystem(TopoligError):
    pass


class SolveFailed(TopoligError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class MissingLevelSet(TopoligError):
    pass


class InsufficientCandidates(TopoligError):
    pass


class ConfigError(TopoligError):
    pass
