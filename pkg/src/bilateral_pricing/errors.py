"""Exception types shared by the solvers and the command-line front end."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConfigurationError(ValueError):
    """A model, grid or scenario file cannot be used as given."""


class NumericalError(RuntimeError):
    """An iterative solve failed to converge.

    ``diagnostics`` carries whatever the solver knew at the time of failure.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
