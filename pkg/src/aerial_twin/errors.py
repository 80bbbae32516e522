"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a model or scenario is configured with invalid values."""


class ScenarioError(ConfigurationError):
    """A scenario document failed validation.

    ``path`` names the offending field, e.g. ``missions[0].node``.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)
