"""Exception hierarchy shared across the package."""


class VQAgentError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(VQAgentError, ValueError):
    pass


class StateTransitionError(VQAgentError):
    """Raised when a task node is moved out of a terminal state."""


class RegistrationError(VQAgentError):
    pass


class EngineError(VQAgentError):
    """A provider or tool failure that the DnC engine could not absorb."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class VerdictParseError(EngineError):
    pass


class ProviderError(VQAgentError):
    """Base for failures coming from model services (live or mocked)."""

    category = "provider"
    retryable = False


class ProviderTimeout(ProviderError):
    category = "timeout"
    retryable = True


class ProviderHTTPError(ProviderError):
    category = "http"

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
        self.retryable = status is None or status >= 500 or status == 429


class MissingScriptError(ProviderError):
    category = "missing_script"


class ContractViolation(ProviderError):
    category = "contract"
