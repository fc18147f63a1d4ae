"""Exception types shared across the fedbd package."""


class FedBdError(Exception):
    """Base class for all fedbd errors."""


class InsufficientEligible(FedBdError):
    """Fewer eligible instances than the requested poison count."""


class EmptyTestSet(FedBdError):
    """No test instance is eligible for trigger embedding."""


class EmptyDataset(FedBdError):
    """An operation that needs data received an empty dataset."""


class ShapeMismatch(FedBdError):
    """Model parameters and inputs disagree on dimensions."""


class TooFewInstances(FedBdError):
    """Pool too small to give every client at least one instance."""


class IndivisiblePool(FedBdError):
    """Pool size is not divisible into the requested number of shards."""


class EmptyUpdateSet(FedBdError):
    """Aggregation or scoring was called without client updates."""


class ConfigError(FedBdError):
    """Experiment config is missing a key or holds an invalid value.

    The message always names the offending key.
    """

    def __init__(self, key: str, detail: str = ""):
        self.key = key
        msg = f"config key '{key}'" + (f": {detail}" if detail else " is missing or invalid")
        super().__init__(msg)


class MalformedResult(FedBdError):
    """A result file does not carry the fields needed for plotting."""


class BridgeError(FedBdError):
    """Base class for LLM endpoint failures; carries the attempt count."""

    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class NetworkError(BridgeError):
    """Endpoint unreachable or returned a server-side error."""


class AuthError(BridgeError):
    """Endpoint rejected the credentials, or no token was configured."""


class RateLimited(BridgeError):
    """Endpoint kept throttling past the retry budget."""


class NoParsableInstances(FedBdError):
    """No reply contained a single well-formed instance."""
