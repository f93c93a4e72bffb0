"""Exception types shared across the package."""


class BriefBankError(Exception):
    """Base class for all briefbank errors."""


class ValidationError(BriefBankError):
    """Input violated a documented contract (bad record, bad config, bad file)."""


class RemoteError(BriefBankError):
    """A remote service call failed; callers with a fallback catch this."""


class TransportError(RemoteError):
    """A remote endpoint could not be reached after the configured retries."""


class ContractError(RemoteError):
    """A remote endpoint answered, but the reply violated the wire contract."""


class EmptyOutputError(RemoteError):
    """A completion endpoint returned an empty reply."""


class DatasetError(ValidationError):
    """A dataset file failed to parse or failed referential-integrity checks."""
