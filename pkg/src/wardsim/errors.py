"""Exception hierarchy shared across the package."""


class WardsimError(Exception):
    """Base class for all package-specific errors."""


class InvalidCase(WardsimError, ValueError):
    """A case record failed validation and cannot drive a simulation."""


class NoCompatiblePersona(WardsimError):
    """No persona in the store satisfies the script's matching constraints."""


class CohortTooLarge(WardsimError, ValueError):
    """Requested cohort size is outside the valid range for the student store."""


class MalformedReply(WardsimError):
    """A backend reply failed schema validation after all retries."""


class BackendUnavailable(WardsimError):
    """Transport-level failure reaching a model backend."""


class AuthFailure(WardsimError):
    """The backend rejected our credentials."""


class BackendTimeout(WardsimError):
    """The backend did not answer within the configured timeout."""


class FixtureExhausted(WardsimError):
    """An ordered scripted fixture ran out of canned replies."""


class FixtureKeyMissing(WardsimError, KeyError):
    """A keyed scripted fixture has no entry for the requested key."""


class ConfigMismatch(WardsimError, ValueError):
    """Reward configuration is inconsistent with the scorecard's criterion set."""


class DomainError(WardsimError, ValueError):
    """Numeric input outside the mathematical domain of an operation."""


class DuplicateIdAfterRetry(WardsimError):
    """Persona generation kept producing duplicate ids after the retry cycle."""
