"""Error taxonomy shared by every service and the client SDK.

Each error class doubles as a wire code: services serialize a failure as
``<error code="ClassName" msg="..."/>`` plus the class's HTTP status, and
the client SDK re-raises the matching class by looking the code up in
``ERROR_REGISTRY``.
"""

from __future__ import annotations

ERROR_REGISTRY: dict[str, type["SilError"]] = {}


class SilError(Exception):
    """Base class for protocol-level failures."""

    http_status = 400

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        ERROR_REGISTRY[cls.__name__] = cls

    @property
    def code(self) -> str:
        return type(self).__name__


# --- codec ---------------------------------------------------------------

class NotWellFormed(SilError):
    """Input is not parseable XML."""


class SchemaViolation(SilError):
    """Well-formed XML that breaks the interface-language grammar."""


class VersionMismatch(SilError):
    """Document version attribute differs from the fixed wire version."""


class MissingSid(SilError):
    """Document lacks the required server-identifier attribute."""


class InvariantViolation(SilError):
    """An in-memory value fails its own invariants; serialization refuses."""


# --- multipart framing ----------------------------------------------------

class EmptyParts(SilError):
    """Refusal to encode a multipart stream with zero parts."""


class MalformedMultipart(SilError):
    """Structurally broken multipart stream (boundaries, headers)."""


class TruncatedStream(SilError):
    """Multipart stream ended before the declared content."""


# --- registry (NMU) -------------------------------------------------------

class AdminAuthFailed(SilError):
    http_status = 401


class DuplicateName(SilError):
    http_status = 409


class InvalidUrl(SilError):
    pass


class UnknownServer(SilError):
    http_status = 404


class InvalidChange(SilError):
    pass


class UnknownRequester(SilError):
    http_status = 403


# --- server core ----------------------------------------------------------

class AuthFailed(SilError):
    http_status = 401


class AccountDisabled(SilError):
    http_status = 403


class SessionExpired(SilError):
    http_status = 401


class UnknownTransaction(SilError):
    http_status = 404


class TransactionClosed(SilError):
    http_status = 409


class NoOpenTransaction(SilError):
    http_status = 409


class DriverError(SilError):
    http_status = 500


class UnknownHandle(SilError):
    http_status = 404


class UnknownWorkspace(SilError):
    http_status = 404


class EnumerationCancelled(SilError):
    http_status = 409


class LevelDenied(SilError):
    http_status = 403


class ResourceGone(SilError):
    http_status = 410


# --- broker ---------------------------------------------------------------

class UnknownTarget(SilError):
    http_status = 404


class AllTargetsFailed(SilError):
    http_status = 502


class RemoteFailed(SilError):
    http_status = 502


# --- client / harness -----------------------------------------------------

class ServerUnreachable(SilError):
    http_status = 502


class BasketUnknown(SilError):
    http_status = 404


class BindFailed(SilError):
    http_status = 500


class NmuUnreachable(SilError):
    http_status = 502


class ExpectationFailed(SilError):
    """A scenario step's expectation did not hold; carries step and diff."""

    def __init__(self, step: str, diff: str):
        super().__init__(f"{step}: {diff}")
        self.step = step
        self.diff = diff


class RemoteError(SilError):
    """Fallback for error codes this build does not know."""

    http_status = 500


def error_for_code(code: str, message: str) -> SilError:
    cls = ERROR_REGISTRY.get(code, RemoteError)
    if cls is ExpectationFailed:
        return RemoteError(message)
    return cls(message)
