"""Protocol exceptions and the wire error-code registry."""

from enum import IntEnum


class ErrorCode(IntEnum):
    """Codes carried by ERR replies. Stable across all servers."""

    MALFORMED_REQUEST = 100
    UNKNOWN_COMMAND = 101
    UNKNOWN_PHYSICAL_MACHINE = 200
    UNKNOWN_REPOSITORY = 201
    UNKNOWN_SERVICE = 202
    UNKNOWN_VM = 203
    NO_CAPACITY = 300
    INVALID_STATE_TRANSITION = 301
    DUPLICATE_REGISTRATION = 302
    UPSTREAM_FAILURE = 400
    INTERNAL_ERROR = 500


class ProtocolError(Exception):
    """Base class for codec failures."""


class MalformedRequest(ProtocolError):
    """Request line that no server should act on.

    ``code`` distinguishes an unrecognized keyword (101) from a
    recognized keyword with a bad field or arity (100).
    """

    def __init__(self, reason: str, code: int = ErrorCode.MALFORMED_REQUEST):
        super().__init__(reason)
        self.code = int(code)


class MalformedReply(ProtocolError):
    """Reply bytes that do not fit the expected reply grammar."""


class MalformedNumber(ProtocolError):
    """Token rejected by the integer or real grammar."""


class MalformedQuantity(ProtocolError):
    """Magnitude-with-unit token rejected for its declared unit family."""


class UnknownStatusCode(ProtocolError):
    """Execution-status code outside 0..9."""
