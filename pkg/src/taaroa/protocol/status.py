"""Execution-status codification for virtual machines."""

from enum import IntEnum

from taaroa.protocol.errors import UnknownStatusCode


class ExecStatus(IntEnum):
    UNKNOWN = 0
    UNSTARTED = 1
    READY = 2
    STAGING_IN = 3
    RUNNING = 4
    SUSPENDED = 5
    STOPPED = 6
    CANCELLED = 7
    FAILED = 8
    ABORTED = 9

    @property
    def is_final(self) -> bool:
        """True for the absorbing states a VM can never leave."""
        return self in _FINAL


_FINAL = frozenset(
    {ExecStatus.STOPPED, ExecStatus.CANCELLED, ExecStatus.FAILED, ExecStatus.ABORTED}
)


def exec_status_of(code: int) -> ExecStatus:
    """Map a wire integer to its status, rejecting anything outside 0..9."""
    try:
        return ExecStatus(code)
    except ValueError:
        raise UnknownStatusCode(f"no execution status with code {code!r}") from None
