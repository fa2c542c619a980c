"""Execution-state machine for virtual machines.

The transition relation is consulted by every component that mutates a
VM status.  UNKNOWN and READY are carried on the wire but take no
transitions here; cancel/abort/fail apply from any temporary state.
"""

from __future__ import annotations

from taaroa.protocol.status import ExecStatus

SELECT_FOR_EXECUTION = "select_for_execution"
STAGE_IN_COMPLETE = "stage_in_complete"
SUSPEND = "suspend"
RESUME = "resume"
SHUTDOWN = "shutdown"
CANCEL = "cancel"
ABORT = "abort"
FAIL = "fail"

EVENTS = (
    SELECT_FOR_EXECUTION,
    STAGE_IN_COMPLETE,
    SUSPEND,
    RESUME,
    SHUTDOWN,
    CANCEL,
    ABORT,
    FAIL,
)

_TEMPORARY = (
    ExecStatus.UNSTARTED,
    ExecStatus.STAGING_IN,
    ExecStatus.RUNNING,
    ExecStatus.SUSPENDED,
)

TRANSITIONS: dict[tuple[ExecStatus, str], ExecStatus] = {
    (ExecStatus.UNSTARTED, SELECT_FOR_EXECUTION): ExecStatus.STAGING_IN,
    (ExecStatus.STAGING_IN, STAGE_IN_COMPLETE): ExecStatus.RUNNING,
    (ExecStatus.RUNNING, SUSPEND): ExecStatus.SUSPENDED,
    (ExecStatus.SUSPENDED, RESUME): ExecStatus.RUNNING,
    (ExecStatus.RUNNING, SHUTDOWN): ExecStatus.STOPPED,
}
TRANSITIONS.update({(s, CANCEL): ExecStatus.CANCELLED for s in _TEMPORARY})
TRANSITIONS.update({(s, ABORT): ExecStatus.ABORTED for s in _TEMPORARY})
TRANSITIONS.update({(s, FAIL): ExecStatus.FAILED for s in _TEMPORARY})


class InvalidTransition(Exception):
    """No edge for (state, event); maps to wire error 301."""

    def __init__(self, state: ExecStatus, event: str):
        super().__init__(f"no transition from {state.name} on {event!r}")
        self.state = state
        self.event = event


def apply_event(current: ExecStatus, event: str) -> ExecStatus:
    """Return the successor state, or raise :class:`InvalidTransition`."""
    try:
        return TRANSITIONS[(ExecStatus(current), event)]
    except KeyError:
        raise InvalidTransition(ExecStatus(current), event) from None


def is_final(status: ExecStatus) -> bool:
    return ExecStatus(status).is_final


def can_change(current: ExecStatus, new: ExecStatus) -> bool:
    """True when a status update is the identity or follows some edge."""
    current = ExecStatus(current)
    new = ExecStatus(new)
    if current == new:
        return True
    return any(
        TRANSITIONS.get((current, event)) == new for event in EVENTS
    )
