"""Scheduler: FCFS submission queue and machine selection.

Submissions are enqueued in arrival order and served by a single
dispatcher thread, so the order of SUBMITVM messages sent to repository
managers is exactly the arrival order.  Stops bypass the queue: they are
not submissions.  The scheduler keeps no state beyond the queue, so a
restart loses only unserved submissions.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Optional

from taaroa import PROTOCOL_VERSION
from taaroa.net import TransportError, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    GetVmServ,
    ListPhyMachStatus,
    ListServ,
    Ok,
    OkList,
    RmStopVm,
    SrvProtoVer,
    StopServ,
    SubmitServ,
    SubmitVm,
)
from taaroa.protocol.codec import Reply
from taaroa.protocol.messages import Request

log = logging.getLogger(__name__)


class NoCandidate(Exception):
    """No machine has all three availability figures above zero."""


def select_machine(candidates) -> int:
    """Pick the lowest-id machine whose CPU, RAM and disk are all free.

    ``candidates`` are LISTPHYMACHSTATUS entries in any order; the choice
    is a pure function of the entry multiset.
    """
    eligible = [
        entry["phy_id"] for entry in candidates
        if entry["avail_cpu"] > 0 and entry["avail_ram"] > 0
        and entry["avail_disk"] > 0
    ]
    if not eligible:
        raise NoCandidate()
    return min(eligible)


@dataclass
class SubmissionRequest:
    seq: int
    service_id: int
    done: threading.Event = field(default_factory=threading.Event)
    reply: Optional[Reply] = None


class Scheduler:
    """The SC server component."""

    SERVER_KIND = "SC"

    def __init__(self, is_addr: tuple[str, int]):
        self.is_addr = is_addr
        self._queue: queue.Queue[Optional[SubmissionRequest]] = queue.Queue()
        self._seq = itertools.count(1)
        self.submission_log: list[tuple[int, int]] = []  # (seq, service_id)
        self._log_lock = threading.Lock()
        self._dispatcher = threading.Thread(
            target=self._dispatch_loop, name="sc-dispatcher", daemon=True
        )
        self._dispatcher.start()

    def close(self):
        self._queue.put(None)
        self._dispatcher.join(timeout=5)

    # --- request entry point ------------------------------------------------

    def handle(self, request: Request) -> Reply:
        if isinstance(request, SubmitServ):
            with self._log_lock:
                item = SubmissionRequest(next(self._seq), request.s_id)
                self.submission_log.append((item.seq, item.service_id))
                self._queue.put(item)
            item.done.wait()
            return item.reply
        if isinstance(request, StopServ):
            return self._stop(request.vm_id)
        if isinstance(request, SrvProtoVer):
            return Ok({"version": PROTOCOL_VERSION})
        return Err(ErrorCode.UNKNOWN_COMMAND)

    # --- FCFS dispatcher -------------------------------------------------------

    def _dispatch_loop(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            try:
                item.reply = self._submit(item.service_id)
            except Exception:
                log.exception("submission %d failed unexpectedly", item.seq)
                item.reply = Err(ErrorCode.INTERNAL_ERROR)
            finally:
                item.done.set()

    def _submit(self, s_id: int) -> Reply:
        try:
            services = call(self.is_addr, ListServ())
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(services, Err):
            return services
        entry = next(
            (e for e in services.entries if e["s_id"] == s_id), None
        )
        if entry is None:
            return Err(ErrorCode.UNKNOWN_SERVICE)
        rm_addr = (entry["rm_ip"], entry["rm_port"])
        try:
            machines = call(self.is_addr, ListPhyMachStatus())
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(machines, Err):
            return machines
        candidates = sorted(
            (e for e in machines.entries
             if e["avail_cpu"] > 0 and e["avail_ram"] > 0 and e["avail_disk"] > 0),
            key=lambda e: e["phy_id"],
        )
        if not candidates:
            return Err(ErrorCode.NO_CAPACITY)
        # One attempt per candidate: a 300 from downstream admission moves
        # on to the next machine.
        for entry_ in candidates:
            try:
                reply = call(rm_addr, SubmitVm(s_id=s_id, phy_id=entry_["phy_id"]))
            except TransportError:
                return Err(ErrorCode.UPSTREAM_FAILURE)
            if isinstance(reply, Err) and reply.code == ErrorCode.NO_CAPACITY:
                continue
            return reply
        return Err(ErrorCode.NO_CAPACITY)

    # --- stop path --------------------------------------------------------------

    def _stop(self, vm_id: int) -> Reply:
        try:
            owner = call(self.is_addr, GetVmServ(vm_id=vm_id))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(owner, Err):
            return owner
        rm_addr = (owner["rm_ip"], owner["rm_port"])
        try:
            return call(rm_addr, RmStopVm(vm_id=vm_id))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)


def main(argv=None):
    """Run the Scheduler: ``python -m taaroa.scheduler [config-file]``.

    Config keys: SC_PORT (default 7072), IS_ADDR (default 127.0.0.1:7070).
    """
    import sys

    from taaroa.config import load_config, parse_addr
    from taaroa.net import ProtocolServer

    argv = sys.argv[1:] if argv is None else argv
    config = load_config(
        argv[0] if argv else None,
        defaults={"SC_PORT": "7072", "IS_ADDR": "127.0.0.1:7070"},
        env_keys=("SC_PORT", "IS_ADDR"),
    )
    component = Scheduler(is_addr=parse_addr(config["IS_ADDR"]))
    server = ProtocolServer(component, host="0.0.0.0", port=int(config["SC_PORT"]))
    print(f"scheduler listening on {server.port}", flush=True)
    with server:
        server.wait()


if __name__ == "__main__":
    main()
