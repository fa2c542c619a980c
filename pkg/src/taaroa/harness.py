"""In-process cluster orchestration and workflow-conformance checks.

Boots the registry, scheduler, repository manager and N machine managers
on loopback ports, with a recording proxy spliced into every
inter-component link so each message crosses the real wire and lands in
a single ordered trace.  Conformance assertions are order-only
subsequence checks, tolerant of interleaved unrelated traffic.

Trace dump format (one line per event, textual, for golden files)::

    <seq> <sender>-><receiver> <kind> <first line of the message>
"""

from __future__ import annotations

import os
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field

from taaroa.machine import MachineManager, MachineSpec
from taaroa.net import MAX_LINE_BYTES, ProtocolServer, call
from taaroa.protocol import (
    MEMORY,
    NETSPEED,
    FREQUENCY,
    Quantity,
    StopServ,
    SubmitServ,
)
from taaroa.protocol.codec import MAX_IMAGE_BYTES, Reply
from taaroa.registry import InformationService
from taaroa.repository import MANIFEST_NAME, RepositoryManager
from taaroa.scheduler import Scheduler

_LIST_KEYWORDS = frozenset(
    {"LISTPHYMACH", "LISTPHYMACHSTATUS", "LISTREPO", "LISTSERV", "LISTVM"}
)


@dataclass(frozen=True)
class TraceEvent:
    """One message observed on the wire."""

    seq: int
    timestamp: float
    sender: str
    receiver: str
    kind: str
    detail: str  # first line of the message, newline stripped

    @property
    def edge(self) -> tuple[str, str, str]:
        return (self.sender, self.receiver, self.kind)

    def __str__(self) -> str:
        return f"{self.seq} {self.sender}->{self.receiver} {self.kind} {self.detail}"


class Trace:
    """Append-only event log; the single shared structure of a cluster."""

    def __init__(self):
        self._events: list[TraceEvent] = []
        self._lock = threading.Lock()

    def record(self, sender: str, receiver: str, kind: str, detail: str):
        with self._lock:
            self._events.append(TraceEvent(
                seq=len(self._events), timestamp=time.monotonic(),
                sender=sender, receiver=receiver, kind=kind, detail=detail,
            ))

    def snapshot(self) -> list[TraceEvent]:
        with self._lock:
            return list(self._events)

    def mark(self) -> int:
        with self._lock:
            return len(self._events)

    def since(self, mark: int) -> list[TraceEvent]:
        with self._lock:
            return list(self._events[mark:])

    def count(self, kind: str) -> int:
        return sum(1 for e in self.snapshot() if e.kind == kind)

    def dump(self) -> str:
        return "".join(f"{event}\n" for event in self.snapshot())


class RecordingProxy:
    """Transparent TCP relay for one directed component link.

    Each request line (plus a STARTVM body, which is relayed but not
    logged) is recorded as sender->receiver, and the reply as
    receiver->sender with kind OK or ERR.
    """

    def __init__(self, sender: str, receiver: str, trace: Trace,
                 target: tuple[str, int] | None = None):
        self.sender = sender
        self.receiver = receiver
        self.trace = trace
        self.target = target
        proxy = self

        class _Relay(socketserver.StreamRequestHandler):
            def handle(self):
                proxy._relay(self.rfile, self.wfile)

        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = _Server(("127.0.0.1", 0), _Relay)
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            name=f"proxy {sender}->{receiver}:{self.port}", daemon=True,
        )
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        return (self.host, self.port)

    def set_target(self, target: tuple[str, int]):
        self.target = target

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    # --- relay loop -------------------------------------------------------

    def _relay(self, rfile, wfile):
        while True:
            header = rfile.readline(MAX_LINE_BYTES)
            if not header:
                return
            tokens = header.split()
            keyword = tokens[0].decode("latin-1", "replace") if tokens else "?"
            body = b""
            if keyword == "STARTVM" and len(tokens) == 3:
                try:
                    nbytes = int(tokens[2])
                except ValueError:
                    nbytes = -1
                if not 0 <= nbytes <= MAX_IMAGE_BYTES:
                    return
                body = rfile.read(nbytes)
                if len(body) != nbytes:
                    return
            self.trace.record(self.sender, self.receiver, keyword,
                              header.decode("latin-1", "replace").rstrip("\n"))
            reply = self._forward(header + body, keyword)
            if reply is None:
                return
            first = reply.split(b"\n", 1)[0]
            reply_kind = "ERR" if first.split()[:1] == [b"ERR"] else "OK"
            self.trace.record(self.receiver, self.sender, reply_kind,
                              first.decode("latin-1", "replace"))
            wfile.write(reply)
            wfile.flush()

    def _forward(self, data: bytes, keyword: str) -> bytes | None:
        if self.target is None:
            return None
        try:
            with socket.create_connection(self.target, timeout=30) as sock:
                sock.sendall(data)
                with sock.makefile("rb") as upstream:
                    first = upstream.readline(MAX_LINE_BYTES)
                    if not first:
                        return None
                    if (keyword not in _LIST_KEYWORDS
                            or first.split() != [b"OK"]):
                        return first
                    chunks = [first]
                    while True:
                        line = upstream.readline(MAX_LINE_BYTES)
                        if not line:
                            return None
                        chunks.append(line)
                        if line.split() == [b"."]:
                            return b"".join(chunks)
        except OSError:
            return None


# --- cluster -----------------------------------------------------------------


def default_machine_spec(**overrides) -> dict:
    """Keyword arguments for one machine; harness fills address/ports."""
    spec = {
        "cpu_type": "generic-x86",
        "n_cpu": 4,
        "cpu_clock": Quantity(2000, "MHz", FREQUENCY),
        "ram_size": Quantity(4096, "MB", MEMORY),
        "disk_size": Quantity(100000, "MB", MEMORY),
        "net_speed": Quantity(1000, "Mbps", NETSPEED),
        "max_vm_number": -1,
        "mach_username": "root",
        "mach_password": "root",
        "xm_username": "xen",
        "xm_password": "xen",
    }
    spec.update(overrides)
    return spec


def write_service_fixture(store_dir: str, name: str,
                          files: dict[str, bytes] | None = None,
                          config_file: str = "vm.cfg"):
    """Create one service image directory under ``store_dir``."""
    path = os.path.join(store_dir, name)
    os.makedirs(path, exist_ok=True)
    contents = dict(files or {})
    contents.setdefault(config_file, b"memory=256\n")
    contents.setdefault("disk.img", b"\x00" * 4096)
    contents[MANIFEST_NAME] = config_file.encode("utf-8") + b"\n"
    for filename, data in contents.items():
        with open(os.path.join(path, filename), "wb") as handle:
            handle.write(data)
    return path


@dataclass
class _Machine:
    manager: MachineManager
    server: ProtocolServer
    proxy: RecordingProxy  # the RM->MM link


class Cluster:
    """A fully wired loopback cluster with a shared trace.

    Built by :func:`boot_cluster`; use as a context manager so every
    listener is closed on the way out.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        self.information_service: InformationService | None = None
        self.is_server: ProtocolServer | None = None
        self.scheduler: Scheduler | None = None
        self.sc_server: ProtocolServer | None = None
        self.repository: RepositoryManager | None = None
        self.rm_server: ProtocolServer | None = None
        self.machines: list[_Machine] = []
        self._proxies: list[RecordingProxy] = []
        self._client_sc: RecordingProxy | None = None

    @property
    def is_addr(self) -> tuple[str, int]:
        return self.is_server.address

    @property
    def sc_addr(self) -> tuple[str, int]:
        """Scheduler address as seen by a test client (traced as TC->SC)."""
        return self._client_sc.address

    @property
    def service_ids(self) -> list[int]:
        return sorted(self.repository.vmlist)

    def submit(self, s_id: int) -> Reply:
        return call(self.sc_addr, SubmitServ(s_id=s_id))

    def stop(self, vm_id: int) -> Reply:
        return call(self.sc_addr, StopServ(vm_id=vm_id))

    def audit(self):
        self.information_service.db.audit()

    def close(self):
        if self.scheduler is not None:
            self.scheduler.close()
        for server in (self.sc_server, self.rm_server,
                       *(m.server for m in self.machines), self.is_server):
            if server is not None:
                server.close()
        for proxy in self._proxies:
            proxy.close()
        if self.information_service is not None:
            self.information_service.close()

    def __enter__(self) -> "Cluster":
        return self

    def __exit__(self, *exc):
        self.close()


def boot_cluster(work_dir: str, machine_specs: list[dict],
                 services: list[str] | None = None) -> Cluster:
    """Boot IS + N MMs + RM + SC on loopback with recording proxies.

    ``machine_specs`` are :func:`default_machine_spec` dicts;
    ``services`` are service names, each given a small generated image.
    Raises on any registration failure, after closing what was started.
    """
    trace = Trace()
    cluster = Cluster(trace)
    try:
        cluster.information_service = InformationService()
        cluster.is_server = ProtocolServer(cluster.information_service).start()

        mm_is = RecordingProxy("MM", "IS", trace, target=cluster.is_addr)
        rm_is = RecordingProxy("RM", "IS", trace, target=cluster.is_addr)
        sc_is = RecordingProxy("SC", "IS", trace, target=cluster.is_addr)
        cluster._proxies += [mm_is, rm_is, sc_is]

        for index, overrides in enumerate(machine_specs):
            proxy = RecordingProxy("RM", "MM", trace)
            cluster._proxies.append(proxy)
            spec = MachineSpec(address=proxy.host, mm_port=proxy.port,
                               **default_machine_spec(**overrides))
            data_dir = os.path.join(work_dir, f"mm{index}")
            os.makedirs(data_dir, exist_ok=True)
            manager = MachineManager(spec, is_addr=mm_is.address,
                                     data_dir=data_dir)
            server = ProtocolServer(manager).start()
            proxy.set_target(server.address)
            manager.startup_register()
            cluster.machines.append(_Machine(manager, server, proxy))

        store_dir = os.path.join(work_dir, "store")
        os.makedirs(store_dir, exist_ok=True)
        for name in services or ["svc"]:
            write_service_fixture(store_dir, name)
        sc_rm = RecordingProxy("SC", "RM", trace)
        cluster._proxies.append(sc_rm)
        cluster.repository = RepositoryManager(
            store_dir=store_dir, advertise_addr=sc_rm.address,
            is_addr=rm_is.address,
        )
        cluster.rm_server = ProtocolServer(cluster.repository).start()
        sc_rm.set_target(cluster.rm_server.address)
        cluster.repository.register_self_and_services()

        cluster.scheduler = Scheduler(is_addr=sc_is.address)
        cluster.sc_server = ProtocolServer(cluster.scheduler).start()
        cluster._client_sc = RecordingProxy(
            "TC", "SC", trace, target=cluster.sc_server.address
        )
        cluster._proxies.append(cluster._client_sc)
        return cluster
    except BaseException:
        cluster.close()
        raise


# --- conformance ---------------------------------------------------------------

SUBMISSION_ORDER: tuple[tuple[str, str, str], ...] = (
    ("TC", "SC", "SUBMITSERV"),
    ("SC", "IS", "LISTPHYMACHSTATUS"),
    ("SC", "RM", "SUBMITVM"),
    ("RM", "IS", "GETPHYMACH"),
    ("RM", "MM", "STARTVM"),
    ("MM", "IS", "REGVM"),
    ("RM", "IS", "UPDATEVMSTATUS"),
    ("SC", "TC", "OK"),
)

STOP_ORDER: tuple[tuple[str, str, str], ...] = (
    ("TC", "SC", "STOPSERV"),
    ("SC", "RM", "STOPVM"),
    ("RM", "IS", "GETVMMACHMNGR"),
    ("RM", "MM", "STOPVM"),
    ("MM", "IS", "UNREGVM"),
    ("RM", "IS", "UPDATEVMSTATUS"),
    ("SC", "TC", "OK"),
)


class ConformanceError(AssertionError):
    """A required message is missing or out of order; carries a diff."""

    def __init__(self, expected, matched, events):
        self.expected = tuple(expected)
        self.matched = tuple(matched)
        self.missing = tuple(expected[len(matched):])
        self.events = tuple(events)
        lines = ["workflow trace does not conform"]
        lines.append("matched:")
        lines.extend(f"  {s}->{r} {k}" for s, r, k in self.matched)
        lines.append("missing (in order):")
        lines.extend(f"  {s}->{r} {k}" for s, r, k in self.missing)
        lines.append("observed:")
        lines.extend(f"  {event}" for event in self.events)
        super().__init__("\n".join(lines))


def _assert_subsequence(events: list[TraceEvent],
                        expected: tuple[tuple[str, str, str], ...]):
    matched = []
    remaining = list(expected)
    for event in events:
        if remaining and event.edge == remaining[0]:
            matched.append(remaining.pop(0))
    if remaining:
        raise ConformanceError(expected, matched, events)


def assert_submission_conformance(events: list[TraceEvent]):
    """Check one submission's trace slice against the required order."""
    _assert_subsequence(events, SUBMISSION_ORDER)


def assert_stop_conformance(events: list[TraceEvent]):
    """Check one stop's trace slice against the required order."""
    _assert_subsequence(events, STOP_ORDER)
