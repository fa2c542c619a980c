"""TCP plumbing: the request/reply client call and the threaded server.

The protocol is stateless, so a connection may carry any number of
request/reply exchanges; :func:`call` opens a fresh connection per
request, which is what every component does in practice.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from typing import Optional, Protocol as TypingProtocol

from taaroa.protocol import (
    Err,
    ErrorCode,
    MalformedRequest,
    StartVm,
    parse_reply,
    parse_request,
    render_reply,
    render_request,
)
from taaroa.protocol.codec import MAX_IMAGE_BYTES, Reply
from taaroa.protocol.messages import Request
from taaroa.protocol.units import parse_int

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0

# Guards readline() against a peer that never sends a newline.
MAX_LINE_BYTES = 1024 * 1024


class TransportError(Exception):
    """Connection-level failure talking to a peer component."""


class Component(TypingProtocol):
    SERVER_KIND: str

    def handle(self, request: Request) -> Reply: ...


def _read_reply(rfile, request: Request) -> bytes:
    first = rfile.readline(MAX_LINE_BYTES)
    if not first:
        raise TransportError("peer closed the connection before replying")
    if type(request).ENTRY is None:
        return first
    tokens = first.split()
    if tokens != [b"OK"]:
        return first  # "OK .", "ERR n" or garbage; single line either way
    chunks = [first]
    while True:
        line = rfile.readline(MAX_LINE_BYTES)
        if not line:
            raise TransportError("peer closed the connection mid-list")
        chunks.append(line)
        if line.split() == [b"."]:
            return b"".join(chunks)


def call(addr: tuple[str, int], request: Request,
         timeout: float = DEFAULT_TIMEOUT) -> Reply:
    """Send one request and return its parsed reply.

    Raises :class:`TransportError` on connection failures and
    :class:`MalformedReply` when the peer answers gibberish.
    """
    try:
        with socket.create_connection(addr, timeout=timeout) as sock:
            sock.sendall(render_request(request))
            with sock.makefile("rb") as rfile:
                data = _read_reply(rfile, request)
    except OSError as exc:
        raise TransportError(f"{addr[0]}:{addr[1]}: {exc}") from exc
    return parse_reply(data, type(request))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        component: Component = self.server.component  # type: ignore[attr-defined]
        kind = component.SERVER_KIND
        while True:
            line = self.rfile.readline(MAX_LINE_BYTES)
            if not line:
                return
            data = line
            if kind == "MM" and line.split()[:1] == [b"STARTVM"]:
                body = self._read_startvm_body(line)
                if body is None:
                    self.wfile.write(render_reply(Err(ErrorCode.MALFORMED_REQUEST)))
                    return  # cannot resync without a trusted byte count
                data = line + body
            try:
                request = parse_request(data, kind)
            except MalformedRequest as exc:
                self.wfile.write(render_reply(Err(exc.code)))
                continue
            try:
                reply = component.handle(request)
            except Exception:
                log.exception("%s handler failed on %s", kind, type(request).__name__)
                reply = Err(ErrorCode.INTERNAL_ERROR)
            self.wfile.write(render_reply(reply, type(request)))
            self.wfile.flush()

    def _read_startvm_body(self, header: bytes) -> Optional[bytes]:
        tokens = header.split()
        if len(tokens) != 3:
            return None
        try:
            nbytes = parse_int(tokens[2].decode("latin-1"))
        except Exception:
            return None
        if nbytes > MAX_IMAGE_BYTES:
            return None
        body = self.rfile.read(nbytes)
        return body if len(body) == nbytes else None


class ProtocolServer:
    """Threaded TCP server hosting one component on a loopback-style port."""

    def __init__(self, component: Component, host: str = "127.0.0.1", port: int = 0):
        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = _Server((host, port), _Handler)
        self._server.component = component  # type: ignore[attr-defined]
        self.component = component
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            name=f"{component.SERVER_KIND}:{self.port}",
            daemon=True,
        )

    @property
    def address(self) -> tuple[str, int]:
        return (self.host, self.port)

    def start(self) -> "ProtocolServer":
        self._thread.start()
        return self

    def wait(self):
        self._thread.join()

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "ProtocolServer":
        return self.start()

    def __exit__(self, *exc):
        self.close()
