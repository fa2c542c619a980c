"""Line codec: bytes on the wire <-> typed messages.

Framing: one message per line, terminated by a single LF.  Fields are
rendered separated by exactly one space; parsers accept runs of spaces
and tabs.  List replies are a header line ``OK``, one entry per line,
then a line holding only ``.``; the empty list is the single line
``OK .``.  The STARTVM request is the one exception: its header line
carries a byte count and is followed by that many raw octets of body.
"""

from __future__ import annotations

import base64
import binascii
import re
from typing import Any, Optional, Union

from taaroa.protocol.errors import (
    ErrorCode,
    MalformedReply,
    MalformedRequest,
    ProtocolError,
)
from taaroa.protocol.messages import (
    Err,
    FieldSpec,
    Ok,
    OkList,
    Request,
    SERVER_REQUESTS,
    StartVm,
)
from taaroa.protocol.status import ExecStatus, exec_status_of
from taaroa.protocol.units import (
    Quantity,
    format_real,
    parse_int,
    parse_quantity,
    parse_real,
)

Reply = Union[Ok, OkList, Err]

# Upper bound on a STARTVM image body; guards against unbounded allocation
# from a hostile byte count.
MAX_IMAGE_BYTES = 64 * 1024 * 1024

_BLANKS = re.compile(r"[ \t]+")
_TOKEN_RE = re.compile(r"[^ \t\r\n]+\Z")


def _split(line: str) -> list[str]:
    line = line.strip(" \t")
    if not line:
        return []
    return _BLANKS.split(line)


def _parse_value(spec: FieldSpec, token: str) -> Any:
    if spec.kind == "int":
        return parse_int(token)
    if spec.kind == "neg1int":
        return -1 if token == "-1" else parse_int(token)
    if spec.kind == "real":
        return parse_real(token)
    if spec.kind == "str":
        if not _TOKEN_RE.match(token):
            raise ProtocolError(f"{spec.name} contains framing characters")
        return token
    if spec.kind == "b64":
        try:
            raw = base64.b64decode(token.encode("ascii"), validate=True)
        except (binascii.Error, UnicodeEncodeError, ValueError) as exc:
            raise ProtocolError(f"invalid base64 in {spec.name}: {exc}") from None
        if not raw:
            raise ProtocolError(f"{spec.name} must not be empty")
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError(f"{spec.name} is not UTF-8 text") from None
    if spec.kind == "status":
        return exec_status_of(parse_int(token))
    if spec.kind == "quantity":
        return parse_quantity(token, spec.family, spec.default_unit)
    raise AssertionError(f"unhandled field kind {spec.kind!r}")


def _render_value(spec: FieldSpec, value: Any) -> str:
    if spec.kind == "int":
        value = int(value)
        if value < 0:
            raise ValueError(f"{spec.name} must be non-negative, got {value}")
        return str(value)
    if spec.kind == "neg1int":
        value = int(value)
        if value < -1:
            raise ValueError(f"{spec.name} admits -1 or a non-negative value")
        return str(value)
    if spec.kind == "real":
        return format_real(value)
    if spec.kind == "str":
        if not isinstance(value, str) or not _TOKEN_RE.match(value):
            raise ValueError(f"{spec.name} must be a non-blank token, got {value!r}")
        return value
    if spec.kind == "b64":
        if not isinstance(value, str) or not value:
            raise ValueError(f"{spec.name} must be a non-empty string")
        return base64.b64encode(value.encode("utf-8")).decode("ascii")
    if spec.kind == "status":
        return str(int(ExecStatus(value)))
    if spec.kind == "quantity":
        if not isinstance(value, Quantity) or value.family != spec.family:
            raise ValueError(f"{spec.name} must be a {spec.family} quantity")
        return str(value)
    raise AssertionError(f"unhandled field kind {spec.kind!r}")


# --- requests -----------------------------------------------------------

def render_request(msg: Request) -> bytes:
    """Render a well-formed request, inverse of :func:`parse_request`."""
    tokens = [msg.KEYWORD]
    tokens.extend(_render_value(spec, getattr(msg, spec.name)) for spec in msg.FIELDS)
    if isinstance(msg, StartVm):
        tokens.append(str(len(msg.image)))
        return (" ".join(tokens) + "\n").encode("latin-1") + msg.image
    return (" ".join(tokens) + "\n").encode("latin-1")


def parse_request(data: bytes, server: str) -> Request:
    """Parse one framed request for the given server namespace.

    Raises :class:`MalformedRequest` on any byte sequence that is not a
    well-formed request for that server; never anything else.
    """
    table = SERVER_REQUESTS.get(server)
    if table is None:
        raise ValueError(f"unknown server kind {server!r}")
    head, newline, rest = data.partition(b"\n")
    line = head.decode("latin-1")
    if line.endswith("\r"):
        line = line[:-1]
    tokens = _split(line)
    if not tokens:
        raise MalformedRequest("empty request line")
    keyword, args = tokens[0], tokens[1:]
    cls = table.get(keyword)
    if cls is None:
        raise MalformedRequest(
            f"unknown {server} command {keyword!r}", code=ErrorCode.UNKNOWN_COMMAND
        )
    if cls is StartVm:
        if len(args) != 2:
            raise MalformedRequest(f"STARTVM takes 2 header fields, got {len(args)}")
        try:
            s_id = parse_int(args[0])
            nbytes = parse_int(args[1])
        except ProtocolError as exc:
            raise MalformedRequest(str(exc)) from None
        if nbytes > MAX_IMAGE_BYTES:
            raise MalformedRequest(f"image body of {nbytes} bytes exceeds the limit")
        if not newline or len(rest) != nbytes:
            raise MalformedRequest(
                f"STARTVM declares {nbytes} body bytes, got {len(rest)}"
            )
        return StartVm(s_id=s_id, image=rest)
    if rest:
        raise MalformedRequest(f"{keyword} is a single-line message")
    if len(args) != len(cls.FIELDS):
        raise MalformedRequest(
            f"{keyword} takes {len(cls.FIELDS)} fields, got {len(args)}"
        )
    values = []
    for spec, token in zip(cls.FIELDS, args):
        try:
            values.append(_parse_value(spec, token))
        except ProtocolError as exc:
            raise MalformedRequest(f"{keyword} {spec.name}: {exc}") from None
    return cls(*values)


# --- replies -------------------------------------------------------------

def render_reply(reply: Reply, kind: Optional[type[Request]] = None) -> bytes:
    """Render a reply; OK payloads need the request ``kind`` for the schema."""
    if isinstance(reply, Err):
        code = int(reply.code)
        if code <= 0:
            raise ValueError("error codes are positive integers")
        return f"ERR {code}\n".encode("latin-1")
    if kind is None:
        raise ValueError("rendering an OK reply requires the request kind")
    if isinstance(kind, Request):
        kind = type(kind)
    if isinstance(reply, OkList):
        if kind.ENTRY is None:
            raise ValueError(f"{kind.KEYWORD} does not take a list reply")
        if not reply.entries:
            return b"OK .\n"
        lines = ["OK"]
        for entry in reply.entries:
            lines.append(" ".join(_render_value(s, entry[s.name]) for s in kind.ENTRY))
        lines.append(".")
        return ("\n".join(lines) + "\n").encode("latin-1")
    if isinstance(reply, Ok):
        tokens = ["OK"]
        tokens.extend(_render_value(s, reply.values[s.name]) for s in kind.REPLY)
        return (" ".join(tokens) + "\n").encode("latin-1")
    raise TypeError(f"not a reply: {reply!r}")


def parse_reply(data: bytes, kind: Union[type[Request], Request]) -> Reply:
    """Parse a complete framed reply to a request of the given kind."""
    if isinstance(kind, Request):
        kind = type(kind)
    text = data.decode("latin-1")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [line[:-1] if line.endswith("\r") else line for line in lines]
    if not lines:
        raise MalformedReply("empty reply")
    head = _split(lines[0])
    if not head:
        raise MalformedReply("blank reply line")
    if head[0] == "ERR":
        if len(lines) != 1 or len(head) != 2:
            raise MalformedReply(f"malformed ERR reply: {lines[0]!r}")
        try:
            code = parse_int(head[1])
        except ProtocolError as exc:
            raise MalformedReply(str(exc)) from None
        if code == 0:
            raise MalformedReply("error code must be positive")
        return Err(code)
    if head[0] != "OK":
        raise MalformedReply(f"reply must begin with OK or ERR: {lines[0]!r}")
    if kind.ENTRY is not None:
        if head == ["OK", "."]:
            if len(lines) != 1:
                raise MalformedReply("data after the empty-list reply")
            return OkList(())
        if head != ["OK"]:
            raise MalformedReply(f"malformed list header: {lines[0]!r}")
        if not lines[1:] or _split(lines[-1]) != ["."]:
            raise MalformedReply("list reply lacks the terminating dot")
        entries = []
        for line in lines[1:-1]:
            tokens = _split(line)
            if len(tokens) != len(kind.ENTRY):
                raise MalformedReply(
                    f"entry takes {len(kind.ENTRY)} fields, got {len(tokens)}"
                )
            try:
                entries.append(
                    {s.name: _parse_value(s, t) for s, t in zip(kind.ENTRY, tokens)}
                )
            except ProtocolError as exc:
                raise MalformedReply(str(exc)) from None
        return OkList(tuple(entries))
    if len(lines) != 1:
        raise MalformedReply(f"{kind.KEYWORD} takes a single-line reply")
    values = head[1:]
    if len(values) != len(kind.REPLY):
        raise MalformedReply(
            f"OK reply takes {len(kind.REPLY)} fields, got {len(values)}"
        )
    try:
        payload = {s.name: _parse_value(s, t) for s, t in zip(kind.REPLY, values)}
    except ProtocolError as exc:
        raise MalformedReply(str(exc)) from None
    return Ok(payload)
