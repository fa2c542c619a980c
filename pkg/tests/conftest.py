"""Shared fixtures and random-message generators for the test suite."""

from __future__ import annotations

import random
import socket

from taaroa.net import MAX_LINE_BYTES
from taaroa.protocol import (
    Err,
    ExecStatus,
    Ok,
    OkList,
    Quantity,
    SERVER_REQUESTS,
    StartVm,
)
from taaroa.protocol.messages import FieldSpec
from taaroa.protocol.units import UNIT_FAMILIES

_TOKEN_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_."
_TEXT_CHARS = _TOKEN_CHARS + " àéüλЖ中文🙂"

# Every (server, request class) pair in the protocol.
ALL_REQUEST_KINDS: list[tuple[str, type]] = [
    (server, cls)
    for server, table in sorted(SERVER_REQUESTS.items())
    for cls in table.values()
]


def random_value(rng: random.Random, spec: FieldSpec):
    if spec.kind == "int":
        return rng.randint(0, 10**6)
    if spec.kind == "neg1int":
        return rng.choice([-1, rng.randint(0, 10**6)])
    if spec.kind == "real":
        return rng.choice([
            rng.uniform(0.0, 1000.0),
            rng.uniform(0.0, 1.0) * 10.0 ** rng.randint(-20, 20),
            0.0,
        ])
    if spec.kind == "str":
        return "".join(rng.choices(_TOKEN_CHARS, k=rng.randint(1, 24)))
    if spec.kind == "b64":
        return "".join(rng.choices(_TEXT_CHARS, k=rng.randint(1, 24)))
    if spec.kind == "status":
        return rng.choice(list(ExecStatus))
    if spec.kind == "quantity":
        return Quantity(rng.randint(0, 10**6),
                        rng.choice(UNIT_FAMILIES[spec.family]), spec.family)
    raise AssertionError(spec.kind)


def random_request(rng: random.Random, cls: type):
    if cls is StartVm:
        return StartVm(s_id=rng.randint(0, 10**6),
                       image=rng.randbytes(rng.randint(0, 2048)))
    return cls(*(random_value(rng, spec) for spec in cls.FIELDS))


def random_reply(rng: random.Random, cls: type):
    shape = rng.randrange(3)
    if shape == 0:
        return Err(rng.randint(1, 999))
    if cls.ENTRY is not None:
        return OkList(tuple(
            {spec.name: random_value(rng, spec) for spec in cls.ENTRY}
            for _ in range(rng.randint(0, 5))
        ))
    return Ok({spec.name: random_value(rng, spec) for spec in cls.REPLY})


def raw_call(addr: tuple[str, int], data: bytes, list_reply: bool) -> bytes:
    """Send raw bytes on a fresh connection and return the raw reply."""
    with socket.create_connection(addr, timeout=30) as sock:
        sock.sendall(data)
        with sock.makefile("rb") as rfile:
            first = rfile.readline(MAX_LINE_BYTES)
            if not list_reply or first.split() != [b"OK"]:
                return first
            chunks = [first]
            while True:
                line = rfile.readline(MAX_LINE_BYTES)
                if not line:
                    return b"".join(chunks)
                chunks.append(line)
                if line.split() == [b"."]:
                    return b"".join(chunks)
