"""Command-line client.

    taaroa --is HOST:PORT --sc HOST:PORT COMMAND [ARGS] [--porcelain]

Commands: list-services, list-machines, submit SID, status VMID,
stop VMID.  Exit status: 0 on an OK reply, 1 on an ERR reply (the code
is printed to stderr), 2 when a server is unreachable.
``--porcelain`` prints exactly one machine-readable line per record.
"""

from __future__ import annotations

import argparse
import os
import sys

from taaroa.config import parse_addr
from taaroa.net import TransportError, call
from taaroa.protocol import (
    Err,
    GetVmStatus,
    ListPhyMachStatus,
    ListServ,
    Ok,
    OkList,
    StopServ,
    SubmitServ,
)
from taaroa.protocol.units import format_real

EXIT_OK = 0
EXIT_ERR = 1
EXIT_UNREACHABLE = 2


def _fail(reply: Err) -> int:
    print(f"ERR {reply.code}", file=sys.stderr)
    return EXIT_ERR


def cmd_list_services(args) -> int:
    try:
        reply = call(args.is_addr, ListServ())
    except TransportError as exc:
        print(f"cannot reach information service: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if isinstance(reply, Err):
        return _fail(reply)
    assert isinstance(reply, OkList)
    if args.porcelain:
        for e in reply.entries:
            print(f"{e['s_id']} {e['name']} {e['rm_id']} "
                  f"{e['rm_ip']}:{e['rm_port']}")
        return EXIT_OK
    if not reply.entries:
        print("no services")
        return EXIT_OK
    print(f"{'ID':>4}  {'NAME':<24} {'RM':>4}  ADDRESS")
    for e in reply.entries:
        print(f"{e['s_id']:>4}  {e['name']:<24} {e['rm_id']:>4}  "
              f"{e['rm_ip']}:{e['rm_port']}")
    return EXIT_OK


def cmd_list_machines(args) -> int:
    try:
        reply = call(args.is_addr, ListPhyMachStatus())
    except TransportError as exc:
        print(f"cannot reach information service: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if isinstance(reply, Err):
        return _fail(reply)
    assert isinstance(reply, OkList)
    if args.porcelain:
        for e in reply.entries:
            print(f"{e['phy_id']} {format_real(e['avail_cpu'])} "
                  f"{format_real(e['avail_ram'])} "
                  f"{format_real(e['avail_disk'])} {e['netspeed']}")
        return EXIT_OK
    if not reply.entries:
        print("no machines")
        return EXIT_OK
    print(f"{'ID':>4}  {'AVAIL_CPU':>10} {'AVAIL_RAM':>10} "
          f"{'AVAIL_DISK':>11}  NETSPEED")
    for e in reply.entries:
        print(f"{e['phy_id']:>4}  {e['avail_cpu']:>10} {e['avail_ram']:>10} "
              f"{e['avail_disk']:>11}  {e['netspeed']}")
    return EXIT_OK


def cmd_submit(args) -> int:
    try:
        reply = call(args.sc_addr, SubmitServ(s_id=args.sid))
    except TransportError as exc:
        print(f"cannot reach scheduler: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if isinstance(reply, Err):
        return _fail(reply)
    assert isinstance(reply, Ok)
    if args.porcelain:
        print(reply["vm_id"])
    else:
        print(f"submitted: vm {reply['vm_id']}")
    return EXIT_OK


def cmd_status(args) -> int:
    try:
        reply = call(args.is_addr, GetVmStatus(vm_id=args.vmid))
    except TransportError as exc:
        print(f"cannot reach information service: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if isinstance(reply, Err):
        return _fail(reply)
    assert isinstance(reply, Ok)
    print(reply["status"].name)
    return EXIT_OK


def cmd_stop(args) -> int:
    try:
        reply = call(args.sc_addr, StopServ(vm_id=args.vmid))
    except TransportError as exc:
        print(f"cannot reach scheduler: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    if isinstance(reply, Err):
        return _fail(reply)
    assert isinstance(reply, Ok)
    if args.porcelain:
        print(reply["vm_id"])
    else:
        print(f"stopped: vm {reply['vm_id']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taaroa", description=__doc__)
    parser.add_argument("--is", dest="is_addr",
                        default=os.environ.get("TAAROA_IS", "127.0.0.1:7070"),
                        help="information service HOST:PORT")
    parser.add_argument("--sc", dest="sc_addr",
                        default=os.environ.get("TAAROA_SC", "127.0.0.1:7072"),
                        help="scheduler HOST:PORT")
    parser.add_argument("--porcelain", action="store_true",
                        help="machine-readable output, one line per record")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list-services").set_defaults(func=cmd_list_services)
    sub.add_parser("list-machines").set_defaults(func=cmd_list_machines)
    p = sub.add_parser("submit")
    p.add_argument("sid", type=int)
    p.set_defaults(func=cmd_submit)
    p = sub.add_parser("status")
    p.add_argument("vmid", type=int)
    p.set_defaults(func=cmd_status)
    p = sub.add_parser("stop")
    p.add_argument("vmid", type=int)
    p.set_defaults(func=cmd_stop)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.is_addr = parse_addr(args.is_addr)
    args.sc_addr = parse_addr(args.sc_addr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
