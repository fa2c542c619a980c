"""Snapshot format for the Information Service database.

One textual record per line.  Free-form strings are base64-encoded so a
record is always a fixed number of blank-separated tokens.

    COUNTERS <next_machine> <next_repository> <next_service> <next_vm>
    PHYMACH  <id> <address> <cpu_type*> <n_cpu> <cpu_clock> <ram_size>
             <disk_size> <net_speed> <max_vm_number> <user*> <password*>
             <vmm_user*> <vmm_password*> <mm_port>
    REPO     <id> <address> <port> <user*> <password*>
    SERV     <id> <repository_id> <name*> <req_disk>
    VM       <id> <service_id> <phy_mach_id> <local_id> <virt_ip>
             <alloc_cpu> <alloc_ram> <alloc_disk> <status> <unregistered>

(* = base64-encoded.)  Quantities keep their unit suffix; reals are
rendered so they reload exactly.
"""

from __future__ import annotations

import base64

from taaroa.protocol import ExecStatus, FREQUENCY, MEMORY, NETSPEED, Quantity
from taaroa.protocol.units import format_real, parse_quantity
from taaroa.registry.database import (
    IsDatabase,
    PhysicalMachineRecord,
    RepositoryRecord,
    ServiceRecord,
    VirtualMachineRecord,
)


def _e(text: str) -> str:
    return base64.b64encode(text.encode("utf-8")).decode("ascii") or "."


def _d(token: str) -> str:
    if token == ".":
        return ""
    return base64.b64decode(token.encode("ascii"), validate=True).decode("utf-8")


def _q(token: str, family: str) -> Quantity:
    # Snapshots always carry the unit suffix, so the default never applies.
    return parse_quantity(token, family, {"frequency": "Hz", "memory": "B",
                                          "netspeed": "bps"}[family])


def save_snapshot(db: IsDatabase, path: str):
    lines = [
        f"COUNTERS {db.next_machine_id} {db.next_repository_id}"
        f" {db.next_service_id} {db.next_vm_id}"
    ]
    for m in sorted(db.machines.values(), key=lambda r: r.id):
        lines.append(
            f"PHYMACH {m.id} {m.address} {_e(m.cpu_type)} {m.n_cpu}"
            f" {m.cpu_clock} {m.ram_size} {m.disk_size} {m.net_speed}"
            f" {m.max_vm_number} {_e(m.user_name)} {_e(m.user_password)}"
            f" {_e(m.vmm_user_name)} {_e(m.vmm_user_password)} {m.mach_mngr_port}"
        )
    for r in sorted(db.repositories.values(), key=lambda r: r.id):
        lines.append(
            f"REPO {r.id} {r.address} {r.port} {_e(r.user_name)} {_e(r.user_passwd)}"
        )
    for s in sorted(db.services.values(), key=lambda r: r.id):
        lines.append(f"SERV {s.id} {s.repository_id} {_e(s.name)} {s.req_disk}")
    for v in sorted(db.vms.values(), key=lambda r: r.id):
        lines.append(
            f"VM {v.id} {v.service_id} {v.phy_mach_id} {v.vm_local_id}"
            f" {v.virt_ip} {format_real(v.allocated_cpu)}"
            f" {format_real(v.allocated_ram)} {format_real(v.allocated_disk)}"
            f" {int(v.status)} {int(v.unregistered)}"
        )
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_snapshot(path: str) -> IsDatabase:
    db = IsDatabase()
    with open(path, encoding="ascii") as handle:
        for raw in handle:
            tokens = raw.split()
            if not tokens:
                continue
            tag, args = tokens[0], tokens[1:]
            if tag == "COUNTERS":
                (db.next_machine_id, db.next_repository_id,
                 db.next_service_id, db.next_vm_id) = map(int, args)
            elif tag == "PHYMACH":
                record = PhysicalMachineRecord(
                    id=int(args[0]),
                    address=args[1],
                    cpu_type=_d(args[2]),
                    n_cpu=int(args[3]),
                    cpu_clock=_q(args[4], FREQUENCY),
                    ram_size=_q(args[5], MEMORY),
                    disk_size=_q(args[6], MEMORY),
                    net_speed=_q(args[7], NETSPEED),
                    max_vm_number=int(args[8]),
                    user_name=_d(args[9]),
                    user_password=_d(args[10]),
                    vmm_user_name=_d(args[11]),
                    vmm_user_password=_d(args[12]),
                    mach_mngr_port=int(args[13]),
                )
                db.machines[record.id] = record
            elif tag == "REPO":
                record = RepositoryRecord(
                    id=int(args[0]), address=args[1], port=int(args[2]),
                    user_name=_d(args[3]), user_passwd=_d(args[4]),
                )
                db.repositories[record.id] = record
            elif tag == "SERV":
                record = ServiceRecord(
                    id=int(args[0]), repository_id=int(args[1]),
                    name=_d(args[2]), req_disk=_q(args[3], MEMORY),
                )
                db.services[record.id] = record
            elif tag == "VM":
                record = VirtualMachineRecord(
                    id=int(args[0]), service_id=int(args[1]),
                    phy_mach_id=int(args[2]), vm_local_id=args[3],
                    virt_ip=args[4], allocated_cpu=float(args[5]),
                    allocated_ram=float(args[6]), allocated_disk=float(args[7]),
                    status=ExecStatus(int(args[8])),
                    unregistered=bool(int(args[9])),
                )
                db.vms[record.id] = record
            else:
                raise ValueError(f"unknown snapshot record {tag!r}")
    return db
